//! Every example runs to completion.

#[path = "../examples/metrics.rs"]
mod metrics;

#[path = "../examples/synth_stream.rs"]
mod synth_stream;

#[path = "../examples/memory_generator.rs"]
mod memory_generator;

#[path = "../examples/replay_reuse.rs"]
mod replay_reuse;

#[path = "../examples/gradient_check.rs"]
mod gradient_check;

#[path = "../examples/similarity_speedup.rs"]
mod similarity_speedup;

#[path = "../examples/continual_stream.rs"]
mod continual_stream;

#[path = "../examples/cost_model.rs"]
mod cost_model;

macro_rules! runs {
    ($($name:ident),*) => {
        $(
            #[test]
            fn $name() {
                $name::run_example().unwrap();
            }
        )*
    };
}

runs!(metrics, synth_stream, memory_generator, replay_reuse, gradient_check, similarity_speedup, continual_stream, cost_model);
