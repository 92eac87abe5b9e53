//! Similarity-driven iteration scaling: a repeated rain style earns a short
//! stage, a new style the full budget.

use clgid::continual::{scaled_iterations, similarity, StageConfig};
use clgid::memgen::{build_replay_dataset, fit_generator, select_generator_training};
use clgid::synthdata::{make_dataset, DatasetSpec, RainParams};

pub fn run_example() -> clgid::Result<()> {
    let cfg = StageConfig::default();
    let first = make_dataset(&DatasetSpec::new("heavy30", 20, RainParams::heavy(30.0), 1).with_size(32))?;
    let gens = vec![fit_generator(&first)?];

    let candidates = [
        ("same style", DatasetSpec::new("again", 20, RainParams::heavy(30.0), 2)),
        ("rotated", DatasetSpec::new("heavy90", 20, RainParams::heavy(90.0), 3)),
        ("light, rotated", DatasetSpec::new("light150", 20, RainParams::light(150.0), 4)),
    ];
    println!("{:<15} {:>8} {:>7} {:>10} {:>10}", "next dataset", "S", "S_hat", "iterations", "generator");
    for (label, spec) in candidates {
        let next = make_dataset(&spec.with_size(32))?;
        let replay = build_replay_dataset(&gens, &next, 7)?;
        let r = similarity(&next, Some((&replay, gens.len())), &cfg.hog)?;
        let iters = scaled_iterations(r.s_hat, cfg.iterations, cfg.floor)?;
        let fit = select_generator_training(r.s_hat, cfg.threshold, true)?;
        println!("{label:<15} {:>8.4} {:>7.3} {:>10} {:>10}", r.s, r.s_hat, iters, if fit { "fit" } else { "reuse" });
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
