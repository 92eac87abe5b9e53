//! Verifies the restorer's analytic gradients against central finite
//! differences, term by term, then shows the check catching a corrupted
//! gradient.

use clgid::restorer::{evaluate, grad_check, grad_check_against, objective_value, sample_indices, Batch, LossWeights, RestorerState, Sample};
use clgid::synthdata::{make_dataset, DatasetSpec, RainParams};

pub fn run_example() -> clgid::Result<()> {
    let ds = make_dataset(&DatasetSpec::new("g", 4, RainParams::heavy(60.0), 8).with_size(16))?;
    let sample = |i: usize| Sample { input: ds.pairs[i].rainy.clone(), target: ds.pairs[i].clean.clone() };
    let batch = Batch { new: vec![sample(0), sample(1)], replay: vec![sample(2), sample(3)] };
    let state = RestorerState::init(1);
    let prev = RestorerState::init(2);

    let terms = [
        ("new charbonnier", LossWeights::only_new_char()),
        ("new edge", LossWeights::only_new_edge()),
        ("replay charbonnier", LossWeights::only_replay_char()),
        ("replay edge", LossWeights::only_replay_edge()),
        ("consistency", LossWeights::only_consist()),
        ("total", LossWeights::default()),
    ];
    for (name, w) in terms {
        let r = grad_check(&state, &batch, Some(&prev), 1.0, w, 100, 1e-6, 3)?;
        println!("{name:<19} max rel error {:.2e} ({} checked, {} skipped at kinks)", r.max_rel_error, r.checked, r.skipped);
    }

    let w = LossWeights::default();
    let (_, mut grads) = evaluate(&state, &batch, Some(&prev), 1.0, w)?;
    // Corrupt the largest gradient entry among a few sampled parameters.
    let idx = sample_indices(0)
        .into_iter()
        .take(20)
        .max_by(|&a, &b| grads.as_slice()[a].abs().total_cmp(&grads.as_slice()[b].abs()))
        .unwrap_or(0);
    grads.as_mut_slice()[idx] *= 2.0;
    let f = |s: &RestorerState| Ok(objective_value(s, &batch, Some(&prev), 1.0, w)?.l_total);
    let r = grad_check_against(&grads, &state, &[idx], 1e-6, f)?;
    println!("doubled gradient at parameter {idx}: rel error {:.3}", r.max_rel_error);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
