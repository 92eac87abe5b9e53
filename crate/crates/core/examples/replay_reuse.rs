//! Grows a replay cache over six stages of 100 pairs each and compares the
//! sampler calls with regenerating every stage from scratch.

use clgid::ledger::{harmonic, replay_cost_naive, replay_cost_reuse_closed};
use clgid::memgen::{apply_reuse, fit_generator, reuse_plan, CachePolicy, ReplayCache};
use clgid::synthdata::{make_dataset, DatasetSpec, RainParams};

pub fn run_example() -> clgid::Result<()> {
    let stages = 6;
    let m = 100;
    let angles = [0.0, 30.0, 60.0, 90.0, 120.0, 150.0];
    let datasets = angles
        .iter()
        .enumerate()
        .map(|(i, &a)| make_dataset(&DatasetSpec::new(format!("d{i}"), m, RainParams::light(a), i as u64).with_size(16)))
        .collect::<clgid::Result<Vec<_>>>()?;

    let mut gens = vec![fit_generator(&datasets[0])?];
    let mut cache = ReplayCache::new(CachePolicy::TrimToStage);
    let mut measured = 0;
    println!("stage  required            cached              fresh");
    for n in 2..=stages {
        let current = &datasets[n - 1];
        let plan = reuse_plan(&cache, n, gens.len(), current.len())?;
        let (replay, next, calls) = apply_reuse(cache, &plan, &gens, current, 42)?;
        println!("{n:>5}  {:<18}  {:<18}  {calls}", format!("{:?}", plan.required), format!("{:?}", plan.cached));
        assert_eq!(replay.len(), current.len());
        measured += calls;
        cache = next;
        gens.push(fit_generator(current)?);
    }
    let sizes = vec![m; stages];
    println!("measured {measured}, closed form {}, naive {}", replay_cost_reuse_closed(&sizes), replay_cost_naive(&sizes));
    println!("harmonic estimate M*H_(N-1) = {:.1}", m as f64 * harmonic(stages - 1));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
