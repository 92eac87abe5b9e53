//! CLGID against sequential fine-tuning on a three-style stream.
//!
//! `cargo run --release --example continual_stream` runs a short stream;
//! pass `full` for the larger setting used by the acceptance test.

use clgid::continual::{baseline_sf, run_stream, write_reports, StageConfig, StreamReport};
use clgid::synthdata::{make_holdout, make_stream, DatasetSpec, RainParams};

fn show(r: &StreamReport) {
    println!("{}:", r.method.name());
    for (k, row) in r.memory.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|e| format!("{:6.2}", e.quality.psnr)).collect();
        let hold = r.holdout.get(k).map_or(String::new(), |q| format!("  hold-out {:6.2}", q.psnr));
        println!("  after stage {}: [{}]{hold}", k + 1, cells.join(" "));
    }
}

pub fn run_example() -> clgid::Result<()> {
    run(false)
}

fn run(full: bool) -> clgid::Result<()> {
    let (size, pairs, iterations) = if full { (24, 20, 500) } else { (16, 10, 120) };
    let specs = vec![
        DatasetSpec::new("heavy30", pairs, RainParams::heavy(30.0), 10).with_size(size),
        DatasetSpec::new("light90", pairs, RainParams::light(90.0), 11).with_size(size),
        DatasetSpec::new("light150", pairs, RainParams::light(150.0), 12).with_size(size),
    ];
    let stream = make_stream(&specs)?;
    let holdout = make_holdout(0, &specs, pairs)?;
    let cfg = StageConfig { iterations, ..StageConfig::default() };

    let clgid = run_stream(&stream, Some(&holdout), &cfg)?;
    let sf = baseline_sf(&stream, Some(&holdout), &cfg)?;
    show(&clgid);
    show(&sf);
    for r in [&clgid, &sf] {
        println!(
            "{:<6} final average memory {:6.2} dB, dataset-1 change {:+.2} dB",
            r.method.name(),
            r.final_average_memory_psnr().unwrap_or(f64::NAN),
            r.memory_psnr(2, 0).unwrap_or(f64::NAN) - r.memory_psnr(0, 0).unwrap_or(f64::NAN)
        );
    }
    let out = std::env::temp_dir().join("clgid_continual_stream");
    write_reports(&clgid, &out)?;
    println!("reports in {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let full = std::env::args().nth(1).as_deref() == Some("full");
    if let Err(e) = run(full) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
