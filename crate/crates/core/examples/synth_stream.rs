//! Builds a three-style stream plus its hold-out set and writes them as PPM.
//!
//! Run with `cargo run --example synth_stream -- <out_dir>`; without an
//! argument the files go to a temporary directory.

use clgid::synthdata::{export_dataset, export_stream, holdout_spec, make_holdout, make_stream, DatasetSpec, RainParams};

pub fn run_example() -> clgid::Result<()> {
    run(&std::env::temp_dir().join("clgid_synth_stream"))
}

fn run(out: &std::path::Path) -> clgid::Result<()> {
    let specs = vec![
        DatasetSpec::new("heavy30", 6, RainParams::heavy(30.0), 10).with_size(32),
        DatasetSpec::new("light90", 6, RainParams::light(90.0), 11).with_size(32),
        DatasetSpec::new("light150", 6, RainParams::light(150.0), 12).with_size(32),
    ];
    let stream = make_stream(&specs)?;
    let hold = holdout_spec(7, &specs, 4)?;
    println!(
        "hold-out streaks at {:.1} deg (alt {:?}), width {}",
        hold.rain.angle_mean,
        hold.alt_rain.map(|r| r.angle_mean),
        hold.rain.width
    );
    let holdout = make_holdout(7, &specs, 4)?;

    export_stream(&stream, out)?;
    export_dataset(&holdout, out)?;
    for ds in stream.iter().chain(std::iter::once(&holdout)) {
        let coverage = ds.pairs.iter().map(|p| p.rain.mean()).sum::<f64>() / ds.len() as f64;
        println!("{:<9} {} pairs, mean rain level {:.4}", ds.id(), ds.len(), coverage);
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let result = match std::env::args().nth(1) {
        Some(dir) => run(std::path::Path::new(&dir)),
        None => run_example(),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
