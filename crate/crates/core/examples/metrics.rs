//! Image quality and orientation statistics on a synthetic rainy pair.
//!
//! Run with `cargo run --example metrics`.

use clgid::imaging::{hog, kl_divergence, laplacian, psnr, ssim, HogConfig};
use clgid::synthdata::{make_dataset, DatasetSpec, RainParams};

pub fn run_example() -> clgid::Result<()> {
    let heavy = make_dataset(&DatasetSpec::new("heavy", 2, RainParams::heavy(30.0), 1).with_size(32))?;
    let light = make_dataset(&DatasetSpec::new("light", 2, RainParams::light(120.0), 2).with_size(32))?;
    let cfg = HogConfig::default();

    for ds in [&heavy, &light] {
        let p = &ds.pairs[0];
        println!(
            "{:<6} rainy vs clean: psnr {:6.2} dB  ssim {:.4}",
            ds.id(),
            psnr(&p.rainy, &p.clean)?,
            ssim(&p.rainy, &p.clean)?
        );
    }

    let edges = laplacian(&heavy.pairs[0].rain);
    println!("laplacian of the heavy rain layer spans [{:.3}, {:.3}]", edges.min(), edges.max());

    let h_heavy = hog(&heavy.pairs[0].rainy, &cfg)?;
    let h_heavy2 = hog(&heavy.pairs[1].rainy, &cfg)?;
    let h_light = hog(&light.pairs[0].rainy, &cfg)?;
    println!("KL(heavy' || heavy) = {:.4}", kl_divergence(&h_heavy2, &h_heavy)?);
    println!("KL(light  || heavy) = {:.4}", kl_divergence(&h_light, &h_heavy)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
