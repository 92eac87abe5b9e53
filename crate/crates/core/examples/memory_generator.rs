//! Fits a rain memory generator to one dataset, samples fresh rain from it
//! and pastes that rain onto another dataset's backgrounds.

use clgid::imaging::{hog, kl_divergence, HogConfig, HogDescriptor};
use clgid::memgen::{build_replay_dataset, fit_generator, read_generator, sample_rain, write_generator};
use clgid::synthdata::{make_dataset, DatasetSpec, RainParams};
use rand::SeedableRng;

pub fn run_example() -> clgid::Result<()> {
    let source = make_dataset(&DatasetSpec::new("heavy45", 12, RainParams::heavy(45.0), 3).with_size(32))?;
    let gen = fit_generator(&source)?;
    println!(
        "fitted: length {:.1}+-{:.1}, width {:.2}, density {:.2}, intensity {:.2}+-{:.2}",
        gen.length_mean, gen.length_std, gen.width, gen.density, gen.intensity_mean, gen.intensity_std
    );

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let z = gen.draw_latent(&mut rng);
    let layer = sample_rain(&gen, &z, 32)?;
    println!("one sampled layer covers {:.1}% of pixels", 100.0 * layer.data().iter().filter(|v| **v > 0.05).count() as f64 / layer.len() as f64);

    let current = make_dataset(&DatasetSpec::new("current", 8, RainParams::light(120.0), 4).with_size(32))?;
    let replay = build_replay_dataset(std::slice::from_ref(&gen), &current, 5)?;
    let cfg = HogConfig::default();
    let avg = |imgs: Vec<&clgid::Image>| -> clgid::Result<HogDescriptor> {
        HogDescriptor::average(&imgs.into_iter().map(|i| hog(i, &cfg)).collect::<clgid::Result<Vec<_>>>()?)
    };
    let h_source = avg(source.pairs.iter().map(|p| &p.rainy).collect())?;
    let h_replay = avg(replay.rainy_images())?;
    let h_current = avg(current.pairs.iter().map(|p| &p.rainy).collect())?;
    println!("KL(replay || source)  = {:.4}", kl_divergence(&h_replay, &h_source)?);
    println!("KL(replay || current) = {:.4}", kl_divergence(&h_replay, &h_current)?);

    let path = std::env::temp_dir().join("clgid_generator.txt");
    write_generator(&gen, &path)?;
    assert_eq!(read_generator(&path)?, gen);
    println!("generator saved to {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
