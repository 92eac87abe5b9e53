//! Rain-characteristics memory.
//!
//! A [`MemoryGenerator`] is fitted to one dataset's rain layers and maps a
//! Gaussian latent vector to a fresh rain layer with the same streak
//! statistics. Replay datasets combine such layers with current clean
//! backgrounds; the [`ReplayCache`] lets later stages top up earlier replay
//! instead of regenerating it.

mod io;
mod replay;
mod reuse;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::{orientation_votes, HogConfig, Image};
use crate::rng;
use crate::synthdata::{rasterize, RainDataset, Streak};

pub use io::{load_cache, read_generator, save_cache, write_generator};
pub use replay::{build_replay_dataset, even_split, replay_sample, ReplayDataset, ReplayPair};
pub use reuse::{
    apply_reuse, reuse_plan, select_generator_training, CachePolicy, ReplayCache, ReusePlan,
};

pub const ANGLE_BINS: usize = 18;
pub const DEFAULT_LATENT_DIM: usize = 8;
/// Rain-layer level above which a pixel belongs to a streak component.
pub const COMPONENT_THRESHOLD: f64 = 0.05;

/// Moment-fitted rain model of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryGenerator {
    pub id: String,
    pub latent_dim: usize,
    /// Streak-normal orientation distribution over `[0, 180)`.
    pub angle_hist: Vec<f64>,
    pub length_mean: f64,
    pub length_std: f64,
    pub width: f64,
    /// Streaks per 1024 pixels.
    pub density: f64,
    pub intensity_mean: f64,
    pub intensity_std: f64,
}

impl MemoryGenerator {
    pub fn angle_bin_width(&self) -> f64 {
        180.0 / self.angle_hist.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.angle_hist.iter().sum();
        if self.angle_hist.len() < 2 || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "angle histogram must have >= 2 bins summing to 1 (sum {sum})"
            )));
        }
        if self.angle_hist.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain("negative angle histogram entry".into()));
        }
        if self.length_std < 0.0 || self.intensity_std < 0.0 {
            return Err(Error::Domain("negative standard deviation".into()));
        }
        if self.density <= 0.0 || !self.density.is_finite() {
            return Err(Error::Domain(format!("density {} <= 0", self.density)));
        }
        if self.latent_dim == 0 {
            return Err(Error::Domain("latent_dim must be positive".into()));
        }
        Ok(())
    }

    /// Draws a standard-normal latent of the right dimension.
    pub fn draw_latent(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        (0..self.latent_dim).map(|_| n.sample(rng)).collect()
    }
}

/// `max(luma(rainy) - luma(clean), 0)` for every pair.
pub fn extract_rain_layers(ds: &RainDataset) -> Vec<Image> {
    ds.pairs
        .iter()
        .map(|p| {
            p.rainy
                .luma()
                .zip_map(&p.clean.luma(), |r, c| (r - c).max(0.0))
                .expect("pair images share a shape")
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Component {
    length: f64,
    width: f64,
    intensity: f64,
}

/// 8-connected components of pixels above [`COMPONENT_THRESHOLD`].
fn components(layer: &Image) -> Vec<Component> {
    let (h, w) = (layer.height(), layer.width());
    let px = layer.data();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if seen[start] || px[start] <= COMPONENT_THRESHOLD {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut n, mut sum, mut peak) = (0.0, 0.0, 0.0f64);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        while let Some(i) = stack.pop() {
            let (y, x) = (i / w, i % w);
            let (fy, fx) = (y as f64, x as f64);
            n += 1.0;
            sum += px[i];
            peak = peak.max(px[i]);
            sx += fx;
            sy += fy;
            sxx += fx * fx;
            syy += fy * fy;
            sxy += fx * fy;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                    if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && px[j] > COMPONENT_THRESHOLD {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if n < 2.0 {
            continue;
        }
        let (mx, my) = (sx / n, sy / n);
        let (vxx, vyy, vxy) = (sxx / n - mx * mx, syy / n - my * my, sxy / n - mx * my);
        // Largest eigenvalue of the pixel-coordinate covariance; a run of
        // k pixels has variance (k^2 - 1) / 12 along its axis.
        let major = (vxx + vyy) / 2.0 + (((vxx - vyy) / 2.0).powi(2) + vxy * vxy).sqrt();
        let run = (12.0 * major + 1.0).sqrt();
        out.push(Component {
            length: (run - 1.0).max(1.0),
            width: sum / (peak * run),
            intensity: peak,
        });
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median and MAD-based standard deviation.
fn robust_moments(mut values: Vec<f64>) -> (f64, f64) {
    let m = median(&mut values);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    (m, 1.4826 * median(&mut dev))
}

/// Fits a generator to the rain layers recovered from `ds`.
///
/// Orientation comes from the aggregate 18-bin gradient histogram of the
/// layers. Streak shape and brightness come from robust statistics of the
/// connected components above [`COMPONENT_THRESHOLD`]; density is derived
/// from total rain mass so merged overlapping streaks are not undercounted.
pub fn fit_generator(ds: &RainDataset) -> Result<MemoryGenerator> {
    fit_generator_with_latent(ds, DEFAULT_LATENT_DIM)
}

pub fn fit_generator_with_latent(ds: &RainDataset, latent_dim: usize) -> Result<MemoryGenerator> {
    if latent_dim == 0 {
        return Err(Error::Domain("latent_dim must be positive".into()));
    }
    let layers = extract_rain_layers(ds);
    let hog_cfg = HogConfig {
        cell_size: 2,
        bins: ANGLE_BINS,
        signed: false,
    };
    let mut votes = vec![0.0; ANGLE_BINS];
    let mut comps = Vec::new();
    let mut mass = 0.0;
    let mut pixels = 0usize;
    for layer in &layers {
        for (acc, v) in votes.iter_mut().zip(orientation_votes(layer, &hog_cfg)?) {
            *acc += v;
        }
        comps.extend(components(layer));
        mass += layer.data().iter().sum::<f64>();
        pixels += layer.len();
    }
    let total_votes: f64 = votes.iter().sum();
    if comps.is_empty() || total_votes <= 0.0 {
        return Err(Error::DegenerateFit(format!(
            "dataset `{}` has no rain above {COMPONENT_THRESHOLD}",
            ds.id()
        )));
    }
    let (length_mean, length_std) = robust_moments(comps.iter().map(|c| c.length).collect());
    let (intensity_mean, intensity_std) =
        robust_moments(comps.iter().map(|c| c.intensity).collect());
    let (width, _) = robust_moments(comps.iter().map(|c| c.width).collect());
    let width = width.max(1.0);
    let per_streak = intensity_mean * width * (length_mean + 1.0);
    let density = (mass / per_streak) / pixels as f64 * 1024.0;
    let generator = MemoryGenerator {
        id: ds.id().to_string(),
        latent_dim,
        angle_hist: votes.into_iter().map(|v| v / total_votes).collect(),
        length_mean,
        length_std,
        width,
        density,
        intensity_mean,
        intensity_std,
    };
    generator.validate()?;
    Ok(generator)
}

/// Seed of the counter-based streak sampler for latent `z`.
fn latent_seed(z: &[f64]) -> u64 {
    z.iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, v| rng::mix(acc ^ v.to_bits()))
}

/// Rain layer for latent `z`: a pure function of `(gen, z, size)`.
pub fn sample_rain(gen: &MemoryGenerator, z: &[f64], size: usize) -> Result<Image> {
    if z.len() != gen.latent_dim {
        return Err(Error::Shape(format!(
            "latent of dimension {} for a generator expecting {}",
            z.len(),
            gen.latent_dim
        )));
    }
    let mut rng = rng::rng(latent_seed(z));
    let count = (gen.density * (size * size) as f64 / 1024.0).round() as usize;
    let lengths = Normal::new(gen.length_mean, gen.length_std).expect("valid moments");
    let intensities = Normal::new(gen.intensity_mean, gen.intensity_std).expect("valid moments");
    let bin_width = gen.angle_bin_width();
    let streaks: Vec<Streak> = (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut bin = gen.angle_hist.len() - 1;
            for (k, p) in gen.angle_hist.iter().enumerate() {
                acc += p;
                if u < acc {
                    bin = k;
                    break;
                }
            }
            Streak {
                angle: (bin as f64 + rng.random::<f64>()) * bin_width,
                length: lengths.sample(&mut rng).clamp(2.0, size as f64),
                intensity: intensities.sample(&mut rng).clamp(0.0, 1.0),
                width: gen.width,
                cx: rng.random_range(0.0..size as f64),
                cy: rng.random_range(0.0..size as f64),
            }
        })
        .collect();
    Ok(rasterize(size, &streaks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::hog;
    use crate::synthdata::{make_dataset, DatasetSpec, RainParams};

    fn dataset(rain: RainParams, seed: u64) -> RainDataset {
        make_dataset(&DatasetSpec::new("d", 6, rain, seed).with_size(32)).unwrap()
    }

    fn ninety() -> RainParams {
        RainParams {
            angle_std: 2.0,
            ..RainParams::light(90.0)
        }
    }

    #[test]
    fn fitted_orientation_peaks_at_ninety() {
        let g = fit_generator(&dataset(ninety(), 1)).unwrap();
        let argmax = (0..ANGLE_BINS)
            .max_by(|a, b| g.angle_hist[*a].total_cmp(&g.angle_hist[*b]))
            .unwrap();
        // 90 degrees is the edge shared by bins 8 and 9.
        let lo = argmax as f64 * g.angle_bin_width();
        assert!((lo..=lo + g.angle_bin_width()).contains(&90.0), "argmax bin {argmax}");
        assert!((g.angle_hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_moments_are_plausible() {
        let p = RainParams::light(30.0);
        let g = fit_generator(&dataset(p, 2)).unwrap();
        assert!((g.intensity_mean - p.intensity_mean).abs() < 0.1, "{g:?}");
        assert!((g.length_mean - p.length_mean).abs() < 4.0, "{g:?}");
        assert!(g.density > p.density * 0.5 && g.density < p.density * 1.6, "{g:?}");
        assert!(g.width >= 1.0 && g.width < 2.0, "{g:?}");
    }

    #[test]
    fn zero_rain_is_degenerate() {
        let dry = RainParams {
            density: 0.0,
            ..RainParams::light(0.0)
        };
        assert!(matches!(
            fit_generator(&dataset(dry, 3)),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = dataset(RainParams::heavy(120.0), 4);
        assert_eq!(fit_generator(&ds).unwrap(), fit_generator(&ds).unwrap());
    }

    #[test]
    fn sampling_is_pure_and_checks_dimension() {
        let g = fit_generator(&dataset(ninety(), 5)).unwrap();
        let mut r = rng::rng(1);
        let z = g.draw_latent(&mut r);
        let a = sample_rain(&g, &z, 32).unwrap();
        assert_eq!(a, sample_rain(&g, &z, 32).unwrap());
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(matches!(
            sample_rain(&g, &z[..3], 32),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sampled_layers_keep_orientation() {
        let g = fit_generator(&dataset(ninety(), 6)).unwrap();
        let cfg = crate::imaging::HogConfig::default();
        let mut r = rng::rng(2);
        let mut acc = [0.0; 9];
        for _ in 0..200 {
            let z = g.draw_latent(&mut r);
            let layer = sample_rain(&g, &z, 32).unwrap();
            let d = hog(&layer, &cfg).unwrap();
            acc.iter_mut().zip(d.values()).for_each(|(a, v)| *a += v);
        }
        let argmax = (0..9).max_by(|a, b| acc[*a].total_cmp(&acc[*b])).unwrap();
        assert_eq!(argmax, cfg.bin_of(90.0));
    }
}
