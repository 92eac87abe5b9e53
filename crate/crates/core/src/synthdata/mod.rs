//! Procedural de-raining corpora.
//!
//! Clean backgrounds are smooth sinusoidal fields; rain is an additive layer
//! of anti-aliased streaks whose statistics come from [`RainParams`]. Every
//! pair is seeded from `(dataset seed, pair index)` alone, so datasets are
//! order-independent and generate identically in parallel or serially.

mod export;
mod raster;

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::rng::{self, label};

pub use export::{dataset_keys, export_dataset, export_stream, read_spec_file, write_spec_file};
pub use raster::{rasterize, Streak};

pub const DEFAULT_IMAGE_SIZE: usize = 64;
pub const MIN_IMAGE_SIZE: usize = 16;

/// Streak statistics of one rain style.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainParams {
    /// Mean streak normal orientation in degrees, `[0, 180)`.
    pub angle_mean: f64,
    pub angle_std: f64,
    pub length_mean: f64,
    pub length_std: f64,
    pub width: f64,
    /// Streaks per 1024 pixels.
    pub density: f64,
    pub intensity_mean: f64,
    pub intensity_std: f64,
}

impl RainParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.angle_mean,
            self.angle_std,
            self.length_mean,
            self.length_std,
            self.width,
            self.density,
            self.intensity_mean,
            self.intensity_std,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("rain parameters must be finite".into()));
        }
        if !(0.0..180.0).contains(&self.angle_mean) {
            return Err(Error::Config(format!("angle_mean {} not in [0,180)", self.angle_mean)));
        }
        if self.density < 0.0 {
            return Err(Error::Config(format!("density {} < 0", self.density)));
        }
        if self.width < 1.0 {
            return Err(Error::Config(format!("width {} < 1", self.width)));
        }
        if self.angle_std < 0.0 || self.length_std < 0.0 || self.intensity_std < 0.0 {
            return Err(Error::Config("standard deviations must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.intensity_mean) {
            return Err(Error::Config(format!(
                "intensity_mean {} not in [0,1]",
                self.intensity_mean
            )));
        }
        Ok(())
    }

    pub fn streak_count(&self, size: usize) -> usize {
        (self.density * (size * size) as f64 / 1024.0).round() as usize
    }

    /// Light, near-vertical drizzle.
    pub fn light(angle_mean: f64) -> Self {
        RainParams {
            angle_mean,
            angle_std: 4.0,
            length_mean: 10.0,
            length_std: 2.0,
            width: 1.0,
            density: 6.0,
            intensity_mean: 0.35,
            intensity_std: 0.05,
        }
    }

    /// Dense, long, bright streaks.
    pub fn heavy(angle_mean: f64) -> Self {
        RainParams {
            angle_mean,
            angle_std: 4.0,
            length_mean: 18.0,
            length_std: 3.0,
            width: 2.0,
            density: 14.0,
            intensity_mean: 0.6,
            intensity_std: 0.08,
        }
    }

    /// Orientation interval holding nearly all streaks of this style.
    fn angle_box(&self) -> (f64, f64) {
        let half = 2.0 * self.angle_std + 5.0;
        (self.angle_mean - half, self.angle_mean + half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub id: String,
    pub pair_count: usize,
    pub image_size: usize,
    pub rain: RainParams,
    /// When set, odd-indexed pairs use this style instead of `rain`.
    pub alt_rain: Option<RainParams>,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(id: impl Into<String>, pair_count: usize, rain: RainParams, seed: u64) -> Self {
        DatasetSpec {
            id: id.into(),
            pair_count,
            image_size: DEFAULT_IMAGE_SIZE,
            rain,
            alt_rain: None,
            seed,
        }
    }

    pub fn with_size(mut self, image_size: usize) -> Self {
        self.image_size = image_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(|c: char| c.is_whitespace() || c == '/') {
            return Err(Error::Config(format!("invalid dataset id `{}`", self.id)));
        }
        if self.pair_count == 0 {
            return Err(Error::Config(format!("dataset `{}` has no pairs", self.id)));
        }
        if self.image_size < MIN_IMAGE_SIZE {
            return Err(Error::Config(format!(
                "dataset `{}`: image_size {} < {MIN_IMAGE_SIZE}",
                self.id, self.image_size
            )));
        }
        self.rain.validate()?;
        if let Some(alt) = &self.alt_rain {
            alt.validate()?;
        }
        Ok(())
    }

    pub fn rain_for_pair(&self, m: usize) -> &RainParams {
        match &self.alt_rain {
            Some(alt) if m % 2 == 1 => alt,
            _ => &self.rain,
        }
    }
}

/// A rainy/clean pair together with the rain layer that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub rainy: Image,
    pub clean: Image,
    /// 1-channel additive layer; `rainy = clip(clean + rain)`.
    pub rain: Image,
}

impl Pair {
    /// Composes `clip(clean + rain)` with the layer broadcast over channels.
    pub fn compose(clean: Image, rain: Image) -> Result<Self> {
        let spread = rain.broadcast(clean.channels())?;
        let rainy = clean.zip_map(&spread, |c, r| (c + r).clamp(0.0, 1.0))?;
        Ok(Pair { rainy, clean, rain })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RainDataset {
    pub spec: DatasetSpec,
    pub pairs: Vec<Pair>,
}

impl RainDataset {
    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of pairs held out for testing out of `n`: `round(n * fraction)`,
    /// at least one when `n > 1`, and never all of them.
    pub fn test_count(n: usize, fraction: f64) -> usize {
        if n <= 1 {
            return 0;
        }
        ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
    }

    /// Splits into `(train, test)`; the test part is the trailing pairs.
    pub fn split(&self, test_fraction: f64) -> (RainDataset, RainDataset) {
        let cut = self.len() - Self::test_count(self.len(), test_fraction);
        let train = RainDataset {
            spec: DatasetSpec {
                pair_count: cut,
                ..self.spec.clone()
            },
            pairs: self.pairs[..cut].to_vec(),
        };
        let test = RainDataset {
            spec: DatasetSpec {
                pair_count: self.len() - cut,
                ..self.spec.clone()
            },
            pairs: self.pairs[cut..].to_vec(),
        };
        (train, test)
    }
}

/// Datasets in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStream {
    datasets: Vec<RainDataset>,
}

impl DatasetStream {
    pub fn new(datasets: Vec<RainDataset>) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Config("empty dataset stream".into()));
        }
        let mut seen = HashSet::new();
        for d in &datasets {
            if !seen.insert(d.id().to_string()) {
                return Err(Error::Config(format!("duplicate dataset id `{}`", d.id())));
            }
        }
        Ok(DatasetStream { datasets })
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn datasets(&self) -> &[RainDataset] {
        &self.datasets
    }

    pub fn get(&self, i: usize) -> Option<&RainDataset> {
        self.datasets.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RainDataset> {
        self.datasets.iter()
    }

    pub fn specs(&self) -> Vec<DatasetSpec> {
        self.datasets.iter().map(|d| d.spec.clone()).collect()
    }
}

/// Smooth RGB field: four random-phase gratings per channel, rescaled so the
/// image spans exactly `[0.1, 0.9]`.
pub fn gen_background(seed: u64, size: usize) -> Image {
    let mut rng = rng::rng(seed);
    let mut gratings = Vec::with_capacity(12);
    for _ in 0..3 {
        let mut channel = Vec::with_capacity(4);
        for _ in 0..4 {
            let cycles = rng.random_range(0.5..3.0);
            let theta = rng.random_range(0.0..PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..1.0);
            let k = 2.0 * PI * cycles / size as f64;
            channel.push((k * theta.cos(), k * theta.sin(), phase, amp));
        }
        gratings.push(channel);
    }
    let raw = Image::from_fn(size, size, 3, |y, x, c| {
        gratings[c]
            .iter()
            .map(|&(kx, ky, phase, amp)| amp * (kx * x as f64 + ky * y as f64 + phase).sin())
            .sum()
    });
    let (lo, hi) = (raw.min(), raw.max());
    let span = hi - lo;
    if span <= f64::EPSILON {
        return Image::filled(size, size, 3, 0.5);
    }
    raw.map(|v| (0.1 + 0.8 * (v - lo) / span).clamp(0.1, 0.9))
}

fn normal(mean: f64, std: f64) -> Normal<f64> {
    Normal::new(mean, std.max(0.0)).expect("finite, nonnegative std")
}

/// Draws the streaks of one layer from `params`.
pub fn sample_streaks(params: &RainParams, size: usize, rng: &mut impl Rng) -> Vec<Streak> {
    let count = params.streak_count(size);
    let angles = normal(params.angle_mean, params.angle_std);
    let lengths = normal(params.length_mean, params.length_std);
    let intensities = normal(params.intensity_mean, params.intensity_std);
    (0..count)
        .map(|_| Streak {
            angle: angles.sample(rng).rem_euclid(180.0),
            length: lengths.sample(rng).clamp(2.0, size as f64),
            intensity: intensities.sample(rng).clamp(0.0, 1.0),
            width: params.width,
            cx: rng.random_range(0.0..size as f64),
            cy: rng.random_range(0.0..size as f64),
        })
        .collect()
}

pub fn render_rain_layer(params: &RainParams, size: usize, seed: u64) -> Image {
    let mut rng = rng::rng(seed);
    rasterize(size, &sample_streaks(params, size, &mut rng))
}

fn make_pair(spec: &DatasetSpec, m: usize) -> Pair {
    let clean = gen_background(rng::derive2(spec.seed, label::BACKGROUND, m as u64), spec.image_size);
    let rain = render_rain_layer(
        spec.rain_for_pair(m),
        spec.image_size,
        rng::derive2(spec.seed, label::RAIN, m as u64),
    );
    Pair::compose(clean, rain).expect("layer and background share a size")
}

pub fn make_dataset(spec: &DatasetSpec) -> Result<RainDataset> {
    spec.validate()?;
    let pairs = (0..spec.pair_count)
        .into_par_iter()
        .map(|m| make_pair(spec, m))
        .collect();
    Ok(RainDataset {
        spec: spec.clone(),
        pairs,
    })
}

pub fn make_stream(specs: &[DatasetSpec]) -> Result<DatasetStream> {
    if specs.is_empty() {
        return Err(Error::Config("empty dataset stream".into()));
    }
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::Config(format!("duplicate dataset id `{}`", s.id)));
        }
    }
    DatasetStream::new(specs.iter().map(make_dataset).collect::<Result<_>>()?)
}

/// Hold-out spec whose rain lies outside every training style: two
/// orientations placed in the middle of the widest angular gaps left by
/// the training styles, with streaks wider than any training width.
pub fn holdout_spec(seed: u64, training: &[DatasetSpec], pair_count: usize) -> Result<DatasetSpec> {
    if training.is_empty() {
        return Err(Error::Config("hold-out needs at least one training spec".into()));
    }
    let styles: Vec<&RainParams> = training
        .iter()
        .flat_map(|s| std::iter::once(&s.rain).chain(s.alt_rain.as_ref()))
        .collect();
    let angles = gap_midpoints(&styles.iter().map(|p| p.angle_box()).collect::<Vec<_>>());
    let n = styles.len() as f64;
    let max_width = styles.iter().map(|p| p.width).fold(1.0, f64::max);
    let template = RainParams {
        angle_mean: angles[0],
        angle_std: 2.0,
        length_mean: styles.iter().map(|p| p.length_mean).sum::<f64>() / n,
        length_std: 2.0,
        width: max_width + 1.0,
        density: styles.iter().map(|p| p.density).sum::<f64>() / n,
        intensity_mean: styles.iter().map(|p| p.intensity_mean).sum::<f64>() / n,
        intensity_std: 0.05,
    };
    let alt = angles.get(1).map(|&a| RainParams {
        angle_mean: a,
        ..template
    });

    let used: HashSet<u64> = training.iter().map(|s| s.seed).collect();
    let mut holdout_seed = rng::derive(seed, label::HOLDOUT);
    while used.contains(&holdout_seed) {
        holdout_seed = rng::mix(holdout_seed);
    }
    let image_size = training[0].image_size;
    Ok(DatasetSpec {
        id: "holdout".into(),
        pair_count,
        image_size,
        rain: template,
        alt_rain: alt,
        seed: holdout_seed,
    })
}

pub fn make_holdout(seed: u64, training: &[DatasetSpec], pair_count: usize) -> Result<RainDataset> {
    make_dataset(&holdout_spec(seed, training, pair_count)?)
}

/// Midpoints of the (up to two) widest gaps between orientation intervals
/// on the 180-degree circle, widest first.
fn gap_midpoints(boxes: &[(f64, f64)]) -> Vec<f64> {
    // Mark covered whole degrees, then walk the free runs.
    let mut covered = [false; 180];
    for &(lo, hi) in boxes {
        let mut a = lo.floor() as i64;
        while (a as f64) <= hi.ceil() {
            covered[a.rem_euclid(180) as usize] = true;
            a += 1;
        }
    }
    let Some(start) = covered.iter().position(|c| *c) else {
        return vec![90.0];
    };
    let mut gaps: Vec<(usize, f64)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for k in 1..=180 {
        let idx = (start + k) % 180;
        match (covered[idx], run_start) {
            (false, None) => run_start = Some(k),
            (true, Some(s)) => {
                let len = k - s;
                let mid = (start + s) as f64 + (len as f64 - 1.0) / 2.0;
                gaps.push((len, mid.rem_euclid(180.0)));
                run_start = None;
            }
            _ => {}
        }
    }
    if gaps.is_empty() {
        return vec![(boxes[0].0 + 90.0).rem_euclid(180.0)];
    }
    gaps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
    gaps.iter().take(2).map(|g| g.1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{hog, HogConfig};

    fn spec(id: &str, rain: RainParams, seed: u64) -> DatasetSpec {
        DatasetSpec::new(id, 3, rain, seed).with_size(32)
    }

    #[test]
    fn background_is_deterministic_and_bounded() {
        let a = gen_background(5, 32);
        assert_eq!(a, gen_background(5, 32));
        assert!(a.min() >= 0.1 - 1e-12 && a.max() <= 0.9 + 1e-12);
    }

    #[test]
    fn backgrounds_differ_across_seeds() {
        for s in 0..100u64 {
            let a = gen_background(rng::derive(1, s), 16);
            let b = gen_background(rng::derive(2, s), 16);
            let mad = a.zip_map(&b, |x, y| (x - y).abs()).unwrap().mean();
            assert!(mad > 0.01, "seed {s}: {mad}");
        }
    }

    #[test]
    fn zero_density_gives_empty_layer() {
        let p = RainParams {
            density: 0.0,
            ..RainParams::light(30.0)
        };
        assert!(render_rain_layer(&p, 32, 1).data().iter().all(|v| *v == 0.0));
        let ds = make_dataset(&spec("dry", p, 9)).unwrap();
        assert!(ds.pairs.iter().all(|pair| pair.rainy == pair.clean));
    }

    #[test]
    fn rain_layer_orientation_follows_angle() {
        let p = RainParams {
            angle_std: 0.0,
            ..RainParams::heavy(90.0)
        };
        let cfg = HogConfig::default();
        let layer = render_rain_layer(&p, 64, 3);
        assert_eq!(layer, render_rain_layer(&p, 64, 3));
        assert!(layer.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(hog(&layer, &cfg).unwrap().argmax(), cfg.bin_of(90.0));
    }

    #[test]
    fn rainy_dominates_clean() {
        let ds = make_dataset(&spec("a", RainParams::heavy(45.0), 4)).unwrap();
        for pair in &ds.pairs {
            for (r, c) in pair.rainy.data().iter().zip(pair.clean.data()) {
                assert!(r - c >= -1e-6);
            }
            let rebuilt = Pair::compose(pair.clean.clone(), pair.rain.clone()).unwrap();
            assert_eq!(rebuilt.rainy, pair.rainy);
        }
    }

    #[test]
    fn single_pair_dataset() {
        let mut s = spec("one", RainParams::light(10.0), 2);
        s.pair_count = 1;
        let ds = make_dataset(&s).unwrap();
        assert_eq!(ds.len(), 1);
        let (train, test) = ds.split(0.2);
        assert_eq!((train.len(), test.len()), (1, 0));
    }

    #[test]
    fn split_holds_out_a_fifth() {
        assert_eq!(RainDataset::test_count(10, 0.2), 2);
        assert_eq!(RainDataset::test_count(2, 0.2), 1);
        assert_eq!(RainDataset::test_count(40, 0.2), 8);
    }

    #[test]
    fn stream_errors() {
        assert!(matches!(make_stream(&[]), Err(Error::Config(_))));
        let a = spec("a", RainParams::light(0.0), 1);
        assert!(matches!(make_stream(&[a.clone(), a]), Err(Error::Config(_))));
    }

    #[test]
    fn stream_preserves_order() {
        let specs: Vec<_> = ["w", "x", "y", "z"]
            .iter()
            .enumerate()
            .map(|(i, id)| spec(id, RainParams::light(i as f64 * 40.0), i as u64))
            .collect();
        let stream = make_stream(&specs).unwrap();
        assert_eq!(stream.len(), 4);
        let ids: Vec<_> = stream.iter().map(|d| d.id().to_string()).collect();
        assert_eq!(ids, ["w", "x", "y", "z"]);
    }

    #[test]
    fn holdout_angles_avoid_training_boxes() {
        let specs = vec![
            spec("a", RainParams::light(30.0), 1),
            spec("b", RainParams::light(90.0), 2),
            spec("c", RainParams::light(150.0), 3),
        ];
        let h = holdout_spec(7, &specs, 4).unwrap();
        let angles = [h.rain.angle_mean, h.alt_rain.unwrap().angle_mean];
        for a in angles {
            for s in &specs {
                let (lo, hi) = s.rain.angle_box();
                let d = (a - s.rain.angle_mean).rem_euclid(180.0);
                let d = d.min(180.0 - d);
                assert!(d > (hi - lo) / 2.0, "{a} inside box of {}", s.id);
            }
        }
        assert!(specs.iter().all(|s| s.seed != h.seed));
        assert!(h.rain.width > 1.0);
    }

    #[test]
    fn gap_midpoints_single_box() {
        let mids = gap_midpoints(&[(80.0, 100.0)]);
        assert_eq!(mids.len(), 1);
        assert!((mids[0] - 0.0).abs() < 1.0 || (mids[0] - 180.0).abs() < 1.0);
    }
}
