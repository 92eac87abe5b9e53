//! Global histogram of oriented gradients and histogram divergence.
//!
//! Orientations are gradient directions measured from the +x axis with
//! y pointing down the image, so an intensity ramp that brightens
//! downward votes at 90 degrees and a vertical line votes at 0 degrees.

use super::Image;
use crate::error::{Error, Result};

/// Additive smoothing applied to both histograms before the KL sum.
pub const KL_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogConfig {
    pub cell_size: usize,
    pub bins: usize,
    /// Signed orientations span `[0, 360)`, unsigned `[0, 180)`.
    pub signed: bool,
}

impl Default for HogConfig {
    fn default() -> Self {
        HogConfig {
            cell_size: 8,
            bins: 9,
            signed: false,
        }
    }
}

impl HogConfig {
    pub fn with_bins(bins: usize) -> Self {
        HogConfig {
            bins,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size < 2 {
            return Err(Error::Domain(format!("cell_size {} < 2", self.cell_size)));
        }
        if self.bins < 2 {
            return Err(Error::Domain(format!("bins {} < 2", self.bins)));
        }
        Ok(())
    }

    pub fn range_degrees(&self) -> f64 {
        if self.signed {
            360.0
        } else {
            180.0
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.range_degrees() / self.bins as f64
    }

    /// Index of the bin whose interval `[k*w, (k+1)*w)` contains `degrees`.
    pub fn bin_of(&self, degrees: f64) -> usize {
        let d = degrees.rem_euclid(self.range_degrees());
        ((d / self.bin_width()) as usize).min(self.bins - 1)
    }
}

/// Probability vector over orientation bins.
#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    values: Vec<f64>,
    degenerate: bool,
}

impl HogDescriptor {
    /// Normalizes nonnegative weights; an all-zero input becomes uniform
    /// and is flagged degenerate.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Domain(format!("{} bins < 2", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("histogram weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            let n = weights.len();
            return Ok(HogDescriptor {
                values: vec![1.0 / n as f64; n],
                degenerate: true,
            });
        }
        Ok(HogDescriptor {
            values: weights.into_iter().map(|w| w / total).collect(),
            degenerate: false,
        })
    }

    /// Bin-wise mean of several descriptors, renormalized.
    pub fn average<'a>(descriptors: impl IntoIterator<Item = &'a HogDescriptor>) -> Result<Self> {
        let mut acc: Option<Vec<f64>> = None;
        for d in descriptors {
            match acc.as_mut() {
                None => acc = Some(d.values.clone()),
                Some(a) => {
                    if a.len() != d.values.len() {
                        return Err(Error::Shape(format!(
                            "{} vs {} bins",
                            a.len(),
                            d.values.len()
                        )));
                    }
                    a.iter_mut().zip(&d.values).for_each(|(x, y)| *x += y);
                }
            }
        }
        let acc = acc.ok_or_else(|| Error::Precondition("no descriptors to average".into()))?;
        Self::from_weights(acc)
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Unnormalized magnitude-weighted orientation votes over all whole cells.
pub fn orientation_votes(img: &Image, cfg: &HogConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let luma = img.luma();
    let (h, w) = (luma.height(), luma.width());
    let (cells_y, cells_x) = (h / cfg.cell_size, w / cfg.cell_size);
    if cells_y == 0 || cells_x == 0 {
        return Err(Error::Precondition(format!(
            "{h}x{w} image holds no {0}x{0} cell",
            cfg.cell_size
        )));
    }
    let px = luma.data();
    let at = |y: usize, x: usize| px[y * w + x];
    let range = cfg.range_degrees();
    let bin_width = cfg.bin_width();
    let mut votes = vec![0.0; cfg.bins];
    for y in 0..cells_y * cfg.cell_size {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..cells_x * cfg.cell_size {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = (at(y, right) - at(y, left)) / 2.0;
            let gy = (at(down, x) - at(up, x)) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(range);
            // Bin centres sit at (k + 1/2) * bin_width; split between the
            // two nearest, wrapping around the circle.
            let pos = angle / bin_width - 0.5;
            let lower = pos.floor();
            let frac = pos - lower;
            let lo = (lower as i64).rem_euclid(cfg.bins as i64) as usize;
            let hi = (lo + 1) % cfg.bins;
            votes[lo] += mag * (1.0 - frac);
            votes[hi] += mag * frac;
        }
    }
    Ok(votes)
}

/// Global normalized HOG descriptor of `img`. Color images are reduced to
/// BT.601 luminance first.
pub fn hog(img: &Image, cfg: &HogConfig) -> Result<HogDescriptor> {
    HogDescriptor::from_weights(orientation_votes(img, cfg)?)
}

/// `KL(p || q)` after adding [`KL_EPSILON`] to every bin of both and
/// renormalizing.
pub fn kl_divergence(p: &HogDescriptor, q: &HogDescriptor) -> Result<f64> {
    kl_divergence_slices(p.values(), q.values())
}

pub fn kl_divergence_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("{} vs {} bins", p.len(), q.len())));
    }
    let zp: f64 = p.iter().map(|v| v + KL_EPSILON).sum();
    let zq: f64 = q.iter().map(|v| v + KL_EPSILON).sum();
    let kl: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let ps = (a + KL_EPSILON) / zp;
            let qs = (b + KL_EPSILON) / zq;
            ps * (ps / qs).ln()
        })
        .sum();
    // Rounding can leave tiny negatives for identical inputs.
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_distribution(bins: usize, rng: &mut impl Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..bins).map(|_| rng.random::<f64>()).collect();
        let t: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / t).collect()
    }

    #[test]
    fn constant_image_is_degenerate_uniform() {
        let d = hog(&Image::filled(32, 32, 3, 0.4), &HogConfig::default()).unwrap();
        assert!(d.is_degenerate());
        assert!(d.values().iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn vertical_ramp_votes_at_ninety() {
        let img = Image::from_fn(32, 32, 1, |y, _, _| y as f64 / 31.0);
        let cfg = HogConfig::default();
        let d = hog(&img, &cfg).unwrap();
        assert!(d.values()[cfg.bin_of(90.0)] >= 0.99);
        assert!((d.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn horizontal_ramp_votes_at_zero_bin_edge() {
        // 0 degrees sits between the first and last bin centres.
        let img = Image::from_fn(32, 32, 1, |_, x, _| x as f64 / 31.0);
        let d = hog(&img, &HogConfig::default()).unwrap();
        assert!((d.values()[0] - 0.5).abs() < 1e-9);
        assert!((d.values()[8] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn needs_one_whole_cell() {
        let img = Image::zeros(7, 32, 1);
        assert!(matches!(
            hog(&img, &HogConfig::default()),
            Err(Error::Precondition(_))
        ));
        let bad = HogConfig {
            bins: 1,
            ..HogConfig::default()
        };
        assert!(hog(&Image::zeros(8, 8, 1), &bad).is_err());
    }

    #[test]
    fn kl_identical_is_zero() {
        let mut rng = crate::rng::rng(7);
        let p = HogDescriptor::from_weights(random_distribution(9, &mut rng)).unwrap();
        assert!(kl_divergence(&p, &p).unwrap() <= 1e-9);
    }

    #[test]
    fn kl_closed_form() {
        let p = HogDescriptor::from_weights(vec![1.0, 0.0]).unwrap();
        let q = HogDescriptor::from_weights(vec![0.5, 0.5]).unwrap();
        assert!((kl_divergence(&p, &q).unwrap() - std::f64::consts::LN_2).abs() < 1e-5);
    }

    #[test]
    fn kl_matches_scalar_loop() {
        let mut rng = crate::rng::rng(8);
        let p = random_distribution(9, &mut rng);
        let q = random_distribution(9, &mut rng);
        let mut ps = [0.0; 9];
        let mut qs = [0.0; 9];
        let (mut zp, mut zq) = (0.0, 0.0);
        for i in 0..9 {
            ps[i] = p[i] + 1e-8;
            qs[i] = q[i] + 1e-8;
            zp += ps[i];
            zq += qs[i];
        }
        let mut expected = 0.0;
        for i in 0..9 {
            expected += ps[i] / zp * ((ps[i] / zp) / (qs[i] / zq)).ln();
        }
        let got = kl_divergence_slices(&p, &q).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_bin_mismatch() {
        let p = HogDescriptor::from_weights(vec![1.0, 1.0]).unwrap();
        let q = HogDescriptor::from_weights(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(kl_divergence(&p, &q), Err(Error::Shape(_))));
    }

    #[test]
    fn average_renormalizes() {
        let a = HogDescriptor::from_weights(vec![1.0, 0.0]).unwrap();
        let b = HogDescriptor::from_weights(vec![0.0, 1.0]).unwrap();
        let m = HogDescriptor::average([&a, &b]).unwrap();
        assert_eq!(m.values(), &[0.5, 0.5]);
    }
}
