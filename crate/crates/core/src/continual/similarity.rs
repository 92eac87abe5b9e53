//! HOG/KL similarity between a new dataset and each replay subset, its
//! normalization to `[0, 1]`, and the iteration scaling it drives.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{hog, kl_divergence, HogConfig, HogDescriptor, Image};
use crate::memgen::ReplayDataset;
use crate::synthdata::RainDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    /// `s_i = KL(h_replay_i || h_current)` per generator; `None` when the
    /// generator contributed no replay pairs this stage.
    pub divergences: Vec<Option<f64>>,
    /// Smallest divergence, infinite when there is nothing to compare.
    pub s: f64,
    /// `1 - exp(-s)`.
    pub s_hat: f64,
    /// Generator attaining the minimum.
    pub nearest: Option<usize>,
}

impl SimilarityReport {
    /// Report for a stage without prior generators: maximally dissimilar.
    pub fn bootstrap() -> Self {
        SimilarityReport {
            divergences: Vec::new(),
            s: f64::INFINITY,
            s_hat: 1.0,
            nearest: None,
        }
    }

    pub fn is_bootstrap(&self) -> bool {
        self.nearest.is_none()
    }
}

/// Maps a divergence in `[0, inf]` to `[0, 1]`.
pub fn normalize_similarity(s: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::Domain(format!("divergence {s} is negative or NaN")));
    }
    Ok(1.0 - (-s).exp())
}

/// `max(round(s_hat * iterations), round(floor * iterations))`.
pub fn scaled_iterations(s_hat: f64, iterations: usize, floor: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&s_hat) {
        return Err(Error::Domain(format!("normalized similarity {s_hat} not in [0,1]")));
    }
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::Domain(format!("floor {floor} not in [0,1]")));
    }
    let i = iterations as f64;
    Ok(((s_hat * i).round() as usize).max((floor * i).round() as usize))
}

/// Mean of the per-image descriptors, renormalized.
pub fn dataset_hog<'a>(
    images: impl IntoIterator<Item = &'a Image>,
    cfg: &HogConfig,
) -> Result<HogDescriptor> {
    let images: Vec<&Image> = images.into_iter().collect();
    let descriptors = images
        .par_iter()
        .map(|img| hog(img, cfg))
        .collect::<Result<Vec<_>>>()?;
    HogDescriptor::average(&descriptors)
}

/// Similarity chain from precomputed aggregate descriptors.
pub fn similarity_from_hogs(
    current: &HogDescriptor,
    subsets: &[Option<HogDescriptor>],
) -> Result<SimilarityReport> {
    let divergences = subsets
        .iter()
        .map(|h| h.as_ref().map(|h| kl_divergence(h, current)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in divergences.iter().enumerate() {
        if let Some(d) = *d {
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
    }
    Ok(match best {
        None => SimilarityReport {
            divergences,
            ..SimilarityReport::bootstrap()
        },
        Some((i, s)) => SimilarityReport {
            divergences,
            s,
            s_hat: normalize_similarity(s)?,
            nearest: Some(i),
        },
    })
}

/// Compares the rainy images of `current` with each generator's subset of
/// `replay`. Without replay the result is [`SimilarityReport::bootstrap`].
pub fn similarity(
    current: &RainDataset,
    replay: Option<(&ReplayDataset, usize)>,
    cfg: &HogConfig,
) -> Result<SimilarityReport> {
    let Some((replay, generators)) = replay else {
        return Ok(SimilarityReport::bootstrap());
    };
    let h_current = dataset_hog(current.pairs.iter().map(|p| &p.rainy), cfg)?;
    let subsets = (0..generators)
        .map(|i| {
            let imgs: Vec<&Image> = replay.subset(i).map(|p| &p.rainy).collect();
            if imgs.is_empty() {
                Ok(None)
            } else {
                dataset_hog(imgs, cfg).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    similarity_from_hogs(&h_current, &subsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_similarity(0.0).unwrap(), 0.0);
        assert!((normalize_similarity(2f64.ln()).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(normalize_similarity(f64::INFINITY).unwrap(), 1.0);
        assert!(normalize_similarity(-0.1).is_err());
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scaled_iterations(0.5, 1000, 0.05).unwrap(), 500);
        assert_eq!(scaled_iterations(0.01, 1000, 0.05).unwrap(), 50);
        assert_eq!(scaled_iterations(1.0, 1000, 0.05).unwrap(), 1000);
        assert!(scaled_iterations(1.2, 1000, 0.05).is_err());
        assert!(scaled_iterations(-0.1, 1000, 0.05).is_err());
    }

    #[test]
    fn minimum_and_argmin() {
        let h = |v: Vec<f64>| HogDescriptor::from_weights(v).unwrap();
        let cur = h(vec![0.5, 0.5]);
        let subsets = vec![Some(h(vec![0.9, 0.1])), None, Some(h(vec![0.6, 0.4]))];
        let r = similarity_from_hogs(&cur, &subsets).unwrap();
        assert_eq!(r.nearest, Some(2));
        assert_eq!(r.divergences[1], None);
        let expected = 0.6 * (0.6f64 / 0.5).ln() + 0.4 * (0.4f64 / 0.5).ln();
        assert!((r.s - expected).abs() < 1e-6);
        let empty = similarity_from_hogs(&cur, &[None]).unwrap();
        assert!(empty.is_bootstrap());
        assert_eq!(empty.s_hat, 1.0);
    }

    proptest! {
        #[test]
        fn normalized_is_monotone_and_bounded(a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let (na, nb) = (normalize_similarity(a).unwrap(), normalize_similarity(b).unwrap());
            prop_assert!((0.0..=1.0).contains(&na));
            if a < b {
                prop_assert!(na <= nb);
            }
        }

        #[test]
        fn scaling_respects_budget_and_floor(
            s in 0.0f64..=1.0,
            i in 0usize..100_000,
            floor in 0.0f64..=1.0,
        ) {
            let got = scaled_iterations(s, i, floor).unwrap();
            prop_assert!(got <= i);
            prop_assert!(got as f64 >= floor * i as f64 - 1.0);
        }
    }
}
