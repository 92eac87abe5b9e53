//! Central finite-difference verification of the analytic gradients.
//!
//! A difference quotient straddling a ReLU or L1 kink measures a blend of
//! two one-sided slopes, so parameters whose step would flip any kink sign
//! are skipped and replaced by the next candidate.

use rand::seq::index;

use super::objective::{evaluate, kink_pattern, objective_value, Batch, LossWeights};
use super::{Gradients, RestorerState, PARAM_COUNT};
use crate::error::{Error, Result};
use crate::rng;

/// Magnitude below which both gradients count as zero.
const ZERO_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub skipped: usize,
}

/// `|a - n| / max(|a|, |n|)`, or 0 when both are numerically zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ZERO_FLOOR {
        return 0.0;
    }
    (analytic - numeric).abs() / scale
}

/// `(f(w + h e_i) - f(w - h e_i)) / 2h`.
pub fn finite_difference(
    state: &RestorerState,
    index: usize,
    h: f64,
    f: impl Fn(&RestorerState) -> Result<f64>,
) -> Result<f64> {
    if index >= PARAM_COUNT {
        return Err(Error::Domain(format!("parameter {index} out of range")));
    }
    let mut probe = state.clone();
    probe.params_mut()[index] += h;
    let up = f(&probe)?;
    probe.params_mut()[index] = state.params()[index] - h;
    let down = f(&probe)?;
    Ok((up - down) / (2.0 * h))
}

/// Compares `analytic` against finite differences of `f` at `indices`.
pub fn grad_check_against(
    analytic: &Gradients,
    state: &RestorerState,
    indices: &[usize],
    h: f64,
    f: impl Fn(&RestorerState) -> Result<f64>,
) -> Result<GradCheck> {
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_index: indices.first().copied().unwrap_or(0),
        checked: 0,
        skipped: 0,
    };
    for &i in indices {
        let numeric = finite_difference(state, i, h, &f)?;
        let err = relative_error(analytic.as_slice()[i], numeric);
        if !err.is_finite() {
            return Err(Error::NumericalFault {
                iteration: out.checked,
                message: format!("non-finite gradient comparison at parameter {i}"),
            });
        }
        if err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst_index = i;
        }
        out.checked += 1;
    }
    Ok(out)
}

/// Every parameter index in a seeded random order.
pub fn sample_indices(seed: u64) -> Vec<usize> {
    let mut r = rng::rng(seed);
    index::sample(&mut r, PARAM_COUNT, PARAM_COUNT).into_vec()
}

/// Checks the gradient of the weighted `l_total` at `samples` random
/// parameters with step `h`, skipping parameters whose step crosses a kink.
#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    state: &RestorerState,
    batch: &Batch,
    prev: Option<&RestorerState>,
    lambda: f64,
    weights: LossWeights,
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheck> {
    let (_, analytic) = evaluate(state, batch, prev, lambda, weights)?;
    let base = kink_pattern(state, batch, prev)?;
    let mut chosen = Vec::with_capacity(samples);
    let mut skipped = 0;
    for i in sample_indices(seed) {
        if chosen.len() == samples {
            break;
        }
        let mut probe = state.clone();
        let mut smooth = true;
        for step in [h, -h] {
            probe.params_mut()[i] = state.params()[i] + step;
            smooth &= kink_pattern(&probe, batch, prev)? == base;
        }
        if smooth {
            chosen.push(i);
        } else {
            skipped += 1;
        }
    }
    let mut out = grad_check_against(&analytic, state, &chosen, h, |s| {
        Ok(objective_value(s, batch, prev, lambda, weights)?.l_total)
    })?;
    out.skipped = skipped;
    Ok(out)
}
