//! Reconstruction and distillation losses with their gradients.
//!
//! Every loss is a mean over all samples of the image, and each `*_grad`
//! returns the gradient of `scale * loss` with respect to `pred`.

use crate::error::Result;
use crate::imaging::{laplacian, laplacian_adjoint, Image};

pub const CHARBONNIER_EPS: f64 = 1e-3;

/// Mean of `sqrt((pred - target)^2 + eps^2)`.
pub fn charbonnier(pred: &Image, target: &Image, eps: f64) -> Result<f64> {
    pred.ensure_same_shape(target)?;
    let eps2 = eps * eps;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| ((p - t) * (p - t) + eps2).sqrt())
        .sum();
    Ok(sum / pred.len() as f64)
}

pub fn charbonnier_grad(pred: &Image, target: &Image, eps: f64, scale: f64) -> Result<(f64, Image)> {
    pred.ensure_same_shape(target)?;
    let eps2 = eps * eps;
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred.zip_map(target, |p, t| {
        let d = p - t;
        let r = (d * d + eps2).sqrt();
        sum += r;
        scale * d / (r * n)
    })?;
    Ok((sum / n, grad))
}

/// Charbonnier distance between Laplacian edge maps.
pub fn edge_loss(pred: &Image, target: &Image) -> Result<f64> {
    pred.ensure_same_shape(target)?;
    charbonnier(&laplacian(pred), &laplacian(target), CHARBONNIER_EPS)
}

pub fn edge_grad(pred: &Image, target: &Image, scale: f64) -> Result<(f64, Image)> {
    pred.ensure_same_shape(target)?;
    let (loss, g) = charbonnier_grad(&laplacian(pred), &laplacian(target), CHARBONNIER_EPS, scale)?;
    Ok((loss, laplacian_adjoint(&g)))
}

/// Mean absolute difference between current and previous outputs.
pub fn consistency_loss(current: &Image, previous: &Image) -> Result<f64> {
    current.ensure_same_shape(previous)?;
    let sum: f64 = current
        .data()
        .iter()
        .zip(previous.data())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / current.len() as f64)
}

/// Subgradient with `sign(0) = 0`.
pub fn consistency_grad(current: &Image, previous: &Image, scale: f64) -> Result<(f64, Image)> {
    current.ensure_same_shape(previous)?;
    let n = current.len() as f64;
    let mut sum = 0.0;
    let grad = current.zip_map(previous, |a, b| {
        let d = a - b;
        sum += d.abs();
        if d > 0.0 {
            scale / n
        } else if d < 0.0 {
            -scale / n
        } else {
            0.0
        }
    })?;
    Ok((sum / n, grad))
}
