//! Full-reference quality metrics on `[0, 1]` images.

use super::Image;
use crate::error::{Error, Result};

/// PSNR reported for (near-)identical images instead of infinity.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let n = a.len().max(1) as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB with a peak of 1.0, averaged over all
/// channels. Capped at [`PSNR_CAP`] when the MSE drops below 1e-10.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let e = mse(a, b)?;
    if e < 1e-10 {
        Ok(PSNR_CAP)
    } else {
        Ok(-10.0 * e.log10())
    }
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Mean structural similarity over every valid 11x11 window, computed per
/// channel and then averaged across channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Window {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let total: f64 = (0..a.channels())
        .map(|c| ssim_plane(&a.channel(c), &b.channel(c), &taps))
        .sum();
    Ok(total / a.channels() as f64)
}

fn ssim_plane(a: &Image, b: &Image, taps: &[f64]) -> f64 {
    let (h, w) = (a.height(), a.width());
    let pa = a.data();
    let pb = b.data();
    let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(pa, h, w, taps);
    let mu_b = filter_valid(pb, h, w, taps);
    let e_aa = filter_valid(&aa, h, w, taps);
    let e_bb = filter_valid(&bb, h, w, taps);
    let e_ab = filter_valid(&ab, h, w, taps);

    let n = mu_a.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
    }
    sum / n as f64
}

/// Separable correlation keeping only fully-covered positions.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                acc += t * rows[(y + j) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}
