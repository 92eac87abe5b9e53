//! Pixel container, netpbm I/O, quality metrics and orientation statistics.

mod filter;
mod hog;
mod image;
mod metrics;
mod ppm;

pub use filter::{laplacian, laplacian_adjoint};
pub use hog::{
    hog, kl_divergence, kl_divergence_slices, orientation_votes, HogConfig, HogDescriptor,
    KL_EPSILON,
};
pub use image::Image;
pub use metrics::{
    gaussian_taps, mse, psnr, ssim, PSNR_CAP, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW,
};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
