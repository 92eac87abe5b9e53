//! Continual image de-raining with generative replay.
//!
//! A stream of rain datasets is learned one at a time by a small residual
//! restorer. After each dataset a compact rain-characteristics generator is
//! fitted and kept; later stages replay rain sampled from those generators
//! over current backgrounds, train on new and replayed pairs together, and
//! distill from the previous restorer snapshot on the replayed pairs. HOG/KL
//! similarity between the new data and the replay decides how many
//! iterations a stage gets and whether a new generator is worth fitting,
//! and a replay cache keeps the cumulative sampling cost logarithmic.
//!
//! Modules, bottom up:
//!
//! * [`imaging`]: images, PPM files, PSNR/SSIM, HOG, KL, Laplacian
//! * [`synthdata`]: procedural backgrounds, rain layers and dataset streams
//! * [`memgen`]: memory generators, replay construction and the reuse cache
//! * [`restorer`]: the de-raining network, its losses, gradients and optimizer
//! * [`continual`]: stage training, similarity speedup, stream runs, baselines
//! * [`ledger`]: symbolic cost model and replay-cost accounting
//! * [`cli`]: configuration files and the commands behind the `clgid` binary

pub mod cli;
pub mod continual;
pub mod error;
pub mod imaging;
pub mod kv;
pub mod ledger;
pub mod memgen;
pub mod restorer;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
pub use imaging::Image;
