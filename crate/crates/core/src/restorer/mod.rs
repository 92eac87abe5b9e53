//! The de-raining network and everything needed to train it.
//!
//! The network predicts the rain residual: `y = x - head(x)` where `head`
//! is conv3x3(3->8), ReLU, conv3x3(8->8), ReLU, conv3x3(8->3), all with
//! replicate padding. With every parameter at zero the network is the
//! identity. Training uses the unclipped output; evaluation clips to [0, 1].

mod gradcheck;
mod loss;
mod network;
mod objective;
mod serialize;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

pub use gradcheck::{
    finite_difference, grad_check, grad_check_against, relative_error, sample_indices, GradCheck,
};
pub use loss::{
    charbonnier, charbonnier_grad, consistency_grad, consistency_loss, edge_grad, edge_loss,
    CHARBONNIER_EPS,
};
pub use network::{forward, forward_batch, forward_macs, predict, PARAM_COUNT};
pub use objective::{evaluate, objective_value, Batch, LossBreakdown, LossWeights, Sample};

pub const IN_CHANNELS: usize = 3;
pub const HIDDEN: usize = 8;

/// Parameters plus SGD momentum buffers, both in the flat layout
/// `[W1, b1, W2, b2, W3, b3]` with weights indexed `(out, in, ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestorerState {
    params: Vec<f64>,
    momentum: Vec<f64>,
}

impl RestorerState {
    pub fn zeros() -> Self {
        RestorerState {
            params: vec![0.0; PARAM_COUNT],
            momentum: vec![0.0; PARAM_COUNT],
        }
    }

    /// He-normal hidden layers; the output layer is scaled down by 10 so a
    /// fresh network starts close to the identity.
    pub fn init(seed: u64) -> Self {
        let mut rng = rng::rng(seed);
        let mut state = Self::zeros();
        for (idx, l) in network::LAYERS.iter().enumerate() {
            let mut std = (2.0 / (l.in_c * 9) as f64).sqrt();
            if idx == network::LAYERS.len() - 1 {
                std *= 0.1;
            }
            let n = Normal::new(0.0, std).expect("positive std");
            for w in &mut state.params[l.w_off..l.w_off + l.weights()] {
                *w = n.sample(&mut rng);
            }
        }
        state
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != PARAM_COUNT {
            return Err(Error::Shape(format!(
                "{} parameters, expected {PARAM_COUNT}",
                params.len()
            )));
        }
        Ok(RestorerState {
            params,
            momentum: vec![0.0; PARAM_COUNT],
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn reset_momentum(&mut self) {
        self.momentum.fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().chain(&self.momentum).all(|v| v.is_finite())
    }
}

/// Gradient vector in the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn zeros() -> Self {
        Gradients(vec![0.0; PARAM_COUNT])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.len() != PARAM_COUNT {
            return Err(Error::Shape(format!(
                "{} gradient entries, expected {PARAM_COUNT}",
                values.len()
            )));
        }
        Ok(Gradients(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a += b);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 1e-2,
            momentum: 0.9,
        }
    }
}

/// `v <- momentum * v + g; w <- w - lr * v`. Refuses non-finite gradients
/// and leaves the state untouched in that case.
pub fn sgd_step(state: &mut RestorerState, grads: &Gradients, cfg: &SgdConfig) -> Result<()> {
    if let Some(i) = grads.0.iter().position(|g| !g.is_finite()) {
        return Err(Error::NumericalFault {
            iteration: 0,
            message: format!("gradient entry {i} is {}", grads.0[i]),
        });
    }
    for ((w, v), g) in state.params.iter_mut().zip(&mut state.momentum).zip(&grads.0) {
        *v = cfg.momentum * *v + g;
        *w -= cfg.lr * *v;
    }
    Ok(())
}

pub use serialize::{load_state, save_state, state_from_bytes, state_to_bytes};
