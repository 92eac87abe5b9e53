//! One stage of interleaved training.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::StageConfig;
use crate::error::{Error, Result};
use crate::restorer::{evaluate, sgd_step, Batch, LossBreakdown, LossWeights, RestorerState, Sample};
use crate::rng::{self, label};
use crate::synthdata::Pair;

/// Cycles through `0..len` in a fresh random order every epoch.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    pub fn new(len: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::Precondition("cannot sample from an empty set".into()));
        }
        let mut s = EpochSampler {
            order: (0..len).collect(),
            pos: 0,
            rng: rng::rng(seed),
        };
        s.order.shuffle(&mut s.rng);
        Ok(s)
    }

    pub fn next_index(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size).map(|_| self.next_index()).collect()
    }
}

/// Data and teacher for one stage.
pub struct StageInput<'a> {
    pub current: &'a [Pair],
    /// Replayed pairs; empty when the stage has no replay.
    pub replay: &'a [Pair],
    /// Frozen previous restorer used for distillation.
    pub prev: Option<&'a RestorerState>,
    pub iterations: usize,
    /// Seeds the two batch samplers.
    pub seed: u64,
}

fn sample(p: &Pair) -> Sample {
    Sample {
        input: p.rainy.clone(),
        target: p.clean.clone(),
    }
}

/// Runs exactly `input.iterations` SGD steps, each on one batch of new
/// pairs and (when available) one batch of replayed pairs, and returns the
/// per-step loss log. Momentum is cleared first and the learning rate
/// follows `cfg.schedule` over the stage.
pub fn train_stage(
    state: &mut RestorerState,
    input: &StageInput<'_>,
    cfg: &StageConfig,
) -> Result<Vec<LossBreakdown>> {
    let mut new_sampler = EpochSampler::new(input.current.len(), rng::derive(input.seed, label::BATCH_NEW))?;
    let mut replay_sampler = if input.replay.is_empty() {
        None
    } else {
        Some(EpochSampler::new(
            input.replay.len(),
            rng::derive(input.seed, label::BATCH_REPLAY),
        )?)
    };
    let prev = if replay_sampler.is_some() { input.prev } else { None };
    let mut sgd = cfg.sgd();
    state.reset_momentum();
    let mut log = Vec::with_capacity(input.iterations);
    for it in 0..input.iterations {
        let batch = Batch {
            new: new_sampler
                .next_batch(cfg.batch_size)
                .into_iter()
                .map(|i| sample(&input.current[i]))
                .collect(),
            replay: replay_sampler.as_mut().map_or_else(Vec::new, |s| {
                s.next_batch(cfg.batch_size)
                    .into_iter()
                    .map(|i| sample(&input.replay[i]))
                    .collect()
            }),
        };
        sgd.lr = cfg.schedule.lr(cfg.lr, it, input.iterations);
        let (loss, grads) = evaluate(state, &batch, prev, cfg.lambda, LossWeights::default())?;
        if !loss.is_finite() {
            return Err(Error::NumericalFault {
                iteration: it,
                message: format!("loss {loss:?}"),
            });
        }
        sgd_step(state, &grads, &sgd).map_err(|e| match e {
            Error::NumericalFault { message, .. } => Error::NumericalFault {
                iteration: it,
                message,
            },
            other => other,
        })?;
        log.push(loss);
    }
    Ok(log)
}
