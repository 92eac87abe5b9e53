//! The training objective over a mixed batch of new and replayed pairs.
//!
//! `l_new` and `l_replay` are Charbonnier plus edge loss averaged over their
//! samples, `l_consist` is the L1 distance between the current and previous
//! network outputs on the replayed inputs, and
//! `l_total = l_new + l_replay + lambda * l_consist`.

use rayon::prelude::*;

use super::loss::{
    charbonnier, charbonnier_grad, consistency_grad, consistency_loss, edge_grad, edge_loss,
    CHARBONNIER_EPS,
};
use super::network::{activation_pattern, backward_traced, forward, forward_traced};
use super::{Gradients, RestorerState};
use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Image,
    pub target: Image,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub new: Vec<Sample>,
    pub replay: Vec<Sample>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.new.len() + self.replay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-term multipliers. All ones is the training objective; zeroing terms
/// isolates a single one for gradient checking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub new_char: f64,
    pub new_edge: f64,
    pub replay_char: f64,
    pub replay_edge: f64,
    pub consist: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            new_char: 1.0,
            new_edge: 1.0,
            replay_char: 1.0,
            replay_edge: 1.0,
            consist: 1.0,
        }
    }
}

impl LossWeights {
    pub fn only_new_char() -> Self {
        Self::none().with(|w| w.new_char = 1.0)
    }

    pub fn only_new_edge() -> Self {
        Self::none().with(|w| w.new_edge = 1.0)
    }

    pub fn only_replay_char() -> Self {
        Self::none().with(|w| w.replay_char = 1.0)
    }

    pub fn only_replay_edge() -> Self {
        Self::none().with(|w| w.replay_edge = 1.0)
    }

    pub fn only_consist() -> Self {
        Self::none().with(|w| w.consist = 1.0)
    }

    fn none() -> Self {
        LossWeights {
            new_char: 0.0,
            new_edge: 0.0,
            replay_char: 0.0,
            replay_edge: 0.0,
            consist: 0.0,
        }
    }

    fn with(mut self, f: impl FnOnce(&mut Self)) -> Self {
        f(&mut self);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_new: f64,
    pub l_replay: f64,
    pub l_interleave: f64,
    pub l_consist: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    fn assemble(l_new: f64, l_replay: f64, l_consist: f64, lambda: f64) -> Self {
        let l_interleave = l_replay + l_new;
        LossBreakdown {
            l_new,
            l_replay,
            l_interleave,
            l_consist,
            l_total: l_interleave + lambda * l_consist,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.l_new, self.l_replay, self.l_interleave, self.l_consist, self.l_total]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy)]
enum Role {
    New,
    Replay,
}

#[derive(Default, Clone, Copy)]
struct Parts {
    new: f64,
    replay: f64,
    consist: f64,
}

struct Plan<'a> {
    state: &'a RestorerState,
    prev: Option<&'a RestorerState>,
    lambda: f64,
    w: LossWeights,
    n_new: f64,
    n_replay: f64,
}

impl Plan<'_> {
    fn tasks<'b>(&self, batch: &'b Batch) -> Vec<(Role, &'b Sample)> {
        batch
            .new
            .iter()
            .map(|s| (Role::New, s))
            .chain(batch.replay.iter().map(|s| (Role::Replay, s)))
            .collect()
    }

    /// Loss contributions of one sample, already divided by the group size.
    fn value(&self, role: Role, s: &Sample) -> Result<Parts> {
        let y = forward(self.state, &s.input)?;
        let mut parts = Parts::default();
        match role {
            Role::New => {
                parts.new = (self.w.new_char * charbonnier(&y, &s.target, CHARBONNIER_EPS)?
                    + self.w.new_edge * edge_loss(&y, &s.target)?)
                    / self.n_new;
            }
            Role::Replay => {
                parts.replay = (self.w.replay_char * charbonnier(&y, &s.target, CHARBONNIER_EPS)?
                    + self.w.replay_edge * edge_loss(&y, &s.target)?)
                    / self.n_replay;
                if let Some(prev) = self.prev {
                    let yp = forward(prev, &s.input)?;
                    parts.consist = self.w.consist * consistency_loss(&y, &yp)? / self.n_replay;
                }
            }
        }
        Ok(parts)
    }

    fn value_and_grad(&self, role: Role, s: &Sample) -> Result<(Parts, Gradients)> {
        let (y, trace) = forward_traced(self.state, &s.input, true)?;
        let mut parts = Parts::default();
        let (wc, we, n) = match role {
            Role::New => (self.w.new_char, self.w.new_edge, self.n_new),
            Role::Replay => (self.w.replay_char, self.w.replay_edge, self.n_replay),
        };
        let (lc, gc) = charbonnier_grad(&y, &s.target, CHARBONNIER_EPS, wc / n)?;
        let (le, ge) = edge_grad(&y, &s.target, we / n)?;
        let mut gy = gc;
        add_into(&mut gy, &ge);
        let rec = (wc * lc + we * le) / n;
        match role {
            Role::New => parts.new = rec,
            Role::Replay => {
                parts.replay = rec;
                if let Some(prev) = self.prev {
                    let yp = forward(prev, &s.input)?;
                    let scale = self.lambda * self.w.consist / n;
                    let (lk, gk) = consistency_grad(&y, &yp, scale)?;
                    parts.consist = self.w.consist * lk / n;
                    add_into(&mut gy, &gk);
                }
            }
        }
        let mut grads = Gradients::zeros();
        backward_traced(self.state, trace.as_ref().expect("trace kept"), &gy, &mut grads);
        Ok((parts, grads))
    }

    fn finish(&self, parts: impl Iterator<Item = Parts>) -> LossBreakdown {
        let mut acc = Parts::default();
        for p in parts {
            acc.new += p.new;
            acc.replay += p.replay;
            acc.consist += p.consist;
        }
        LossBreakdown::assemble(acc.new, acc.replay, acc.consist, self.lambda)
    }
}

fn add_into(a: &mut Image, b: &Image) {
    a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
}

fn plan<'a>(
    state: &'a RestorerState,
    batch: &Batch,
    prev: Option<&'a RestorerState>,
    lambda: f64,
    w: LossWeights,
) -> Result<Plan<'a>> {
    if batch.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(Plan {
        state,
        prev,
        lambda,
        w,
        n_new: batch.new.len().max(1) as f64,
        n_replay: batch.replay.len().max(1) as f64,
    })
}

/// Loss breakdown and gradient of `l_total`.
///
/// Samples are processed in parallel and reduced in batch order, so the
/// result does not depend on the thread count. `prev` is the frozen network
/// from the previous stage; without it the consistency term is zero.
pub fn evaluate(
    state: &RestorerState,
    batch: &Batch,
    prev: Option<&RestorerState>,
    lambda: f64,
    weights: LossWeights,
) -> Result<(LossBreakdown, Gradients)> {
    let plan = plan(state, batch, prev, lambda, weights)?;
    let results = plan
        .tasks(batch)
        .into_par_iter()
        .map(|(role, s)| plan.value_and_grad(role, s))
        .collect::<Result<Vec<_>>>()?;
    let mut grads = Gradients::zeros();
    for (_, g) in &results {
        grads.add_assign(g);
    }
    Ok((plan.finish(results.iter().map(|(p, _)| *p)), grads))
}

/// Forward-only counterpart of [`evaluate`].
pub fn objective_value(
    state: &RestorerState,
    batch: &Batch,
    prev: Option<&RestorerState>,
    lambda: f64,
    weights: LossWeights,
) -> Result<LossBreakdown> {
    let plan = plan(state, batch, prev, lambda, weights)?;
    let parts = plan
        .tasks(batch)
        .into_par_iter()
        .map(|(role, s)| plan.value(role, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(plan.finish(parts.into_iter()))
}

/// Signs of every quantity the objective is non-differentiable in: hidden
/// ReLU inputs and, when distilling, the current-minus-previous residuals.
pub(crate) fn kink_pattern(
    state: &RestorerState,
    batch: &Batch,
    prev: Option<&RestorerState>,
) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for s in batch.new.iter().chain(&batch.replay) {
        out.extend(activation_pattern(state, &s.input)?);
    }
    if let Some(prev) = prev {
        for s in &batch.replay {
            let y = forward(state, &s.input)?;
            let yp = forward(prev, &s.input)?;
            out.extend(y.data().iter().zip(yp.data()).map(|(a, b)| a > b));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(seed: u64, size: usize) -> Sample {
        let mut rng = crate::rng::rng(seed);
        let target = Image::from_fn(size, size, 3, |_, _, _| rng.random::<f64>() * 0.8);
        let input = target.map(|v| (v + rng.random::<f64>() * 0.3).min(1.0));
        Sample { input, target }
    }

    fn batch() -> Batch {
        Batch {
            new: vec![sample(1, 8), sample(2, 8)],
            replay: vec![sample(3, 8), sample(4, 8), sample(5, 8)],
        }
    }

    #[test]
    fn breakdown_identities() {
        let s = RestorerState::init(1);
        let p = RestorerState::init(2);
        let (b, _) = evaluate(&s, &batch(), Some(&p), 0.7, LossWeights::default()).unwrap();
        assert_eq!(b.l_interleave, b.l_new + b.l_replay);
        assert_eq!(b.l_total, b.l_interleave + 0.7 * b.l_consist);
        assert!(b.l_consist > 0.0);
        let v = objective_value(&s, &batch(), Some(&p), 0.7, LossWeights::default()).unwrap();
        assert!((v.l_total - b.l_total).abs() < 1e-12);
    }

    #[test]
    fn consistency_vanishes_against_self_or_without_prev() {
        let s = RestorerState::init(1);
        let (a, _) = evaluate(&s, &batch(), Some(&s), 1.0, LossWeights::default()).unwrap();
        assert_eq!(a.l_consist, 0.0);
        let (b, _) = evaluate(&s, &batch(), None, 1.0, LossWeights::default()).unwrap();
        assert_eq!(b.l_consist, 0.0);
        assert_eq!(a.l_total, b.l_total);
    }

    #[test]
    fn gradient_is_sum_of_terms() {
        let s = RestorerState::init(3);
        let p = RestorerState::init(4);
        let lambda = 0.5;
        let (_, total) = evaluate(&s, &batch(), Some(&p), lambda, LossWeights::default()).unwrap();
        let mut sum = Gradients::zeros();
        for w in [
            LossWeights::only_new_char(),
            LossWeights::only_new_edge(),
            LossWeights::only_replay_char(),
            LossWeights::only_replay_edge(),
            LossWeights::only_consist(),
        ] {
            sum.add_assign(&evaluate(&s, &batch(), Some(&p), lambda, w).unwrap().1);
        }
        for (a, b) in total.as_slice().iter().zip(sum.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_state_zero_input_only_moves_output_bias() {
        let s = RestorerState::zeros();
        let z = Image::zeros(6, 6, 3);
        let b = Batch {
            new: vec![Sample {
                input: z.clone(),
                target: Image::filled(6, 6, 3, 0.5),
            }],
            replay: vec![],
        };
        let (_, g) = evaluate(&s, &b, None, 1.0, LossWeights::only_new_char()).unwrap();
        let l3 = super::super::network::L3;
        for (i, v) in g.as_slice().iter().enumerate() {
            if (l3.b_off..l3.b_off + 3).contains(&i) {
                // y = -b3, d(char)/d(b3) = -d/dy, and y - t = -0.5 on every pixel
                assert!(*v > 0.0);
            } else {
                assert_eq!(*v, 0.0, "param {i}");
            }
        }
    }

    #[test]
    fn parallel_reduction_is_deterministic() {
        let s = RestorerState::init(9);
        let p = RestorerState::init(10);
        let a = evaluate(&s, &batch(), Some(&p), 1.0, LossWeights::default()).unwrap();
        let b = evaluate(&s, &batch(), Some(&p), 1.0, LossWeights::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_batch_and_bad_lambda() {
        let s = RestorerState::zeros();
        assert!(evaluate(&s, &Batch::default(), None, 1.0, LossWeights::default()).is_err());
        assert!(evaluate(&s, &batch(), None, -1.0, LossWeights::default()).is_err());
    }
}
