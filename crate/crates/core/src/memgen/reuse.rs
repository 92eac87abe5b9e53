//! Replay reuse: at stage `n` each of the `k` generators must contribute
//! `r_i` pairs (the even split of `M_n`); only `max(0, r_i - c_i)` of them
//! are sampled fresh, where `c_i` is what the cache already holds.

use super::{replay_sample, even_split, MemoryGenerator, ReplayDataset, ReplayPair};
use crate::error::{Error, Result};
use crate::synthdata::{Pair, RainDataset};

/// What happens to cached pairs beyond the current stage's requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CachePolicy {
    /// Keep every generated pair so later growth can reuse them.
    #[default]
    RetainSurplus,
    /// Evict down to exactly the pairs used this stage, so the cache for
    /// generator `i` after stage `n` holds `r_{i,n}` pairs.
    TrimToStage,
}

impl CachePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            CachePolicy::RetainSurplus => "retain",
            CachePolicy::TrimToStage => "trim",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "retain" => Ok(CachePolicy::RetainSurplus),
            "trim" => Ok(CachePolicy::TrimToStage),
            _ => Err(Error::Config(format!("unknown cache policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayCache {
    entries: Vec<Vec<Pair>>,
    stage: usize,
    policy: CachePolicy,
}

impl ReplayCache {
    /// Empty cache as it stands after stage 1, before any replay exists.
    pub fn new(policy: CachePolicy) -> Self {
        ReplayCache {
            entries: Vec::new(),
            stage: 1,
            policy,
        }
    }

    pub(crate) fn from_parts(entries: Vec<Vec<Pair>>, stage: usize, policy: CachePolicy) -> Self {
        ReplayCache {
            entries,
            stage,
            policy,
        }
    }

    /// Stage whose replay build last updated the cache.
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    pub fn generators(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, generator: usize) -> usize {
        self.entries.get(generator).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.entries.iter().map(Vec::len).collect()
    }

    pub fn pairs(&self, generator: usize) -> &[Pair] {
        self.entries.get(generator).map_or(&[], Vec::as_slice)
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    /// Drops all but the first `keep` pairs of `generator`.
    pub fn evict(&mut self, generator: usize, keep: usize) {
        if let Some(list) = self.entries.get_mut(generator) {
            list.truncate(keep);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReusePlan {
    pub stage: usize,
    pub required: Vec<usize>,
    pub cached: Vec<usize>,
    pub delta: Vec<usize>,
}

impl ReusePlan {
    pub fn total_required(&self) -> usize {
        self.required.iter().sum()
    }

    pub fn total_delta(&self) -> usize {
        self.delta.iter().sum()
    }
}

/// Plans stage `stage` with `generators` generators and `m_n` pairs.
/// Generators the cache has never seen count as holding nothing.
pub fn reuse_plan(
    cache: &ReplayCache,
    stage: usize,
    generators: usize,
    m_n: usize,
) -> Result<ReusePlan> {
    if stage < 2 {
        return Err(Error::Precondition(format!("no replay at stage {stage}")));
    }
    if generators == 0 {
        return Err(Error::Precondition("replay needs at least one generator".into()));
    }
    if cache.stage() != stage - 1 {
        return Err(Error::Stale(format!(
            "cache last built at stage {}, planning stage {stage}",
            cache.stage()
        )));
    }
    if cache.generators() > generators {
        return Err(Error::Stale(format!(
            "cache holds {} generators but only {generators} exist",
            cache.generators()
        )));
    }
    let required = even_split(m_n, generators);
    let cached: Vec<usize> = (0..generators).map(|i| cache.count(i)).collect();
    let delta = required
        .iter()
        .zip(&cached)
        .map(|(r, c)| r.saturating_sub(*c))
        .collect();
    Ok(ReusePlan {
        stage,
        required,
        cached,
        delta,
    })
}

/// Executes `plan`: reuses the first `r_i` cached pairs of each generator,
/// samples the missing `delta_i` fresh, and returns the replay set, the
/// updated cache and the number of sampler calls made.
pub fn apply_reuse(
    mut cache: ReplayCache,
    plan: &ReusePlan,
    gens: &[MemoryGenerator],
    current: &RainDataset,
    seed: u64,
) -> Result<(ReplayDataset, ReplayCache, usize)> {
    if cache.stage() + 1 != plan.stage {
        return Err(Error::Stale(format!(
            "plan for stage {} against cache at stage {}",
            plan.stage,
            cache.stage()
        )));
    }
    let k = plan.required.len();
    if gens.len() != k || plan.cached.len() != k || plan.delta.len() != k {
        return Err(Error::Stale(format!(
            "plan covers {k} generators, {} supplied",
            gens.len()
        )));
    }
    for i in 0..k {
        if cache.count(i) != plan.cached[i] {
            return Err(Error::Stale(format!(
                "generator {i}: plan expects {} cached pairs, cache holds {}",
                plan.cached[i],
                cache.count(i)
            )));
        }
    }
    cache.entries.resize_with(k, Vec::new);

    let mut pairs = Vec::with_capacity(plan.total_required());
    let mut calls = 0;
    for (i, gen) in gens.iter().enumerate() {
        let have = cache.entries[i].len();
        for j in have..have + plan.delta[i] {
            let fresh = replay_sample(gen, i, j, current, seed)?;
            cache.entries[i].push(fresh.pair);
            calls += 1;
        }
        pairs.extend(
            cache.entries[i][..plan.required[i]]
                .iter()
                .map(|p| ReplayPair {
                    pair: p.clone(),
                    generator: i,
                }),
        );
        if cache.policy == CachePolicy::TrimToStage {
            cache.evict(i, plan.required[i]);
        }
    }
    cache.stage = plan.stage;
    Ok((ReplayDataset { pairs }, cache, calls))
}

/// Whether to fit a new generator: always for the first dataset, otherwise
/// only when the normalized divergence strictly exceeds `threshold`.
pub fn select_generator_training(s_hat: f64, threshold: f64, has_prior: bool) -> Result<bool> {
    if !(0.0..=1.0).contains(&s_hat) {
        return Err(Error::Domain(format!("normalized similarity {s_hat} not in [0,1]")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!("threshold {threshold} not in (0,1)")));
    }
    Ok(!has_prior || s_hat > threshold)
}
