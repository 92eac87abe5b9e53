//! Symbolic cost model of a continual run and replay-cost accounting.
//!
//! Per-stage costs are closed-form estimates from a handful of constants;
//! nothing here measures wall clock. The replay-call counts, in contrast,
//! can be checked exactly against what the replay cache actually samples.

use std::fmt::Write as _;

use crate::continual::StreamReport;
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::memgen::even_split;
use crate::restorer::PARAM_COUNT;

/// Constants of the cost model. `*_train` values are per batch; replay
/// values are per generated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    pub p_g: f64,
    pub e_g: f64,
    pub b_g: f64,
    pub f_g_train: f64,
    pub t_g_train: f64,
    pub f_r: f64,
    pub t_r: f64,
    pub p_d: f64,
    pub e_d: f64,
    pub b_d: f64,
    pub f_d_train: f64,
    pub t_d_train: f64,
}

const KEYS: [&str; 12] = [
    "p_g", "e_g", "b_g", "f_g_train", "t_g_train", "f_r", "t_r", "p_d", "e_d", "b_d",
    "f_d_train", "t_d_train",
];

impl Default for CostConstants {
    /// Unit costs, with the restorer's true parameter count.
    fn default() -> Self {
        CostConstants {
            p_g: 1.0,
            e_g: 1.0,
            b_g: 1.0,
            f_g_train: 1.0,
            t_g_train: 1.0,
            f_r: 1.0,
            t_r: 1.0,
            p_d: PARAM_COUNT as f64,
            e_d: 1.0,
            b_d: 1.0,
            f_d_train: 1.0,
            t_d_train: 1.0,
        }
    }
}

impl CostConstants {
    fn values(&self) -> [f64; 12] {
        [
            self.p_g,
            self.e_g,
            self.b_g,
            self.f_g_train,
            self.t_g_train,
            self.f_r,
            self.t_r,
            self.p_d,
            self.e_d,
            self.b_d,
            self.f_d_train,
            self.t_d_train,
        ]
    }

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "p_g" => &mut self.p_g,
            "e_g" => &mut self.e_g,
            "b_g" => &mut self.b_g,
            "f_g_train" => &mut self.f_g_train,
            "t_g_train" => &mut self.t_g_train,
            "f_r" => &mut self.f_r,
            "t_r" => &mut self.t_r,
            "p_d" => &mut self.p_d,
            "e_d" => &mut self.e_d,
            "b_d" => &mut self.b_d,
            "f_d_train" => &mut self.f_d_train,
            "t_d_train" => &mut self.t_d_train,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in KEYS.iter().zip(self.values()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("cost constant `{k}` must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Starts from the defaults and overrides every key present in `kv`.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut c = CostConstants::default();
        for (k, v) in kv.entries() {
            let slot = c.slot(k).ok_or_else(|| Error::UnknownKey(k.clone()))?;
            *slot = crate::kv::parse_value(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        for (k, v) in KEYS.iter().zip(self.values()) {
            kv.push(*k, v);
        }
        kv
    }
}

/// Costs of one stage, or running totals up to it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageCost {
    pub flops_gan: f64,
    pub t_gan: f64,
    pub flops_replay: f64,
    pub t_replay: f64,
    pub flops_dnet: f64,
    pub t_dnet: f64,
    /// Replay sampler calls without reuse.
    pub naive_calls: usize,
    /// Replay sampler calls with reuse.
    pub reuse_calls: usize,
}

impl StageCost {
    fn add(&self, o: &StageCost) -> StageCost {
        StageCost {
            flops_gan: self.flops_gan + o.flops_gan,
            t_gan: self.t_gan + o.t_gan,
            flops_replay: self.flops_replay + o.flops_replay,
            t_replay: self.t_replay + o.t_replay,
            flops_dnet: self.flops_dnet + o.flops_dnet,
            t_dnet: self.t_dnet + o.t_dnet,
            naive_calls: self.naive_calls + o.naive_calls,
            reuse_calls: self.reuse_calls + o.reuse_calls,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub sizes: Vec<usize>,
    pub deltas: Vec<bool>,
    pub per_stage: Vec<StageCost>,
    /// Prefix sums of `per_stage`.
    pub cumulative: Vec<StageCost>,
    /// Parameters of the generators actually trained.
    pub p_gan: f64,
    pub p_dnet: f64,
}

impl CostReport {
    pub fn total(&self) -> StageCost {
        self.cumulative.last().copied().unwrap_or_default()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "stage,m,delta,naive_calls,sampler_calls,flops_gan,t_gan,flops_replay,t_replay,\
             flops_dnet,t_dnet,cum_naive_calls,cum_sampler_calls,cum_flops_gan,cum_t_gan,\
             cum_flops_replay,cum_t_replay,cum_flops_dnet,cum_t_dnet\n",
        );
        for (n, (s, c)) in self.per_stage.iter().zip(&self.cumulative).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                n + 1,
                self.sizes[n],
                u8::from(self.deltas[n]),
                s.naive_calls,
                s.reuse_calls,
                s.flops_gan,
                s.t_gan,
                s.flops_replay,
                s.t_replay,
                s.flops_dnet,
                s.t_dnet,
                c.naive_calls,
                c.reuse_calls,
                c.flops_gan,
                c.t_gan,
                c.flops_replay,
                c.t_replay,
                c.flops_dnet,
                c.t_dnet
            );
        }
        out
    }
}

/// Evaluates the cost model for dataset sizes `M_1..M_N`. A stage with
/// `deltas[n] == false` trains no generator and pays no generator cost;
/// later replay is then split over fewer generators. Stage 1 has nothing
/// to replay.
pub fn cost_report(c: &CostConstants, sizes: &[usize], deltas: &[bool]) -> Result<CostReport> {
    c.validate()?;
    if sizes.len() != deltas.len() {
        return Err(Error::Precondition(format!(
            "{} sizes but {} generator flags",
            sizes.len(),
            deltas.len()
        )));
    }
    if let Some(n) = sizes.iter().position(|&m| m == 0) {
        return Err(Error::Domain(format!("stage {} has no training pairs", n + 1)));
    }
    let naive = naive_calls_per_stage(sizes);
    let reuse = reuse_calls_with_generators(sizes, &generators_before(deltas));
    let mut per_stage = Vec::with_capacity(sizes.len());
    for (n, (&m, &delta)) in sizes.iter().zip(deltas).enumerate() {
        let m = m as f64;
        let gan_batches = if delta { c.e_g * m / c.b_g } else { 0.0 };
        let replayed = if n == 0 { 0.0 } else { m };
        let dnet_batches = c.e_d * m / c.b_d;
        per_stage.push(StageCost {
            flops_gan: gan_batches * c.f_g_train,
            t_gan: gan_batches * c.t_g_train,
            flops_replay: replayed * c.f_r,
            t_replay: replayed * c.t_r,
            flops_dnet: dnet_batches * c.f_d_train,
            t_dnet: dnet_batches * c.t_d_train,
            naive_calls: naive[n],
            reuse_calls: reuse[n],
        });
    }
    let mut cumulative = Vec::with_capacity(per_stage.len());
    let mut acc = StageCost::default();
    for s in &per_stage {
        acc = acc.add(s);
        cumulative.push(acc);
    }
    Ok(CostReport {
        sizes: sizes.to_vec(),
        deltas: deltas.to_vec(),
        per_stage,
        cumulative,
        p_gan: deltas.iter().filter(|d| **d).count() as f64 * c.p_g,
        p_dnet: c.p_d,
    })
}

/// Generators available at the start of each stage.
fn generators_before(deltas: &[bool]) -> Vec<usize> {
    deltas
        .iter()
        .scan(0, |k, &d| {
            let before = *k;
            *k += usize::from(d);
            Some(before)
        })
        .collect()
}

fn naive_calls_per_stage(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .map(|(n, &m)| if n == 0 { 0 } else { m })
        .collect()
}

/// Fresh samples per stage when every earlier stage left one generator and
/// the cache holds exactly the previous stage's split.
fn reuse_calls_per_stage(sizes: &[usize]) -> Vec<usize> {
    let gens: Vec<usize> = (0..sizes.len()).collect();
    reuse_calls_with_generators(sizes, &gens)
}

/// Fresh samples per stage for arbitrary generator counts: stage `n`
/// splits `M_n` evenly over `generators[n]` generators and samples
/// `max(0, r_i,n - r_i,n-1)` for each.
pub fn reuse_calls_with_generators(sizes: &[usize], generators: &[usize]) -> Vec<usize> {
    let mut prev: Vec<usize> = Vec::new();
    sizes
        .iter()
        .zip(generators)
        .map(|(&m, &k)| {
            if k == 0 {
                prev.clear();
                return 0;
            }
            let split = even_split(m, k);
            let calls = split
                .iter()
                .enumerate()
                .map(|(i, r)| r.saturating_sub(prev.get(i).copied().unwrap_or(0)))
                .sum();
            prev = split;
            calls
        })
        .collect()
}

/// Replay calls without reuse: every stage after the first samples `M_n`.
pub fn replay_cost_naive(sizes: &[usize]) -> usize {
    naive_calls_per_stage(sizes).iter().sum()
}

/// Replay calls with reuse, using the same integer split as the cache.
pub fn replay_cost_reuse_closed(sizes: &[usize]) -> usize {
    reuse_calls_per_stage(sizes).iter().sum()
}

/// The real-valued form
/// `sum_{n>=2} (n-2) max(0, M_n/(n-1) - M_{n-1}/(n-2)) + M_n/(n-1)`.
pub fn replay_cost_reuse_real(sizes: &[usize]) -> f64 {
    let mut total = 0.0;
    for n in 2..=sizes.len() {
        let m_n = sizes[n - 1] as f64;
        let share = m_n / (n - 1) as f64;
        let growth = if n > 2 {
            let prev_share = sizes[n - 2] as f64 / (n - 2) as f64;
            (n - 2) as f64 * (share - prev_share).max(0.0)
        } else {
            0.0
        };
        total += growth + share;
    }
    total
}

/// Sampler calls a run actually made.
pub fn replay_cost_reuse_measured(report: &StreamReport) -> usize {
    report.total_sampler_calls()
}

/// Integer-split slack between the real-valued and integer closed forms:
/// at most one call per generator per stage.
pub fn rounding_slack(n: usize) -> usize {
    (2..=n).map(|k| k - 1).sum()
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogBound {
    /// `(N, C_N / (M (ln(N-1) + 1)))` for every checked `N`.
    pub ratios: Vec<(usize, f64)>,
    /// Largest ratio over `N >= 4`, the fitted constant.
    pub constant: f64,
    pub pass: bool,
}

pub const LOG_BOUND_CONSTANT: f64 = 1.1;

/// Checks `C_N <= c M (ln(N-1) + 1)` with `c <= 1.1` for equal sizes `m`
/// and `N` from 4 to `n_max`.
pub fn verify_log_bound(m: usize, n_max: usize) -> Result<LogBound> {
    if m == 0 || n_max < 4 {
        return Err(Error::Precondition(format!(
            "log bound needs m > 0 and n_max >= 4, got m = {m}, n_max = {n_max}"
        )));
    }
    let ratios: Vec<(usize, f64)> = (2..=n_max)
        .map(|n| {
            let c = replay_cost_reuse_closed(&vec![m; n]) as f64;
            (n, c / (m as f64 * (((n - 1) as f64).ln() + 1.0)))
        })
        .collect();
    let constant = ratios
        .iter()
        .filter(|(n, _)| *n >= 4)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    Ok(LogBound {
        ratios,
        constant,
        pass: constant <= LOG_BOUND_CONSTANT,
    })
}
