use crate::error::{Error, Result};
use crate::imaging::HogConfig;
use crate::memgen::CachePolicy;
use crate::restorer::SgdConfig;

/// Which learner a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Replay, distillation and selective generators; fixed iterations.
    Clgid,
    /// As [`Method::Clgid`] with similarity-scaled iterations.
    ClgidFast,
    /// Sequential fine-tuning: no replay, no distillation.
    Sf,
    /// A fresh restorer per dataset.
    Individual,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Clgid => "clgid",
            Method::ClgidFast => "clgid-fast",
            Method::Sf => "sf",
            Method::Individual => "individual",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "clgid" => Ok(Method::Clgid),
            "clgid-fast" => Ok(Method::ClgidFast),
            "sf" => Ok(Method::Sf),
            "individual" => Ok(Method::Individual),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }

    /// Applies the method's switches to `cfg`.
    pub fn configure(&self, cfg: &StageConfig) -> StageConfig {
        let mut c = cfg.clone();
        match self {
            Method::Clgid => {}
            Method::ClgidFast => c.speedup = true,
            Method::Sf | Method::Individual => {
                c.replay = false;
                c.distill = false;
                c.speedup = false;
                c.lambda = 0.0;
            }
        }
        c
    }
}

/// Learning-rate shape within one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from the base rate toward zero.
    Cosine,
}

impl LrSchedule {
    /// Rate for step `it` of `total`.
    pub fn lr(&self, base: f64, it: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let t = it as f64 / total.max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LrSchedule::Constant => "constant",
            LrSchedule::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "cosine" => Ok(LrSchedule::Cosine),
            other => Err(Error::Config(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    /// Base iteration budget `I_n` of every stage.
    pub iterations: usize,
    pub batch_size: usize,
    pub lambda: f64,
    /// Generator-training threshold on the normalized similarity.
    pub threshold: f64,
    /// Lower bound on scaled iterations as a fraction of `I_n`.
    pub floor: f64,
    pub lr: f64,
    pub momentum: f64,
    pub schedule: LrSchedule,
    pub speedup: bool,
    pub selective: bool,
    pub reuse: bool,
    pub replay: bool,
    pub distill: bool,
    pub cache_policy: CachePolicy,
    pub test_fraction: f64,
    pub hog: HogConfig,
    pub seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            iterations: 2000,
            batch_size: 4,
            lambda: 1.0,
            threshold: 0.4,
            floor: 0.05,
            lr: 1e-2,
            momentum: 0.9,
            schedule: LrSchedule::Cosine,
            speedup: false,
            selective: true,
            reuse: true,
            replay: true,
            distill: true,
            cache_policy: CachePolicy::TrimToStage,
            test_fraction: 0.2,
            hog: HogConfig::default(),
            seed: 0,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.floor) {
            return bad(format!("floor must lie in [0, 1], got {}", self.floor));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad(format!(
                "test_fraction must lie in [0, 1), got {}",
                self.test_fraction
            ));
        }
        self.hog.validate()
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
        }
    }
}
