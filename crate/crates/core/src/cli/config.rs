//! Run configuration files.
//!
//! ```text
//! datasets = a,b
//! holdout_pairs = 20
//! method = clgid
//! seed = 3
//! iterations = 500
//! a.preset = heavy      # fills every rain key; explicit keys override
//! a.angle_mean = 30
//! a.pairs = 20
//! b.preset = light
//! b.angle_mean = 90
//! b.pairs = 20
//! ```
//!
//! Dataset keys carry the dataset id as prefix. A dataset without `seed`
//! gets one derived from the run seed. The manifest written by a run lists
//! every resolved key, so it can be fed back as a config.

use std::fs;
use std::path::Path;

use crate::continual::{LrSchedule, Method, StageConfig};
use crate::error::{Error, Result};
use crate::imaging::HogConfig;
use crate::kv::{self, parse_bool, KvFile};
use crate::memgen::CachePolicy;
use crate::rng::{self, label};
use crate::synthdata::{dataset_keys, DatasetSpec, RainParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const STAGE_KEYS: [&str; 20] = [
    "iterations",
    "batch_size",
    "lambda",
    "threshold",
    "floor",
    "lr",
    "momentum",
    "schedule",
    "speedup",
    "selective",
    "reuse",
    "replay",
    "distill",
    "cache_policy",
    "test_fraction",
    "hog_cell_size",
    "hog_bins",
    "hog_signed",
    "seed",
    "method",
];

const RUN_KEYS: [&str; 3] = ["datasets", "holdout_pairs", "version"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub specs: Vec<DatasetSpec>,
    /// Hold-out pairs; 0 disables hold-out evaluation.
    pub holdout_pairs: usize,
    pub method: Method,
    pub stage: StageConfig,
}

impl RunConfig {
    /// Reads `path`; `seed` overrides the file's seed before dataset seeds
    /// are derived.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&KvFile::parse(&text)?, seed)
    }

    pub fn from_kv(kv: &KvFile, seed_override: Option<u64>) -> Result<Self> {
        let ids: Vec<String> = kv::parse_list("datasets", &kv.require::<String>("datasets")?)?;
        if ids.is_empty() {
            return Err(Error::Config("`datasets` lists no dataset".into()));
        }
        let per_dataset: Vec<String> = dataset_keys()
            .into_iter()
            .filter(|k| k != "id")
            .chain(std::iter::once("preset".to_string()))
            .collect();
        for key in kv.keys() {
            let known = RUN_KEYS.contains(&key)
                || STAGE_KEYS.contains(&key)
                || key.split_once('.').is_some_and(|(id, rest)| {
                    ids.iter().any(|i| i == id) && per_dataset.iter().any(|k| k == rest)
                });
            if !known {
                return Err(Error::UnknownKey(key.to_string()));
            }
        }

        let mut stage = stage_from_kv(kv)?;
        if let Some(s) = seed_override {
            stage.seed = s;
        }
        let method = match kv.get("method") {
            Some(m) => Method::parse(m)?,
            None => Method::Clgid,
        };
        let specs = ids
            .iter()
            .enumerate()
            .map(|(i, id)| dataset_from_kv(kv, id, i, stage.seed))
            .collect::<Result<Vec<_>>>()?;
        let mut rc = RunConfig {
            specs,
            holdout_pairs: kv.optional("holdout_pairs")?.unwrap_or(0),
            method,
            stage,
        };
        rc.normalize();
        rc.stage.validate()?;
        Ok(rc)
    }

    /// Sets the method; the speedup flag follows it.
    pub fn set_method(&mut self, m: Method) {
        self.method = m;
        match m {
            Method::ClgidFast => self.stage.speedup = true,
            Method::Clgid => self.stage.speedup = false,
            Method::Sf | Method::Individual => {}
        }
    }

    /// Makes `method` and `speedup` agree: for the continual method the
    /// speedup flag decides between `clgid` and `clgid-fast`.
    pub fn normalize(&mut self) {
        match self.method {
            Method::Clgid if self.stage.speedup => self.method = Method::ClgidFast,
            Method::ClgidFast if !self.stage.speedup => self.method = Method::Clgid,
            _ => {}
        }
    }

    /// Every resolved key, in a fixed order.
    pub fn to_kv(&self) -> KvFile {
        let s = &self.stage;
        let mut kv = KvFile::new();
        kv.push("version", VERSION);
        kv.push("method", self.method.name());
        kv.push("seed", s.seed);
        kv.push(
            "datasets",
            kv::join(&self.specs.iter().map(|d| d.id.as_str()).collect::<Vec<_>>()),
        );
        kv.push("holdout_pairs", self.holdout_pairs);
        kv.push("iterations", s.iterations);
        kv.push("batch_size", s.batch_size);
        kv.push("lambda", s.lambda);
        kv.push("threshold", s.threshold);
        kv.push("floor", s.floor);
        kv.push("lr", s.lr);
        kv.push("momentum", s.momentum);
        kv.push("schedule", s.schedule.name());
        kv.push("speedup", s.speedup);
        kv.push("selective", s.selective);
        kv.push("reuse", s.reuse);
        kv.push("replay", s.replay);
        kv.push("distill", s.distill);
        kv.push("cache_policy", s.cache_policy.name());
        kv.push("test_fraction", s.test_fraction);
        kv.push("hog_cell_size", s.hog.cell_size);
        kv.push("hog_bins", s.hog.bins);
        kv.push("hog_signed", s.hog.signed);
        for d in &self.specs {
            d.write_kv(&format!("{}.", d.id), &mut kv);
        }
        kv
    }
}

fn stage_from_kv(kv: &KvFile) -> Result<StageConfig> {
    let mut s = StageConfig::default();
    let flag = |key: &str, default: bool| -> Result<bool> {
        kv.get(key).map_or(Ok(default), |raw| parse_bool(key, raw))
    };
    s.iterations = kv.optional("iterations")?.unwrap_or(s.iterations);
    s.batch_size = kv.optional("batch_size")?.unwrap_or(s.batch_size);
    s.lambda = kv.optional("lambda")?.unwrap_or(s.lambda);
    s.threshold = kv.optional("threshold")?.unwrap_or(s.threshold);
    s.floor = kv.optional("floor")?.unwrap_or(s.floor);
    s.lr = kv.optional("lr")?.unwrap_or(s.lr);
    s.momentum = kv.optional("momentum")?.unwrap_or(s.momentum);
    if let Some(v) = kv.get("schedule") {
        s.schedule = LrSchedule::parse(v)?;
    }
    s.speedup = flag("speedup", s.speedup)?;
    s.selective = flag("selective", s.selective)?;
    s.reuse = flag("reuse", s.reuse)?;
    s.replay = flag("replay", s.replay)?;
    s.distill = flag("distill", s.distill)?;
    if let Some(v) = kv.get("cache_policy") {
        s.cache_policy = CachePolicy::parse(v)?;
    }
    s.test_fraction = kv.optional("test_fraction")?.unwrap_or(s.test_fraction);
    s.hog = HogConfig {
        cell_size: kv.optional("hog_cell_size")?.unwrap_or(s.hog.cell_size),
        bins: kv.optional("hog_bins")?.unwrap_or(s.hog.bins),
        signed: flag("hog_signed", s.hog.signed)?,
    };
    s.seed = kv.optional("seed")?.unwrap_or(s.seed);
    if kv.get("method") == Some("clgid-fast") {
        s.speedup = true;
    }
    Ok(s)
}

fn dataset_from_kv(kv: &KvFile, id: &str, index: usize, seed: u64) -> Result<DatasetSpec> {
    let prefix = format!("{id}.");
    let key = |k: &str| format!("{prefix}{k}");
    let mut merged = KvFile::new();
    if let Some(preset) = kv.get(&key("preset")) {
        let angle: f64 = kv.require(&key("angle_mean"))?;
        let rain = match preset {
            "heavy" => RainParams::heavy(angle),
            "light" => RainParams::light(angle),
            other => {
                return Err(Error::Config(format!(
                    "dataset `{id}`: unknown preset `{other}` (expected heavy or light)"
                )))
            }
        };
        let mut base = KvFile::new();
        DatasetSpec::new(id, 1, rain, 0).write_kv(&prefix, &mut base);
        for (k, v) in base.entries() {
            if ![key("pairs"), key("seed"), key("image_size")].contains(k) {
                merged.push(k.clone(), v);
            }
        }
    }
    if kv.get(&key("seed")).is_none() {
        merged.push(key("seed"), rng::derive2(seed, label::DATASET, index as u64));
    }
    for (k, v) in kv.entries() {
        if k.starts_with(&prefix) && *k != key("preset") {
            merged.push(k.clone(), v);
        }
    }
    DatasetSpec::read_kv(id, &prefix, &merged)
}
