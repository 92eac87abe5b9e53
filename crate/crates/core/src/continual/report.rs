//! Run results and their CSV form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Method, SimilarityReport};
use crate::error::{Error, Result};
use crate::restorer::{LossBreakdown, RestorerState};
use crate::synthdata::DatasetStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quality {
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryEntry {
    /// Zero-based position of the dataset in the stream.
    pub dataset: usize,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// One-based stage number.
    pub stage: usize,
    pub base_iterations: usize,
    pub iterations: usize,
    pub sampler_calls: usize,
    pub replay_size: usize,
    pub similarity: SimilarityReport,
    pub generator_trained: bool,
    /// Generator standing in for this dataset when none was fitted.
    pub covered_by: Option<usize>,
    /// Generators available after the stage.
    pub generators: usize,
    pub flops_estimate: f64,
    pub losses: Vec<LossBreakdown>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamReport {
    pub method: Method,
    pub dataset_ids: Vec<String>,
    pub lambda: f64,
    /// Row `k` holds the test quality of every dataset seen by stage `k + 1`.
    pub memory: Vec<Vec<MemoryEntry>>,
    /// Hold-out quality after each stage; empty without a hold-out set.
    pub holdout: Vec<Quality>,
    pub stages: Vec<StageRecord>,
    pub final_state: RestorerState,
}

impl StreamReport {
    pub(crate) fn new(method: Method, stream: &DatasetStream, lambda: f64) -> Self {
        StreamReport {
            method,
            dataset_ids: stream.iter().map(|d| d.id().to_string()).collect(),
            lambda,
            memory: Vec::new(),
            holdout: Vec::new(),
            stages: Vec::new(),
            final_state: RestorerState::zeros(),
        }
    }

    pub(crate) fn push_stage(
        &mut self,
        record: StageRecord,
        memory: Vec<MemoryEntry>,
        holdout: Option<Quality>,
    ) {
        self.stages.push(record);
        self.memory.push(memory);
        self.holdout.extend(holdout);
    }

    /// Test PSNR of `dataset` after `stage` (both zero-based).
    pub fn memory_psnr(&self, stage: usize, dataset: usize) -> Option<f64> {
        self.memory
            .get(stage)?
            .iter()
            .find(|e| e.dataset == dataset)
            .map(|e| e.quality.psnr)
    }

    /// Mean test PSNR over the datasets evaluated after `stage`.
    pub fn average_memory_psnr(&self, stage: usize) -> Option<f64> {
        let row = self.memory.get(stage)?;
        if row.is_empty() {
            return None;
        }
        Some(row.iter().map(|e| e.quality.psnr).sum::<f64>() / row.len() as f64)
    }

    pub fn final_average_memory_psnr(&self) -> Option<f64> {
        self.average_memory_psnr(self.memory.len().checked_sub(1)?)
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    pub fn total_sampler_calls(&self) -> usize {
        self.stages.iter().map(|s| s.sampler_calls).sum()
    }

    pub fn generators_trained(&self) -> usize {
        self.stages.iter().filter(|s| s.generator_trained).count()
    }

    pub fn memory_csv(&self) -> String {
        let mut out = String::from("stage,dataset,psnr,ssim\n");
        for (k, row) in self.memory.iter().enumerate() {
            for e in row {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6}",
                    k + 1,
                    self.dataset_ids[e.dataset],
                    e.quality.psnr,
                    e.quality.ssim
                );
            }
        }
        out
    }

    pub fn generalization_csv(&self) -> String {
        let mut out = String::from("stage,psnr,ssim\n");
        for (k, q) in self.holdout.iter().enumerate() {
            let _ = writeln!(out, "{},{:.6},{:.6}", k + 1, q.psnr, q.ssim);
        }
        out
    }

    pub fn cost_csv(&self) -> String {
        let mut out = String::from("stage,iterations,sampler_calls,flops_estimate\n");
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{},{},{},{:.6e}",
                s.stage, s.iterations, s.sampler_calls, s.flops_estimate
            );
        }
        out
    }

    /// Per-stage similarity chain and generator decisions.
    pub fn stages_csv(&self) -> String {
        let mut out =
            String::from("stage,dataset,s,s_hat,delta,covered_by,generators,replay_size\n");
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{},{}",
                s.stage,
                self.dataset_ids[s.stage - 1],
                s.similarity.s,
                s.similarity.s_hat,
                u8::from(s.generator_trained),
                s.covered_by.map_or_else(String::new, |g| g.to_string()),
                s.generators,
                s.replay_size
            );
        }
        out
    }

    /// Every logged step, with values printed exactly.
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("stage,iteration,l_new,l_replay,l_interleave,l_consist,l_total\n");
        for s in &self.stages {
            for (i, l) in s.losses.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{:e},{:e},{:e},{:e},{:e}",
                    s.stage, i, l.l_new, l.l_replay, l.l_interleave, l.l_consist, l.l_total
                );
            }
        }
        out
    }
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_memory_csv(report: &StreamReport, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), report.memory_csv())
}

pub fn write_generalization_csv(report: &StreamReport, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), report.generalization_csv())
}

pub fn write_cost_csv(report: &StreamReport, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), report.cost_csv())
}

pub fn write_losses_csv(report: &StreamReport, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), report.losses_csv())
}

/// Writes `memory.csv`, `generalization.csv`, `cost.csv`, `stages.csv` and
/// `losses.csv` into `dir`.
pub fn write_reports(report: &StreamReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_memory_csv(report, dir.join("memory.csv"))?;
    write_generalization_csv(report, dir.join("generalization.csv"))?;
    write_cost_csv(report, dir.join("cost.csv"))?;
    write(&dir.join("stages.csv"), report.stages_csv())?;
    write_losses_csv(report, dir.join("losses.csv"))
}
