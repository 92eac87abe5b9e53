//! Stage loop over a dataset stream and the two baselines.

use rayon::prelude::*;

use super::report::{MemoryEntry, Quality, StageRecord, StreamReport};
use super::similarity::{scaled_iterations, similarity, SimilarityReport};
use super::train::{train_stage, StageInput};
use super::{Method, StageConfig};
use crate::error::{Error, Result};
use crate::imaging::{psnr, ssim};
use crate::memgen::{
    apply_reuse, build_replay_dataset, fit_generator, reuse_plan, select_generator_training,
    MemoryGenerator, ReplayCache, ReplayDataset,
};
use crate::restorer::{forward_macs, predict, RestorerState};
use crate::rng::{self, label};
use crate::synthdata::{DatasetStream, Pair, RainDataset};

/// Mean PSNR and SSIM of the clipped predictions over `pairs`.
pub fn evaluate_quality(state: &RestorerState, pairs: &[Pair]) -> Result<Quality> {
    if pairs.is_empty() {
        return Err(Error::Precondition("no pairs to evaluate".into()));
    }
    let scores = pairs
        .par_iter()
        .map(|p| {
            let y = predict(state, &p.rainy)?;
            Ok((psnr(&y, &p.clean)?, ssim(&y, &p.clean)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = scores.len() as f64;
    let (mut ps, mut ss) = (0.0, 0.0);
    for (p, s) in scores {
        ps += p;
        ss += s;
    }
    Ok(Quality {
        psnr: ps / n,
        ssim: ss / n,
    })
}

/// Training FLOPs of one stage: forward plus backward (about three forward
/// passes, two FLOPs per multiply-accumulate) for every image seen, and one
/// teacher forward per replayed image when distilling.
fn stage_flops(iterations: usize, cfg: &StageConfig, size: usize, replay: bool, distill: bool) -> f64 {
    let fwd = 2.0 * forward_macs(size, size) as f64;
    let per_image = 3.0 * fwd;
    let b = cfg.batch_size as f64;
    let mut per_iter = b * per_image;
    if replay {
        per_iter += b * per_image;
        if distill {
            per_iter += b * fwd;
        }
    }
    iterations as f64 * per_iter
}

fn stage_seed(cfg: &StageConfig, stage: usize) -> u64 {
    rng::derive2(cfg.seed, label::STAGE, stage as u64)
}

fn init_state(cfg: &StageConfig) -> RestorerState {
    RestorerState::init(rng::derive(cfg.seed, label::INIT))
}

struct Splits {
    train: Vec<RainDataset>,
    test: Vec<RainDataset>,
}

fn split_stream(stream: &DatasetStream, cfg: &StageConfig) -> Result<Splits> {
    let mut train = Vec::with_capacity(stream.len());
    let mut test = Vec::with_capacity(stream.len());
    for ds in stream.iter() {
        let (a, b) = ds.split(cfg.test_fraction);
        if a.is_empty() || b.is_empty() {
            return Err(Error::Precondition(format!(
                "dataset `{}` with {} pairs cannot be split into train and test",
                ds.id(),
                ds.len()
            )));
        }
        train.push(a);
        test.push(b);
    }
    Ok(Splits { train, test })
}

fn replay_stage(
    stage: usize,
    gens: &[MemoryGenerator],
    train: &RainDataset,
    cache: ReplayCache,
    cfg: &StageConfig,
) -> Result<(ReplayDataset, ReplayCache, usize)> {
    let seed = rng::derive(cfg.seed, label::REPLAY);
    if cfg.reuse {
        let plan = reuse_plan(&cache, stage, gens.len(), train.len())?;
        apply_reuse(cache, &plan, gens, train, seed)
    } else {
        let replay = build_replay_dataset(gens, train, seed)?;
        let calls = replay.len();
        Ok((replay, cache, calls))
    }
}

/// Continual run with replay, distillation, selective generators and
/// (when `cfg.speedup` is set) similarity-scaled iterations.
pub fn run_stream(
    stream: &DatasetStream,
    holdout: Option<&RainDataset>,
    cfg: &StageConfig,
) -> Result<StreamReport> {
    let method = if cfg.speedup {
        Method::ClgidFast
    } else {
        Method::Clgid
    };
    continual(stream, holdout, cfg, method)
}

/// Sequential fine-tuning: the same loop with replay and distillation off.
pub fn baseline_sf(
    stream: &DatasetStream,
    holdout: Option<&RainDataset>,
    cfg: &StageConfig,
) -> Result<StreamReport> {
    continual(stream, holdout, &Method::Sf.configure(cfg), Method::Sf)
}

pub fn run_method(
    method: Method,
    stream: &DatasetStream,
    holdout: Option<&RainDataset>,
    cfg: &StageConfig,
) -> Result<StreamReport> {
    match method {
        Method::Clgid | Method::ClgidFast => run_stream(stream, holdout, &method.configure(cfg)),
        Method::Sf => baseline_sf(stream, holdout, cfg),
        Method::Individual => baseline_individual(stream, holdout, cfg),
    }
}

fn continual(
    stream: &DatasetStream,
    holdout: Option<&RainDataset>,
    cfg: &StageConfig,
    method: Method,
) -> Result<StreamReport> {
    cfg.validate()?;
    let splits = split_stream(stream, cfg)?;
    let mut state = init_state(cfg);
    let mut prev: Option<RestorerState> = None;
    let mut gens: Vec<MemoryGenerator> = Vec::new();
    let mut cache = ReplayCache::new(cfg.cache_policy);
    let mut report = StreamReport::new(method, stream, cfg.lambda);

    for (idx, train) in splits.train.iter().enumerate() {
        let stage = idx + 1;
        let (replay, calls) = if cfg.replay && !gens.is_empty() {
            let (replay, next, calls) = replay_stage(stage, &gens, train, cache, cfg)?;
            cache = next;
            (Some(replay), calls)
        } else {
            (None, 0)
        };

        let sim = match &replay {
            Some(r) => similarity(train, Some((r, gens.len())), &cfg.hog)?,
            None => SimilarityReport::bootstrap(),
        };
        let iterations = if cfg.speedup {
            scaled_iterations(sim.s_hat, cfg.iterations, cfg.floor)?
        } else {
            cfg.iterations
        };

        let replay_pairs: Vec<Pair> = replay
            .as_ref()
            .map(|r| r.pairs.iter().map(|p| p.pair.clone()).collect())
            .unwrap_or_default();
        let teacher = if cfg.distill { prev.as_ref() } else { None };
        let input = StageInput {
            current: &train.pairs,
            replay: &replay_pairs,
            prev: teacher,
            iterations,
            seed: stage_seed(cfg, stage),
        };
        let losses = train_stage(&mut state, &input, cfg)?;
        let distilled = teacher.is_some() && !replay_pairs.is_empty();

        let delta = stage == 1
            || !cfg.selective
            || select_generator_training(sim.s_hat, cfg.threshold, true)?;
        let mut covered_by = None;
        if cfg.replay {
            if delta {
                gens.push(fit_generator(train)?);
            } else {
                covered_by = sim.nearest;
            }
        }
        prev = Some(state.clone());

        let memory = splits.test[..stage]
            .iter()
            .enumerate()
            .map(|(d, test)| {
                Ok(MemoryEntry {
                    dataset: d,
                    quality: evaluate_quality(&state, &test.pairs)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let size = train.spec.image_size;
        report.push_stage(
            StageRecord {
                stage,
                base_iterations: cfg.iterations,
                iterations,
                sampler_calls: calls,
                replay_size: replay_pairs.len(),
                similarity: sim,
                generator_trained: cfg.replay && delta,
                covered_by,
                generators: gens.len(),
                flops_estimate: stage_flops(
                    iterations,
                    cfg,
                    size,
                    !replay_pairs.is_empty(),
                    distilled,
                ),
                losses,
            },
            memory,
            holdout.map(|h| evaluate_quality(&state, &h.pairs)).transpose()?,
        );
    }
    report.final_state = state;
    Ok(report)
}

/// Similarity of every dataset after the first against replay from
/// generators fitted on all earlier training splits. No restorer is
/// trained; this is the chain a run with every generator kept would see.
pub fn similarity_chain(stream: &DatasetStream, cfg: &StageConfig) -> Result<Vec<SimilarityReport>> {
    cfg.validate()?;
    let splits = split_stream(stream, cfg)?;
    let seed = rng::derive(cfg.seed, label::REPLAY);
    let mut gens = Vec::with_capacity(splits.train.len());
    let mut chain = Vec::with_capacity(splits.train.len());
    for train in &splits.train {
        chain.push(if gens.is_empty() {
            SimilarityReport::bootstrap()
        } else {
            let replay = build_replay_dataset(&gens, train, seed)?;
            similarity(train, Some((&replay, gens.len())), &cfg.hog)?
        });
        gens.push(fit_generator(train)?);
    }
    Ok(chain)
}

/// A fresh restorer per dataset, evaluated on that dataset only.
pub fn baseline_individual(
    stream: &DatasetStream,
    holdout: Option<&RainDataset>,
    cfg: &StageConfig,
) -> Result<StreamReport> {
    let cfg = Method::Individual.configure(cfg);
    cfg.validate()?;
    let splits = split_stream(stream, &cfg)?;
    let mut report = StreamReport::new(Method::Individual, stream, cfg.lambda);
    for (idx, train) in splits.train.iter().enumerate() {
        let stage = idx + 1;
        let mut state = init_state(&cfg);
        let input = StageInput {
            current: &train.pairs,
            replay: &[],
            prev: None,
            iterations: cfg.iterations,
            seed: stage_seed(&cfg, stage),
        };
        let losses = train_stage(&mut state, &input, &cfg)?;
        let memory = vec![MemoryEntry {
            dataset: idx,
            quality: evaluate_quality(&state, &splits.test[idx].pairs)?,
        }];
        report.push_stage(
            StageRecord {
                stage,
                base_iterations: cfg.iterations,
                iterations: cfg.iterations,
                sampler_calls: 0,
                replay_size: 0,
                similarity: SimilarityReport::bootstrap(),
                generator_trained: false,
                covered_by: None,
                generators: 0,
                flops_estimate: stage_flops(cfg.iterations, &cfg, train.spec.image_size, false, false),
                losses,
            },
            memory,
            holdout.map(|h| evaluate_quality(&state, &h.pairs)).transpose()?,
        );
        report.final_state = state;
    }
    Ok(report)
}
