use rand::Rng;

use super::{sample_rain, MemoryGenerator};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::rng::{self, label};
use crate::synthdata::{Pair, RainDataset};

/// Splits `total` across `parts` as evenly as possible; the remainder goes
/// one each to the lowest indices.
pub fn even_split(total: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let (base, rem) = (total / parts, total % parts);
    (0..parts).map(|i| base + usize::from(i < rem)).collect()
}

/// A replayed pair tagged with the index of the generator that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayPair {
    pub pair: Pair,
    pub generator: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayDataset {
    pub pairs: Vec<ReplayPair>,
}

impl ReplayDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs produced by generator `i`.
    pub fn subset(&self, i: usize) -> impl Iterator<Item = &Pair> {
        self.pairs
            .iter()
            .filter(move |p| p.generator == i)
            .map(|p| &p.pair)
    }

    /// Number of pairs per generator index, for `generators` generators.
    pub fn counts(&self, generators: usize) -> Vec<usize> {
        let mut counts = vec![0; generators];
        for p in &self.pairs {
            if p.generator < generators {
                counts[p.generator] += 1;
            }
        }
        counts
    }

    pub fn rainy_images(&self) -> Vec<&Image> {
        self.pairs.iter().map(|p| &p.pair.rainy).collect()
    }
}

/// The `index`-th replay sample of generator `generator`: a latent drawn
/// from N(0, I), its rain layer, and a clean background chosen uniformly
/// (with replacement) from `current`, composed additively.
pub fn replay_sample(
    gen: &MemoryGenerator,
    generator: usize,
    index: usize,
    current: &RainDataset,
    seed: u64,
) -> Result<ReplayPair> {
    if current.is_empty() {
        return Err(Error::Precondition("current dataset has no pairs".into()));
    }
    let mut rng = rng::rng(rng::derive2(
        rng::derive(seed, label::REPLAY),
        generator as u64,
        index as u64,
    ));
    let z = gen.draw_latent(&mut rng);
    let background = &current.pairs[rng.random_range(0..current.len())].clean;
    let rain = sample_rain(gen, &z, background.height())?;
    Ok(ReplayPair {
        pair: Pair::compose(background.clone(), rain)?,
        generator,
    })
}

/// Replay set of `|current|` pairs drawn evenly from `gens`.
pub fn build_replay_dataset(
    gens: &[MemoryGenerator],
    current: &RainDataset,
    seed: u64,
) -> Result<ReplayDataset> {
    if gens.is_empty() {
        return Err(Error::Precondition("replay needs at least one generator".into()));
    }
    let counts = even_split(current.len(), gens.len());
    let mut pairs = Vec::with_capacity(current.len());
    for (i, (gen, &count)) in gens.iter().zip(&counts).enumerate() {
        for j in 0..count {
            pairs.push(replay_sample(gen, i, j, current, seed)?);
        }
    }
    Ok(ReplayDataset { pairs })
}
