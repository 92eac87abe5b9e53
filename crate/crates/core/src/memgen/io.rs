use std::fs;
use std::path::Path;

use super::{CachePolicy, MemoryGenerator, ReplayCache};
use crate::error::{Error, Result};
use crate::imaging::{read_ppm, write_ppm};
use crate::kv::{self, KvFile};
use crate::synthdata::Pair;

const GENERATOR_KEYS: [&str; 9] = [
    "id",
    "latent_dim",
    "angle_hist",
    "length_mean",
    "length_std",
    "width",
    "density",
    "intensity_mean",
    "intensity_std",
];

pub fn write_generator(gen: &MemoryGenerator, path: impl AsRef<Path>) -> Result<()> {
    let mut file = KvFile::new();
    file.push("id", &gen.id);
    file.push("latent_dim", gen.latent_dim);
    file.push("angle_hist", kv::join(&gen.angle_hist));
    file.push("length_mean", gen.length_mean);
    file.push("length_std", gen.length_std);
    file.push("width", gen.width);
    file.push("density", gen.density);
    file.push("intensity_mean", gen.intensity_mean);
    file.push("intensity_std", gen.intensity_std);
    let path = path.as_ref();
    fs::write(path, file.render()).map_err(|e| Error::io(path, e))
}

pub fn read_generator(path: impl AsRef<Path>) -> Result<MemoryGenerator> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = KvFile::parse(&text)?;
    if let Some(k) = file.keys().find(|k| !GENERATOR_KEYS.contains(k)) {
        return Err(Error::UnknownKey(k.to_string()));
    }
    let hist_raw: String = file.require("angle_hist")?;
    let gen = MemoryGenerator {
        id: file.require("id")?,
        latent_dim: file.require("latent_dim")?,
        angle_hist: kv::parse_list("angle_hist", &hist_raw)?,
        length_mean: file.require("length_mean")?,
        length_std: file.require("length_std")?,
        width: file.require("width")?,
        density: file.require("density")?,
        intensity_mean: file.require("intensity_mean")?,
        intensity_std: file.require("intensity_std")?,
    };
    gen.validate()?;
    Ok(gen)
}

/// Writes `<dir>/manifest.txt` plus `<dir>/g<i>/<j>_{rain,clean,layer}.ppm`.
/// Pixels are stored at 8 bits, so a loaded cache is the quantized cache.
pub fn save_cache(cache: &ReplayCache, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = KvFile::new();
    manifest.push("stage", cache.stage());
    manifest.push("policy", cache.policy().name());
    manifest.push("counts", kv::join(&cache.counts()));
    for i in 0..cache.generators() {
        let sub = dir.join(format!("g{i}"));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for (j, p) in cache.pairs(i).iter().enumerate() {
            write_ppm(&p.rainy, sub.join(format!("{j}_rain.ppm")))?;
            write_ppm(&p.clean, sub.join(format!("{j}_clean.ppm")))?;
            write_ppm(&p.rain, sub.join(format!("{j}_layer.ppm")))?;
        }
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest.render()).map_err(|e| Error::io(&path, e))
}

pub fn load_cache(dir: impl AsRef<Path>) -> Result<ReplayCache> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = KvFile::parse(&text)?;
    let stage: usize = manifest.require("stage")?;
    let policy = CachePolicy::parse(&manifest.require::<String>("policy")?)?;
    let counts: Vec<usize> = kv::parse_list("counts", &manifest.require::<String>("counts")?)?;
    let mut entries = Vec::with_capacity(counts.len());
    for (i, &n) in counts.iter().enumerate() {
        let sub = dir.join(format!("g{i}"));
        let pairs = (0..n)
            .map(|j| {
                Ok(Pair {
                    rainy: read_ppm(sub.join(format!("{j}_rain.ppm")))?,
                    clean: read_ppm(sub.join(format!("{j}_clean.ppm")))?,
                    rain: read_ppm(sub.join(format!("{j}_layer.ppm")))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push(pairs);
    }
    Ok(ReplayCache::from_parts(entries, stage, policy))
}
