use std::fs;
use std::path::Path;

use super::{DatasetSpec, DatasetStream, RainDataset, RainParams, DEFAULT_IMAGE_SIZE};
use crate::error::{Error, Result};
use crate::imaging::write_ppm;
use crate::kv::KvFile;

const RAIN_KEYS: [&str; 8] = [
    "angle_mean",
    "angle_std",
    "length_mean",
    "length_std",
    "width",
    "density",
    "intensity_mean",
    "intensity_std",
];

/// Keys accepted for one dataset (before any `<id>.` prefix).
pub fn dataset_keys() -> Vec<String> {
    let mut keys: Vec<String> = ["id", "pairs", "image_size", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    keys.extend(RAIN_KEYS.iter().map(|k| k.to_string()));
    keys.extend(RAIN_KEYS.iter().map(|k| format!("alt.{k}")));
    keys
}

fn rain_to_kv(p: &RainParams, prefix: &str, kv: &mut KvFile) {
    let values = [
        p.angle_mean,
        p.angle_std,
        p.length_mean,
        p.length_std,
        p.width,
        p.density,
        p.intensity_mean,
        p.intensity_std,
    ];
    for (k, v) in RAIN_KEYS.iter().zip(values) {
        kv.push(format!("{prefix}{k}"), v);
    }
}

fn rain_from_kv(kv: &KvFile, prefix: &str) -> Result<RainParams> {
    let get = |k: &str| kv.require::<f64>(&format!("{prefix}{k}"));
    Ok(RainParams {
        angle_mean: get("angle_mean")?,
        angle_std: get("angle_std")?,
        length_mean: get("length_mean")?,
        length_std: get("length_std")?,
        width: get("width")?,
        density: get("density")?,
        intensity_mean: get("intensity_mean")?,
        intensity_std: get("intensity_std")?,
    })
}

impl DatasetSpec {
    /// Appends this spec's keys, each prefixed with `prefix`.
    pub fn write_kv(&self, prefix: &str, kv: &mut KvFile) {
        kv.push(format!("{prefix}pairs"), self.pair_count);
        kv.push(format!("{prefix}image_size"), self.image_size);
        kv.push(format!("{prefix}seed"), self.seed);
        rain_to_kv(&self.rain, prefix, kv);
        if let Some(alt) = &self.alt_rain {
            rain_to_kv(alt, &format!("{prefix}alt."), kv);
        }
    }

    /// Reads a spec whose keys carry `prefix`; `image_size` defaults to 64.
    pub fn read_kv(id: &str, prefix: &str, kv: &KvFile) -> Result<Self> {
        let alt_prefix = format!("{prefix}alt.");
        let has_alt = kv.keys().any(|k| k.starts_with(&alt_prefix));
        let spec = DatasetSpec {
            id: id.to_string(),
            pair_count: kv.require(&format!("{prefix}pairs"))?,
            image_size: kv
                .optional(&format!("{prefix}image_size"))?
                .unwrap_or(DEFAULT_IMAGE_SIZE),
            seed: kv.require(&format!("{prefix}seed"))?,
            rain: rain_from_kv(kv, prefix)?,
            alt_rain: if has_alt {
                Some(rain_from_kv(kv, &alt_prefix)?)
            } else {
                None
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn write_spec_file(spec: &DatasetSpec, path: impl AsRef<Path>) -> Result<()> {
    let mut kv = KvFile::new();
    kv.push("id", &spec.id);
    spec.write_kv("", &mut kv);
    let path = path.as_ref();
    fs::write(path, kv.render()).map_err(|e| Error::io(path, e))
}

pub fn read_spec_file(path: impl AsRef<Path>) -> Result<DatasetSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let kv = KvFile::parse(&text)?;
    let allowed = dataset_keys();
    if let Some(k) = kv.keys().find(|k| !allowed.iter().any(|a| a == k)) {
        return Err(Error::UnknownKey(k.to_string()));
    }
    let id: String = kv.require("id")?;
    DatasetSpec::read_kv(&id, "", &kv)
}

/// Writes `<root>/<id>/<m>_rain.ppm`, `<m>_clean.ppm` and `spec.txt`.
pub fn export_dataset(ds: &RainDataset, root: impl AsRef<Path>) -> Result<()> {
    let dir = root.as_ref().join(ds.id());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (m, pair) in ds.pairs.iter().enumerate() {
        write_ppm(&pair.rainy, dir.join(format!("{m}_rain.ppm")))?;
        write_ppm(&pair.clean, dir.join(format!("{m}_clean.ppm")))?;
    }
    write_spec_file(&ds.spec, dir.join("spec.txt"))
}

pub fn export_stream(stream: &DatasetStream, root: impl AsRef<Path>) -> Result<()> {
    stream.iter().try_for_each(|ds| export_dataset(ds, root.as_ref()))
}
