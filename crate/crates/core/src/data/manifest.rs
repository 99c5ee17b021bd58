//! Paired dataset manifests and on-disk dataset generation.
//!
//! A manifest is line-oriented text. The header carries the global seed and
//! scene extents; each record line is
//! `<split>\t<normal>\t<dark>\t<seed>\t<gamma>\t<exposure>\t<sigma>\t<qf>`
//! with paths relative to the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::degrade::{degrade, DegradeParams};
use super::synth::synth_scene;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::ppm::{load_ppm, save_ppm};

const HEADER_TAG: &str = "# mlsm-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{}'", other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub split: Split,
    pub normal: PathBuf,
    pub dark: PathBuf,
    pub params: DegradeParams,
}

/// Sizes and seed of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec { seed: 0, width: 64, height: 64, train: 64, val: 8, test: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub records: Vec<ManifestRecord>,
}

/// One loaded training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub compressed_dark: Image,
    pub normal: Image,
    pub params: DegradeParams,
}

impl PairedSample {
    /// Renders the pair described by `params` entirely in memory.
    pub fn synthesize(params: DegradeParams, width: usize, height: usize) -> Result<Self> {
        let normal = synth_scene(params.seed, width, height)?;
        let compressed_dark = degrade(&normal, &params)?;
        Ok(PairedSample { compressed_dark, normal, params })
    }
}

impl DatasetManifest {
    /// Draws every record's parameters from `spec.seed`; no files are touched.
    pub fn plan(spec: &DatasetSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let splits = [(Split::Train, spec.train), (Split::Val, spec.val), (Split::Test, spec.test)];
        let mut records = Vec::new();
        let mut index = 0usize;
        for (split, count) in splits {
            for _ in 0..count {
                let mut params = DegradeParams::sample(&mut rng);
                // scene seeds are unique per record so splits never share content
                params.seed = (params.seed & !0xFFFF_FFFF) | index as u64;
                records.push(ManifestRecord {
                    split,
                    normal: PathBuf::from(format!("{}/normal/{:05}.ppm", split.as_str(), index)),
                    dark: PathBuf::from(format!("{}/dark/{:05}.ppm", split.as_str(), index)),
                    params,
                });
                index += 1;
            }
        }
        DatasetManifest { seed: spec.seed, width: spec.width, height: spec.height, records }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} seed={} width={} height={}\n", HEADER_TAG, self.seed, self.width, self.height);
        for r in &self.records {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.split,
                r.normal.display(),
                r.dark.display(),
                r.params.seed,
                r.params.gamma,
                r.params.exposure,
                r.params.noise_sigma,
                r.params.qf
            ));
        }
        s
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut offset = 0usize;
        let mut lines = text.split_inclusive('\n');
        let header = lines.next().ok_or_else(|| Error::parse(context, 0, "empty manifest"))?;
        let rest = header
            .trim_end()
            .strip_prefix(HEADER_TAG)
            .ok_or_else(|| Error::parse(context, 0, "missing manifest header"))?;
        let (mut seed, mut width, mut height) = (None, None, None);
        for field in rest.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(context, 0, format!("bad header field '{}'", field)))?;
            let bad = || Error::parse(context, 0, format!("bad header value '{}'", field));
            match key {
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                "width" => width = Some(value.parse::<usize>().map_err(|_| bad())?),
                "height" => height = Some(value.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(Error::parse(context, 0, format!("unknown header key '{}'", key))),
            }
        }
        let missing = |k: &str| Error::parse(context, 0, format!("header lacks {}", k));
        let mut manifest = DatasetManifest {
            seed: seed.ok_or_else(|| missing("seed"))?,
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            records: Vec::new(),
        };
        offset += header.len();

        for line in lines {
            let start = offset;
            offset += line.len();
            let body = line.trim_end_matches(['\n', '\r']);
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = body.split('\t').collect();
            if cols.len() != 8 {
                return Err(Error::parse(
                    context,
                    start,
                    format!("expected 8 tab-separated fields, found {}", cols.len()),
                ));
            }
            let bad = |what: &str, v: &str| Error::parse(context, start, format!("invalid {} '{}'", what, v));
            let split: Split = cols[0].parse().map_err(|m: String| Error::parse(context, start, m))?;
            let params = DegradeParams {
                seed: cols[3].parse().map_err(|_| bad("seed", cols[3]))?,
                gamma: cols[4].parse().map_err(|_| bad("gamma", cols[4]))?,
                exposure: cols[5].parse().map_err(|_| bad("exposure", cols[5]))?,
                noise_sigma: cols[6].parse().map_err(|_| bad("sigma", cols[6]))?,
                qf: cols[7].parse().map_err(|_| bad("qf", cols[7]))?,
            };
            params.validate().map_err(|e| Error::parse(context, start, e.to_string()))?;
            manifest.records.push(ManifestRecord { split, normal: cols[1].into(), dark: cols[2].into(), params });
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Renders every record in memory.
    pub fn synthesize(&self, split: Split) -> Result<Vec<PairedSample>> {
        self.split(split).map(|r| PairedSample::synthesize(r.params, self.width, self.height)).collect()
    }
}

/// Writes all images plus `manifest.tsv` under `dir` and returns the manifest.
pub fn generate_dataset(dir: impl AsRef<Path>, spec: &DatasetSpec) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let manifest = DatasetManifest::plan(spec);
    for r in &manifest.records {
        for p in [&r.normal, &r.dark] {
            let parent = dir.join(p.parent().expect("record paths have a directory"));
            fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        }
        let pair = PairedSample::synthesize(r.params, spec.width, spec.height)?;
        save_ppm(&pair.normal, dir.join(&r.normal))?;
        save_ppm(&pair.compressed_dark, dir.join(&r.dark))?;
    }
    manifest.save(dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Loads the pairs of one split, resolving paths against the manifest's directory.
pub fn load_split(manifest_path: impl AsRef<Path>, split: Split) -> Result<Vec<PairedSample>> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    manifest
        .split(split)
        .map(|r| {
            let normal = load_ppm(base.join(&r.normal))?;
            let compressed_dark = load_ppm(base.join(&r.dark))?;
            if normal.dims() != compressed_dark.dims() {
                return Err(Error::Mismatch(format!(
                    "{} is {:?} but {} is {:?}",
                    r.normal.display(),
                    normal.dims(),
                    r.dark.display(),
                    compressed_dark.dims()
                )));
            }
            Ok(PairedSample { compressed_dark, normal, params: r.params })
        })
        .collect()
}
