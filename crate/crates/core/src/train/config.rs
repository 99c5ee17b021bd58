//! Hyperparameters as `key = value` text, with named profiles.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mapping::MappingShape;
use crate::vae::{LossWeights, VaeShape, PERCEPTUAL_SEED};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub profile: String,
    pub k: usize,
    pub base_channels: usize,
    pub lr: f64,
    /// Steps over which the rate decays linearly to zero; 0 means the
    /// stage's own step count.
    pub horizon: usize,
    pub batch: usize,
    pub crop: usize,
    pub epochs_vae: usize,
    pub epochs_mapping: usize,
    pub weights: LossWeights,
    pub clip_norm: f64,
    pub seed_init: u64,
    pub seed_data: u64,
    pub seed_noise: u64,
    pub perceptual_seed: u64,
    /// Levels with a mapping network, e.g. `{2}`, `{1, 2}`, `{0, 1, 2}`.
    pub active_levels: Vec<usize>,
    pub attention: bool,
    /// Epochs between checkpoint writes; 0 writes only at the end.
    pub checkpoint_every: usize,
    /// Append a SHA-256 trailer to checkpoints.
    pub checksum: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}

impl TrainConfig {
    /// Minutes-scale defaults for a 64-pair synthetic corpus.
    pub fn desk() -> Self {
        TrainConfig {
            profile: "desk".into(),
            k: 3,
            base_channels: 16,
            lr: 2e-4,
            horizon: 0,
            batch: 4,
            crop: 32,
            epochs_vae: 60,
            epochs_mapping: 40,
            weights: LossWeights::default(),
            clip_norm: 5.0,
            seed_init: 1,
            seed_data: 2,
            seed_noise: 3,
            perceptual_seed: PERCEPTUAL_SEED,
            active_levels: vec![0, 1, 2],
            attention: false,
            checkpoint_every: 0,
            checksum: true,
        }
    }

    /// The full-length schedule: 64×64 crops, batch 16, 1000 + 500 epochs.
    pub fn paper() -> Self {
        TrainConfig {
            profile: "paper".into(),
            batch: 16,
            crop: 64,
            epochs_vae: 1000,
            epochs_mapping: 500,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Usage(format!("unknown profile '{}' (expected desk or paper)", other))),
        }
    }

    pub fn vae_shape(&self) -> Result<VaeShape> {
        VaeShape::doubling(self.k, self.base_channels)
    }

    pub fn mapping_shape(&self) -> Result<MappingShape> {
        let shape = self.vae_shape()?;
        Ok(MappingShape { channels: shape.channels, active: self.active_levels.clone(), attention: self.attention })
    }

    /// Sets the active levels to the top `count`.
    pub fn with_top_levels(mut self, count: usize) -> Result<Self> {
        self.active_levels = MappingShape::top_levels(vec![0; self.k], count, self.attention)?.active;
        Ok(self)
    }

    /// Seeds shifted by `rep` for repeated runs.
    pub fn repetition(&self, rep: u64) -> Self {
        TrainConfig {
            seed_init: self.seed_init.wrapping_add(rep),
            seed_data: self.seed_data.wrapping_add(rep),
            seed_noise: self.seed_noise.wrapping_add(rep),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(m));
        if self.k == 0 || self.base_channels == 0 {
            return bad("k and base_channels must be positive".into());
        }
        if self.batch == 0 || self.crop == 0 {
            return bad("batch and crop must be positive".into());
        }
        let divisor = 1usize << (self.k - 1);
        if self.crop % divisor != 0 {
            return bad(format!("crop {} is not a multiple of {}", self.crop, divisor));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad(format!("learning rate {} is not a nonnegative number", self.lr));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm {} must be positive", self.clip_norm));
        }
        let w = self.weights;
        if [w.perceptual, w.gan, w.kl].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("loss weights must be finite and nonnegative".into());
        }
        if self.active_levels.is_empty() {
            return bad("at least one mapping level must be active".into());
        }
        if let Some(l) = self.active_levels.iter().find(|&&l| l >= self.k) {
            return bad(format!("active level {} does not exist (k = {})", l, self.k));
        }
        Ok(())
    }

    /// Canonical text form; [`TrainConfig::parse`] reads it back exactly.
    pub fn to_text(&self) -> String {
        let levels: Vec<String> = self.active_levels.iter().map(|l| l.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{}={}", k, v);
        };
        kv("profile", self.profile.clone());
        kv("k", self.k.to_string());
        kv("base_channels", self.base_channels.to_string());
        kv("lr", self.lr.to_string());
        kv("horizon", self.horizon.to_string());
        kv("batch", self.batch.to_string());
        kv("crop", self.crop.to_string());
        kv("epochs_vae", self.epochs_vae.to_string());
        kv("epochs_mapping", self.epochs_mapping.to_string());
        kv("w_p", self.weights.perceptual.to_string());
        kv("w_g", self.weights.gan.to_string());
        kv("w_kl", self.weights.kl.to_string());
        kv("clip_norm", self.clip_norm.to_string());
        kv("seed_init", self.seed_init.to_string());
        kv("seed_data", self.seed_data.to_string());
        kv("seed_noise", self.seed_noise.to_string());
        kv("perceptual_seed", self.perceptual_seed.to_string());
        kv("active_levels", levels.join(","));
        kv("attention", self.attention.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("checksum", self.checksum.to_string());
        s
    }

    /// Parses `key = value` lines (`#` starts a comment). A `profile` line
    /// selects the base values; other keys override it in any order.
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut offset = 0;
        for raw in text.split_inclusive('\n') {
            let start = offset;
            offset += raw.len();
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(context, start, format!("expected key=value, got '{}'", line)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string(), start));
        }
        let mut cfg = match pairs.iter().find(|(k, _, _)| k == "profile") {
            Some((_, v, at)) => Self::profile(v).map_err(|e| Error::parse(context, *at, bare(e)))?,
            None => Self::desk(),
        };
        for (k, v, at) in &pairs {
            cfg.set(k, v).map_err(|e| Error::parse(context, *at, bare(e)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value.parse().map_err(|_| Error::Usage(format!("invalid value '{}' for {}", value, key)))
        }
        match key {
            "profile" => {}
            "k" => self.k = num(key, value)?,
            "base_channels" => self.base_channels = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "crop" => self.crop = num(key, value)?,
            "epochs_vae" => self.epochs_vae = num(key, value)?,
            "epochs_mapping" => self.epochs_mapping = num(key, value)?,
            "w_p" => self.weights.perceptual = num(key, value)?,
            "w_g" => self.weights.gan = num(key, value)?,
            "w_kl" => self.weights.kl = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "seed_init" => self.seed_init = num(key, value)?,
            "seed_data" => self.seed_data = num(key, value)?,
            "seed_noise" => self.seed_noise = num(key, value)?,
            "perceptual_seed" => self.perceptual_seed = num(key, value)?,
            "active_levels" => {
                self.active_levels = value.split(',').map(|p| num(key, p.trim())).collect::<Result<Vec<usize>>>()?;
                self.active_levels.sort_unstable();
                self.active_levels.dedup();
            }
            "attention" => self.attention = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "checksum" => self.checksum = num(key, value)?,
            other => return Err(Error::Usage(format!("unknown config key '{}'", other))),
        }
        Ok(())
    }

    /// Sets all three seeds from one value.
    pub fn reseed(&mut self, seed: u64) {
        self.seed_init = seed;
        self.seed_data = seed.wrapping_add(1);
        self.seed_noise = seed.wrapping_add(2);
    }
}

fn bare(e: Error) -> String {
    match e {
        Error::Usage(m) => m,
        other => other.to_string(),
    }
}

/// `lr·max(0, 1 − step/horizon)`.
pub fn lr_at(step: usize, base: f64, horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    base * (1.0 - step as f64 / horizon as f64).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::paper();
        cfg.active_levels = vec![1, 2];
        cfg.weights.kl = 0.125;
        cfg.attention = true;
        assert_eq!(TrainConfig::parse(&cfg.to_text(), "t").unwrap(), cfg);
    }

    #[test]
    fn profile_applies_before_overrides() {
        let cfg = TrainConfig::parse("crop = 16\n# comment\nprofile = paper\n", "t").unwrap();
        assert_eq!(cfg.crop, 16);
        assert_eq!(cfg.batch, 16);
        assert_eq!(cfg.epochs_vae, 1000);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match TrainConfig::parse("k=3\nbogus=1\n", "cfg") {
            Err(Error::Parse { offset, message, .. }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("bogus"));
            }
            other => panic!("{:?}", other.map(|_| ())),
        }
        assert!(TrainConfig::parse("lr 3\n", "cfg").is_err());
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::desk().validate().is_ok());
        let mut c = TrainConfig::desk();
        c.crop = 30;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::desk();
        c.active_levels = vec![3];
        assert!(c.validate().is_err());
        assert_eq!(TrainConfig::desk().with_top_levels(2).unwrap().active_levels, vec![1, 2]);
    }

    #[test]
    fn schedule_points() {
        assert_eq!(lr_at(0, 2e-4, 100), 2e-4);
        assert_eq!(lr_at(100, 2e-4, 100), 0.0);
        assert_eq!(lr_at(50, 2e-4, 100), 1e-4);
        assert_eq!(lr_at(150, 2e-4, 100), 0.0);
    }
}
