//! Synthetic low-light degradation followed by blockwise compression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::codec::compress;
use crate::error::{Error, Result};
use crate::image::{unit_to_u8, Image};

pub const GAMMA_RANGE: (f64, f64) = (1.8, 2.6);
pub const EXPOSURE_RANGE: (f64, f64) = (0.1, 0.4);
pub const NOISE_RANGE: (f64, f64) = (0.0, 0.02);
pub const QUALITY_CHOICES: [u32; 4] = [60, 70, 80, 90];

const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeParams {
    pub gamma: f64,
    pub exposure: f64,
    pub noise_sigma: f64,
    pub qf: u32,
    /// Scene seed; the sensor-noise stream is derived from it.
    pub seed: u64,
}

impl DegradeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 1.0) {
            return Err(Error::Usage(format!("gamma {} must be >= 1", self.gamma)));
        }
        if !(self.exposure > 0.0 && self.exposure <= 1.0) {
            return Err(Error::Usage(format!("exposure {} must lie in (0, 1]", self.exposure)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Usage(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if !(1..=100).contains(&self.qf) {
            return Err(Error::Usage(format!("quality factor {} outside [1, 100]", self.qf)));
        }
        Ok(())
    }

    /// Draws parameters from the documented per-scene ranges.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        DegradeParams {
            gamma: rng.gen_range(GAMMA_RANGE.0..GAMMA_RANGE.1),
            exposure: rng.gen_range(EXPOSURE_RANGE.0..EXPOSURE_RANGE.1),
            noise_sigma: rng.gen_range(NOISE_RANGE.0..NOISE_RANGE.1),
            qf: QUALITY_CHOICES[rng.gen_range(0..QUALITY_CHOICES.len())],
            seed: rng.gen(),
        }
    }
}

/// Noise-free darkening of one unit-interval sample.
pub fn darken_value(v: f64, gamma: f64, exposure: f64) -> f64 {
    exposure * v.powf(gamma)
}

/// Dark but uncompressed rendition: `clamp(exposure·v^γ + N(0, σ))`.
pub fn darken(normal: &Image, p: &DegradeParams) -> Result<Image> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(NOISE_STREAM);
    let noise = Normal::new(0.0, p.noise_sigma.max(f64::MIN_POSITIVE)).expect("sigma is finite");
    let data = normal
        .planar()
        .iter()
        .map(|&v| {
            let mut d = darken_value(v as f64 / 255.0, p.gamma, p.exposure);
            if p.noise_sigma > 0.0 {
                d += noise.sample(&mut rng);
            }
            unit_to_u8(d)
        })
        .collect();
    Image::from_planar(normal.width(), normal.height(), data)
}

/// Full degradation: darken, add noise, then compress at `qf`.
pub fn degrade(normal: &Image, p: &DegradeParams) -> Result<Image> {
    compress(&darken(normal, p)?, p.qf)
}
