//! Held-out evaluation, the latent-versus-image MSE diagnostic and the
//! mapping-level ablation.

use std::path::Path;

use super::config::TrainConfig;
use super::stage2::train_stage2;
use crate::data::{darken, PairedSample};
use crate::error::Result;
use crate::mapping::{enhance_image, MappingNet};
use crate::metrics::{evaluate_pair, mse, summarize, CorpusSummary, MetricReport};
use crate::vae::{Sampling, Vae};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEval {
    /// Compressed-dark input against the normal reference.
    pub baseline: MetricReport,
    pub enhanced: MetricReport,
    pub luma_enhanced: f64,
    pub luma_reference: f64,
}

pub fn evaluate_enhancement(
    dark: &Vae<f32>,
    normal: &Vae<f32>,
    mapping: &MappingNet<f32>,
    samples: &[PairedSample],
) -> Result<Vec<PairEval>> {
    samples
        .iter()
        .map(|s| {
            let out = enhance_image(&s.compressed_dark, dark, normal, mapping)?;
            Ok(PairEval {
                baseline: evaluate_pair(&s.compressed_dark, &s.normal)?,
                enhanced: evaluate_pair(&out, &s.normal)?,
                luma_enhanced: out.mean_unit(),
                luma_reference: s.normal.mean_unit(),
            })
        })
        .collect()
}

/// Corpus means of `(baseline, enhanced)`.
pub fn summarize_evals(rows: &[PairEval]) -> (CorpusSummary, CorpusSummary) {
    let base: Vec<MetricReport> = rows.iter().map(|r| r.baseline).collect();
    let enh: Vec<MetricReport> = rows.iter().map(|r| r.enhanced).collect();
    (summarize(&base), summarize(&enh))
}

/// MSE between compressed and uncompressed dark variants of the same scenes,
/// in image space (unit interval) and in the dark encoder's latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGap {
    pub image_mse: f64,
    /// Mean over levels of the per-level latent MSE.
    pub latent_mse: f64,
    pub per_level: Vec<f64>,
}

impl LatentGap {
    pub fn ratio(&self) -> f64 {
        self.latent_mse / self.image_mse
    }
}

pub fn latent_image_gap(dark: &Vae<f32>, samples: &[PairedSample]) -> Result<LatentGap> {
    let k = dark.shape.k();
    let mut per_level = vec![0.0; k];
    let mut image_mse = 0.0;
    for s in samples {
        let clean = darken(&s.normal, &s.params)?;
        image_mse += mse(&s.compressed_dark, &clean)? / (255.0 * 255.0);
        let a = dark.encode(&s.compressed_dark.to_tensor(), Sampling::Mean)?.means();
        let b = dark.encode(&clean.to_tensor(), Sampling::Mean)?.means();
        for (i, (la, lb)) in a.iter().zip(&b).enumerate() {
            let (da, db) = (la.data(), lb.data());
            per_level[i] +=
                da.iter().zip(db.iter()).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>() / da.len() as f64;
        }
    }
    let n = samples.len().max(1) as f64;
    per_level.iter_mut().for_each(|v| *v /= n);
    Ok(LatentGap { image_mse: image_mse / n, latent_mse: per_level.iter().sum::<f64>() / k as f64, per_level })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub rep: u64,
    /// Number of active (top) levels.
    pub levels: usize,
    pub baseline: CorpusSummary,
    pub enhanced: CorpusSummary,
}

/// Stage 2 with the top 1..=k levels active, repeated with shifted seeds,
/// each scored on `test`. Per-run logs and checkpoints go under
/// `out/rep{r}/levels{n}` when `out` is given.
pub fn ablate_levels(
    cfg: &TrainConfig,
    train: &[PairedSample],
    test: &[PairedSample],
    dark: &Vae<f32>,
    normal: &Vae<f32>,
    reps: u64,
    out: Option<&Path>,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for rep in 0..reps {
        for levels in 1..=cfg.k {
            let run_cfg = cfg.repetition(rep).with_top_levels(levels)?;
            let dir = out.map(|d| d.join(format!("rep{}", rep)).join(format!("levels{}", levels)));
            let stage = train_stage2(&run_cfg, train, dark, normal, dir.as_deref())?;
            let (baseline, enhanced) = summarize_evals(&evaluate_enhancement(dark, normal, &stage.mapping, test)?);
            rows.push(AblationRow { rep, levels, baseline, enhanced });
        }
    }
    Ok(rows)
}

/// Repetitions in which the all-levels run scores at least the single-level
/// run's PSNR.
pub fn full_beats_single(rows: &[AblationRow], k: usize) -> (usize, usize) {
    let reps: Vec<u64> = {
        let mut r: Vec<u64> = rows.iter().map(|r| r.rep).collect();
        r.dedup();
        r
    };
    let wins = reps
        .iter()
        .filter(|&&rep| {
            let find = |n| rows.iter().find(|r| r.rep == rep && r.levels == n).map(|r| r.enhanced.mean_psnr);
            matches!((find(k), find(1)), (Some(full), Some(single)) if full >= single)
        })
        .count();
    (wins, reps.len())
}
