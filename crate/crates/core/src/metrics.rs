//! Full-reference image quality metrics: PSNR, SSIM and PSNR-B.
//!
//! PSNR uses all three channels. SSIM and the blocking penalty of PSNR-B
//! are computed on the rounded BT.601 luma plane. A perfect match is
//! reported as `f64::INFINITY`, which corpus means exclude and count.

use crate::codec::luma;
use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
pub const PSNR_B_BLOCK: usize = 8;

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Mismatch(format!("test is {:?} but reference is {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Mean squared error over all samples of all channels, in 8-bit units.
pub fn mse(test: &Image, reference: &Image) -> Result<f64> {
    check_dims(test, reference)?;
    let (a, b) = (test.planar(), reference.planar());
    let sse: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(sse / a.len() as f64)
}

pub fn psnr(test: &Image, reference: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(test, reference)?))
}

/// Mean of local SSIM over every `8×8` window (stride 1) of the luma plane,
/// with uniform weights and population statistics.
pub fn ssim(test: &Image, reference: &Image) -> Result<f64> {
    check_dims(test, reference)?;
    let (w, h) = test.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Usage(format!("SSIM needs at least {0}x{0} pixels, got {1}x{2}", SSIM_WINDOW, w, h)));
    }
    let x = luma(test);
    let y = luma(reference);

    // Summed-area tables of x, y, x², y², xy with a zero border row/column.
    let stride = w + 1;
    let mut sat = vec![[0.0f64; 5]; stride * (h + 1)];
    for r in 0..h {
        for c in 0..w {
            let (a, b) = (x[r * w + c], y[r * w + c]);
            let v = [a, b, a * a, b * b, a * b];
            let up = sat[r * stride + c + 1];
            let left = sat[(r + 1) * stride + c];
            let diag = sat[r * stride + c];
            let cell = &mut sat[(r + 1) * stride + c + 1];
            for k in 0..5 {
                cell[k] = v[k] + up[k] + left[k] - diag[k];
            }
        }
    }

    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - SSIM_WINDOW {
        for c in 0..=w - SSIM_WINDOW {
            let (r1, c1) = (r + SSIM_WINDOW, c + SSIM_WINDOW);
            let mut s = [0.0; 5];
            for (k, sk) in s.iter_mut().enumerate() {
                *sk = sat[r1 * stride + c1][k] - sat[r * stride + c1][k] - sat[r1 * stride + c][k]
                    + sat[r * stride + c][k];
            }
            total += local_ssim(s[0] / n, s[1] / n, s[2] / n, s[3] / n, s[4] / n);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM of one window given its first and second raw moments.
pub fn local_ssim(mx: f64, my: f64, mxx: f64, myy: f64, mxy: f64) -> f64 {
    let vx = (mxx - mx * mx).max(0.0);
    let vy = (myy - my * my).max(0.0);
    let cov = mxy - mx * my;
    ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
}

/// Blocking statistics of one plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingStats {
    /// Mean squared difference of adjacent pairs straddling block boundaries.
    pub boundary: f64,
    /// Same over adjacent pairs inside blocks.
    pub interior: f64,
    /// Blocking effect factor, `η·max(boundary − interior, 0)`.
    pub bef: f64,
}

/// Boundary vs interior discontinuity of a `width×height` plane.
pub fn blocking_stats(plane: &[f64], width: usize, height: usize, block: usize) -> Result<BlockingStats> {
    if block < 2 || width < 2 * block || height < 2 * block {
        return Err(Error::Usage(format!(
            "PSNR-B needs at least two {}-pixel blocks per axis, image is {}x{}",
            block, width, height
        )));
    }
    let (mut sb, mut nb, mut sn, mut nn) = (0.0, 0usize, 0.0, 0usize);
    let mut tally = |a: f64, b: f64, boundary: bool| {
        let d = (a - b) * (a - b);
        if boundary {
            sb += d;
            nb += 1;
        } else {
            sn += d;
            nn += 1;
        }
    };
    for y in 0..height {
        for x in 0..width - 1 {
            tally(plane[y * width + x], plane[y * width + x + 1], (x + 1) % block == 0);
        }
    }
    for y in 0..height - 1 {
        for x in 0..width {
            tally(plane[y * width + x], plane[(y + 1) * width + x], (y + 1) % block == 0);
        }
    }
    let boundary = sb / nb as f64;
    let interior = sn / nn as f64;
    let bef = if boundary > interior {
        let eta = (block as f64).log2() / (width.min(height) as f64).log2();
        eta * (boundary - interior)
    } else {
        0.0
    };
    Ok(BlockingStats { boundary, interior, bef })
}

/// PSNR-B: the blocking effect factor of the test image's luma is added to
/// the all-channel MSE, so `psnr_b <= psnr` with equality exactly when the
/// boundary discontinuity does not exceed the interior one.
pub fn psnr_b(test: &Image, reference: &Image, block: usize) -> Result<f64> {
    let m = mse(test, reference)?;
    let stats = blocking_stats(&luma(test), test.width(), test.height(), block)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(psnr_from_mse(m + stats.bef))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub psnr_b: f64,
}

pub fn evaluate_pair(test: &Image, reference: &Image) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(test, reference)?,
        ssim: ssim(test, reference)?,
        psnr_b: psnr_b(test, reference, PSNR_B_BLOCK)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSummary {
    pub count: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_psnr_b: f64,
    /// Images whose PSNR was infinite (excluded from `mean_psnr`).
    pub infinite_psnr: usize,
    pub infinite_psnr_b: usize,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (mut sum, mut n, mut inf) = (0.0, 0usize, 0usize);
    for v in values {
        if v.is_finite() {
            sum += v;
            n += 1;
        } else {
            inf += 1;
        }
    }
    (if n == 0 { f64::NAN } else { sum / n as f64 }, inf)
}

pub fn summarize(reports: &[MetricReport]) -> CorpusSummary {
    let (mean_psnr, infinite_psnr) = finite_mean(reports.iter().map(|r| r.psnr));
    let (mean_psnr_b, infinite_psnr_b) = finite_mean(reports.iter().map(|r| r.psnr_b));
    let (mean_ssim, _) = finite_mean(reports.iter().map(|r| r.ssim));
    CorpusSummary { count: reports.len(), mean_psnr, mean_ssim, mean_psnr_b, infinite_psnr, infinite_psnr_b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_are_infinite() {
        let a = Image::filled(16, 16, [10, 20, 30]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(psnr_b(&a, &a, 8).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn black_vs_white_is_zero_db() {
        let a = Image::filled(8, 8, [0; 3]).unwrap();
        let b = Image::filled(8, 8, [255; 3]).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn single_pixel_difference() {
        let a = Image::filled(16, 16, [100; 3]).unwrap();
        let mut b = a.clone();
        b.set(3, 5, [116, 100, 100]);
        // MSE = 16² / (16·16·3)
        let want = 10.0 * (255.0f64 * 255.0 / (256.0 / 768.0)).log10();
        assert!((psnr(&b, &a).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn constant_ssim_closed_form() {
        let a = Image::filled(9, 9, [50; 3]).unwrap();
        let b = Image::filled(9, 9, [90; 3]).unwrap();
        let want = (2.0 * 50.0 * 90.0 + SSIM_C1) / (50.0f64 * 50.0 + 90.0 * 90.0 + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = Image::filled(16, 16, [0; 3]).unwrap();
        let b = Image::filled(16, 17, [0; 3]).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::Mismatch(_))));
        assert!(matches!(ssim(&a, &b), Err(Error::Mismatch(_))));
        assert!(matches!(psnr_b(&a, &b, 8), Err(Error::Mismatch(_))));
    }

    #[test]
    fn too_small_for_blocks() {
        let a = Image::filled(15, 32, [0; 3]).unwrap();
        let b = Image::filled(15, 32, [1; 3]).unwrap();
        assert!(matches!(psnr_b(&a, &b, 8), Err(Error::Usage(_))));
    }

    #[test]
    fn smooth_gradient_has_no_blocking_penalty() {
        let mut a = Image::new(32, 32).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let v = (x * 4 + y * 2) as u8;
                a.set(x, y, [v, v, v]);
            }
        }
        let b = Image::filled(32, 32, [60; 3]).unwrap();
        assert_eq!(psnr_b(&a, &b, 8).unwrap(), psnr(&a, &b).unwrap());
    }

    #[test]
    fn summary_excludes_infinities() {
        let reps = [
            MetricReport { psnr: 30.0, ssim: 0.9, psnr_b: 29.0 },
            MetricReport { psnr: f64::INFINITY, ssim: 1.0, psnr_b: f64::INFINITY },
            MetricReport { psnr: 20.0, ssim: 0.7, psnr_b: 19.0 },
        ];
        let s = summarize(&reps);
        assert_eq!(s.mean_psnr, 25.0);
        assert_eq!(s.infinite_psnr, 1);
        assert!((s.mean_ssim - 0.866_666_666_666_666_7).abs() < 1e-12);
    }
}
