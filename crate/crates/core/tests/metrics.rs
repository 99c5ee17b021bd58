use mlsm_core::metrics::{psnr, psnr_b, ssim, summarize, MetricReport, SSIM_C1, SSIM_C2};
use mlsm_core::{Error, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    let data = (0..3 * w * h).map(|_| rng.gen()).collect();
    Image::from_planar(w, h, data).unwrap()
}

fn oracle_luma(img: &Image) -> Vec<f64> {
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = img.get(x, y);
            out.push((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round());
        }
    }
    out
}

/// Per-window SSIM computed directly from each window's pixels.
fn oracle_ssim(a: &Image, b: &Image) -> f64 {
    let (w, h) = a.dims();
    let (x, y) = (oracle_luma(a), oracle_luma(b));
    let mut total = 0.0;
    let mut count = 0;
    for r in 0..=h - 8 {
        for c in 0..=w - 8 {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for i in 0..8 {
                for j in 0..8 {
                    xs.push(x[(r + i) * w + c + j]);
                    ys.push(y[(r + i) * w + c + j]);
                }
            }
            let mx = xs.iter().sum::<f64>() / 64.0;
            let my = ys.iter().sum::<f64>() / 64.0;
            let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / 64.0;
            let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / 64.0;
            let cov = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / 64.0;
            total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
            count += 1;
        }
    }
    total / count as f64
}

/// Boundary and interior mean squared neighbour differences, enumerated pair by pair.
fn oracle_blocking(img: &Image, block: usize) -> (f64, f64) {
    let (w, h) = img.dims();
    let l = oracle_luma(img);
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                let d = (l[y * w + x] - l[y * w + x + 1]).powi(2);
                if (x + 1) % block == 0 {
                    boundary.push(d)
                } else {
                    interior.push(d)
                }
            }
            if y + 1 < h {
                let d = (l[y * w + x] - l[(y + 1) * w + x]).powi(2);
                if (y + 1) % block == 0 {
                    boundary.push(d)
                } else {
                    interior.push(d)
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&boundary), mean(&interior))
}

fn oracle_mse(a: &Image, b: &Image) -> f64 {
    a.planar().iter().zip(b.planar()).map(|(&p, &q)| (p as f64 - q as f64).powi(2)).sum::<f64>()
        / a.planar().len() as f64
}

#[test]
fn ssim_matches_windowed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..8 {
        let (w, h) = (rng.gen_range(8..30), rng.gen_range(8..30));
        let a = random_image(&mut rng, w, h);
        let mut b = a.clone();
        for v in b.plane_mut(1).iter_mut() {
            *v = v.saturating_add(rng.gen_range(0..40));
        }
        assert!((ssim(&a, &b).unwrap() - oracle_ssim(&a, &b)).abs() < 1e-6);
        let c = random_image(&mut rng, w, h);
        assert!((ssim(&a, &c).unwrap() - oracle_ssim(&a, &c)).abs() < 1e-6);
    }
}

#[test]
fn ssim_of_identical_images_is_exactly_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_image(&mut rng, 20, 13);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
}

#[test]
fn psnr_b_never_exceeds_psnr() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut equal, mut below) = (0, 0);
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(16..33), rng.gen_range(16..33));
        let reference = random_image(&mut rng, w, h);
        // mix smooth and blocky tests so both branches of the penalty occur
        let mut test = reference.clone();
        let tile: u8 = rng.gen_range(0..60);
        for y in 0..h {
            for x in 0..w {
                let mut px = test.get(x, y);
                if (x / 8 + y / 8) % 2 == 0 {
                    px = px.map(|v| v.saturating_add(tile));
                }
                test.set(x, y, px);
            }
        }
        if rng.gen_bool(0.5) {
            test = random_image(&mut rng, w, h);
        }
        let (p, pb) = (psnr(&test, &reference).unwrap(), psnr_b(&test, &reference, 8).unwrap());
        let (db, dnb) = oracle_blocking(&test, 8);
        if p.is_infinite() {
            continue;
        }
        assert!(pb <= p);
        if db <= dnb {
            assert_eq!(pb, p);
            equal += 1;
        } else {
            assert!(pb < p);
            below += 1;
        }
    }
    assert!(equal > 50 && below > 50, "equal {} below {}", equal, below);
}

#[test]
fn checkerboard_tiles_are_penalised() {
    let (w, h) = (32, 32);
    let mut tiles = Image::new(w, h).unwrap();
    for y in 0..h {
        for x in 0..w {
            let v = if (x / 8 + y / 8) % 2 == 0 { 64 } else { 192 };
            tiles.set(x, y, [v, v, v]);
        }
    }
    // 3×3 box blur with edge clamping as the reference
    let mut blurred = Image::new(w, h).unwrap();
    for y in 0..h {
        for x in 0..w {
            let mut s = 0u32;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let xx = (x as i32 + dx).clamp(0, w as i32 - 1) as usize;
                    let yy = (y as i32 + dy).clamp(0, h as i32 - 1) as usize;
                    s += tiles.get(xx, yy)[0] as u32;
                }
            }
            let v = ((s as f64) / 9.0).round() as u8;
            blurred.set(x, y, [v, v, v]);
        }
    }
    let (db, dnb) = oracle_blocking(&tiles, 8);
    assert_eq!(dnb, 0.0);
    assert!(db > 0.0);
    let eta = 3.0 / 5.0; // log2(8) / log2(32)
    let mse_b = oracle_mse(&tiles, &blurred) + eta * (db - dnb);
    let want = 10.0 * (255.0f64 * 255.0 / mse_b).log10();
    let got = psnr_b(&tiles, &blurred, 8).unwrap();
    assert!((got - want).abs() < 1e-9);
    assert!(got < psnr(&tiles, &blurred).unwrap());
}

#[test]
fn flipping_both_images_preserves_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = random_image(&mut rng, 24, 19);
    let b = random_image(&mut rng, 24, 19);
    let flip = |img: &Image| {
        let (w, h) = img.dims();
        let mut out = Image::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                out.set(w - 1 - x, y, img.get(x, y));
            }
        }
        out
    };
    let (fa, fb) = (flip(&a), flip(&b));
    assert_eq!(psnr(&a, &b).unwrap(), psnr(&fa, &fb).unwrap());
    assert!((ssim(&a, &b).unwrap() - ssim(&fa, &fb).unwrap()).abs() < 1e-12);
}

#[test]
fn dimension_mismatch_is_reported() {
    let a = Image::filled(16, 16, [1; 3]).unwrap();
    let b = Image::filled(17, 16, [1; 3]).unwrap();
    assert!(matches!(psnr(&a, &b), Err(Error::Mismatch(_))));
}

#[test]
fn corpus_mean_is_arithmetic_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let reps: Vec<MetricReport> = (0..20)
        .map(|_| {
            let a = random_image(&mut rng, 16, 16);
            let b = random_image(&mut rng, 16, 16);
            MetricReport {
                psnr: psnr(&a, &b).unwrap(),
                ssim: ssim(&a, &b).unwrap(),
                psnr_b: psnr_b(&a, &b, 8).unwrap(),
            }
        })
        .collect();
    let s = summarize(&reps);
    let want = reps.iter().map(|r| r.psnr).sum::<f64>() / 20.0;
    assert!((s.mean_psnr - want).abs() < 1e-12);
    assert_eq!(s.count, 20);
    assert_eq!(s.infinite_psnr, 0);
}
