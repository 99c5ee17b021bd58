//! Procedural normal-light scenes: gradients, flat shapes and band-limited
//! texture, contrast-stretched so luma covers most of the 8-bit range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

const LUMA_LO: f64 = 8.0;
const LUMA_HI: f64 = 247.0;
/// Width in pixels of the linear ramp at shape edges.
const EDGE_SOFTNESS: f64 = 8.0;
const TEXTURE_FREQ: (f64, f64) = (0.02, 0.09);
const TEXTURE_AMP: (f64, f64) = (4.0, 12.0);

/// Coverage of a point at signed distance `d` inside an edge.
fn ramp(d: f64) -> f64 {
    (d / EDGE_SOFTNESS + 0.5).clamp(0.0, 1.0)
}

fn blend(p: &mut [f64; 3], color: [f64; 3], cover: f64) {
    for c in 0..3 {
        p[c] += (color[c] - p[c]) * cover;
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)]
}

pub fn synth_scene(seed: u64, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
        return Err(Error::Usage(format!("scene extents {}x{} must be positive multiples of 16", width, height)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (width as f64, height as f64);
    let n = width * height;
    let mut px = vec![[0.0f64; 3]; n];

    // background: linear gradient between two colours
    let (c0, c1) = (random_color(&mut rng), random_color(&mut rng));
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    for y in 0..height {
        for x in 0..width {
            let t = ((x as f64 / wf - 0.5) * dx + (y as f64 / hf - 0.5) * dy + 0.75) / 1.5;
            let t = t.clamp(0.0, 1.0);
            for c in 0..3 {
                px[y * width + x][c] = c0[c] * (1.0 - t) + c1[c] * t;
            }
        }
    }

    for _ in 0..rng.gen_range(3..7) {
        let color = random_color(&mut rng);
        let rw = rng.gen_range(wf * 0.1..wf * 0.5);
        let rh = rng.gen_range(hf * 0.1..hf * 0.5);
        let x0 = rng.gen_range(-rw * 0.3..wf - rw * 0.7);
        let y0 = rng.gen_range(-rh * 0.3..hf - rh * 0.7);
        for y in 0..height {
            for x in 0..width {
                let (xf, yf) = (x as f64, y as f64);
                let cover = ramp(xf - x0) * ramp(x0 + rw - xf) * ramp(yf - y0) * ramp(y0 + rh - yf);
                blend(&mut px[y * width + x], color, cover);
            }
        }
    }

    for _ in 0..rng.gen_range(2..5) {
        let color = random_color(&mut rng);
        let (cx, cy) = (rng.gen_range(0.0..wf), rng.gen_range(0.0..hf));
        let (ax, ay) = (rng.gen_range(wf * 0.08..wf * 0.3), rng.gen_range(hf * 0.08..hf * 0.3));
        for y in 0..height {
            for x in 0..width {
                let (u, v) = ((x as f64 - cx) / ax, (y as f64 - cy) / ay);
                let inside = (1.0 - (u * u + v * v).sqrt()) * ax.min(ay);
                blend(&mut px[y * width + x], color, ramp(inside));
            }
        }
    }

    // band-limited texture: a few low/mid-frequency plane waves
    let waves: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let f = rng.gen_range(TEXTURE_FREQ.0..TEXTURE_FREQ.1);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(TEXTURE_AMP.0..TEXTURE_AMP.1);
            let tint = [rng.gen_range(0.5..1.0), rng.gen_range(0.5..1.0), rng.gen_range(0.5..1.0)];
            (f * th.cos(), f * th.sin(), phase, amp, tint)
        })
        .collect();
    for y in 0..height {
        for x in 0..width {
            for &(kx, ky, phase, amp, tint) in &waves {
                let s = amp * (std::f64::consts::TAU * (kx * x as f64 + ky * y as f64) + phase).sin();
                for c in 0..3 {
                    px[y * width + x][c] += s * tint[c];
                }
            }
        }
    }

    // stretch so luma spans [LUMA_LO, LUMA_HI]
    let luma = |p: &[f64; 3]| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    let lo = px.iter().map(luma).fold(f64::INFINITY, f64::min);
    let hi = px.iter().map(luma).fold(f64::NEG_INFINITY, f64::max);
    let gain = if hi - lo > 1e-6 { (LUMA_HI - LUMA_LO) / (hi - lo) } else { 1.0 };

    let mut out = vec![0u8; 3 * n];
    for (i, p) in px.iter().enumerate() {
        for c in 0..3 {
            out[c * n + i] = ((p[c] - lo) * gain + LUMA_LO).round().clamp(0.0, 255.0) as u8;
        }
    }
    Image::from_planar(width, height, out)
}
