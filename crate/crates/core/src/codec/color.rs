//! BT.601 full-range (JFIF) colour conversion.

use crate::image::Image;

#[inline]
pub fn rgb_to_ycbcr_f64(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

#[inline]
pub fn ycbcr_to_rgb_f64(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    [y + 1.402 * (cr - 128.0), y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0), y + 1.772 * (cb - 128.0)]
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn convert(img: &Image, f: fn(f64, f64, f64) -> [f64; 3]) -> Image {
    let mut out = img.clone();
    let n = img.width() * img.height();
    let src = img.planar();
    let mut dst = vec![0u8; 3 * n];
    for i in 0..n {
        let v = f(src[i] as f64, src[n + i] as f64, src[2 * n + i] as f64);
        for c in 0..3 {
            dst[c * n + i] = to_u8(v[c]);
        }
    }
    for c in 0..3 {
        out.plane_mut(c).copy_from_slice(&dst[c * n..(c + 1) * n]);
    }
    out
}

/// Planes of the result hold Y, Cb, Cr (rounded to 8 bits).
pub fn rgb_to_ycbcr(img: &Image) -> Image {
    convert(img, rgb_to_ycbcr_f64)
}

pub fn ycbcr_to_rgb(img: &Image) -> Image {
    convert(img, ycbcr_to_rgb_f64)
}

/// Rounded 8-bit luma plane as floats.
pub fn luma(img: &Image) -> Vec<f64> {
    let n = img.width() * img.height();
    let p = img.planar();
    (0..n)
        .map(|i| {
            (0.299 * p[i] as f64 + 0.587 * p[n + i] as f64 + 0.114 * p[2 * n + i] as f64).round().clamp(0.0, 255.0)
        })
        .collect()
}
