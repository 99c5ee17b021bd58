//! JPEG-style lossy compression simulator.
//!
//! Pipeline: RGB → YCbCr (4:4:4) → level shift → per-8×8-block DCT →
//! quantize/dequantize with quality-scaled tables → inverse DCT → RGB.
//! No entropy coding is performed; only the reconstruction matters.

mod color;
mod dct;
mod quant;

pub use color::{luma, rgb_to_ycbcr, rgb_to_ycbcr_f64, ycbcr_to_rgb, ycbcr_to_rgb_f64};
pub use dct::{dct8x8, idct8x8, Block};
pub use quant::{quant_tables_for, QuantTables, BASE_CHROMA, BASE_LUMA};

use crate::error::Result;
use crate::image::Image;

/// Quantize-dequantize round trip of one plane whose extents are multiples of 8.
fn process_plane(plane: &mut [f64], width: usize, height: usize, table: &[u16; 64]) {
    for by in (0..height).step_by(8) {
        for bx in (0..width).step_by(8) {
            let mut block = [[0.0; 8]; 8];
            for (y, row) in block.iter_mut().enumerate() {
                for (x, v) in row.iter_mut().enumerate() {
                    *v = plane[(by + y) * width + bx + x] - 128.0;
                }
            }
            let mut coeffs = dct8x8(&block);
            for (u, row) in coeffs.iter_mut().enumerate() {
                for (v, c) in row.iter_mut().enumerate() {
                    let q = table[u * 8 + v] as f64;
                    *c = (*c / q).round() * q;
                }
            }
            let rec = idct8x8(&coeffs);
            for (y, row) in rec.iter().enumerate() {
                for (x, v) in row.iter().enumerate() {
                    plane[(by + y) * width + bx + x] = v + 128.0;
                }
            }
        }
    }
}

/// Deterministic blockwise lossy compression at quality `qf` (1..=100).
///
/// Extents are padded to multiples of 8 by edge replication internally and
/// cropped back, so the output has the input's dimensions.
pub fn compress(img: &Image, qf: u32) -> Result<Image> {
    let tables = quant_tables_for(qf)?;
    let padded = img.pad_replicate_to_multiple(8);
    let (w, h) = padded.dims();
    let n = w * h;
    let src = padded.planar();

    let mut ycc = vec![vec![0.0; n]; 3];
    for i in 0..n {
        let v = rgb_to_ycbcr_f64(src[i] as f64, src[n + i] as f64, src[2 * n + i] as f64);
        for c in 0..3 {
            ycc[c][i] = v[c];
        }
    }
    process_plane(&mut ycc[0], w, h, &tables.luma);
    process_plane(&mut ycc[1], w, h, &tables.chroma);
    process_plane(&mut ycc[2], w, h, &tables.chroma);

    let mut out = vec![0u8; 3 * n];
    for i in 0..n {
        let rgb = ycbcr_to_rgb_f64(ycc[0][i], ycc[1][i], ycc[2][i]);
        for c in 0..3 {
            out[c * n + i] = rgb[c].round().clamp(0.0, 255.0) as u8;
        }
    }
    Image::from_planar(w, h, out)?.crop(0, 0, img.width(), img.height())
}
