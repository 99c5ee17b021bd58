//! Orthonormal 8×8 DCT-II and its inverse, computed separably.

use std::sync::OnceLock;

pub type Block = [[f64; 8]; 8];

/// `basis[u][x] = c(u)·cos((2x+1)uπ/16)` with `c(0)=√(1/8)`, `c(u>0)=√(2/8)`.
fn basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        b
    })
}

/// Forward transform: `C · block · Cᵀ`.
pub fn dct8x8(block: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; 8]; 8];
    for u in 0..8 {
        for x in 0..8 {
            tmp[u][x] = (0..8).map(|y| block[y][x] * c[u][y]).sum();
        }
    }
    let mut out = [[0.0; 8]; 8];
    for u in 0..8 {
        for v in 0..8 {
            out[u][v] = (0..8).map(|x| tmp[u][x] * c[v][x]).sum();
        }
    }
    out
}

/// Inverse transform: `Cᵀ · coeffs · C`.
pub fn idct8x8(coeffs: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; 8]; 8];
    for y in 0..8 {
        for v in 0..8 {
            tmp[y][v] = (0..8).map(|u| c[u][y] * coeffs[u][v]).sum();
        }
    }
    let mut out = [[0.0; 8]; 8];
    for y in 0..8 {
        for x in 0..8 {
            out[y][x] = (0..8).map(|v| tmp[y][v] * c[v][x]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_block_has_only_dc() {
        let b = [[3.5; 8]; 8];
        let d = dct8x8(&b);
        assert!((d[0][0] - 28.0).abs() < 1e-12);
        for (u, row) in d.iter().enumerate() {
            for (v, &x) in row.iter().enumerate() {
                if u + v > 0 {
                    assert!(x.abs() < 1e-12);
                }
            }
        }
    }
}
