use crate::error::{Error, Result};

/// Annex K luminance table, row-major in natural (not zig-zag) order.
pub const BASE_LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Annex K chrominance table.
pub const BASE_CHROMA: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTables {
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
    pub qf: u8,
}

/// IJG quality scaling of the Annex K tables.
pub fn quant_tables_for(qf: u32) -> Result<QuantTables> {
    if !(1..=100).contains(&qf) {
        return Err(Error::Usage(format!("quality factor {} outside [1, 100]", qf)));
    }
    let scale = if qf < 50 { 5000 / qf } else { 200 - 2 * qf };
    let apply = |base: &[u16; 64]| {
        let mut t = [0u16; 64];
        for (o, &b) in t.iter_mut().zip(base) {
            *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as u16;
        }
        t
    };
    Ok(QuantTables { luma: apply(&BASE_LUMA), chroma: apply(&BASE_CHROMA), qf: qf as u8 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qf50_is_identity_and_qf100_is_all_ones() {
        let t = quant_tables_for(50).unwrap();
        assert_eq!(t.luma, BASE_LUMA);
        assert_eq!(t.chroma, BASE_CHROMA);
        let t = quant_tables_for(100).unwrap();
        assert!(t.luma.iter().chain(&t.chroma).all(|&v| v == 1));
    }

    #[test]
    fn qf10_scales_by_five() {
        // scale = 5000/10 = 500: 16 → (8000+50)/100 = 80, 99 → 495 → 255
        let t = quant_tables_for(10).unwrap();
        assert_eq!(t.luma[0], 80);
        assert_eq!(t.luma[1], 55);
        assert_eq!(t.luma[2], 50);
        assert_eq!(t.luma[63], 255);
        assert_eq!(t.chroma[0], 85);
        assert_eq!(t.chroma[63], 255);
    }

    #[test]
    fn out_of_range_quality_rejected() {
        assert!(quant_tables_for(0).is_err());
        assert!(quant_tables_for(101).is_err());
    }
}
