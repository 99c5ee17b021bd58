use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-step loss table written as CSV. The first column is the integer step.
#[derive(Debug, Clone, PartialEq)]
pub struct LossLog {
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl LossLog {
    /// `step,lr,total,l1,perceptual,gan,kl0..kl{k−1}`.
    pub fn stage1(k: usize) -> Self {
        let mut columns: Vec<String> =
            ["lr", "total", "l1", "perceptual", "gan"].iter().map(|s| s.to_string()).collect();
        columns.extend((0..k).map(|i| format!("kl{}", i)));
        LossLog { columns, rows: Vec::new() }
    }

    /// `step,lr,total,lat0..lat{k−1},perceptual,gan`.
    pub fn stage2(k: usize) -> Self {
        let mut columns: Vec<String> = vec!["lr".into(), "total".into()];
        columns.extend((0..k).map(|i| format!("lat{}", i)));
        columns.extend(["perceptual".to_string(), "gan".to_string()]);
        LossLog { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, step: usize, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push((step, values));
    }

    pub fn header(&self) -> String {
        format!("step,{}", self.columns.join(","))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|(_, v)| v[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for (step, values) in &self.rows {
            let _ = write!(s, "{}", step);
            for v in values {
                let _ = write!(s, ",{}", v);
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
