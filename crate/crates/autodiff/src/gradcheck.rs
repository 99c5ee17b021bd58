//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub h: f64,
    /// Lower bound on the relative-error denominator, so entries whose true
    /// gradient is ~0 are judged on absolute error instead.
    pub floor: f64,
    /// At most this many elements are probed per leaf (all when `None`).
    pub max_elements: Option<usize>,
    /// Selects which elements are probed when subsampling.
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { h: 1e-3, floor: 1e-3, max_elements: None, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct LeafReport {
    pub name: String,
    pub checked: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub leaves: Vec<LeafReport>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares backward() gradients of the scalar program `f` against central
/// differences with respect to every named leaf.
///
/// `f` must read the leaves it is given (typically by capturing clones of
/// them); leaves are perturbed in place and restored afterwards.
pub fn gradient_check<F>(f: F, leaves: &[(String, Tensor<f64>)], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor<f64>>,
{
    for (name, leaf) in leaves {
        if !leaf.is_leaf() {
            return Err(TensorError::Usage(format!("gradcheck input '{}' is not a leaf", name)));
        }
        leaf.zero_grad();
        leaf.set_requires_grad(true);
    }
    let root = f()?;
    root.backward()?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport { max_rel_err: 0.0, leaves: Vec::new() };
    for (name, leaf) in leaves {
        let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.numel()]);
        let n = leaf.numel();
        let picks: Vec<usize> = match opts.max_elements {
            Some(k) if k < n => {
                let mut v = sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        let mut lr = LeafReport { name: name.clone(), checked: picks.len(), max_abs_err: 0.0, max_rel_err: 0.0 };
        for &i in &picks {
            let orig = leaf.data()[i];
            leaf.data_mut()[i] = orig + opts.h;
            let plus = f()?.item();
            leaf.data_mut()[i] = orig - opts.h;
            let minus = f()?.item();
            leaf.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.h);
            let abs = (analytic[i] - numeric).abs();
            lr.max_abs_err = lr.max_abs_err.max(abs);
            lr.max_rel_err = lr.max_rel_err.max(relative_error(analytic[i], numeric, opts.floor));
        }
        report.max_rel_err = report.max_rel_err.max(lr.max_rel_err);
        report.leaves.push(lr);
    }
    Ok(report)
}
