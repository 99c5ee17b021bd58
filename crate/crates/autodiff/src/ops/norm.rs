use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::tensor::{check_rank4, Tensor};

pub const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Per-(sample, channel) plane normalization followed by a per-channel
/// affine map `gamma·x̂ + beta`. Variance is the biased plane variance.
pub fn instance_norm<T: Element>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    const OP: &str = "instance_norm";
    check_rank4(OP, input)?;
    let (n, c, h, w) = input.nchw();
    if gamma.numel() != c || beta.numel() != c {
        return Err(TensorError::dim(
            OP,
            format!("gamma/beta have {}/{} entries for {} channels", gamma.numel(), beta.numel(), c),
        ));
    }
    if eps <= 0.0 {
        return Err(TensorError::Usage("instance_norm eps must be positive".into()));
    }
    let m = h * w;
    let mf = T::lit(m as f64);
    let eps = T::lit(eps);

    let mut xhat = vec![T::zero(); n * c * m];
    let mut inv_std = vec![T::zero(); n * c];
    let mut out = vec![T::zero(); n * c * m];
    {
        let x = input.data();
        let gm = gamma.data();
        let bt = beta.data();
        for p in 0..n * c {
            let src = &x[p * m..(p + 1) * m];
            let mean = src.iter().copied().sum::<T>() / mf;
            let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / mf;
            let is = T::one() / (var + eps).sqrt();
            inv_std[p] = is;
            let (gc, bc) = (gm[p % c], bt[p % c]);
            for i in 0..m {
                let xh = (src[i] - mean) * is;
                xhat[p * m + i] = xh;
                out[p * m + i] = xh * gc + bc;
            }
        }
    }

    let gamma_saved = gamma.clone();
    Ok(Tensor::from_op(
        OP,
        vec![n, c, h, w],
        out,
        vec![input.clone(), gamma.clone(), beta.clone()],
        Box::new(move |g, need| {
            let gm = gamma_saved.data();
            let mut gx = need[0].then(|| vec![T::zero(); n * c * m]);
            let mut ggamma = vec![T::zero(); c];
            let mut gbeta = vec![T::zero(); c];
            for p in 0..n * c {
                let ch = p % c;
                let gp = &g[p * m..(p + 1) * m];
                let xp = &xhat[p * m..(p + 1) * m];
                let sum_g: T = gp.iter().copied().sum();
                let sum_gx: T = gp.iter().zip(xp).map(|(&a, &b)| a * b).sum();
                ggamma[ch] = ggamma[ch] + sum_gx;
                gbeta[ch] = gbeta[ch] + sum_g;
                if let Some(gx) = gx.as_mut() {
                    // dx = γ·σ⁻¹/M · (M·g − Σg − x̂·Σ(g·x̂))
                    let k = gm[ch] * inv_std[p] / mf;
                    for i in 0..m {
                        gx[p * m + i] = k * (mf * gp[i] - sum_g - xp[i] * sum_gx);
                    }
                }
            }
            vec![gx, need[1].then_some(ggamma), need[2].then_some(gbeta)]
        }),
    ))
}
