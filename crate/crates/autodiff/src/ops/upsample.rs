use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::tensor::{check_rank4, Tensor};

/// Per-output-index source taps along one axis: `(i0, i1, w0, w1)`.
fn axis_taps(input: usize, output: usize) -> Vec<(usize, usize, f64, f64)> {
    let ratio = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            // Half-pixel centres; samples left of the first centre clamp to it.
            let src = ((o as f64 + 0.5) * ratio - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            let frac = src - i0 as f64;
            (i0, i1, 1.0 - frac, frac)
        })
        .collect()
}

/// Bilinear resize by an integer factor using half-pixel-centre sampling.
pub fn bilinear_upsample<T: Element>(input: &Tensor<T>, scale: usize) -> Result<Tensor<T>> {
    const OP: &str = "bilinear_upsample";
    check_rank4(OP, input)?;
    if scale == 0 {
        return Err(TensorError::dim(OP, "scale must be >= 1"));
    }
    if scale == 1 {
        return input.reshape(input.dims());
    }
    let (n, c, h, w) = input.nchw();
    let (oh, ow) = (h * scale, w * scale);
    let ty: Vec<_> = axis_taps(h, oh).into_iter().map(|(a, b, wa, wb)| (a, b, T::lit(wa), T::lit(wb))).collect();
    let tx: Vec<_> = axis_taps(w, ow).into_iter().map(|(a, b, wa, wb)| (a, b, T::lit(wa), T::lit(wb))).collect();

    let mut out = vec![T::zero(); n * c * oh * ow];
    {
        let x = input.data();
        for p in 0..n * c {
            let src = &x[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
            for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                    let top = src[y0 * w + x0] * wx0 + src[y0 * w + x1] * wx1;
                    let bot = src[y1 * w + x0] * wx0 + src[y1 * w + x1] * wx1;
                    dst[oy * ow + ox] = top * wy0 + bot * wy1;
                }
            }
        }
    }

    Ok(Tensor::from_op(
        OP,
        vec![n, c, oh, ow],
        out,
        vec![input.clone()],
        Box::new(move |g, _| {
            let mut gx = vec![T::zero(); n * c * h * w];
            for p in 0..n * c {
                let src = &g[p * oh * ow..(p + 1) * oh * ow];
                let dst = &mut gx[p * h * w..(p + 1) * h * w];
                for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                    for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                        let v = src[oy * ow + ox];
                        dst[y0 * w + x0] = dst[y0 * w + x0] + v * wy0 * wx0;
                        dst[y0 * w + x1] = dst[y0 * w + x1] + v * wy0 * wx1;
                        dst[y1 * w + x0] = dst[y1 * w + x0] + v * wy1 * wx0;
                        dst[y1 * w + x1] = dst[y1 * w + x1] + v * wy1 * wx1;
                    }
                }
            }
            vec![Some(gx)]
        }),
    ))
}
