//! Channel concatenation, spatial cropping and the pooled/broadcast ops
//! used by attention gates.

use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::tensor::{check_rank4, Tensor};

/// Concatenates NCHW tensors along the channel axis.
pub fn concat_channels<T: Element>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    const OP: &str = "concat_channels";
    let first = parts.first().ok_or_else(|| TensorError::Usage("concat of zero tensors".into()))?;
    check_rank4(OP, first)?;
    let (n, _, h, w) = first.nchw();
    let mut chans = Vec::with_capacity(parts.len());
    for p in parts {
        check_rank4(OP, p)?;
        let (pn, pc, ph, pw) = p.nchw();
        if (pn, ph, pw) != (n, h, w) {
            return Err(TensorError::dim(OP, format!("{:?} vs {:?}", first.dims(), p.dims())));
        }
        chans.push(pc);
    }
    let total: usize = chans.iter().sum();
    let plane = h * w;
    let mut out = Vec::with_capacity(n * total * plane);
    for s in 0..n {
        for (p, &c) in parts.iter().zip(&chans) {
            let d = p.data();
            out.extend_from_slice(&d[s * c * plane..(s + 1) * c * plane]);
        }
    }
    Ok(Tensor::from_op(
        OP,
        vec![n, total, h, w],
        out,
        parts.to_vec(),
        Box::new(move |g, need| {
            let mut grads: Vec<Option<Vec<T>>> =
                need.iter().zip(&chans).map(|(&nd, &c)| nd.then(|| Vec::with_capacity(n * c * plane))).collect();
            for s in 0..n {
                let mut off = s * total * plane;
                for (gr, &c) in grads.iter_mut().zip(&chans) {
                    if let Some(gr) = gr {
                        gr.extend_from_slice(&g[off..off + c * plane]);
                    }
                    off += c * plane;
                }
            }
            grads
        }),
    ))
}

/// Spatial window `[top, top+h) × [left, left+w)` of every plane.
pub fn crop2d<T: Element>(x: &Tensor<T>, top: usize, left: usize, h: usize, w: usize) -> Result<Tensor<T>> {
    const OP: &str = "crop2d";
    check_rank4(OP, x)?;
    let (n, c, ih, iw) = x.nchw();
    if top + h > ih || left + w > iw || h == 0 || w == 0 {
        return Err(TensorError::dim(OP, format!("window {}x{}+{}+{} outside {}x{}", h, w, top, left, ih, iw)));
    }
    let mut out = Vec::with_capacity(n * c * h * w);
    {
        let d = x.data();
        for p in 0..n * c {
            for y in 0..h {
                let row = p * ih * iw + (top + y) * iw + left;
                out.extend_from_slice(&d[row..row + w]);
            }
        }
    }
    Ok(Tensor::from_op(
        OP,
        vec![n, c, h, w],
        out,
        vec![x.clone()],
        Box::new(move |g, _| {
            let mut gx = vec![T::zero(); n * c * ih * iw];
            for p in 0..n * c {
                for y in 0..h {
                    let row = p * ih * iw + (top + y) * iw + left;
                    gx[row..row + w].copy_from_slice(&g[(p * h + y) * w..(p * h + y + 1) * w]);
                }
            }
            vec![Some(gx)]
        }),
    ))
}

/// Mean over each plane: `N×C×H×W → N×C×1×1`.
pub fn spatial_mean<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    check_rank4("spatial_mean", x)?;
    let (n, c, h, w) = x.nchw();
    let m = h * w;
    let mf = T::lit(m as f64);
    let out: Vec<T> = x.data().chunks(m).map(|p| p.iter().copied().sum::<T>() / mf).collect();
    Ok(Tensor::from_op(
        "spatial_mean",
        vec![n, c, 1, 1],
        out,
        vec![x.clone()],
        Box::new(move |g, _| vec![Some(g.iter().flat_map(|&v| std::iter::repeat(v / mf).take(m)).collect())]),
    ))
}

/// Mean across channels: `N×C×H×W → N×1×H×W`.
pub fn channel_mean<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    check_rank4("channel_mean", x)?;
    let (n, c, h, w) = x.nchw();
    let m = h * w;
    let cf = T::lit(c as f64);
    let mut out = vec![T::zero(); n * m];
    {
        let d = x.data();
        for s in 0..n {
            for ch in 0..c {
                let src = &d[(s * c + ch) * m..(s * c + ch + 1) * m];
                for (o, &v) in out[s * m..(s + 1) * m].iter_mut().zip(src) {
                    *o = *o + v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v = *v / cf);
    }
    Ok(Tensor::from_op(
        "channel_mean",
        vec![n, 1, h, w],
        out,
        vec![x.clone()],
        Box::new(move |g, _| {
            let mut gx = vec![T::zero(); n * c * m];
            for s in 0..n {
                for ch in 0..c {
                    for i in 0..m {
                        gx[(s * c + ch) * m + i] = g[s * m + i] / cf;
                    }
                }
            }
            vec![Some(gx)]
        }),
    ))
}

/// `x * gate` where `gate` is `N×C×1×1` (per-channel) or `N×1×H×W` (per-pixel).
pub fn mul_broadcast<T: Element>(x: &Tensor<T>, gate: &Tensor<T>) -> Result<Tensor<T>> {
    const OP: &str = "mul_broadcast";
    check_rank4(OP, x)?;
    check_rank4(OP, gate)?;
    let (n, c, h, w) = x.nchw();
    let gd = gate.nchw();
    let m = h * w;
    // index of the gate element that scales x[s, ch, i]
    let gate_index: Box<dyn Fn(usize, usize, usize) -> usize> = if gd == (n, c, 1, 1) {
        Box::new(move |s, ch, _| s * c + ch)
    } else if gd == (n, 1, h, w) {
        Box::new(move |s, _, i| s * m + i)
    } else {
        return Err(TensorError::dim(OP, format!("gate {:?} does not broadcast over {:?}", gate.dims(), x.dims())));
    };
    let mut out = vec![T::zero(); n * c * m];
    {
        let xd = x.data();
        let gv = gate.data();
        for s in 0..n {
            for ch in 0..c {
                for i in 0..m {
                    let k = (s * c + ch) * m + i;
                    out[k] = xd[k] * gv[gate_index(s, ch, i)];
                }
            }
        }
    }
    let (xs, gs) = (x.clone(), gate.clone());
    let gate_len = gate.numel();
    Ok(Tensor::from_op(
        OP,
        vec![n, c, h, w],
        out,
        vec![x.clone(), gate.clone()],
        Box::new(move |g, need| {
            let xd = xs.data();
            let gv = gs.data();
            let mut gx = need[0].then(|| vec![T::zero(); n * c * m]);
            let mut gg = need[1].then(|| vec![T::zero(); gate_len]);
            for s in 0..n {
                for ch in 0..c {
                    for i in 0..m {
                        let k = (s * c + ch) * m + i;
                        let gi = gate_index(s, ch, i);
                        if let Some(gx) = gx.as_mut() {
                            gx[k] = g[k] * gv[gi];
                        }
                        if let Some(gg) = gg.as_mut() {
                            gg[gi] = gg[gi] + g[k] * xd[k];
                        }
                    }
                }
            }
            vec![gx, gg]
        }),
    ))
}
