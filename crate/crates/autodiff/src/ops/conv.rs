//! 2-D convolution and its transpose via im2col + GEMM.
//!
//! Both ops process one sample at a time and reduce weight gradients over
//! the batch in sample order, so results are independent of scheduling.

use crate::element::{matmul, Element};
use crate::error::{Result, TensorError};
use crate::tensor::{check_rank4, Tensor};

/// Sliding-window geometry of a convolution reading a `c×h×w` plane stack.
#[derive(Debug, Clone, Copy)]
struct Window {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    dil: usize,
    oh: usize,
    ow: usize,
}

impl Window {
    fn new(
        op: &'static str,
        c: usize,
        h: usize,
        w: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        pad: usize,
        dil: usize,
    ) -> Result<Self> {
        if stride == 0 || dil == 0 {
            return Err(TensorError::dim(op, "stride and dilation must be >= 1"));
        }
        let span_h = dil * (kh - 1) + 1;
        let span_w = dil * (kw - 1) + 1;
        if h + 2 * pad < span_h || w + 2 * pad < span_w {
            return Err(TensorError::dim(
                op,
                format!("kernel span {}x{} exceeds padded input {}x{}", span_h, span_w, h + 2 * pad, w + 2 * pad),
            ));
        }
        let oh = (h + 2 * pad - span_h) / stride + 1;
        let ow = (w + 2 * pad - span_w) / stride + 1;
        Ok(Window { c, h, w, kh, kw, stride, pad, dil, oh, ow })
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Input coordinate hit by output index `o` at kernel tap `k`, if inside.
    #[inline]
    fn src(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + k * self.dil) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    fn im2col<T: Element>(&self, x: &[T], cols: &mut [T]) {
        let l = self.cols();
        for ch in 0..self.c {
            let plane = &x[ch * self.h * self.w..(ch + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ch * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * l..(row + 1) * l];
                    for oy in 0..self.oh {
                        let seg = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        match self.src(oy, ki, self.h) {
                            None => seg.iter_mut().for_each(|v| *v = T::zero()),
                            Some(iy) => {
                                let src_row = &plane[iy * self.w..(iy + 1) * self.w];
                                for (ox, v) in seg.iter_mut().enumerate() {
                                    *v = match self.src(ox, kj, self.w) {
                                        Some(ix) => src_row[ix],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of `im2col`: scatter-adds columns back onto the planes.
    fn col2im<T: Element>(&self, cols: &[T], x: &mut [T]) {
        let l = self.cols();
        for ch in 0..self.c {
            let plane = &mut x[ch * self.h * self.w..(ch + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ch * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * l..(row + 1) * l];
                    for oy in 0..self.oh {
                        let Some(iy) = self.src(oy, ki, self.h) else { continue };
                        let seg = &src[oy * self.ow..(oy + 1) * self.ow];
                        let dst_row = &mut plane[iy * self.w..(iy + 1) * self.w];
                        for (ox, &v) in seg.iter().enumerate() {
                            if let Some(ix) = self.src(ox, kj, self.w) {
                                dst_row[ix] = dst_row[ix] + v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_bias<T: Element>(op: &'static str, bias: Option<&Tensor<T>>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.numel() != channels {
            return Err(TensorError::dim(op, format!("bias has {} entries, expected {}", b.numel(), channels)));
        }
    }
    Ok(())
}

fn add_bias<T: Element>(out: &mut [T], bias: &[T], plane: usize) {
    for (c, chunk) in out.chunks_mut(plane).enumerate() {
        let b = bias[c % bias.len()];
        chunk.iter_mut().for_each(|v| *v = *v + b);
    }
}

fn bias_grad<T: Element>(g: &[T], n: usize, c: usize, plane: usize) -> Vec<T> {
    let mut gb = vec![T::zero(); c];
    for s in 0..n {
        for (ch, acc) in gb.iter_mut().enumerate() {
            let off = (s * c + ch) * plane;
            *acc = *acc + g[off..off + plane].iter().copied().sum();
        }
    }
    gb
}

/// Cross-correlation of an NCHW input with an `outC×inC×kH×kW` kernel.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
    dilation: usize,
) -> Result<Tensor<T>> {
    const OP: &str = "conv2d";
    check_rank4(OP, input)?;
    check_rank4(OP, weight)?;
    let (n, cin, h, w) = input.nchw();
    let (cout, wcin, kh, kw) = weight.nchw();
    if wcin != cin {
        return Err(TensorError::dim(OP, format!("input has {} channels, kernel expects {}", cin, wcin)));
    }
    check_bias(OP, bias, cout)?;
    let win = Window::new(OP, cin, h, w, kh, kw, stride, padding, dilation)?;
    let (rows, l) = (win.rows(), win.cols());
    let in_plane = cin * h * w;
    let out_plane = cout * l;

    let mut out = vec![T::zero(); n * out_plane];
    {
        let x = input.data();
        let wt = weight.data();
        let mut cols = vec![T::zero(); rows * l];
        for s in 0..n {
            win.im2col(&x[s * in_plane..(s + 1) * in_plane], &mut cols);
            matmul(cout, rows, l, &wt, false, &cols, false, &mut out[s * out_plane..(s + 1) * out_plane], false);
        }
        if let Some(b) = bias {
            add_bias(&mut out, &b.data(), l);
        }
    }

    let mut inputs = vec![input.clone(), weight.clone()];
    inputs.extend(bias.cloned());
    let (x_saved, w_saved) = (input.clone(), weight.clone());
    Ok(Tensor::from_op(
        OP,
        vec![n, cout, win.oh, win.ow],
        out,
        inputs,
        Box::new(move |g, need| {
            let x = x_saved.data();
            let wt = w_saved.data();
            let mut gx = need[0].then(|| vec![T::zero(); n * in_plane]);
            let mut gw = need[1].then(|| vec![T::zero(); cout * rows]);
            let mut cols = vec![T::zero(); rows * l];
            for s in 0..n {
                let gs = &g[s * out_plane..(s + 1) * out_plane];
                if let Some(gw) = gw.as_mut() {
                    win.im2col(&x[s * in_plane..(s + 1) * in_plane], &mut cols);
                    matmul(cout, l, rows, gs, false, &cols, true, gw, true);
                }
                if let Some(gx) = gx.as_mut() {
                    matmul(rows, cout, l, &wt, true, gs, false, &mut cols, false);
                    win.col2im(&cols, &mut gx[s * in_plane..(s + 1) * in_plane]);
                }
            }
            let mut grads = vec![gx, gw];
            if need.len() > 2 {
                grads.push(need[2].then(|| bias_grad(g, n, cout, l)));
            }
            grads
        }),
    ))
}

/// Transposed convolution (the adjoint of [`conv2d`] in its input) with an
/// `inC×outC×kH×kW` kernel. Output extent is `(H−1)·stride − 2·padding + kH`.
pub fn conv_transpose2d<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    const OP: &str = "conv_transpose2d";
    check_rank4(OP, input)?;
    check_rank4(OP, weight)?;
    let (n, cin, h, w) = input.nchw();
    let (wcin, cout, kh, kw) = weight.nchw();
    if wcin != cin {
        return Err(TensorError::dim(OP, format!("input has {} channels, kernel expects {}", cin, wcin)));
    }
    if stride == 0 {
        return Err(TensorError::dim(OP, "stride must be >= 1"));
    }
    check_bias(OP, bias, cout)?;
    let full_h = (h - 1) * stride + kh;
    let full_w = (w - 1) * stride + kw;
    if full_h <= 2 * padding || full_w <= 2 * padding {
        return Err(TensorError::dim(OP, "padding leaves no output"));
    }
    let (oh, ow) = (full_h - 2 * padding, full_w - 2 * padding);
    // The matching forward convolution reads the output grid and lands on the input grid.
    let win = Window::new(OP, cout, oh, ow, kh, kw, stride, padding, 1)?;
    debug_assert_eq!((win.oh, win.ow), (h, w));
    let (rows, l) = (win.rows(), win.cols());
    let in_plane = cin * h * w;
    let out_plane = cout * oh * ow;

    let mut out = vec![T::zero(); n * out_plane];
    {
        let x = input.data();
        let wt = weight.data();
        let mut cols = vec![T::zero(); rows * l];
        for s in 0..n {
            matmul(rows, cin, l, &wt, true, &x[s * in_plane..(s + 1) * in_plane], false, &mut cols, false);
            win.col2im(&cols, &mut out[s * out_plane..(s + 1) * out_plane]);
        }
        if let Some(b) = bias {
            add_bias(&mut out, &b.data(), oh * ow);
        }
    }

    let mut inputs = vec![input.clone(), weight.clone()];
    inputs.extend(bias.cloned());
    let (x_saved, w_saved) = (input.clone(), weight.clone());
    Ok(Tensor::from_op(
        OP,
        vec![n, cout, oh, ow],
        out,
        inputs,
        Box::new(move |g, need| {
            let x = x_saved.data();
            let wt = w_saved.data();
            let mut gx = need[0].then(|| vec![T::zero(); n * in_plane]);
            let mut gw = need[1].then(|| vec![T::zero(); cin * rows]);
            let mut cols = vec![T::zero(); rows * l];
            for s in 0..n {
                win.im2col(&g[s * out_plane..(s + 1) * out_plane], &mut cols);
                if let Some(gx) = gx.as_mut() {
                    matmul(cin, rows, l, &wt, false, &cols, false, &mut gx[s * in_plane..(s + 1) * in_plane], false);
                }
                if let Some(gw) = gw.as_mut() {
                    matmul(cin, l, rows, &x[s * in_plane..(s + 1) * in_plane], false, &cols, true, gw, true);
                }
            }
            let mut grads = vec![gx, gw];
            if need.len() > 2 {
                grads.push(need[2].then(|| bias_grad(g, n, cout, oh * ow)));
            }
            grads
        }),
    ))
}
