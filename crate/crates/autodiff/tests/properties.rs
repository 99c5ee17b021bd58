use mlsm_autodiff::ops;
use mlsm_autodiff::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // <conv2d(x, w), y> == <x, conv_transpose2d(y, w)>
    #[test]
    fn conv_transpose_is_adjoint_of_conv(
        seed in any::<u64>(),
        n in 1usize..3, cin in 1usize..4, cout in 1usize..4,
        k in 1usize..4, stride in 1usize..3, pad in 0usize..2,
        h in 4usize..9, w in 4usize..9,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::<f64>::randn(&[n, cin, h, w], &mut r);
        let wt = Tensor::<f64>::randn(&[cout, cin, k, k], &mut r);
        let y_fwd = ops::conv2d(&x, &wt, None, stride, pad, 1).unwrap();
        // the transpose only reproduces the input extent when stride divides evenly
        prop_assume!((y_fwd.dims()[2] - 1) * stride + k == h + 2 * pad);
        prop_assume!((y_fwd.dims()[3] - 1) * stride + k == w + 2 * pad);
        let y = Tensor::<f64>::randn(y_fwd.dims(), &mut r);
        let xt = ops::conv_transpose2d(&y, &wt, None, stride, pad).unwrap();
        prop_assert_eq!(xt.dims(), x.dims());
        let lhs = dot(&y_fwd, &y);
        let rhs = dot(&x, &xt);
        prop_assert!((lhs - rhs).abs() <= 1e-5 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn conv_is_linear_in_input(seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::<f64>::randn(&[1, 2, 6, 6], &mut r);
        let y = Tensor::<f64>::randn(&[1, 2, 6, 6], &mut r);
        let wt = Tensor::<f64>::randn(&[3, 2, 3, 3], &mut r);
        let combo = ops::add(&ops::scale(&x, alpha), &ops::scale(&y, beta)).unwrap();
        let lhs = ops::conv2d(&combo, &wt, None, 1, 1, 2).unwrap();
        let cx = ops::conv2d(&x, &wt, None, 1, 1, 2).unwrap();
        let cy = ops::conv2d(&y, &wt, None, 1, 1, 2).unwrap();
        let rhs = ops::add(&ops::scale(&cx, alpha), &ops::scale(&cy, beta)).unwrap();
        for (a, b) in lhs.to_vec().iter().zip(rhs.to_vec()) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn adjoint_identity_small_case() {
    let mut r = ChaCha8Rng::seed_from_u64(42);
    let x = Tensor::<f64>::randn(&[1, 2, 4, 4], &mut r);
    let wt = Tensor::<f64>::randn(&[3, 2, 2, 2], &mut r);
    let y_fwd = ops::conv2d(&x, &wt, None, 2, 0, 1).unwrap();
    let y = Tensor::<f64>::randn(y_fwd.dims(), &mut r);
    let xt = ops::conv_transpose2d(&y, &wt, None, 2, 0).unwrap();
    assert!((dot(&y_fwd, &y) - dot(&x, &xt)).abs() < 1e-5);
}

/// Direct per-pixel half-pixel bilinear evaluation.
fn bilinear_oracle(src: &[f64], h: usize, w: usize, scale: usize) -> Vec<f64> {
    let at = |y: i64, x: i64| {
        let y = y.clamp(0, h as i64 - 1) as usize;
        let x = x.clamp(0, w as i64 - 1) as usize;
        src[y * w + x]
    };
    let mut out = Vec::new();
    for oy in 0..h * scale {
        for ox in 0..w * scale {
            let sy = ((oy as f64 + 0.5) / scale as f64 - 0.5).max(0.0);
            let sx = ((ox as f64 + 0.5) / scale as f64 - 0.5).max(0.0);
            let (y0, x0) = (sy.floor() as i64, sx.floor() as i64);
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
            out.push(v);
        }
    }
    out
}

#[test]
fn bilinear_matches_direct_oracle() {
    let src = [0.0, 1.0, 2.0, 3.0];
    let x = Tensor::<f64>::from_f64(&[1, 1, 2, 2], &src).unwrap();
    let y = ops::bilinear_upsample(&x, 2).unwrap();
    let want = bilinear_oracle(&src, 2, 2, 2);
    assert_eq!(y.dims(), &[1, 1, 4, 4]);
    for (a, b) in y.to_vec().iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{:?} vs {:?}", y.to_vec(), want);
    }
    // first row: 0, 0.25, 0.75, 1
    assert_eq!(&want[..4], &[0.0, 0.25, 0.75, 1.0]);

    let mut r = ChaCha8Rng::seed_from_u64(3);
    let x = Tensor::<f64>::randn(&[1, 1, 3, 5], &mut r);
    let y = ops::bilinear_upsample(&x, 4).unwrap();
    for (a, b) in y.to_vec().iter().zip(bilinear_oracle(&x.to_vec(), 3, 5, 4)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn forward_and_backward_are_bit_identical_across_runs() {
    let run = || {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::<f32>::randn(&[2, 3, 8, 8], &mut r);
        let w = Tensor::<f32>::randn(&[4, 3, 3, 3], &mut r).requires_grad(true);
        let g = Tensor::<f32>::ones(&[4]).requires_grad(true);
        let b = Tensor::<f32>::zeros(&[4]).requires_grad(true);
        let y = ops::conv2d(&x, &w, None, 1, 1, 1).unwrap();
        let y = ops::relu(&ops::instance_norm(&y, &g, &b, 1e-5).unwrap());
        let loss = ops::mean(&ops::square(&y));
        loss.backward().unwrap();
        (y.to_vec(), w.grad().unwrap(), g.grad().unwrap())
    };
    let a = run();
    let b = run();
    assert_eq!(
        a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(
        a.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(
        a.2.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn gradients_finite_for_finite_inputs() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let x = Tensor::<f32>::randn(&[1, 2, 8, 8], &mut r).requires_grad(true);
    let w = Tensor::<f32>::randn(&[2, 2, 3, 3], &mut r).requires_grad(true);
    let y = ops::bilinear_upsample(&ops::conv2d(&x, &w, None, 2, 1, 1).unwrap(), 2).unwrap();
    ops::l1_loss(&y, &Tensor::zeros(y.dims())).unwrap().backward().unwrap();
    for t in [&x, &w] {
        let g = t.grad().unwrap();
        assert_eq!(g.len(), t.numel());
        assert!(g.iter().all(|v| v.is_finite()));
    }
}
