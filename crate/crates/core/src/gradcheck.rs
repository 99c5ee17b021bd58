//! Finite-difference verification suite over every differentiable op and
//! the full networks at tiny widths, run in 64-bit.

use mlsm_autodiff::ops;
use mlsm_autodiff::{gradient_check, GradCheckOptions, Tensor, TensorError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mapping::{MappingNet, MappingShape};
use crate::nn::ParamStore;
use crate::vae::{
    kl_per_level, lsgan_d_loss, vae_loss, Discriminator, LossWeights, PerceptualNet, Sampling, Vae, VaeShape,
};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub name: String,
    /// Scalar entries probed.
    pub checked: usize,
    pub max_rel_err: f64,
}

type Program = Box<dyn Fn() -> mlsm_autodiff::Result<Tensor<f64>>>;

fn wrap<F>(f: F) -> Program
where
    F: Fn() -> Result<Tensor<f64>> + 'static,
{
    Box::new(move || f().map_err(|e| TensorError::Usage(e.to_string())))
}

/// Random projection to a scalar so every output element gets a distinct weight.
fn project(y: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let r = Tensor::randn(y.dims(), &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ops::sum(&ops::mul(y, &r)?))
}

fn leaves(named: &[(&str, &Tensor<f64>)]) -> Vec<(String, Tensor<f64>)> {
    named.iter().map(|(n, t)| (n.to_string(), (*t).clone().requires_grad(true))).collect()
}

fn store_leaves(prefix: &str, ps: &ParamStore<f64>) -> Vec<(String, Tensor<f64>)> {
    ps.iter().map(|(n, t)| (format!("{}{}", prefix, n), t.clone())).collect()
}

/// Moves norm affines and biases off their zero/one init. A zero `beta`
/// feeding a ReLU over a `1×1` extent otherwise sits exactly on the kink.
fn jitter(ps: &ParamStore<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in ps.iter() {
        if name.ends_with(".beta") || name.ends_with(".gamma") || name.ends_with(".bias") {
            let noise = Tensor::<f64>::uniform(t.dims(), 0.1, 0.5, &mut rng).to_vec();
            t.data_mut().iter_mut().zip(noise).for_each(|(v, n)| *v += n);
        }
    }
}

fn run(
    name: &str,
    f: Program,
    leaves: &[(String, Tensor<f64>)],
    h: f64,
    max_elements: Option<usize>,
) -> Result<GradCheckRow> {
    let opts = GradCheckOptions { h, max_elements, ..Default::default() };
    let rep = gradient_check(f, leaves, opts)?;
    Ok(GradCheckRow {
        name: name.to_string(),
        checked: rep.leaves.iter().map(|l| l.checked).sum(),
        max_rel_err: rep.max_rel_err,
    })
}

/// Values bounded away from `[−margin, margin]` so kinks are never straddled.
fn away_from_zero(dims: &[usize], margin: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let t = Tensor::<f64>::uniform(dims, margin, 1.0, rng);
    let signs = Tensor::<f64>::uniform(dims, -1.0, 1.0, rng);
    let data = t.to_vec().iter().zip(signs.to_vec()).map(|(v, s)| if s < 0.0 { -v } else { *v }).collect();
    Tensor::from_vec(dims, data).expect("same dims")
}

/// Per-op checks.
pub fn op_suite() -> Result<Vec<GradCheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rows = Vec::new();
    let x = Tensor::<f64>::randn(&[2, 3, 6, 5], &mut rng);
    let y = Tensor::<f64>::randn(&[2, 3, 6, 5], &mut rng);
    let xk = away_from_zero(&[2, 3, 6, 5], 0.05, &mut rng);
    let unit = Tensor::<f64>::uniform(&[2, 3, 6, 5], 0.05, 0.95, &mut rng);

    let w = Tensor::<f64>::randn(&[4, 3, 3, 3], &mut rng);
    let b = Tensor::<f64>::randn(&[4], &mut rng);
    for &(s, p, d) in &[(1usize, 1usize, 1usize), (2, 1, 1), (1, 2, 2)] {
        let (xc, wc, bc) = (x.clone(), w.clone(), b.clone());
        rows.push(run(
            &format!("conv2d s{} p{} d{}", s, p, d),
            wrap(move || project(&ops::conv2d(&xc, &wc, Some(&bc), s, p, d)?, 1)),
            &leaves(&[("x", &x), ("w", &w), ("b", &b)]),
            1e-3,
            None,
        )?);
    }
    let wt = Tensor::<f64>::randn(&[3, 2, 4, 4], &mut rng);
    let bt = Tensor::<f64>::randn(&[2], &mut rng);
    {
        let (xc, wc, bc) = (x.clone(), wt.clone(), bt.clone());
        rows.push(run(
            "conv_transpose2d",
            wrap(move || project(&ops::conv_transpose2d(&xc, &wc, Some(&bc), 2, 1)?, 2)),
            &leaves(&[("x", &x), ("w", &wt), ("b", &bt)]),
            1e-3,
            None,
        )?);
    }
    let g = Tensor::<f64>::randn(&[3], &mut rng);
    let be = Tensor::<f64>::randn(&[3], &mut rng);
    {
        let (xc, gc, bc) = (x.clone(), g.clone(), be.clone());
        rows.push(run(
            "instance_norm",
            wrap(move || project(&ops::instance_norm(&xc, &gc, &bc, ops::INSTANCE_NORM_EPS)?, 3)),
            &leaves(&[("x", &x), ("gamma", &g), ("beta", &be)]),
            1e-3,
            None,
        )?);
    }
    for s in [2usize, 4] {
        let xc = x.clone();
        rows.push(run(
            &format!("bilinear_upsample x{}", s),
            wrap(move || project(&ops::bilinear_upsample(&xc, s)?, 4)),
            &leaves(&[("x", &x)]),
            1e-3,
            None,
        )?);
    }

    type Unary = fn(&Tensor<f64>) -> Tensor<f64>;
    let unary: [(&str, Unary, &Tensor<f64>); 8] = [
        ("relu", |t| ops::relu(t), &xk),
        ("leaky_relu", |t| ops::leaky_relu(t, 0.2), &xk),
        ("sigmoid", |t| ops::sigmoid(t), &x),
        ("exp", |t| ops::exp(t), &x),
        ("square", |t| ops::square(t), &x),
        ("scale", |t| ops::scale(t, -1.7), &x),
        ("add_scalar", |t| ops::add_scalar(t, 0.3), &x),
        ("clamp01", |t| ops::clamp01(t), &unit),
    ];
    for (name, f, input) in unary {
        let xc = input.clone();
        rows.push(run(name, wrap(move || project(&f(&xc), 5)), &leaves(&[("x", input)]), 1e-3, None)?);
    }

    type Binary = fn(&Tensor<f64>, &Tensor<f64>) -> mlsm_autodiff::Result<Tensor<f64>>;
    let binary: [(&str, Binary); 3] = [("add", ops::add), ("sub", ops::sub), ("mul", ops::mul)];
    for (name, f) in binary {
        let (xc, yc) = (x.clone(), y.clone());
        rows.push(run(name, wrap(move || project(&f(&xc, &yc)?, 6)), &leaves(&[("a", &x), ("b", &y)]), 1e-3, None)?);
    }
    {
        let (xc, yc) = (x.clone(), y.clone());
        rows.push(run(
            "l1_loss",
            wrap(move || Ok(ops::l1_loss(&xc, &yc)?)),
            &leaves(&[("a", &x), ("b", &y)]),
            1e-3,
            None,
        )?);
        let (xc, yc) = (x.clone(), y.clone());
        rows.push(run(
            "mse_loss",
            wrap(move || Ok(ops::mse_loss(&xc, &yc)?)),
            &leaves(&[("a", &x), ("b", &y)]),
            1e-3,
            None,
        )?);
        let xc = x.clone();
        rows.push(run("sum", wrap(move || Ok(ops::sum(&ops::square(&xc)))), &leaves(&[("x", &x)]), 1e-3, None)?);
        let xc = x.clone();
        rows.push(run("mean", wrap(move || Ok(ops::mean(&ops::square(&xc)))), &leaves(&[("x", &x)]), 1e-3, None)?);
    }
    {
        let (xc, yc) = (x.clone(), y.clone());
        rows.push(run(
            "concat_channels",
            wrap(move || project(&ops::concat_channels(&[xc.clone(), yc.clone()])?, 7)),
            &leaves(&[("a", &x), ("b", &y)]),
            1e-3,
            None,
        )?);
        let xc = x.clone();
        rows.push(run(
            "crop2d",
            wrap(move || project(&ops::crop2d(&xc, 1, 2, 4, 3)?, 8)),
            &leaves(&[("x", &x)]),
            1e-3,
            None,
        )?);
        let xc = x.clone();
        rows.push(run(
            "spatial_mean",
            wrap(move || project(&ops::spatial_mean(&xc)?, 9)),
            &leaves(&[("x", &x)]),
            1e-3,
            None,
        )?);
        let xc = x.clone();
        rows.push(run(
            "channel_mean",
            wrap(move || project(&ops::channel_mean(&xc)?, 10)),
            &leaves(&[("x", &x)]),
            1e-3,
            None,
        )?);
        let xc = x.clone();
        rows.push(run(
            "reshape",
            wrap(move || project(&xc.reshape(&[6, 30])?, 11)),
            &leaves(&[("x", &x)]),
            1e-3,
            None,
        )?);
        let cg = Tensor::<f64>::randn(&[2, 3, 1, 1], &mut rng);
        let sg = Tensor::<f64>::randn(&[2, 1, 6, 5], &mut rng);
        let (xc, cc) = (x.clone(), cg.clone());
        rows.push(run(
            "mul_broadcast channel",
            wrap(move || project(&ops::mul_broadcast(&xc, &cc)?, 12)),
            &leaves(&[("x", &x), ("gate", &cg)]),
            1e-3,
            None,
        )?);
        let (xc, sc) = (x.clone(), sg.clone());
        rows.push(run(
            "mul_broadcast spatial",
            wrap(move || project(&ops::mul_broadcast(&xc, &sc)?, 13)),
            &leaves(&[("x", &x), ("gate", &sg)]),
            1e-3,
            None,
        )?);
    }
    Ok(rows)
}

const NET_H: f64 = 1e-6;
const NET_PROBES: Option<usize> = Some(8);

/// Whole-network checks at tiny widths.
pub fn network_suite() -> Result<Vec<GradCheckRow>> {
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let shape = VaeShape::new(vec![2, 3, 4])?;

    // VAE: sampled encode, decode, full Stage-1 loss.
    {
        let vae = std::rc::Rc::new(Vae::<f64>::new(shape.clone(), 1));
        jitter(&vae.params, 1);
        let disc = std::rc::Rc::new(Discriminator::<f64>::new(2, 2));
        disc.params.set_trainable(false);
        let perc = std::rc::Rc::new(PerceptualNet::<f64>::new(3));
        let x = Tensor::<f64>::uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng);
        let (v, d, p, xc) = (vae.clone(), disc.clone(), perc.clone(), x.clone());
        let f = wrap(move || {
            let mut noise = ChaCha8Rng::seed_from_u64(5);
            let pyr = v.encode(&xc, Sampling::Draw(&mut noise))?;
            let recon = v.decode(&pyr.samples())?;
            Ok(vae_loss(&xc, &recon, &pyr, &d, &p, &LossWeights { perceptual: 0.1, gan: 0.1, kl: 0.1 })?.total)
        });
        rows.push(run("vae (stage-1 loss)", f, &store_leaves("", &vae.params), NET_H, NET_PROBES)?);
    }
    // KL term on its own against both of its inputs.
    {
        let m = Tensor::<f64>::randn(&[1, 3, 4, 4], &mut rng);
        let lv = Tensor::<f64>::randn(&[1, 3, 4, 4], &mut rng);
        let (mc, lc) = (m.clone(), lv.clone());
        rows.push(run(
            "kl_per_level",
            wrap(move || kl_per_level(&mc, &lc)),
            &leaves(&[("mean", &m), ("log_var", &lv)]),
            1e-3,
            None,
        )?);
    }
    // Discriminator under its own loss.
    {
        let disc = std::rc::Rc::new(Discriminator::<f64>::new(2, 4));
        jitter(&disc.params, 4);
        let real = Tensor::<f64>::uniform(&[2, 3, 32, 32], 0.0, 1.0, &mut rng);
        let fake = Tensor::<f64>::uniform(&[2, 3, 32, 32], 0.0, 1.0, &mut rng);
        let d = disc.clone();
        let f = wrap(move || lsgan_d_loss(&d, &real, &fake));
        rows.push(run("discriminator (lsgan)", f, &store_leaves("", &disc.params), NET_H, NET_PROBES)?);
    }
    // Mapping networks, every level, attention enabled so it is covered too.
    {
        let map =
            std::rc::Rc::new(MappingNet::<f64>::new(MappingShape::top_levels(shape.channels.clone(), 3, true)?, 6)?);
        jitter(&map.params, 6);
        let l: Vec<Tensor<f64>> = [(2, 8), (3, 4), (4, 2)]
            .iter()
            .map(|&(c, e)| Tensor::uniform(&[1, c, e, e], -1.0, 1.0, &mut rng))
            .collect();
        for i in 0..3 {
            let (m, li, top) = (map.clone(), l[i].clone(), l[2].clone());
            rows.push(run(
                &format!("enlighten branch L{}", i),
                wrap(move || project(&m.enlighten_branch(i, &li)?, 30 + i as u64)),
                &store_leaves("", &map.params)
                    .into_iter()
                    .filter(|(n, _)| n.starts_with(&format!("level{}.enlighten", i)))
                    .collect::<Vec<_>>(),
                NET_H,
                NET_PROBES,
            )?);
            let m = map.clone();
            let li = l[i].clone();
            rows.push(run(
                &format!("deblocking branch L{}", i),
                wrap(move || project(&m.deblocking_branch(i, &li, &top)?, 40 + i as u64)),
                &store_leaves("", &map.params)
                    .into_iter()
                    .filter(|(n, _)| {
                        n.starts_with(&format!("level{}.deblock", i)) || n.starts_with(&format!("level{}.project", i))
                    })
                    .collect::<Vec<_>>(),
                NET_H,
                NET_PROBES,
            )?);
        }
        let inputs: Vec<Tensor<f64>> = l.iter().map(|t| t.clone().requires_grad(true)).collect();
        let (m, li) = (map.clone(), inputs.clone());
        let mut all = store_leaves("", &map.params);
        all.extend(inputs.iter().enumerate().map(|(i, t)| (format!("latent{}", i), t.clone())));
        let f = wrap(move || {
            let out = m.map(&li)?;
            let mut total = project(&out[0], 50)?;
            for (j, o) in out.iter().enumerate().skip(1) {
                total = ops::add(&total, &project(o, 50 + j as u64)?)?;
            }
            Ok(total)
        });
        rows.push(run("mapping (all levels)", f, &all, NET_H, NET_PROBES)?);
    }
    Ok(rows)
}

pub fn full_suite() -> Result<Vec<GradCheckRow>> {
    let mut rows = op_suite()?;
    rows.extend(network_suite()?);
    Ok(rows)
}
