use crate::element::Element;
use crate::error::Result;
use crate::tensor::{check_same_dims, Tensor};

/// Unary map whose derivative is expressed through input and output values.
fn unary<T: Element>(
    name: &'static str,
    x: &Tensor<T>,
    f: impl Fn(T) -> T,
    df: impl Fn(T, T) -> T + 'static,
) -> Tensor<T> {
    let out: Vec<T> = x.data().iter().map(|&v| f(v)).collect();
    let x_saved = x.clone();
    let y_saved = out.clone();
    Tensor::from_op(
        name,
        x.dims().to_vec(),
        out,
        vec![x.clone()],
        Box::new(move |g, _| {
            let xv = x_saved.data();
            let gx = g.iter().zip(xv.iter().zip(&y_saved)).map(|(&gi, (&xi, &yi))| gi * df(xi, yi)).collect();
            vec![Some(gx)]
        }),
    )
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary("relu", x, |v| v.max(T::zero()), |v, _| if v > T::zero() { T::one() } else { T::zero() })
}

pub fn leaky_relu<T: Element>(x: &Tensor<T>, slope: f64) -> Tensor<T> {
    let s = T::lit(slope);
    unary(
        "leaky_relu",
        x,
        move |v| if v > T::zero() { v } else { v * s },
        move |v, _| if v > T::zero() { T::one() } else { s },
    )
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary("sigmoid", x, |v| T::one() / (T::one() + (-v).exp()), |_, y| y * (T::one() - y))
}

pub fn exp<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary("exp", x, |v| v.exp(), |_, y| y)
}

pub fn square<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary("square", x, |v| v * v, |v, _| v + v)
}

pub fn scale<T: Element>(x: &Tensor<T>, factor: f64) -> Tensor<T> {
    let s = T::lit(factor);
    unary("scale", x, move |v| v * s, move |_, _| s)
}

pub fn add_scalar<T: Element>(x: &Tensor<T>, offset: f64) -> Tensor<T> {
    let o = T::lit(offset);
    unary("add_scalar", x, move |v| v + o, |_, _| T::one())
}

/// Clamp to `[0, 1]`; meant for image emission. The gradient is the
/// indicator of the open interval.
pub fn clamp01<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary(
        "clamp01",
        x,
        |v| v.max(T::zero()).min(T::one()),
        |v, _| if v > T::zero() && v < T::one() { T::one() } else { T::zero() },
    )
}

fn binary<T: Element>(
    name: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
    grads: impl Fn(&[T], &[T], &[T], &[bool]) -> Vec<Option<Vec<T>>> + 'static,
) -> Result<Tensor<T>> {
    check_same_dims(name, a, b)?;
    let out: Vec<T> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect();
    let (sa, sb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        name,
        a.dims().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |g, need| grads(g, &sa.data(), &sb.data(), need)),
    ))
}

pub fn add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("add", a, b, |x, y| x + y, |g, _, _, need| vec![need[0].then(|| g.to_vec()), need[1].then(|| g.to_vec())])
}

pub fn sub<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(
        "sub",
        a,
        b,
        |x, y| x - y,
        |g, _, _, need| vec![need[0].then(|| g.to_vec()), need[1].then(|| g.iter().map(|&v| -v).collect())],
    )
}

pub fn mul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(
        "mul",
        a,
        b,
        |x, y| x * y,
        |g, av, bv, need| {
            vec![
                need[0].then(|| g.iter().zip(bv).map(|(&gi, &y)| gi * y).collect()),
                need[1].then(|| g.iter().zip(av).map(|(&gi, &x)| gi * x).collect()),
            ]
        },
    )
}
