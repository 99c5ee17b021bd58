use crate::element::Element;
use crate::error::Result;
use crate::tensor::{check_same_dims, Tensor};

pub fn sum<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let total: T = x.data().iter().copied().sum();
    let n = x.numel();
    Tensor::from_op("sum", vec![1], vec![total], vec![x.clone()], Box::new(move |g, _| vec![Some(vec![g[0]; n])]))
}

pub fn mean<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let n = x.numel();
    let nf = T::lit(n as f64);
    let total: T = x.data().iter().copied().sum();
    Tensor::from_op(
        "mean",
        vec![1],
        vec![total / nf],
        vec![x.clone()],
        Box::new(move |g, _| vec![Some(vec![g[0] / nf; n])]),
    )
}

/// `mean(|a − b|)`; the subgradient at `a == b` is 0.
pub fn l1_loss<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    check_same_dims("l1_loss", a, b)?;
    let n = a.numel();
    let nf = T::lit(n as f64);
    let diff: Vec<T> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| x - y).collect();
    let value = diff.iter().map(|d| d.abs()).sum::<T>() / nf;
    Ok(Tensor::from_op(
        "l1_loss",
        vec![1],
        vec![value],
        vec![a.clone(), b.clone()],
        Box::new(move |g, need| {
            let s = g[0] / nf;
            let ga: Vec<T> = diff
                .iter()
                .map(|&d| {
                    if d > T::zero() {
                        s
                    } else if d < T::zero() {
                        -s
                    } else {
                        T::zero()
                    }
                })
                .collect();
            let gb = need[1].then(|| ga.iter().map(|&v| -v).collect());
            vec![need[0].then_some(ga), gb]
        }),
    ))
}

/// `mean((a − b)²)`.
pub fn mse_loss<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    check_same_dims("mse_loss", a, b)?;
    let n = a.numel();
    let nf = T::lit(n as f64);
    let diff: Vec<T> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| x - y).collect();
    let value = diff.iter().map(|&d| d * d).sum::<T>() / nf;
    Ok(Tensor::from_op(
        "mse_loss",
        vec![1],
        vec![value],
        vec![a.clone(), b.clone()],
        Box::new(move |g, need| {
            let s = T::lit(2.0) * g[0] / nf;
            let ga: Vec<T> = diff.iter().map(|&d| d * s).collect();
            let gb = need[1].then(|| ga.iter().map(|&v| -v).collect());
            vec![need[0].then_some(ga), gb]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_values() {
        let x = Tensor::<f64>::from_f64(&[2], &[0.0, 0.0]).unwrap();
        let y = Tensor::<f64>::from_f64(&[2], &[1.0, 3.0]).unwrap();
        assert_eq!(l1_loss(&x, &x).unwrap().item(), 0.0);
        assert_eq!(l1_loss(&x, &y).unwrap().item(), 2.0);
        assert!(l1_loss(&x, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn sum_gradient_is_ones() {
        let x = Tensor::<f32>::zeros(&[2, 3, 4]).requires_grad(true);
        sum(&x).backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 24]);
    }

    #[test]
    fn mean_of_square_at_three() {
        let x = Tensor::<f64>::full(&[1], 3.0).requires_grad(true);
        let y = mean(&crate::ops::square(&x));
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let x = Tensor::<f64>::zeros(&[3]).requires_grad(true);
        let y = sum(&x);
        y.backward().unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0; 3]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }
}
