use std::cell::{Cell, Ref, RefCell, RefMut};
use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::element::Element;
use crate::error::{Result, TensorError};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Vector-Jacobian product of one recorded op: given the output gradient and
/// a mask of which inputs need a gradient, return one gradient per input.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T], &[bool]) -> Vec<Option<Vec<T>>>>;

pub(crate) struct GradFn<T: Element> {
    pub(crate) name: &'static str,
    pub(crate) inputs: Vec<Tensor<T>>,
    pub(crate) backward: BackwardFn<T>,
}

struct Inner<T: Element> {
    // Ids grow monotonically, so every op's inputs have smaller ids than its
    // output. Sorting by id is therefore a topological order of the graph.
    id: u64,
    dims: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: Cell<bool>,
    grad_fn: Option<GradFn<T>>,
}

/// Dense row-major tensor; feature maps use NCHW.
///
/// Cloning is shallow: clones share storage, gradient and graph node.
pub struct Tensor<T: Element = f32> {
    inner: Rc<Inner<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor { inner: Rc::clone(&self.inner) }
    }
}

impl<T: Element> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.inner.data.borrow();
        let preview: Vec<T> = data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("dims", &self.inner.dims)
            .field("dtype", &T::NAME)
            .field("tracked", &self.is_tracked())
            .field("op", &self.inner.grad_fn.as_ref().map(|g| g.name))
            .field("data[..8]", &preview)
            .finish()
    }
}

impl<T: Element> Tensor<T> {
    fn build(dims: Vec<usize>, data: Vec<T>, requires_grad: bool, grad_fn: Option<GradFn<T>>) -> Self {
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                dims,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad: Cell::new(requires_grad),
                grad_fn,
            }),
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(TensorError::dim(
                "from_vec",
                format!("dims {:?} hold {} elements, got {}", dims, n, data.len()),
            ));
        }
        Ok(Self::build(dims.to_vec(), data, false, None))
    }

    pub fn from_f64(dims: &[usize], data: &[f64]) -> Result<Self> {
        Self::from_vec(dims, data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn full(dims: &[usize], value: T) -> Self {
        let n = dims.iter().product();
        Self::build(dims.to_vec(), vec![value; n], false, None)
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::full(dims, T::zero())
    }

    pub fn ones(dims: &[usize]) -> Self {
        Self::full(dims, T::one())
    }

    pub fn scalar(value: T) -> Self {
        Self::build(vec![1], vec![value], false, None)
    }

    pub fn randn<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let n = dims.iter().product();
        let data = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                T::lit(v)
            })
            .collect();
        Self::build(dims.to_vec(), data, false, None)
    }

    pub fn uniform<R: Rng + ?Sized>(dims: &[usize], low: f64, high: f64, rng: &mut R) -> Self {
        let n = dims.iter().product();
        let data = (0..n).map(|_| T::lit(rng.gen_range(low..high))).collect();
        Self::build(dims.to_vec(), data, false, None)
    }

    /// Marks a leaf as a trainable parameter (or freezes it with `false`).
    pub fn requires_grad(self, flag: bool) -> Self {
        self.set_requires_grad(flag);
        self
    }

    pub fn set_requires_grad(&self, flag: bool) {
        assert!(self.inner.grad_fn.is_none(), "requires_grad can only be set on leaves");
        self.inner.requires_grad.set(flag);
    }

    /// Whether gradients flow into this tensor during backward.
    pub fn is_tracked(&self) -> bool {
        self.inner.grad_fn.is_some() || self.inner.requires_grad.get()
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.grad_fn.is_none()
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn dims(&self) -> &[usize] {
        &self.inner.dims
    }

    pub fn numel(&self) -> usize {
        self.inner.dims.iter().product()
    }

    /// NCHW extents; panics on tensors that are not rank 4.
    pub fn nchw(&self) -> (usize, usize, usize, usize) {
        let d = &self.inner.dims;
        assert_eq!(d.len(), 4, "expected an NCHW tensor, got dims {:?}", d);
        (d[0], d[1], d[2], d[3])
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    /// Mutable access for optimizers and loaders. Mutating a tensor that an
    /// un-consumed graph still references invalidates that graph.
    pub fn data_mut(&self) -> RefMut<'_, Vec<T>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().iter().map(|v| v.as_f64()).collect()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> T {
        let d = self.inner.data.borrow();
        assert_eq!(d.len(), 1, "item() on a tensor with {} elements", d.len());
        d[0]
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn grad_ref(&self) -> Ref<'_, Option<Vec<T>>> {
        self.inner.grad.borrow()
    }

    pub fn grad_mut(&self) -> RefMut<'_, Option<Vec<T>>> {
        self.inner.grad.borrow_mut()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// A new untracked leaf sharing no graph history with `self`.
    pub fn detach(&self) -> Self {
        Self::build(self.inner.dims.clone(), self.to_vec(), false, None)
    }

    /// Same values under new dims with equal element count.
    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.numel() {
            return Err(TensorError::dim("reshape", format!("{:?} -> {:?} changes element count", self.dims(), dims)));
        }
        Ok(Self::from_op(
            "reshape",
            dims.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Box::new(|g, _| vec![Some(g.to_vec())]),
        ))
    }

    /// Converts element type; the result is an untracked leaf.
    pub fn cast<U: Element>(&self) -> Tensor<U> {
        let data = self.inner.data.borrow().iter().map(|v| U::lit(v.as_f64())).collect();
        Tensor::<U>::build(self.inner.dims.clone(), data, false, None)
    }

    /// Records an op output. The graph node is only kept when at least one
    /// input is tracked, so inference through frozen weights stays cheap.
    pub(crate) fn from_op(
        name: &'static str,
        dims: Vec<usize>,
        data: Vec<T>,
        inputs: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        if inputs.iter().any(|t| t.is_tracked()) {
            Self::build(dims, data, false, Some(GradFn { name, inputs, backward }))
        } else {
            Self::build(dims, data, false, None)
        }
    }

    /// Reverse-mode sweep from a scalar root. Gradients accumulate into the
    /// `grad` buffer of every tracked leaf; intermediate gradients are freed
    /// as soon as their node has been processed.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::Usage(format!("backward needs a scalar root, got dims {:?}", self.dims())));
        }
        if !self.is_tracked() {
            return Err(TensorError::Usage("backward on a tensor that is not part of a tracked graph".into()));
        }

        let mut seen = HashSet::new();
        let mut nodes: Vec<Tensor<T>> = Vec::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            if let Some(gf) = &t.inner.grad_fn {
                for inp in &gf.inputs {
                    if inp.is_tracked() && !seen.contains(&inp.id()) {
                        stack.push(inp.clone());
                    }
                }
            }
            nodes.push(t);
        }
        nodes.sort_by_key(|t| Reverse(t.id()));

        let mut pending: HashMap<u64, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);
        for node in &nodes {
            let Some(g) = pending.remove(&node.id()) else { continue };
            match &node.inner.grad_fn {
                None => {
                    if node.inner.requires_grad.get() {
                        let mut slot = node.inner.grad.borrow_mut();
                        match slot.as_mut() {
                            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                            None => *slot = Some(g),
                        }
                    }
                }
                Some(gf) => {
                    let mask: Vec<bool> = gf.inputs.iter().map(|t| t.is_tracked()).collect();
                    let grads = (gf.backward)(&g, &mask);
                    debug_assert_eq!(grads.len(), gf.inputs.len(), "op {}", gf.name);
                    for ((inp, gi), &need) in gf.inputs.iter().zip(grads).zip(&mask) {
                        let (Some(gi), true) = (gi, need) else { continue };
                        debug_assert_eq!(gi.len(), inp.numel(), "op {}", gf.name);
                        match pending.get_mut(&inp.id()) {
                            Some(acc) => acc.iter_mut().zip(&gi).for_each(|(a, b)| *a = *a + *b),
                            None => {
                                pending.insert(inp.id(), gi);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_same_dims<T: Element>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(TensorError::dim(op, format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

pub(crate) fn check_rank4<T: Element>(op: &'static str, t: &Tensor<T>) -> Result<()> {
    if t.dims().len() != 4 {
        return Err(TensorError::dim(op, format!("expected NCHW input, got {:?}", t.dims())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_element_count() {
        assert!(Tensor::<f32>::from_vec(&[2, 2], vec![0.0; 3]).is_err());
        assert_eq!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).unwrap().numel(), 6);
    }

    #[test]
    fn untracked_inputs_record_no_graph() {
        let a = Tensor::<f32>::ones(&[3]);
        let b = a.reshape(&[1, 3]).unwrap();
        assert!(b.is_leaf());
        assert!(b.backward().is_err());
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let a = Tensor::<f32>::ones(&[3]).requires_grad(true);
        let b = a.reshape(&[3, 1]).unwrap();
        assert!(matches!(b.backward(), Err(TensorError::Usage(_))));
    }

    #[test]
    fn detach_cuts_history() {
        let a = Tensor::<f64>::ones(&[2]).requires_grad(true);
        let b = a.reshape(&[2, 1]).unwrap();
        assert!(b.is_tracked());
        assert!(!b.detach().is_tracked());
    }
}
