//! Dense row-major tensors and the named parameter store.

use crate::error::{Error, Result};
use crate::numerics::real::Real;
use crate::numerics::rng::Stream;

/// Dense n-dimensional array, row-major. The gradient buffer exists iff
/// `requires_grad`; [`crate::numerics::tape::Tape::backward`] accumulates
/// into it and repeated backward calls keep accumulating until
/// [`Tensor::zero_grad`] resets it.
#[derive(Clone, Debug)]
pub struct Tensor<R: Real> {
    shape: Vec<usize>,
    data: Vec<R>,
    requires_grad: bool,
    grad: Option<Vec<R>>,
}

impl<R: Real> Tensor<R> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![R::ZERO; n], requires_grad: false, grad: None }
    }

    pub fn from_vec(shape: &[usize], data: Vec<R>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {:?} wants {} values, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data, requires_grad: false, grad: None })
    }

    pub fn scalar(v: R) -> Self {
        Tensor { shape: vec![1], data: vec![v], requires_grad: false, grad: None }
    }

    /// I.i.d. normal entries with the given standard deviation.
    pub fn randn(shape: &[usize], std: f64, stream: &mut Stream) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| R::of(stream.normal() * std)).collect();
        Tensor { shape: shape.to_vec(), data, requires_grad: false, grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    /// Enables gradient tracking, allocating a zeroed gradient buffer.
    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
        if on {
            if self.grad.is_none() {
                self.grad = Some(vec![R::ZERO; self.data.len()]);
            }
        } else {
            self.grad = None;
        }
    }

    pub fn grad(&self) -> Option<&[R]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = R::ZERO);
        }
    }

    /// Adds `scale * delta` into the gradient buffer.
    pub fn accumulate_grad(&mut self, delta: &[R], scale: R) -> Result<()> {
        let g = self
            .grad
            .as_mut()
            .ok_or_else(|| Error::Contract("accumulate_grad on a tensor without grad".into()))?;
        if g.len() != delta.len() {
            return Err(Error::Dimension(format!(
                "grad accumulate: {} values into buffer of {}",
                delta.len(),
                g.len()
            )));
        }
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += scale * *di;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Casts every entry through f64 (used by checkpoint I/O).
    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| S::of(v.to_f64())).collect(),
            requires_grad: false,
            grad: None,
        }
    }
}

/// Handle to one parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamRef {
    pub(crate) tag: u32,
    pub(crate) index: usize,
}

impl ParamRef {
    pub fn store_tag(&self) -> u32 {
        self.tag
    }
    pub fn index(&self) -> usize {
        self.index
    }
}

static STORE_COUNTER: std::sync::atomic::AtomicU32 = std::sync::atomic::AtomicU32::new(1);

/// Ordered collection of named parameter tensors. Each store carries a unique
/// tag so tapes can tell parameters of different models apart (e.g. a frozen
/// backbone vs. a trainable branch).
#[derive(Debug)]
pub struct ParamStore<R: Real> {
    tag: u32,
    names: Vec<String>,
    tensors: Vec<Tensor<R>>,
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        let tag = STORE_COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        ParamStore { tag, names: Vec::new(), tensors: Vec::new() }
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Registers a tensor under a unique name and returns its handle.
    pub fn register(&mut self, name: &str, mut tensor: Tensor<R>) -> Result<ParamRef> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        tensor.set_requires_grad(true);
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        Ok(ParamRef { tag: self.tag, index: self.tensors.len() - 1 })
    }

    pub fn get(&self, r: ParamRef) -> &Tensor<R> {
        assert_eq!(r.tag, self.tag, "ParamRef used with the wrong store");
        &self.tensors[r.index]
    }

    pub fn get_mut(&mut self, r: ParamRef) -> &mut Tensor<R> {
        assert_eq!(r.tag, self.tag, "ParamRef used with the wrong store");
        &mut self.tensors[r.index]
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<R>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<R>> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<R>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    pub fn tensor_at(&self, index: usize) -> &Tensor<R> {
        &self.tensors[index]
    }

    pub fn tensor_at_mut(&mut self, index: usize) -> &mut Tensor<R> {
        &mut self.tensors[index]
    }

    pub fn total_params(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    /// Euclidean norm over every gradient buffer, in f64.
    pub fn grad_norm(&self) -> f64 {
        let mut acc = 0.0;
        for t in &self.tensors {
            if let Some(g) = t.grad() {
                for v in g {
                    let x = v.to_f64();
                    acc += x * x;
                }
            }
        }
        acc.sqrt()
    }

    /// Multiplies every gradient by `scale`.
    pub fn scale_grads(&mut self, scale: R) {
        for t in &mut self.tensors {
            if let Some(g) = t.grad.as_mut() {
                g.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
}

impl<R: Real> Default for ParamStore<R> {
    fn default() -> Self {
        Self::new()
    }
}
