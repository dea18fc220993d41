//! Polynomial maps `x+ = A_{k-1} x^{k-1} + ... + A_1 x + b` stored as one
//! tensor per order.
//!
//! Orders are tensor orders: the order-`m` tensor multiplies `x^{m-1}`, so the
//! linear part is the order-2 tensor (a matrix) and a quadratic term lives in
//! an order-3 tensor.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct PolySystem {
    dim: usize,
    tensors: BTreeMap<usize, Tensor>,
    constant: Option<Vec<f64>>,
}

impl PolySystem {
    pub fn new(
        dim: usize,
        tensors: impl IntoIterator<Item = Tensor>,
        constant: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("system dimension must be at least 1".into()));
        }
        let mut map = BTreeMap::new();
        for t in tensors {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.dim() });
            }
            let order = t.order();
            if map.insert(order, t).is_some() {
                return Err(Error::InvalidInput(format!("duplicate tensor of order {order}")));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidInput("a system needs at least one tensor".into()));
        }
        if let Some(b) = &constant {
            if b.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: b.len() });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite constant term".into()));
            }
        }
        Ok(PolySystem { dim, tensors: map, constant })
    }

    /// Convenience constructor for a system without constant term.
    pub fn homogeneous_parts(tensors: impl IntoIterator<Item = Tensor>) -> Result<Self> {
        let tensors: Vec<Tensor> = tensors.into_iter().collect();
        let dim = tensors
            .first()
            .map(Tensor::dim)
            .ok_or_else(|| Error::InvalidInput("a system needs at least one tensor".into()))?;
        PolySystem::new(dim, tensors, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tensor(&self, order: usize) -> Option<&Tensor> {
        self.tensors.get(&order)
    }

    /// Tensors in increasing order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.values()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.tensors.keys().copied().collect()
    }

    pub fn max_order(&self) -> usize {
        *self.tensors.keys().next_back().expect("system has at least one tensor")
    }

    /// Orders whose tensor has at least one nonzero entry.
    pub fn nonzero_orders(&self) -> Vec<usize> {
        self.tensors
            .iter()
            .filter(|(_, t)| !t.is_zero())
            .map(|(&m, _)| m)
            .collect()
    }

    pub fn constant(&self) -> Option<&[f64]> {
        self.constant.as_deref()
    }

    pub fn has_constant(&self) -> bool {
        self.constant.is_some()
    }

    /// Replaces (or inserts) the tensor of the given tensor's order.
    pub fn with_tensor(&self, t: Tensor) -> Result<PolySystem> {
        if t.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: t.dim() });
        }
        let mut out = self.clone();
        out.tensors.insert(t.order(), t);
        Ok(out)
    }

    /// One step of the map: the sum of `A x^{m-1}` over all stored tensors,
    /// plus `b` when present.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut out = self.constant.clone().unwrap_or_else(|| vec![0.0; self.dim]);
        for t in self.tensors.values() {
            for (o, v) in out.iter_mut().zip(t.contract(x)?) {
                *o += v;
            }
        }
        Ok(out)
    }
}
