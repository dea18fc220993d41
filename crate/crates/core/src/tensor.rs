//! Dense cubical tensors.
//!
//! A tensor of order `k` and dimension `n` stores `n^k` reals in row-major
//! order over the multi-index `(i_1, i_2, ..., i_k)`. The first index is the
//! tail (the node being influenced) and the remaining `k - 1` indices form
//! the head multi-index. Contraction `A x^{k-1}` sums over every head index,
//! so row `i` of the tensor is the contiguous block of `n^{k-1}` entries
//! starting at `i * n^{k-1}`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("order", &self.order)
            .field("dim", &self.dim)
            .field("data", &self.data)
            .finish()
    }
}

fn checked_len(order: usize, dim: usize) -> Result<usize> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("tensor order must be at least 2, got {order}")));
    }
    if dim < 1 {
        return Err(Error::InvalidInput("tensor dimension must be at least 1".into()));
    }
    let exp = u32::try_from(order)
        .map_err(|_| Error::InvalidInput(format!("tensor order {order} is too large")))?;
    dim.checked_pow(exp)
        .filter(|&len| len <= 1 << 28)
        .ok_or_else(|| {
            Error::InvalidInput(format!("tensor with n = {dim}, k = {order} is too large to store densely"))
        })
}

impl Tensor {
    /// Builds a tensor from row-major entries. Rejects wrong lengths and
    /// non-finite values.
    pub fn new(order: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(order, dim)?;
        if data.len() != len {
            return Err(Error::InvalidInput(format!(
                "tensor with n = {dim}, k = {order} needs {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite tensor entry at flat position {pos}")));
        }
        Ok(Tensor { order, dim, data })
    }

    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        let len = checked_len(order, dim)?;
        Ok(Tensor { order, dim, data: vec![0.0; len] })
    }

    pub fn filled(order: usize, dim: usize, value: f64) -> Result<Self> {
        let len = checked_len(order, dim)?;
        Tensor::new(order, dim, vec![value; len])
    }

    /// Builds a tensor by evaluating `f` at every (0-based) multi-index.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = checked_len(order, dim)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; order];
        for flat in 0..len {
            unravel_into(flat, dim, &mut idx);
            data.push(f(&idx));
        }
        Tensor::new(order, dim, data)
    }

    /// The order-2 tensor with the given rows.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix must be square".into()));
        }
        Tensor::new(2, n, rows.concat())
    }

    pub fn identity_matrix(dim: usize) -> Result<Self> {
        Tensor::from_fn(2, dim, |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of head multi-indices per row, `n^{k-1}`.
    pub fn row_len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[p * w..(p + 1) * w]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    /// Sets one entry. Panics on out-of-range indices; rejects non-finite
    /// values.
    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidInput("non-finite tensor entry".into()));
        }
        assert!(idx.len() == self.order && idx.iter().all(|&i| i < self.dim));
        let flat = self.flat_index(idx);
        self.data[flat] = value;
        Ok(())
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order];
        unravel_into(flat, self.dim, &mut idx);
        idx
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `A x^{k-1}`: component `i` is `sum_I A[i, I] x_{i_2} ... x_{i_k}`.
    /// For order 2 this is the matrix-vector product.
    pub fn contract(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(x)?;
        let heads = head_products(x, self.order - 1);
        Ok(self
            .data
            .chunks_exact(heads.len())
            .map(|row| row.iter().zip(&heads).map(|(a, w)| a * w).sum())
            .collect())
    }

    /// `x^T A x^{k-1}`.
    pub fn form(&self, x: &[f64]) -> Result<f64> {
        let y = self.contract(x)?;
        Ok(dot(x, &y))
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> Tensor {
        Tensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|v| v.abs()).collect(),
        }
    }

    /// `sum_I |A[p, I]|`, the absolute sum of row `p` (0-based).
    pub fn row_absolute_sum(&self, p: usize) -> Result<f64> {
        if p >= self.dim {
            return Err(Error::InvalidInput(format!(
                "row index {} out of range 1..={}",
                p + 1,
                self.dim
            )));
        }
        Ok(self.row(p).iter().map(|v| v.abs()).sum())
    }

    pub fn row_absolute_sums(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.row_len())
            .map(|row| row.iter().map(|v| v.abs()).sum())
            .collect()
    }

    /// True when every entry agrees with the entry at its sorted multi-index
    /// to within `tol`, i.e. the tensor is invariant under index permutation.
    pub fn is_supersymmetric(&self, tol: f64) -> bool {
        let mut idx = vec![0; self.order];
        (0..self.data.len()).all(|flat| {
            unravel_into(flat, self.dim, &mut idx);
            idx.sort_unstable();
            (self.data[flat] - self.get(&idx)).abs() <= tol
        })
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn try_add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Tensor::new(self.order, self.dim, data)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Tensor, c: f64) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect();
        Tensor::new(self.order, self.dim, data)
    }

    /// Nonzero entries as (0-based multi-index, value) pairs in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(flat, &v)| (self.multi_index(flat), v))
    }

    fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.order != other.order {
            return Err(Error::InvalidInput(format!(
                "order mismatch: {} vs {}",
                self.order, other.order
            )));
        }
        Ok(())
    }
}

/// The Kronecker power `x ⊗ x ⊗ ... ⊗ x` (`slots` factors, first factor
/// slowest), i.e. the products `x_{i_2} ... x_{i_k}` in head-index order.
pub(crate) fn head_products(x: &[f64], slots: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for _ in 0..slots {
        w = w.iter().flat_map(|&a| x.iter().map(move |&b| a * b)).collect();
    }
    w
}

pub(crate) fn unravel_into(mut flat: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Tensor;

    /// Order-3, n = 2: all ones except (1,1,2), (2,1,2), (1,2,1), (2,2,1) = 0.5.
    pub fn worked_a2() -> Tensor {
        let mut t = Tensor::filled(3, 2, 1.0).unwrap();
        for idx in [[0, 0, 1], [1, 0, 1], [0, 1, 0], [1, 1, 0]] {
            t.set(&idx, 0.5).unwrap();
        }
        t
    }

    /// Same polynomial as `worked_a2`, with entries 1.5 at (·,1,2) and -0.5 at (·,2,1).
    pub fn worked_a2_tilde() -> Tensor {
        let mut t = Tensor::filled(3, 2, 1.0).unwrap();
        for idx in [[0, 0, 1], [1, 0, 1]] {
            t.set(&idx, 1.5).unwrap();
        }
        for idx in [[0, 1, 0], [1, 1, 0]] {
            t.set(&idx, -0.5).unwrap();
        }
        t
    }

    pub fn worked_a1() -> Tensor {
        Tensor::from_matrix(&[vec![0.1, 0.1], vec![0.1, 0.1]]).unwrap()
    }
}
