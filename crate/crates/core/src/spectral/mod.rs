//! Z-eigenpairs of nonnegative tensors.
//!
//! A Z-eigenpair of an order-`k` tensor `A` is a real `λ` and a unit vector
//! `x` with `A x^{k-1} = λ x`. For a nonnegative tensor a pair with `x ≥ 0`
//! always exists (a Perron pair), and for an irreducible one it has `λ > 0`
//! and `x > 0`. Perron pairs need not be unique.

mod irreducible;
mod oracle;
mod perron;

use serde::Serialize;

pub use irreducible::{is_irreducible, strongly_connected_prepass, Irreducibility};
pub use oracle::{z_eigenpairs_oracle, OracleReport, SignConvention};
pub use perron::{common_perron_eigenvector, perron_z_eigenpair, spectral_radius, CommonPerron, PerronOptions};

use crate::error::Result;
use crate::tensor::{dot, norm2, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZEigenpair {
    pub lambda: f64,
    pub x: Vec<f64>,
    /// `‖A x^{k-1} - λ x‖₂` at the stored `(λ, x)`.
    pub residual: f64,
}

impl ZEigenpair {
    /// Evaluates `λ = xᵀ A x^{k-1}` and the residual at a unit vector `x`.
    pub fn at(a: &Tensor, x: Vec<f64>) -> Result<Self> {
        let y = a.contract(&x)?;
        let lambda = dot(&x, &y);
        let residual = eigen_residual(&y, lambda, &x);
        Ok(ZEigenpair { lambda, x, residual })
    }
}

pub(crate) fn eigen_residual(y: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let r: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - lambda * xi).collect();
    norm2(&r)
}
