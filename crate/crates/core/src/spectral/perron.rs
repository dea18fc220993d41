use nalgebra::DMatrix;
use serde::Serialize;

use super::{eigen_residual, ZEigenpair};
use crate::error::{Error, Result};
use crate::tensor::{dot, norm2, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronOptions {
    /// Target for `‖A x^{k-1} - λ x‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PerronOptions {
    fn default() -> Self {
        PerronOptions { tol: 1e-10, max_iter: 100_000 }
    }
}

/// Perron-Z-eigenpair of a nonnegative tensor by the shifted power iteration
///
/// ```text
/// x+ = (A x^{k-1} + α x) / ‖A x^{k-1} + α x‖₂,   α = k · max|A|
/// ```
///
/// run from the uniform vector `1/√n` and from `n` positive starts tilted
/// towards each coordinate axis. Every start stays in the nonnegative orthant.
/// Among the starts that converge the pair with the largest `λ` is returned
/// (earliest start on ties), so the result is deterministic.
pub fn perron_z_eigenpair(a: &Tensor, opts: PerronOptions) -> Result<ZEigenpair> {
    if !a.is_nonnegative() {
        return Err(Error::InvalidInput(
            "Perron pairs are defined for nonnegative tensors; take the absolute value first".into(),
        ));
    }
    if a.is_zero() {
        return Err(Error::InvalidInput("Perron pair of the zero tensor is not unique".into()));
    }
    let n = a.dim();
    let alpha = a.order() as f64 * a.max_abs();

    let mut best: Option<ZEigenpair> = None;
    let mut closest: Option<ZEigenpair> = None;
    for start in starts(n) {
        match iterate(a, start, alpha, opts)? {
            Ok(pair) => {
                let better = match &best {
                    None => true,
                    Some(b) => pair.lambda > b.lambda + 1e-12 * b.lambda.abs().max(1.0),
                };
                if better {
                    best = Some(pair);
                }
            }
            Err(pair) => {
                if closest.as_ref().is_none_or(|c| pair.residual < c.residual) {
                    closest = Some(pair);
                }
            }
        }
    }
    best.ok_or_else(|| Error::NotConverged {
        iterations: opts.max_iter,
        best: Box::new(closest.expect("at least one start")),
    })
}

fn starts(n: usize) -> Vec<Vec<f64>> {
    let uniform = vec![1.0 / (n as f64).sqrt(); n];
    let mut out = vec![uniform];
    if n > 1 {
        for i in 0..n {
            let mut v = vec![0.1; n];
            v[i] = 1.0;
            let s = norm2(&v);
            out.push(v.into_iter().map(|c| c / s).collect());
        }
    }
    out
}

/// Outer `Err` is a hard failure, inner `Err` carries the best non-converged
/// iterate.
fn iterate(
    a: &Tensor,
    mut x: Vec<f64>,
    alpha: f64,
    opts: PerronOptions,
) -> Result<std::result::Result<ZEigenpair, ZEigenpair>> {
    let mut best: Option<ZEigenpair> = None;
    for _ in 0..opts.max_iter {
        let y = a.contract(&x)?;
        let lambda = dot(&x, &y);
        let residual = eigen_residual(&y, lambda, &x);
        if residual < opts.tol {
            return Ok(Ok(ZEigenpair { lambda, x, residual }));
        }
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(ZEigenpair { lambda, x: x.clone(), residual });
        }
        let mut z: Vec<f64> = y.iter().zip(&x).map(|(yi, xi)| yi + alpha * xi).collect();
        let s = norm2(&z);
        z.iter_mut().for_each(|v| *v /= s);
        x = z;
    }
    Ok(Err(best.expect("max_iter > 0")))
}

/// Result of [`common_perron_eigenvector`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonPerron {
    pub delta: Vec<f64>,
    /// One eigenvalue per input tensor, in input order.
    pub lambdas: Vec<f64>,
}

/// Computes a Perron pair of the first tensor and checks that its vector is
/// also a Z-eigenvector of every other tensor (relative residual `< tol`).
/// Returns `None` when some tensor fails the check.
pub fn common_perron_eigenvector(
    tensors: &[&Tensor],
    tol: f64,
    opts: PerronOptions,
) -> Result<Option<CommonPerron>> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::InvalidInput("need at least one tensor".into()))?;
    let n = first.dim();
    if let Some(t) = tensors.iter().find(|t| t.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: t.dim() });
    }
    if tensors.iter().any(|t| !t.is_nonnegative()) {
        return Err(Error::InvalidInput("common Perron vector needs nonnegative tensors".into()));
    }
    let pair = perron_z_eigenpair(first, opts)?;
    let delta = pair.x;
    let mut lambdas = vec![pair.lambda];
    for t in &tensors[1..] {
        let y = t.contract(&delta)?;
        let lambda = dot(&delta, &y);
        let scale = norm2(&y).max(f64::MIN_POSITIVE);
        if eigen_residual(&y, lambda, &delta) / scale >= tol {
            return Ok(None);
        }
        lambdas.push(lambda);
    }
    Ok(Some(CommonPerron { delta, lambdas }))
}

/// Largest eigenvalue modulus of an order-2 tensor read as a matrix.
pub fn spectral_radius(m: &Tensor) -> Result<f64> {
    if m.order() != 2 {
        return Err(Error::InvalidInput(format!(
            "spectral radius needs an order-2 tensor, got order {}",
            m.order()
        )));
    }
    let n = m.dim();
    let mat = DMatrix::from_row_slice(n, n, m.data());
    Ok(mat
        .complex_eigenvalues()
        .iter()
        .fold(0.0, |r, z| r.max(z.norm())))
}
