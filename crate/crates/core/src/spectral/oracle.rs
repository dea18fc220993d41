//! Brute-force enumeration of Z-eigenpairs in dimensions 2 and 3.
//!
//! This is a verification oracle and deliberately shares nothing with the
//! power iteration. In two dimensions the unit circle is scanned for zeros of
//! the tangential residual `t(θ)ᵀ A x(θ)^{k-1}` with `x = (cos θ, sin θ)` and
//! `t = (-sin θ, cos θ)`; sign changes are refined by bisection and touching
//! zeros by golden-section search on `|g|`. In three dimensions Newton's
//! method on `(A x^{k-1} - λ x, (xᵀx - 1)/2) = 0` is started from every point
//! of a spherical grid.
//!
//! Pairs related by a sign flip are reported once. For odd `k`,
//! `(λ, x)` and `(-λ, -x)` are both pairs and the representative has `λ ≥ 0`;
//! for even `k`, `(λ, x)` and `(λ, -x)` are both pairs and the representative
//! has its first non-negligible component positive. Zero-eigenvalue pairs of
//! odd order also use the component rule.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ZEigenpair;
use crate::error::{Error, Result};
use crate::tensor::{norm2, Tensor};

const ACCEPT_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// Odd order: `(λ, x) ~ (-λ, -x)`, representative has `λ ≥ 0`.
    OddOrderNonnegativeLambda,
    /// Even order: `(λ, x) ~ (λ, -x)`, representative has a positive leading component.
    EvenOrderLeadingPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// Sorted by `λ` descending.
    pub pairs: Vec<ZEigenpair>,
    /// Every grid point is an eigenvector (e.g. the zero tensor or a scaled
    /// Z-identity). `pairs` then holds the largest-`λ` representative only.
    pub degenerate: bool,
    pub sign_convention: SignConvention,
}

impl OracleReport {
    pub fn largest_lambda(&self) -> Option<f64> {
        self.pairs.first().map(|p| p.lambda)
    }
}

/// Enumerates Z-eigenpairs of `a` for `n ∈ {2, 3}` on a grid with
/// `resolution` points per angle.
pub fn z_eigenpairs_oracle(a: &Tensor, resolution: usize) -> Result<OracleReport> {
    let n = a.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the eigenpair oracle only scans the unit circle (n = 2) or sphere (n = 3)",
        });
    }
    if resolution < 8 {
        return Err(Error::InvalidInput("oracle resolution must be at least 8".into()));
    }
    let convention = if a.order() % 2 == 1 {
        SignConvention::OddOrderNonnegativeLambda
    } else {
        SignConvention::EvenOrderLeadingPositive
    };

    let grid: Vec<Vec<f64>> = if n == 2 {
        (0..resolution)
            .map(|j| {
                let t = TAU * j as f64 / resolution as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        sphere_grid(resolution)
    };

    let scale = a.max_abs().max(1.0);
    let degenerate = grid
        .iter()
        .map(|x| tangential(a, x))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .all(|r| r <= 1e-12 * scale);
    if degenerate {
        let mut pairs = grid
            .into_iter()
            .map(|x| ZEigenpair::at(a, x).map(|p| canonical(p, convention)))
            .collect::<Result<Vec<_>>>()?;
        pairs.sort_by(|p, q| q.lambda.total_cmp(&p.lambda));
        pairs.truncate(1);
        return Ok(OracleReport { pairs, degenerate, sign_convention: convention });
    }

    let candidates = if n == 2 { scan_circle(a, resolution)? } else { newton_sphere(a, &grid)? };
    let mut pairs: Vec<ZEigenpair> = Vec::new();
    for p in candidates {
        if p.residual >= ACCEPT_RESIDUAL {
            continue;
        }
        let p = canonical(p, convention);
        let dup = pairs.iter().any(|q| {
            (q.lambda - p.lambda).abs() < 1e-7 * scale
                && q.x.iter().zip(&p.x).all(|(u, v)| (u - v).abs() < 1e-6)
        });
        if !dup {
            pairs.push(p);
        }
    }
    pairs.sort_by(|p, q| q.lambda.total_cmp(&p.lambda));
    Ok(OracleReport { pairs, degenerate, sign_convention: convention })
}

fn canonical(mut p: ZEigenpair, convention: SignConvention) -> ZEigenpair {
    let flip = match convention {
        SignConvention::OddOrderNonnegativeLambda if p.lambda.abs() > 1e-12 => p.lambda < 0.0,
        _ => p.x.iter().find(|v| v.abs() > 1e-9).is_some_and(|&v| v < 0.0),
    };
    if flip {
        p.x.iter_mut().for_each(|v| *v = -*v);
        if convention == SignConvention::OddOrderNonnegativeLambda {
            p.lambda = -p.lambda;
        }
    }
    p
}

/// Norm of the component of `A x^{k-1}` orthogonal to the unit vector `x`.
fn tangential(a: &Tensor, x: &[f64]) -> Result<f64> {
    Ok(ZEigenpair::at(a, x.to_vec())?.residual)
}

fn circle_g(a: &Tensor, theta: f64) -> Result<f64> {
    let (s, c) = theta.sin_cos();
    let y = a.contract(&[c, s])?;
    Ok(-s * y[0] + c * y[1])
}

fn pair_at_angle(a: &Tensor, theta: f64) -> Result<ZEigenpair> {
    let (s, c) = theta.sin_cos();
    ZEigenpair::at(a, vec![c, s])
}

fn scan_circle(a: &Tensor, resolution: usize) -> Result<Vec<ZEigenpair>> {
    let h = TAU / resolution as f64;
    let thetas: Vec<f64> = (0..=resolution + 1).map(|j| (j as f64 - 1.0) * h).collect();
    let g = thetas.iter().map(|&t| circle_g(a, t)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for j in 1..=resolution {
        let (t0, t1) = (thetas[j], thetas[j + 1]);
        let (g0, g1) = (g[j], g[j + 1]);
        if g0 == 0.0 {
            out.push(pair_at_angle(a, t0)?);
        } else if g0 * g1 < 0.0 {
            out.push(pair_at_angle(a, bisect(a, t0, t1, g0)?)?);
        }
        // touching zero: |g| has a local minimum at a grid point without a sign change nearby
        let (gm, gp) = (g[j - 1], g[j + 1]);
        if g0.abs() <= gm.abs() && g0.abs() <= gp.abs() && gm * g0 > 0.0 && g0 * gp > 0.0 {
            let t = golden_min(|t| circle_g(a, t).map(f64::abs), thetas[j - 1], t1)?;
            out.push(pair_at_angle(a, t)?);
        }
    }
    Ok(out)
}

fn bisect(a: &Tensor, mut lo: f64, mut hi: f64, mut glo: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = circle_g(a, mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn golden_min(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn sphere_grid(resolution: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * resolution * resolution);
    for i in 0..resolution {
        let theta = PI * (i as f64 + 0.5) / resolution as f64;
        for j in 0..2 * resolution {
            let phi = PI * j as f64 / resolution as f64;
            out.push(vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    out
}

/// Jacobian of `x ↦ A x^{k-1}` by summing over which head slot is
/// differentiated.
fn jacobian(a: &Tensor, x: &[f64]) -> DMatrix<f64> {
    let n = a.dim();
    let k = a.order();
    let mut jac = DMatrix::zeros(n, n);
    for (flat, &v) in a.data().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let idx = a.multi_index(flat);
        for s in 1..k {
            let others: f64 = (1..k).filter(|&t| t != s).map(|t| x[idx[t]]).product();
            jac[(idx[0], idx[s])] += v * others;
        }
    }
    jac
}

fn newton_sphere(a: &Tensor, grid: &[Vec<f64>]) -> Result<Vec<ZEigenpair>> {
    let n = a.dim();
    let mut out = Vec::new();
    'start: for x0 in grid {
        let mut x = x0.clone();
        let mut lambda = ZEigenpair::at(a, x.clone())?.lambda;
        for _ in 0..60 {
            let y = a.contract(&x)?;
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                rhs[i] = -(y[i] - lambda * x[i]);
            }
            rhs[n] = -(x.iter().map(|v| v * v).sum::<f64>() - 1.0) / 2.0;
            if rhs.norm() < 1e-15 * a.max_abs().max(1.0) {
                break;
            }
            let mut m = DMatrix::zeros(n + 1, n + 1);
            let jac = jacobian(a, &x);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = jac[(i, j)];
                }
                m[(i, i)] -= lambda;
                m[(i, n)] = -x[i];
                m[(n, i)] = x[i];
            }
            let Some(step) = m.lu().solve(&rhs) else {
                continue 'start;
            };
            if !step.iter().all(|v| v.is_finite()) {
                continue 'start;
            }
            for i in 0..n {
                x[i] += step[i];
            }
            lambda += step[n];
        }
        let s = norm2(&x);
        if !(s.is_finite() && s > 0.0) {
            continue;
        }
        out.push(ZEigenpair::at(a, x.iter().map(|v| v / s).collect())?);
    }
    Ok(out)
}
