//! Stability of the origin and explicit, conservative domains of attraction.
//!
//! Every certificate is built around the Lyapunov function
//! `V(x) = max_j |x_j| / δ_j`:
//!
//! * [`theorem1_certificate`]: homogeneous map `x+ = A x^{k-1}`, with
//!   `(λ, δ)` a Perron pair of `|A|`; the region is `V < (1/λ)^{1/(k-2)}`.
//! * [`theorem2_certificate`]: all nonzero `|A_m|` share a Perron vector `δ`;
//!   the region is `V < y+` with `Σ_m λ(|A_m|) y^{m-2} = 1`.
//! * [`theorem3_certificate`]: no common eigenvector needed; uses per-row
//!   absolute sums and a box `max_j |x_j| < min_p y_{p+}`.
//! * [`quadratic_certificate`] / [`cubic_certificate`]: closed forms of the
//!   box certificate for maximal order 3 and 4.

mod root;
mod shift;

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

pub use root::{positive_root, root_polynomial};
pub use shift::shift_equilibrium;

use crate::error::{Error, Result};
use crate::spectral::{
    common_perron_eigenvector, is_irreducible, perron_z_eigenpair, spectral_radius, Irreducibility,
    PerronOptions,
};
use crate::system::PolySystem;
use crate::tensor::Tensor;

/// Relative residual accepted when checking that the first tensor's Perron
/// vector is an eigenvector of the others.
pub const COMMON_VECTOR_TOL: f64 = 1e-8;

/// Positivity threshold on the Perron vector when the tensor is reducible.
/// Well above the iteration tolerance, so a component that is still decaying
/// towards zero is not mistaken for a positive weight.
const POSITIVE_VECTOR_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    /// Homogeneous system, Perron pair of `|A|`.
    T1,
    /// Common Perron vector of all `|A_m|`.
    T2,
    /// Per-row absolute sums, box region.
    T3,
    /// Closed form of T3 for quadratic systems.
    C1,
    /// Closed form of T3 for cubic systems.
    C2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    /// `max_j |x_j| / δ_j < radius`.
    Weighted { delta: Vec<f64> },
    /// `max_j |x_j| < radius`.
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractionCertificate {
    pub theorem: Theorem,
    #[serde(flatten)]
    pub region: Region,
    /// May be `+∞` (serialized as the string `"inf"`).
    #[serde(serialize_with = "serialize_radius")]
    pub radius: f64,
    /// Tensor order → coefficient the radius was computed from: Perron
    /// eigenvalues for T1/T2, absolute row sums of `binding_row` for the box
    /// certificates.
    #[serde(rename = "lambdas_used")]
    pub coefficients: BTreeMap<usize, f64>,
    /// Row attaining the minimum for box certificates (0-based, serialized 1-based).
    #[serde(serialize_with = "serialize_row", skip_serializing_if = "Option::is_none")]
    pub binding_row: Option<usize>,
    /// Feedback gain folded into the coefficients, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    /// Set when the certificate comes from a zero eigenvalue or all-zero
    /// tensors rather than the generic formula.
    pub degenerate: bool,
}

fn serialize_radius<S: Serializer>(r: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if r.is_finite() {
        s.serialize_f64(*r)
    } else {
        s.serialize_str("inf")
    }
}

fn serialize_row<S: Serializer>(r: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(p) => s.serialize_u64(*p as u64 + 1),
        None => s.serialize_none(),
    }
}

impl AttractionCertificate {
    /// The Lyapunov level `max_j |x_j| / δ_j` (or `max_j |x_j|` for a box).
    pub fn level(&self, x: &[f64]) -> f64 {
        match &self.region {
            Region::Weighted { delta } => x
                .iter()
                .zip(delta)
                .fold(0.0, |m, (xi, di)| m.max(xi.abs() / di)),
            Region::Box => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Strict interior test; boundary points are not certified.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < self.radius
    }

    pub fn is_bounded(&self) -> bool {
        self.radius.is_finite()
    }

    pub fn delta(&self) -> Option<&[f64]> {
        match &self.region {
            Region::Weighted { delta } => Some(delta),
            Region::Box => None,
        }
    }
}

fn require_no_constant(sys: &PolySystem) -> Result<()> {
    if sys.has_constant() {
        return Err(Error::InvalidInput(
            "system has a constant term; move the equilibrium to the origin with shift_equilibrium first".into(),
        ));
    }
    Ok(())
}

fn require_irreducible(t: &Tensor) -> Result<()> {
    match is_irreducible(t)? {
        Irreducibility::Irreducible => Ok(()),
        Irreducibility::Reducible { witness } => Err(Error::Reducible { order: t.order(), witness }),
    }
}

/// Certificate for the homogeneous system `x+ = A x^{k-1}` with `k >= 3`.
///
/// `|A|` must be irreducible, except that a reducible `|A|` is still accepted
/// when the computed Perron vector is strictly positive, which is all the
/// Lyapunov argument uses.
pub fn theorem1_certificate(a: &Tensor, opts: PerronOptions) -> Result<AttractionCertificate> {
    let k = a.order();
    if k < 3 {
        return Err(Error::InvalidInput(format!(
            "homogeneous certificate needs order >= 3 (radius exponent 1/(k-2)), got order {k}; use local_stability for linear maps"
        )));
    }
    let abs = a.abs();
    let n = a.dim();
    if abs.is_zero() {
        return Ok(AttractionCertificate {
            theorem: Theorem::T1,
            region: Region::Weighted { delta: vec![1.0 / (n as f64).sqrt(); n] },
            radius: f64::INFINITY,
            coefficients: BTreeMap::from([(k, 0.0)]),
            binding_row: None,
            gain: None,
            degenerate: true,
        });
    }
    let irreducibility = is_irreducible(&abs)?;
    let pair = perron_z_eigenpair(&abs, opts)?;
    if let Irreducibility::Reducible { witness } = irreducibility {
        if pair.x.iter().any(|&v| v < POSITIVE_VECTOR_MIN) {
            return Err(Error::Reducible { order: k, witness });
        }
    }
    let radius = pair.lambda.recip().powf(1.0 / (k - 2) as f64);
    Ok(AttractionCertificate {
        theorem: Theorem::T1,
        region: Region::Weighted { delta: pair.x },
        radius,
        coefficients: BTreeMap::from([(k, pair.lambda)]),
        binding_row: None,
        gain: None,
        degenerate: false,
    })
}

/// Certificate from a common Perron vector of all nonzero `|A_m|`.
pub fn theorem2_certificate(sys: &PolySystem, opts: PerronOptions) -> Result<AttractionCertificate> {
    weighted_certificate(sys, None, opts)
}

/// Theorem-2 certificate with the order-`order` eigenvalue replaced by
/// `λ(|A_order|) + s`.
///
/// This is the effect of adding a feedback term whose absolute tensor has the
/// common Perron vector `δ` as an eigenvector with eigenvalue `s`. The
/// shifted coefficient must stay nonnegative.
pub fn shifted_certificate(
    sys: &PolySystem,
    order: usize,
    s: f64,
    opts: PerronOptions,
) -> Result<AttractionCertificate> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("invalid order {order} for eigenvalue shift")));
    }
    if !s.is_finite() {
        return Err(Error::InvalidInput("gain must be finite".into()));
    }
    weighted_certificate(sys, Some((order, s)), opts)
}

fn weighted_certificate(
    sys: &PolySystem,
    shift: Option<(usize, f64)>,
    opts: PerronOptions,
) -> Result<AttractionCertificate> {
    require_no_constant(sys)?;
    let n = sys.dim();
    let abs: Vec<Tensor> = sys.tensors().filter(|t| !t.is_zero()).map(Tensor::abs).collect();
    for t in &abs {
        require_irreducible(t)?;
    }

    let (delta, mut coefficients) = if abs.is_empty() {
        (vec![1.0 / (n as f64).sqrt(); n], BTreeMap::new())
    } else {
        let refs: Vec<&Tensor> = abs.iter().collect();
        let common = common_perron_eigenvector(&refs, COMMON_VECTOR_TOL, opts)?
            .ok_or(Error::NoCommonEigenvector)?;
        let coeffs = abs.iter().map(Tensor::order).zip(common.lambdas).collect();
        (common.delta, coeffs)
    };

    let gain = shift.map(|(order, s)| {
        let c = coefficients.entry(order).or_insert(0.0);
        *c += s;
        s
    });
    if let Some((order, _)) = shift {
        let c = coefficients[&order];
        if c < 0.0 {
            return Err(Error::ConditionViolated(format!(
                "shifted eigenvalue λ(|A|) + s = {c} for order {order} is negative"
            )));
        }
    }
    let c2 = coefficients.get(&2).copied().unwrap_or(0.0);
    if c2 >= 1.0 {
        return Err(Error::ConditionViolated(format!(
            "Perron eigenvalue of the linear part λ(|A_1|) = {c2} is not below 1"
        )));
    }
    let radius = positive_root(&coefficients)?;
    let degenerate = abs.is_empty();
    Ok(AttractionCertificate {
        theorem: Theorem::T2,
        region: Region::Weighted { delta },
        radius,
        coefficients,
        binding_row: None,
        gain,
        degenerate,
    })
}

/// Absolute row sums per tensor order, after the shared box-certificate
/// preconditions (no constant term, nonzero tensors irreducible, linear row
/// sums below one).
fn box_row_sums(sys: &PolySystem) -> Result<BTreeMap<usize, Vec<f64>>> {
    require_no_constant(sys)?;
    for t in sys.tensors().filter(|t| !t.is_zero()) {
        require_irreducible(t)?;
    }
    let sums: BTreeMap<usize, Vec<f64>> = sys
        .tensors()
        .map(|t| (t.order(), t.row_absolute_sums()))
        .collect();
    if let Some(linear) = sums.get(&2) {
        if let Some((p, &s)) = linear.iter().enumerate().find(|(_, &s)| s >= 1.0) {
            return Err(Error::ConditionViolated(format!(
                "absolute row sum {s} of the linear part at row {} is not below 1",
                p + 1
            )));
        }
    }
    Ok(sums)
}

fn row_coefficients(sums: &BTreeMap<usize, Vec<f64>>, p: usize) -> BTreeMap<usize, f64> {
    sums.iter().map(|(&m, rows)| (m, rows[p])).collect()
}

/// Minimum over rows of `per_row`, keeping the first minimizer.
fn min_over_rows(
    theorem: Theorem,
    sums: &BTreeMap<usize, Vec<f64>>,
    n: usize,
    per_row: impl Fn(&BTreeMap<usize, f64>) -> Result<f64>,
) -> Result<AttractionCertificate> {
    let mut radius = f64::INFINITY;
    let mut binding_row = None;
    for p in 0..n {
        let y = per_row(&row_coefficients(sums, p))?;
        if y < radius {
            radius = y;
            binding_row = Some(p);
        }
    }
    let coefficients = row_coefficients(sums, binding_row.unwrap_or(0));
    let degenerate = sums.values().all(|rows| rows.iter().all(|&s| s == 0.0));
    Ok(AttractionCertificate {
        theorem,
        region: Region::Box,
        radius,
        coefficients,
        binding_row,
        gain: None,
        degenerate,
    })
}

/// Box certificate `max_j |x_j| < min_p y_{p+}` where `y_{p+}` solves
/// `Σ_m rowsum_m(p) y^{m-2} = 1` over the tensor orders `m` present.
pub fn theorem3_certificate(sys: &PolySystem) -> Result<AttractionCertificate> {
    let sums = box_row_sums(sys)?;
    min_over_rows(Theorem::T3, &sums, sys.dim(), positive_root)
}

fn require_max_order(sys: &PolySystem, max: usize, what: &str) -> Result<()> {
    if sys.max_order() > max {
        return Err(Error::InvalidInput(format!(
            "{what} certificate needs tensor orders <= {max}, system has order {}",
            sys.max_order()
        )));
    }
    Ok(())
}

/// Closed form `min_p (1 - C1_p) / C2_p` for systems of maximal order 3.
pub fn quadratic_certificate(sys: &PolySystem) -> Result<AttractionCertificate> {
    require_max_order(sys, 3, "quadratic")?;
    let sums = box_row_sums(sys)?;
    min_over_rows(Theorem::C1, &sums, sys.dim(), |c| {
        let c1 = c.get(&2).copied().unwrap_or(0.0);
        let c2 = c.get(&3).copied().unwrap_or(0.0);
        Ok(if c2 > 0.0 { (1.0 - c1) / c2 } else { f64::INFINITY })
    })
}

/// Closed form for systems of maximal order 4: the positive root of
/// `C3 y² + C2 y + (C1 - 1) = 0`, evaluated as
/// `2 (1 - C1) / (C2 + √(C2² + 4 C3 (1 - C1)))` to avoid cancellation.
pub fn cubic_certificate(sys: &PolySystem) -> Result<AttractionCertificate> {
    require_max_order(sys, 4, "cubic")?;
    let sums = box_row_sums(sys)?;
    min_over_rows(Theorem::C2, &sums, sys.dim(), |c| {
        let c1 = c.get(&2).copied().unwrap_or(0.0);
        let c2 = c.get(&3).copied().unwrap_or(0.0);
        let c3 = c.get(&4).copied().unwrap_or(0.0);
        let slack = 1.0 - c1;
        Ok(if c3 > 0.0 || c2 > 0.0 {
            2.0 * slack / (c2 + (c2 * c2 + 4.0 * c3 * slack).sqrt())
        } else {
            f64::INFINITY
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalVerdict {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalStability {
    pub verdict: LocalVerdict,
    /// Spectral radius of the linear part (0 when there is none).
    pub spectral_radius: f64,
}

/// Tolerance around 1 inside which the linearization is called marginal.
pub const MARGINAL_TOL: f64 = 1e-10;

/// Local stability of the origin from the spectral radius of the Jacobian,
/// which is the order-2 tensor.
pub fn local_stability(sys: &PolySystem) -> Result<LocalStability> {
    require_no_constant(sys)?;
    let rho = match sys.tensor(2) {
        Some(a1) => spectral_radius(a1)?,
        None => 0.0,
    };
    let verdict = if (rho - 1.0).abs() <= MARGINAL_TOL {
        LocalVerdict::Marginal
    } else if rho < 1.0 {
        LocalVerdict::Stable
    } else {
        LocalVerdict::Unstable
    };
    Ok(LocalStability { verdict, spectral_radius: rho })
}

/// Every certificate that applies to `sys`, in the order T1, T2, T3, C1, C2,
/// together with the reason each inapplicable one was rejected.
pub fn all_certificates(
    sys: &PolySystem,
    opts: PerronOptions,
) -> Vec<(Theorem, Result<AttractionCertificate>)> {
    let mut out = Vec::new();
    let nonzero = sys.nonzero_orders();
    if sys.orders().len() == 1 && sys.max_order() >= 3 && !sys.has_constant() {
        let a = sys.tensor(sys.max_order()).expect("order present");
        out.push((Theorem::T1, theorem1_certificate(a, opts)));
    }
    out.push((Theorem::T2, theorem2_certificate(sys, opts)));
    out.push((Theorem::T3, theorem3_certificate(sys)));
    let max_nonzero = nonzero.last().copied().unwrap_or(2);
    if sys.max_order() <= 3 && max_nonzero == 3 {
        out.push((Theorem::C1, quadratic_certificate(sys)));
    }
    if sys.max_order() <= 4 && max_nonzero == 4 {
        out.push((Theorem::C2, cubic_certificate(sys)));
    }
    out
}
