//! Feedback `g(x) = s Ĩ x^{l-1}` built from a Z-identity tensor, and its
//! effect on the certified region.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::PerronOptions;
use crate::stability::{shifted_certificate, AttractionCertificate};
use crate::system::PolySystem;
use crate::tensor::Tensor;

/// Entrywise tolerance when checking `|A_l + s Ĩ| = |A_l| + s I_z`.
const ABS_IDENTITY_TOL: f64 = 1e-12;

fn require_even(l: usize) -> Result<()> {
    if l < 2 || l % 2 == 1 {
        return Err(Error::InvalidInput(format!(
            "Z-identity tensors exist only for even order >= 2, got {l}; there is no odd-order Z-identity"
        )));
    }
    Ok(())
}

fn on_support(idx: &[usize]) -> bool {
    idx.chunks(2).all(|p| p[0] == p[1])
}

/// Paired-delta Z-identity: `I[i1, ..., il] = δ_{i1 i2} δ_{i3 i4} ... δ_{i(l-1) il}`.
///
/// `I x^{l-1} = x (xᵀx)^{(l-2)/2}`, so `I x^{l-1} = x` on the unit sphere.
pub fn z_identity(l: usize, n: usize) -> Result<Tensor> {
    require_even(l)?;
    Tensor::from_fn(l, n, |idx| if on_support(idx) { 1.0 } else { 0.0 })
}

/// `Ĩ_idx = sgn(A_idx) · |I_z[idx]|`, with `sgn(0) = +1`.
///
/// For `s < 0` the magnitude of `A_l` must dominate the gain: besides
/// `max |A_l| > |s|`, every entry on the support of `I_z` needs `|A_idx| >= |s|`,
/// otherwise `|A_l + s Ĩ| = |A_l| + s I_z` fails at that entry.
pub fn sign_matched_identity(a_l: &Tensor, s: f64) -> Result<Tensor> {
    let l = a_l.order();
    require_even(l)?;
    if !s.is_finite() {
        return Err(Error::InvalidInput("gain must be finite".into()));
    }
    if s < 0.0 {
        if !(a_l.max_abs() > -s) {
            return Err(Error::InvalidInput(format!(
                "negative gain needs max|A_{l}| > |s|: max|A| = {}, |s| = {}",
                a_l.max_abs(),
                -s
            )));
        }
        let weak = (0..a_l.len())
            .map(|f| a_l.multi_index(f))
            .find(|idx| on_support(idx) && a_l.get(idx).abs() < -s);
        if let Some(idx) = weak {
            let shown: Vec<usize> = idx.iter().map(|i| i + 1).collect();
            return Err(Error::InvalidInput(format!(
                "negative gain |s| = {} exceeds |A_{l}| = {} at Z-identity entry {shown:?}",
                -s,
                a_l.get(&idx).abs()
            )));
        }
    }
    Tensor::from_fn(l, a_l.dim(), |idx| {
        if !on_support(idx) {
            0.0
        } else if a_l.get(idx) < 0.0 {
            -1.0
        } else {
            1.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerSpec {
    pub l: usize,
    pub s: f64,
    #[serde(skip)]
    pub itilde: Tensor,
}

impl ControllerSpec {
    /// Controller acting on the order-`l` tensor of `sys` (taken as zero when
    /// the system has none).
    pub fn for_system(sys: &PolySystem, l: usize, s: f64) -> Result<ControllerSpec> {
        require_even(l)?;
        let zero;
        let a_l = match sys.tensor(l) {
            Some(t) => t,
            None => {
                zero = Tensor::zeros(l, sys.dim())?;
                &zero
            }
        };
        Ok(ControllerSpec { l, s, itilde: sign_matched_identity(a_l, s)? })
    }
}

fn check_spec(sys: &PolySystem, ctrl: &ControllerSpec) -> Result<()> {
    require_even(ctrl.l)?;
    if ctrl.itilde.order() != ctrl.l {
        return Err(Error::InvalidInput(format!(
            "controller tensor has order {} but l = {}",
            ctrl.itilde.order(),
            ctrl.l
        )));
    }
    if ctrl.itilde.dim() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: ctrl.itilde.dim() });
    }
    Ok(())
}

/// `sys` with `A_l` replaced by `A_l + s Ĩ`.
pub fn closed_loop(sys: &PolySystem, ctrl: &ControllerSpec) -> Result<PolySystem> {
    check_spec(sys, ctrl)?;
    let a_l = match sys.tensor(ctrl.l) {
        Some(t) => t.clone(),
        None => Tensor::zeros(ctrl.l, sys.dim())?,
    };
    sys.with_tensor(a_l.add_scaled(&ctrl.itilde, ctrl.s)?)
}

/// Common-Perron-vector certificate of the closed loop, with
/// `λ(|A_l|)` replaced by `λ(|A_l|) + s`.
///
/// Valid because `|A_l + s Ĩ| = |A_l| + s I_z` and `I_z δ^{l-1} = δ` for the
/// unit vector `δ`; the identity is checked entrywise before use.
pub fn controlled_certificate(
    sys: &PolySystem,
    ctrl: &ControllerSpec,
    opts: PerronOptions,
) -> Result<AttractionCertificate> {
    check_spec(sys, ctrl)?;
    let n = sys.dim();
    let iz = z_identity(ctrl.l, n)?;
    let a_l = match sys.tensor(ctrl.l) {
        Some(t) => t.clone(),
        None => Tensor::zeros(ctrl.l, n)?,
    };
    let controlled = a_l.add_scaled(&ctrl.itilde, ctrl.s)?.abs();
    let predicted = a_l.abs().add_scaled(&iz, ctrl.s)?;
    let mismatch = controlled
        .data()
        .iter()
        .zip(predicted.data())
        .any(|(u, v)| (u - v).abs() > ABS_IDENTITY_TOL * u.abs().max(1.0));
    if mismatch {
        return Err(Error::ConditionViolated(
            "|A_l + sĨ| differs from |A_l| + s·I_z; the eigenvalue shift does not apply".into(),
        ));
    }
    shifted_certificate(sys, ctrl.l, ctrl.s, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, SimParams, Verdict};
    use crate::stability::theorem2_certificate;
    use crate::tensor::norm2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn z_identity_examples() {
        let iz = z_identity(4, 2).unwrap();
        let y = iz.contract(&[0.6, 0.8]).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        assert_eq!(iz.contract(&[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(z_identity(2, 3).unwrap(), Tensor::identity_matrix(3).unwrap());
        assert!(matches!(z_identity(3, 2), Err(Error::InvalidInput(_))));
        assert_eq!(iz.data().iter().filter(|&&v| v == 1.0).count(), 4);
    }

    #[test]
    fn sign_matching() {
        let ones = Tensor::filled(4, 2, 1.0).unwrap();
        assert_eq!(sign_matched_identity(&ones, 0.5).unwrap(), z_identity(4, 2).unwrap());

        let neg = ones.scaled(-1.0);
        let it = sign_matched_identity(&neg, 0.7).unwrap();
        assert_eq!(it, z_identity(4, 2).unwrap().scaled(-1.0));
        let lhs = neg.add_scaled(&it, 0.7).unwrap().abs();
        let rhs = neg.abs().add_scaled(&z_identity(4, 2).unwrap(), 0.7).unwrap();
        for (u, v) in lhs.data().iter().zip(rhs.data()) {
            assert!((u - v).abs() < 1e-15);
        }

        let mut holes = ones.clone();
        holes.set(&[0, 0, 1, 1], 0.0).unwrap();
        let it = sign_matched_identity(&holes, 0.3).unwrap();
        assert_eq!(it.get(&[0, 0, 1, 1]), 1.0);
        assert_eq!((holes.get(&[0, 0, 1, 1]) + 0.3 * it.get(&[0, 0, 1, 1])).abs(), 0.3);

        assert!(sign_matched_identity(&ones, -1.0).is_err());
        assert!(sign_matched_identity(&holes, -0.3).is_err());
        assert!(sign_matched_identity(&Tensor::filled(3, 2, 1.0).unwrap(), 0.1).is_err());
    }

    fn quarter_and_cubic() -> PolySystem {
        PolySystem::homogeneous_parts([
            Tensor::filled(2, 2, 0.25).unwrap(),
            Tensor::filled(4, 2, 1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn closed_loop_examples() {
        let sys = quarter_and_cubic();
        let zero = ControllerSpec::for_system(&sys, 4, 0.0).unwrap();
        assert_eq!(closed_loop(&sys, &zero).unwrap(), sys);

        let half = ControllerSpec::for_system(&sys, 4, 0.5).unwrap();
        let cl = closed_loop(&sys, &half).unwrap();
        let a = cl.tensor(4).unwrap();
        for f in 0..a.len() {
            let idx = a.multi_index(f);
            let expected = if on_support(&idx) { 1.5 } else { 1.0 };
            assert_eq!(a.get(&idx), expected);
        }

        let x = [0.6, 0.8];
        let open = sys.evaluate(&x).unwrap();
        let closed = cl.evaluate(&x).unwrap();
        for i in 0..2 {
            assert!((closed[i] - open[i] - 0.5 * x[i]).abs() < 1e-14);
        }

        // no order-6 tensor yet: created from zero, negative gain impossible
        assert!(ControllerSpec::for_system(&sys, 6, -0.1).is_err());
        let six = ControllerSpec::for_system(&sys, 6, 0.1).unwrap();
        assert_eq!(closed_loop(&sys, &six).unwrap().orders(), vec![2, 4, 6]);
    }

    #[test]
    fn controlled_radius_tracks_gain() {
        let sys = quarter_and_cubic();
        let opts = PerronOptions::default();
        let base = theorem2_certificate(&sys, opts).unwrap();
        let mut last = f64::INFINITY;
        for s in [-0.9, -0.5, 0.0, 0.5, 1.0] {
            let ctrl = ControllerSpec::for_system(&sys, 4, s).unwrap();
            let c = controlled_certificate(&sys, &ctrl, opts).unwrap();
            let lambda = base.coefficients[&4] + s;
            // 0.5 + λ y² = 1
            let oracle = (0.5 / lambda).sqrt();
            assert!((c.radius - oracle).abs() < 1e-9);
            assert!(c.radius < last);
            last = c.radius;
            if s == 0.0 {
                assert_eq!(c.radius, base.radius);
            }
        }
    }

    #[test]
    fn controlled_certificate_rejects_mismatched_identity() {
        let sys = quarter_and_cubic();
        let mut ctrl = ControllerSpec::for_system(&sys, 4, 0.5).unwrap();
        ctrl.itilde = ctrl.itilde.scaled(-1.0);
        assert!(matches!(
            controlled_certificate(&sys, &ctrl, PerronOptions::default()),
            Err(Error::ConditionViolated(_))
        ));
    }

    #[test]
    fn control_rescues_divergent_start() {
        let sys = quarter_and_cubic();
        let x0 = [0.27, 0.27];
        let open = simulate(&sys, &x0, &SimParams::default()).unwrap();
        assert_eq!(open.verdict, Verdict::Diverged);
        let ctrl = ControllerSpec::for_system(&sys, 4, -0.9).unwrap();
        let cl = closed_loop(&sys, &ctrl).unwrap();
        let closed = simulate(&cl, &x0, &SimParams::default()).unwrap();
        assert_eq!(closed.verdict, Verdict::Converged);
    }

    #[test]
    fn z_identity_on_unit_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for l in [4, 6] {
            for n in 1..=5 {
                let iz = z_identity(l, n).unwrap();
                for _ in 0..100 {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let s = norm2(&v);
                    let x: Vec<f64> = v.iter().map(|c| c / s).collect();
                    let y = iz.contract(&x).unwrap();
                    for i in 0..n {
                        assert!((y[i] - x[i]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn absolute_value_identity(seed in any::<u64>(), s in -0.5f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=3);
            let a = Tensor::from_fn(4, n, |_| {
                let m: f64 = rng.gen_range(0.5..2.0);
                if rng.gen_bool(0.5) { m } else { -m }
            })
            .unwrap();
            let it = sign_matched_identity(&a, s).unwrap();
            let lhs = a.add_scaled(&it, s).unwrap().abs();
            let rhs = a.abs().add_scaled(&z_identity(4, n).unwrap(), s).unwrap();
            for (u, v) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
