//! Simulation of `x+ = f(x)`, Lyapunov traces, empirical region sampling and
//! the discrete-time SIS model on a hypergraph.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stability::{AttractionCertificate, Region};
use crate::system::PolySystem;
use crate::tensor::{norm_inf, Tensor};

/// Largest grid accepted by [`sample_region`].
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Half-width of the box sampled by [`verify_certificate`] when the
/// certificate has an infinite radius.
pub const UNBOUNDED_SAMPLE_BOX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimParams {
    pub max_steps: usize,
    /// Converged once `‖x‖∞ < eps_conv`.
    pub eps_conv: f64,
    /// Diverged once `‖x‖∞ > m_div` or a component is not finite.
    pub m_div: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { max_steps: 1000, eps_conv: 1e-8, m_div: 1e6 }
    }
}

impl SimParams {
    fn validate(&self) -> Result<()> {
        if !(self.eps_conv > 0.0 && self.eps_conv.is_finite()) {
            return Err(Error::InvalidInput("convergence threshold must be positive".into()));
        }
        if !(self.m_div > self.eps_conv) {
            return Err(Error::InvalidInput(
                "divergence threshold must exceed the convergence threshold".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    #[serde(rename = "converged-to-origin")]
    Converged,
    Diverged,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `x(0), ..., x(steps_run)`.
    pub states: Vec<Vec<f64>>,
    pub verdict: Verdict,
    pub steps_run: usize,
    /// `‖x(steps_run)‖∞`, `+∞` after an overflow.
    pub final_norm: f64,
}

struct Outcome {
    verdict: Verdict,
    steps_run: usize,
    final_norm: f64,
}

fn classify(x: &[f64], params: &SimParams) -> (f64, Option<Verdict>) {
    if x.iter().any(|v| !v.is_finite()) {
        return (f64::INFINITY, Some(Verdict::Diverged));
    }
    let norm = norm_inf(x);
    let verdict = if norm < params.eps_conv {
        Some(Verdict::Converged)
    } else if norm > params.m_div {
        Some(Verdict::Diverged)
    } else {
        None
    };
    (norm, verdict)
}

fn run(
    sys: &PolySystem,
    x0: &[f64],
    params: &SimParams,
    mut record: impl FnMut(&[f64]),
) -> Result<Outcome> {
    let mut x = x0.to_vec();
    record(&x);
    let mut step = 0;
    loop {
        let (norm, verdict) = classify(&x, params);
        if let Some(verdict) = verdict {
            return Ok(Outcome { verdict, steps_run: step, final_norm: norm });
        }
        if step == params.max_steps {
            return Ok(Outcome { verdict: Verdict::Undecided, steps_run: step, final_norm: norm });
        }
        x = sys.evaluate(&x)?;
        step += 1;
        record(&x);
    }
}

fn check_start(sys: &PolySystem, x0: &[f64]) -> Result<()> {
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial state must be finite".into()));
    }
    Ok(())
}

/// Iterates the map from `x0` until it converges to the origin, diverges, or
/// `max_steps` steps have been taken.
pub fn simulate(sys: &PolySystem, x0: &[f64], params: &SimParams) -> Result<Trajectory> {
    check_start(sys, x0)?;
    params.validate()?;
    let mut states = Vec::new();
    let out = run(sys, x0, params, |x| states.push(x.to_vec()))?;
    Ok(Trajectory {
        states,
        verdict: out.verdict,
        steps_run: out.steps_run,
        final_norm: out.final_norm,
    })
}

/// `V(x) = max_j |x_j| / δ_j`.
pub fn lyapunov(x: &[f64], delta: &[f64]) -> f64 {
    x.iter()
        .zip(delta)
        .fold(0.0, |m, (xi, di)| m.max(xi.abs() / di))
}

/// `V(x(t))` for every state of the trajectory.
pub fn lyapunov_trace(traj: &Trajectory, delta: &[f64]) -> Result<Vec<f64>> {
    if delta.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidInput("Lyapunov weights must be positive".into()));
    }
    if let Some(x) = traj.states.iter().find(|x| x.len() != delta.len()) {
        return Err(Error::DimensionMismatch { expected: delta.len(), got: x.len() });
    }
    Ok(traj.states.iter().map(|x| lyapunov(x, delta)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    InsideConverged,
    /// Inside the certified region but not converged; a soundness violation.
    InsideDiverged,
    OutsideConverged,
    OutsideDiverged,
    /// Neither threshold was reached within `max_steps`.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub x0: Vec<f64>,
    pub label: Label,
    /// Strictly inside the attached certificate's region.
    pub inside: bool,
    pub steps_run: usize,
    pub final_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSample {
    /// Grid order: the first coordinate varies slowest.
    pub points: Vec<PointResult>,
    pub certificate: Option<AttractionCertificate>,
}

impl RegionSample {
    pub fn count(&self, label: Label) -> usize {
        self.points.iter().filter(|p| p.label == label).count()
    }

    /// Points strictly inside the certified region that did not converge.
    pub fn violations(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.inside && p.label != Label::InsideConverged)
            .count()
    }
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::InsideConverged => "inside-converged",
            Label::InsideDiverged => "inside-diverged",
            Label::OutsideConverged => "outside-converged",
            Label::OutsideDiverged => "outside-diverged",
            Label::Undecided => "undecided",
        }
    }
}

fn label_for(inside: bool, verdict: Verdict) -> Label {
    match (inside, verdict) {
        (true, Verdict::Converged) => Label::InsideConverged,
        (true, Verdict::Diverged) => Label::InsideDiverged,
        (false, Verdict::Converged) => Label::OutsideConverged,
        (false, Verdict::Diverged) => Label::OutsideDiverged,
        (_, Verdict::Undecided) => Label::Undecided,
    }
}

/// Uniform grid over `[lo, hi]` with `points_per_axis` points per axis.
pub fn grid(lo: &[f64], hi: &[f64], points_per_axis: usize) -> Result<Vec<Vec<f64>>> {
    let n = lo.len();
    if hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: hi.len() });
    }
    if n == 0 || n > 3 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "full grids are only built for 1 <= n <= 3",
        });
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidInput("need at least 2 points per axis".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l < h && l.is_finite() && h.is_finite())) {
        return Err(Error::InvalidInput("grid bounds must satisfy lo < hi".into()));
    }
    let total = (points_per_axis as u128).pow(n as u32);
    if total > MAX_GRID_POINTS as u128 {
        return Err(Error::InvalidInput(format!(
            "grid of {total} points exceeds the limit of {MAX_GRID_POINTS}"
        )));
    }
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| {
            (0..points_per_axis)
                .map(|i| l + (h - l) * i as f64 / (points_per_axis - 1) as f64)
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; n];
    loop {
        out.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < points_per_axis {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Simulates every grid point and labels it relative to `certificate`
/// (points count as outside when no certificate is given).
pub fn sample_region(
    sys: &PolySystem,
    lo: &[f64],
    hi: &[f64],
    points_per_axis: usize,
    params: &SimParams,
    certificate: Option<AttractionCertificate>,
) -> Result<RegionSample> {
    if lo.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: lo.len() });
    }
    params.validate()?;
    let points = grid(lo, hi, points_per_axis)?;
    let results = points
        .into_par_iter()
        .map(|x0| {
            let out = run(sys, &x0, params, |_| {})?;
            let inside = certificate.as_ref().is_some_and(|c| c.contains(&x0));
            Ok(PointResult {
                label: label_for(inside, out.verdict),
                inside,
                steps_run: out.steps_run,
                final_norm: out.final_norm,
                x0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionSample { points: results, certificate })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub converged: usize,
    pub diverged: usize,
    pub undecided: usize,
    /// Largest `‖x(T)‖∞` over all samples.
    pub worst_final_norm: f64,
    /// Half-width of the box actually sampled when the radius is infinite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_box: Option<f64>,
}

impl VerificationReport {
    pub fn all_converged(&self) -> bool {
        self.converged == self.samples
    }
}

/// Draws `samples` points uniformly from the interior of the certified region
/// and simulates each of them.
///
/// Weighted regions are sampled as `x_j = radius · δ_j · u_j` and box regions
/// as `x_j = radius · u_j` with `u` uniform in the open cube `(-1, 1)^n`.
/// An infinite radius is replaced by a box of half-width
/// [`UNBOUNDED_SAMPLE_BOX`].
pub fn verify_certificate(
    sys: &PolySystem,
    cert: &AttractionCertificate,
    samples: usize,
    seed: u64,
    params: &SimParams,
) -> Result<VerificationReport> {
    params.validate()?;
    let n = sys.dim();
    if let Some(delta) = cert.delta() {
        if delta.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: delta.len() });
        }
    }
    let fallback_box = (!cert.is_bounded()).then_some(UNBOUNDED_SAMPLE_BOX);
    let scale: Vec<f64> = match (fallback_box, &cert.region) {
        (Some(b), _) => vec![b; n],
        (None, Region::Weighted { delta }) => delta.iter().map(|d| d * cert.radius).collect(),
        (None, Region::Box) => vec![cert.radius; n],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..samples)
        .map(|_| loop {
            let x: Vec<f64> = scale.iter().map(|s| s * rng.gen_range(-1.0..1.0)).collect();
            // gen_range may return -1 exactly, which sits on the boundary
            if fallback_box.is_some() || cert.contains(&x) {
                break x;
            }
        })
        .collect();

    let outcomes = starts
        .par_iter()
        .map(|x0| run(sys, x0, params, |_| {}))
        .collect::<Result<Vec<_>>>()?;
    let count = |v: Verdict| outcomes.iter().filter(|o| o.verdict == v).count();
    Ok(VerificationReport {
        samples,
        converged: count(Verdict::Converged),
        diverged: count(Verdict::Diverged),
        undecided: count(Verdict::Undecided),
        worst_final_norm: outcomes.iter().fold(0.0, |m, o| m.max(o.final_norm)),
        fallback_box,
    })
}

/// Tensor form of the discrete-time SIS model on a hypergraph
///
/// ```text
/// x_i+ = (1 - hγ_i) x_i + hβ₁ (1 - x_i) Σ_j a_ij x_j + hβ₂ (1 - x_i) Σ_jl b_ijl x_j x_l
/// ```
///
/// The cross term `-hβ₁ x_i a_ij x_j` is stored at the order-3 entry
/// `(i; i, j)` and `-hβ₂ x_i b_ijl x_j x_l` at the order-4 entry
/// `(i; i, j, l)`. Higher-order tensors that come out all zero are omitted.
pub fn build_sis(
    gamma: &[f64],
    beta1: f64,
    beta2: f64,
    a: &Tensor,
    b: &Tensor,
    h: f64,
) -> Result<PolySystem> {
    let n = gamma.len();
    if n == 0 {
        return Err(Error::InvalidInput("SIS model needs at least one agent".into()));
    }
    if a.order() != 2 || b.order() != 3 {
        return Err(Error::InvalidInput(format!(
            "SIS contact tensors must have orders 2 and 3, got {} and {}",
            a.order(),
            b.order()
        )));
    }
    for t in [a, b] {
        if t.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: t.dim() });
        }
        if !t.is_nonnegative() {
            return Err(Error::InvalidInput("contact rates must be nonnegative".into()));
        }
    }
    if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidInput("healing rates must be nonnegative".into()));
    }
    if !(beta1 >= 0.0 && beta1.is_finite() && beta2 >= 0.0 && beta2.is_finite()) {
        return Err(Error::InvalidInput("infection rates must be nonnegative".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    if let Some(i) = gamma.iter().position(|g| h * g > 1.0) {
        log::warn!(
            "h·γ_{} = {} exceeds 1; iterates may leave [0, 1] and lose their probabilistic meaning",
            i + 1,
            h * gamma[i]
        );
    }

    let linear = Tensor::from_fn(2, n, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let decay = if i == j { 1.0 - h * gamma[i] } else { 0.0 };
        decay + h * beta1 * a.get(idx)
    })?;
    let mut quadratic = Tensor::zeros(3, n)?;
    let mut cubic = Tensor::zeros(4, n)?;
    for i in 0..n {
        for j in 0..n {
            let aij = a.get(&[i, j]);
            if aij != 0.0 {
                let cur = quadratic.get(&[i, i, j]);
                quadratic.set(&[i, i, j], cur - h * beta1 * aij)?;
            }
            for l in 0..n {
                let bijl = b.get(&[i, j, l]);
                if bijl != 0.0 {
                    let cur = quadratic.get(&[i, j, l]);
                    quadratic.set(&[i, j, l], cur + h * beta2 * bijl)?;
                    cubic.set(&[i, i, j, l], -h * beta2 * bijl)?;
                }
            }
        }
    }
    let tensors = std::iter::once(linear)
        .chain([quadratic, cubic].into_iter().filter(|t| !t.is_zero()));
    PolySystem::new(n, tensors, None)
}

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Columns: `t,x_1,...,x_n`, plus `V` when Lyapunov weights are given.
pub fn write_trajectory_csv(mut w: impl Write, traj: &Trajectory, delta: Option<&[f64]>) -> Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    let values = delta.map(|d| lyapunov_trace(traj, d)).transpose()?;
    let mut header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|j| format!("x_{j}")))
        .collect();
    if values.is_some() {
        header.push("V".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (t, x) in traj.states.iter().enumerate() {
        let mut cols: Vec<String> = std::iter::once(t.to_string())
            .chain(x.iter().map(|&v| csv_num(v)))
            .collect();
        if let Some(v) = &values {
            cols.push(csv_num(v[t]));
        }
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Columns: `x0_1,...,x0_n,label,inside,steps_run,final_norm`.
pub fn write_region_csv(mut w: impl Write, sample: &RegionSample) -> Result<()> {
    let n = sample.points.first().map_or(0, |p| p.x0.len());
    let mut header: Vec<String> = (1..=n).map(|j| format!("x0_{j}")).collect();
    header.extend(["label", "inside", "steps_run", "final_norm"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for p in &sample.points {
        let cols: Vec<String> = p.x0.iter().map(|&v| csv_num(v)).collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            cols.join(","),
            p.label.as_str(),
            p.inside,
            p.steps_run,
            csv_num(p.final_norm)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PerronOptions;
    use crate::stability::{theorem1_certificate, theorem3_certificate};
    use crate::tensor::fixtures::*;
    use proptest::prelude::*;
    use rand::Rng;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn worked_system() -> PolySystem {
        PolySystem::homogeneous_parts([worked_a1(), worked_a2()]).unwrap()
    }

    #[test]
    fn simulate_examples() {
        let sys = worked_system();
        let p = SimParams::default();
        let t = simulate(&sys, &[0.2, 0.2], &p).unwrap();
        assert_eq!(t.verdict, Verdict::Converged);
        assert!(t.final_norm < 1e-8);
        assert_eq!(t.states.len(), t.steps_run + 1);
        for w in t.states.windows(2) {
            assert_eq!(sys.evaluate(&w[0]).unwrap(), w[1]);
        }

        let t = simulate(&sys, &[0.0, 0.0], &p).unwrap();
        assert_eq!((t.verdict, t.steps_run, t.states.len()), (Verdict::Converged, 0, 1));

        let t = simulate(&sys, &[1.0, 1.0], &p).unwrap();
        assert_eq!(t.verdict, Verdict::Diverged);
        assert!(t.final_norm > 1e6);
    }

    #[test]
    fn overflow_is_divergence() {
        let sys = PolySystem::homogeneous_parts([Tensor::filled(4, 1, 1.0).unwrap()]).unwrap();
        let p = SimParams { m_div: f64::MAX, ..SimParams::default() };
        let t = simulate(&sys, &[10.0], &p).unwrap();
        assert_eq!(t.verdict, Verdict::Diverged);
        assert!(t.final_norm.is_infinite());
    }

    #[test]
    fn undecided_at_step_limit() {
        let id = PolySystem::homogeneous_parts([Tensor::identity_matrix(2).unwrap()]).unwrap();
        let p = SimParams { max_steps: 7, ..SimParams::default() };
        let t = simulate(&id, &[0.5, 0.5], &p).unwrap();
        assert_eq!((t.verdict, t.steps_run, t.states.len()), (Verdict::Undecided, 7, 8));
        assert!(simulate(&id, &[f64::NAN, 0.0], &p).is_err());
        assert!(simulate(&id, &[0.0], &p).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let d = [1.0 / SQRT2, 1.0 / SQRT2];
        assert!((lyapunov(&[0.1, -0.2], &d) - 0.2 * SQRT2).abs() < 1e-15);
        assert_eq!(lyapunov(&[0.0, 0.0], &d), 0.0);

        let a = Tensor::filled(3, 2, 1.0).unwrap();
        let cert = theorem1_certificate(&a, PerronOptions::default()).unwrap();
        let sys = PolySystem::homogeneous_parts([a]).unwrap();
        let t = simulate(&sys, &[0.24, -0.2], &SimParams::default()).unwrap();
        let v = lyapunov_trace(&t, cert.delta().unwrap()).unwrap();
        assert!(v[0] < cert.radius);
        for w in v.windows(2).filter(|w| w[0] > 1e-12) {
            assert!(w[1] < w[0]);
        }
        assert!(lyapunov_trace(&t, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn fig2_grid_is_sound() {
        let sys = worked_system();
        let cert = theorem3_certificate(&sys).unwrap();
        let s = sample_region(&sys, &[-0.3, -0.3], &[0.3, 0.3], 61, &SimParams::default(), Some(cert))
            .unwrap();
        assert_eq!(s.points.len(), 61 * 61);
        assert_eq!(s.violations(), 0);
        assert!(s.count(Label::InsideConverged) > 0);
        assert!(s.count(Label::OutsideDiverged) > 0);
        for p in &s.points {
            if p.x0.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 4.0 / 15.0 {
                assert_eq!(p.label, Label::InsideConverged);
            }
        }
    }

    #[test]
    fn zero_and_expanding_systems() {
        let zero = PolySystem::homogeneous_parts([Tensor::zeros(2, 2).unwrap()]).unwrap();
        let s = sample_region(&zero, &[-1.0, -1.0], &[1.0, 1.0], 5, &SimParams::default(), None).unwrap();
        assert!(s.points.iter().all(|p| p.label == Label::OutsideConverged && p.steps_run <= 1));

        let two = PolySystem::homogeneous_parts([Tensor::identity_matrix(2).unwrap().scaled(2.0)]).unwrap();
        let s = sample_region(&two, &[-1.0, -1.0], &[1.0, 1.0], 5, &SimParams::default(), None).unwrap();
        for p in &s.points {
            let origin = p.x0.iter().all(|&v| v == 0.0);
            assert_eq!(p.label == Label::OutsideConverged, origin);
        }
    }

    #[test]
    fn grid_limits() {
        assert!(grid(&[0.0; 4], &[1.0; 4], 2).is_err());
        assert!(grid(&[0.0; 3], &[1.0; 3], 101).is_err());
        assert_eq!(grid(&[0.0; 3], &[1.0; 3], 100).unwrap().len(), 1_000_000);
        assert!(grid(&[1.0], &[0.0], 3).is_err());
        assert_eq!(grid(&[0.0, 10.0], &[1.0, 11.0], 2).unwrap()[1], vec![0.0, 11.0]);
    }

    #[test]
    fn verification_reports() {
        let sys = worked_system();
        let cert = theorem3_certificate(&sys).unwrap();
        let r = verify_certificate(&sys, &cert, 500, 1, &SimParams::default()).unwrap();
        assert!(r.all_converged(), "{r:?}");

        let mut inflated = cert.clone();
        inflated.radius *= 10.0;
        let r = verify_certificate(&sys, &inflated, 500, 1, &SimParams::default()).unwrap();
        assert!(r.diverged > 0);

        let linear = PolySystem::homogeneous_parts([worked_a1()]).unwrap();
        let cert = crate::stability::theorem2_certificate(&linear, PerronOptions::default()).unwrap();
        let r = verify_certificate(&linear, &cert, 100, 1, &SimParams::default()).unwrap();
        assert_eq!(r.fallback_box, Some(UNBOUNDED_SAMPLE_BOX));
        assert!(r.all_converged());

        let again = verify_certificate(&sys, &inflated, 500, 1, &SimParams::default()).unwrap();
        let first = verify_certificate(&sys, &inflated, 500, 1, &SimParams::default()).unwrap();
        assert_eq!(again, first);
    }

    /// Direct evaluation of the SIS update, one agent at a time.
    fn sis_oracle(
        x: &[f64],
        gamma: &[f64],
        beta1: f64,
        beta2: f64,
        a: &Tensor,
        b: &Tensor,
        h: f64,
    ) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut pair = 0.0;
                let mut group = 0.0;
                for j in 0..n {
                    pair += a.get(&[i, j]) * x[j];
                    for l in 0..n {
                        group += b.get(&[i, j, l]) * x[j] * x[l];
                    }
                }
                (1.0 - h * gamma[i]) * x[i]
                    + h * beta1 * (1.0 - x[i]) * pair
                    + h * beta2 * (1.0 - x[i]) * group
            })
            .collect()
    }

    #[test]
    fn sis_small_example() {
        let a = Tensor::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = Tensor::zeros(3, 2).unwrap();
        let sys = build_sis(&[0.5, 0.5], 0.2, 0.0, &a, &b, 1.0).unwrap();
        assert_eq!(sys.orders(), vec![2, 3]);
        assert_eq!(sys.tensor(2).unwrap().data(), &[0.5, 0.2, 0.2, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let q = sys.tensor(3).unwrap().contract(&x).unwrap();
            assert!((q[0] + 0.2 * x[0] * x[1]).abs() < 1e-15);
            assert!((q[1] + 0.2 * x[0] * x[1]).abs() < 1e-15);
        }

        let decay = build_sis(&[0.5, 0.25], 0.0, 0.0, &a, &b, 1.0).unwrap();
        assert_eq!(decay.orders(), vec![2]);
        assert_eq!(decay.evaluate(&[1.0, 1.0]).unwrap(), vec![0.5, 0.75]);
    }

    #[test]
    fn sis_rejects_bad_rates() {
        let a = Tensor::zeros(2, 2).unwrap();
        let b = Tensor::zeros(3, 2).unwrap();
        assert!(build_sis(&[0.5, -0.1], 0.1, 0.1, &a, &b, 1.0).is_err());
        assert!(build_sis(&[0.5, 0.1], -0.1, 0.1, &a, &b, 1.0).is_err());
        assert!(build_sis(&[0.5, 0.1], 0.1, 0.1, &a, &b, 0.0).is_err());
        assert!(build_sis(&[0.5], 0.1, 0.1, &a, &b, 1.0).is_err());
        let neg = Tensor::filled(2, 2, -1.0).unwrap();
        assert!(build_sis(&[0.5, 0.1], 0.1, 0.1, &neg, &b, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sis_matches_scalar_loop(seed in any::<u64>(), corner in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=4);
            let gamma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let beta1 = if corner & 1 == 0 { rng.gen_range(0.0..1.0) } else { 0.0 };
            let beta2 = if corner & 2 == 0 { rng.gen_range(0.0..1.0) } else { 0.0 };
            let h = rng.gen_range(0.01..1.0);
            let a = Tensor::from_fn(2, n, |_| if rng.gen_bool(0.6) { rng.gen_range(0.0..1.0) } else { 0.0 }).unwrap();
            let b = Tensor::from_fn(3, n, |_| if rng.gen_bool(0.6) { rng.gen_range(0.0..1.0) } else { 0.0 }).unwrap();
            let sys = build_sis(&gamma, beta1, beta2, &a, &b, h).unwrap();
            for _ in 0..10 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let got = sys.evaluate(&x).unwrap();
                let want = sis_oracle(&x, &gamma, beta1, beta2, &a, &b, h);
                for i in 0..n {
                    prop_assert!((got[i] - want[i]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn origin_is_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=3);
            let a1 = Tensor::from_fn(2, n, |_| rng.gen_range(-2.0..2.0)).unwrap();
            let a2 = Tensor::from_fn(3, n, |_| rng.gen_range(-2.0..2.0)).unwrap();
            let sys = PolySystem::homogeneous_parts([a1, a2]).unwrap();
            let t = simulate(&sys, &vec![0.0; n], &SimParams::default()).unwrap();
            prop_assert_eq!(t.states, vec![vec![0.0; n]]);
        }
    }

    #[test]
    fn csv_output() {
        let sys = worked_system();
        let t = simulate(&sys, &[0.2, 0.2], &SimParams { max_steps: 2, ..SimParams::default() }).unwrap();
        let mut buf = Vec::new();
        let delta = [1.0 / SQRT2, 1.0 / SQRT2];
        write_trajectory_csv(&mut buf, &t, Some(&delta)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,V");
        assert_eq!(lines.len(), 4);
        let second: Vec<f64> = lines[2].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(second[..2], t.states[1][..]);
        assert_eq!(second[2], lyapunov(&t.states[1], &delta));

        let s = sample_region(&sys, &[-0.3, -0.3], &[0.3, 0.3], 3, &SimParams::default(), None).unwrap();
        let mut buf = Vec::new();
        write_region_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0_1,x0_2,label,inside,steps_run,final_norm\n"));
        assert_eq!(text.lines().count(), 10);
        assert!(text.contains("outside-converged"));
    }
}
