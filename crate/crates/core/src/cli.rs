//! Command-line front end. Exit codes: 0 success, 1 a certificate or
//! condition does not hold, 2 malformed input.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{load_config, parse_dense_tensor, SystemConfig};
use crate::control::{closed_loop, controlled_certificate, ControllerSpec};
use crate::dynamics::{
    build_sis, sample_region, simulate, verify_certificate, write_region_csv, write_trajectory_csv,
    Label, SimParams,
};
use crate::error::{Error, Result};
use crate::spectral::{perron_z_eigenpair, z_eigenpairs_oracle, PerronOptions};
use crate::stability::{
    all_certificates, local_stability, shift_equilibrium, shifted_certificate,
    theorem2_certificate, AttractionCertificate, Theorem,
};
use crate::system::PolySystem;
use crate::tensor::Tensor;

/// Environment variable consulted for the sampling seed when `--seed` is absent.
pub const SEED_ENV: &str = "HYPERSTAB_SEED";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "hyperstab", version, about = "Stability certificates for polynomial maps on hypergraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Local stability and every applicable domain-of-attraction certificate.
    Analyze {
        config: PathBuf,
        /// Equilibrium to move to the origin first (needed when the system has a constant term).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        shift: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-10)]
        shift_tol: f64,
        #[command(flatten)]
        perron: PerronArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perron pair of |A_m|, checked against the grid oracle when n <= 3.
    Eig {
        config: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 720)]
        resolution: usize,
        #[command(flatten)]
        perron: PerronArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory CSV from one initial state.
    Simulate {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        /// Lyapunov weights; adds a V column.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid of initial states labelled by their fate (CSV).
    SampleRegion {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        lo: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        hi: Vec<f64>,
        #[arg(long, default_value_t = 61)]
        grid: usize,
        /// Split labels by the largest certificate found.
        #[arg(long)]
        certify: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        perron: PerronArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Z-identity feedback on the order-l tensor and the resulting certificate.
    Control {
        config: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long, allow_negative_numbers = true)]
        gain: f64,
        #[command(flatten)]
        perron: PerronArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds the SIS model on a hypergraph and prints its system config.
    Sis {
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long)]
        beta1: f64,
        #[arg(long, default_value_t = 0.0)]
        beta2: f64,
        /// JSON array (nested or flat) with the pairwise contact rates.
        #[arg(long)]
        a_file: PathBuf,
        /// JSON array with the group contact rates; zero when omitted.
        #[arg(long)]
        b_file: Option<PathBuf>,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples the interior of a certificate and simulates every sample.
    Verify {
        config: PathBuf,
        /// T1, T2, T3, C1 or C2; default is the largest radius found.
        #[arg(long)]
        theorem: Option<String>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        perron: PerronArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 1e6)]
    m_div: f64,
}

impl SimArgs {
    fn params(&self) -> SimParams {
        SimParams { max_steps: self.steps, eps_conv: self.eps, m_div: self.m_div }
    }
}

#[derive(Debug, Args)]
struct PerronArgs {
    #[arg(long, default_value_t = 1e-10)]
    perron_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl PerronArgs {
    fn options(&self) -> Result<PerronOptions> {
        if !(self.perron_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("--perron-tol and --max-iter must be positive".into()));
        }
        Ok(PerronOptions { tol: self.perron_tol, max_iter: self.max_iter })
    }
}

/// Runs the CLI with process stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI writing reports to `out` and diagnostics to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_condition() {
                1
            } else {
                2
            }
        }
    }
}

/// `--out` file or the given stream.
fn emit(out: &mut dyn Write, file: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match file {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(out),
    }
}

fn emit_json(out: &mut dyn Write, file: Option<&Path>, value: &impl Serialize) -> Result<()> {
    emit(out, file, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn parse_theorem(s: &str) -> Result<Theorem> {
    Ok(match s.to_ascii_uppercase().as_str() {
        "T1" => Theorem::T1,
        "T2" => Theorem::T2,
        "T3" => Theorem::T3,
        "C1" => Theorem::C1,
        "C2" => Theorem::C2,
        _ => return Err(Error::InvalidInput(format!("unknown theorem {s:?}, expected T1, T2, T3, C1 or C2"))),
    })
}

/// Certificates that could be produced, plus the first input error if any.
fn produced(sys: &PolySystem, opts: PerronOptions) -> Result<Vec<AttractionCertificate>> {
    let mut out = Vec::new();
    for (_, r) in all_certificates(sys, opts) {
        match r {
            Ok(c) => out.push(c),
            Err(e) if e.is_condition() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn largest(certs: &[AttractionCertificate]) -> Option<&AttractionCertificate> {
    certs.iter().fold(None, |best: Option<&AttractionCertificate>, c| match best {
        Some(b) if b.radius >= c.radius => Some(b),
        _ => Some(c),
    })
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Analyze { config, shift, shift_tol, perron, out: file } => {
            let cfg = load_config(&config)?;
            let mut sys = cfg.to_system()?;
            let opts = perron.options()?;
            if let Some(a) = &shift {
                sys = shift_equilibrium(&sys, a, shift_tol)?;
            } else if sys.has_constant() {
                return Err(Error::InvalidInput(
                    "system has a constant term; pass --shift with an equilibrium".into(),
                ));
            }
            let local = local_stability(&sys)?;
            let mut entries = Vec::new();
            let mut certs = Vec::new();
            for (theorem, r) in all_certificates(&sys, opts) {
                entries.push(match r {
                    Ok(c) => {
                        let v = json!({ "theorem": theorem, "status": "ok", "certificate": c });
                        certs.push(c);
                        v
                    }
                    Err(e) => json!({
                        "theorem": theorem,
                        "status": if e.is_condition() { "inapplicable" } else { "error" },
                        "reason": e.to_string(),
                    }),
                });
            }
            let best = largest(&certs).map(|c| json!({ "theorem": c.theorem, "radius": radius_value(c.radius) }));
            let report = json!({
                "name": cfg.name,
                "dim": sys.dim(),
                "orders": sys.orders(),
                "shift": shift,
                "local_stability": local,
                "certificates": entries,
                "largest": best,
            });
            emit_json(out, file.as_deref(), &report)?;
            if certs.is_empty() {
                writeln!(err, "no certificate applies")?;
                return Ok(1);
            }
            Ok(0)
        }
        Command::Eig { config, order, resolution, perron, out: file } => {
            let sys = load_config(&config)?.to_system()?;
            let t = sys
                .tensor(order)
                .ok_or_else(|| Error::InvalidInput(format!("system has no tensor of order {order}")))?;
            let abs = t.abs();
            let pair = perron_z_eigenpair(&abs, perron.options()?)?;
            let oracle = if (2..=3).contains(&sys.dim()) {
                let r = z_eigenpairs_oracle(&abs, resolution)?;
                let top = r.largest_lambda();
                Some(json!({
                    "largest_lambda": top,
                    "difference": top.map(|l| (l - pair.lambda).abs()),
                    "pairs": r.pairs.len(),
                    "degenerate": r.degenerate,
                }))
            } else {
                None
            };
            let report = json!({
                "order": order,
                "absolute_value_taken": !t.is_nonnegative(),
                "perron": pair,
                "oracle": oracle,
            });
            emit_json(out, file.as_deref(), &report)?;
            Ok(0)
        }
        Command::Simulate { config, x0, delta, sim, out: file } => {
            let sys = load_config(&config)?.to_system()?;
            let traj = simulate(&sys, &x0, &sim.params())?;
            emit(out, file.as_deref(), |w| write_trajectory_csv(w, &traj, delta.as_deref()))?;
            writeln!(err, "{}: {} steps, final ‖x‖∞ = {:e}", verdict_str(&traj.verdict), traj.steps_run, traj.final_norm)?;
            Ok(0)
        }
        Command::SampleRegion { config, lo, hi, grid, certify, sim, perron, out: file } => {
            let sys = load_config(&config)?.to_system()?;
            let cert = if certify {
                let certs = produced(&sys, perron.options()?)?;
                let best = largest(&certs).cloned().ok_or_else(|| {
                    Error::ConditionViolated("--certify: no certificate applies to this system".into())
                })?;
                Some(best)
            } else {
                None
            };
            let sample = sample_region(&sys, &lo, &hi, grid, &sim.params(), cert)?;
            emit(out, file.as_deref(), |w| write_region_csv(w, &sample))?;
            let counts: Vec<String> = [
                Label::InsideConverged,
                Label::InsideDiverged,
                Label::OutsideConverged,
                Label::OutsideDiverged,
                Label::Undecided,
            ]
            .iter()
            .map(|&l| format!("{}={}", l.as_str(), sample.count(l)))
            .collect();
            writeln!(err, "{} points: {}; violations={}", sample.points.len(), counts.join(" "), sample.violations())?;
            Ok(if sample.violations() > 0 { 1 } else { 0 })
        }
        Command::Control { config, order, gain, perron, out: file } => {
            let cfg = load_config(&config)?;
            let sys = cfg.to_system()?;
            let opts = perron.options()?;
            let uncontrolled = theorem2_certificate(&sys, opts)?;
            let report = if order % 2 == 0 {
                let ctrl = ControllerSpec::for_system(&sys, order, gain)?;
                let controlled = closed_loop(&sys, &ctrl)?;
                let cert = controlled_certificate(&sys, &ctrl, opts)?;
                json!({
                    "order": order,
                    "gain": gain,
                    "realizable": true,
                    "uncontrolled": uncontrolled,
                    "controlled": cert,
                    "controlled_system": SystemConfig::from_system(&controlled, cfg.name.clone()),
                })
            } else {
                let cert = shifted_certificate(&sys, order, gain, opts)?;
                json!({
                    "order": order,
                    "gain": gain,
                    "realizable": false,
                    "note": "no odd-order Z-identity exists; radius from the eigenvalue substitution λ + s only",
                    "uncontrolled": uncontrolled,
                    "controlled": cert,
                    "controlled_system": Value::Null,
                })
            };
            emit_json(out, file.as_deref(), &report)?;
            Ok(0)
        }
        Command::Sis { gamma, beta1, beta2, a_file, b_file, h, out: file } => {
            let a = parse_dense_tensor(&std::fs::read_to_string(&a_file)?, 2)?;
            let b = match b_file {
                Some(p) => parse_dense_tensor(&std::fs::read_to_string(&p)?, 3)?,
                None => Tensor::zeros(3, gamma.len())?,
            };
            let sys = build_sis(&gamma, beta1, beta2, &a, &b, h)?;
            emit_json(out, file.as_deref(), &SystemConfig::from_system(&sys, Some("sis".into())))?;
            Ok(0)
        }
        Command::Verify { config, theorem, samples, seed, sim, perron, out: file } => {
            let sys = load_config(&config)?.to_system()?;
            let seed = resolve_seed(seed)?;
            let opts = perron.options()?;
            let cert = match theorem {
                Some(t) => {
                    let wanted = parse_theorem(&t)?;
                    all_certificates(&sys, opts)
                        .into_iter()
                        .find(|(th, _)| *th == wanted)
                        .ok_or_else(|| Error::InvalidInput(format!("{t} is not applicable to this system's orders")))?
                        .1?
                }
                None => largest(&produced(&sys, opts)?)
                    .cloned()
                    .ok_or_else(|| Error::ConditionViolated("no certificate applies to this system".into()))?,
            };
            let report = verify_certificate(&sys, &cert, samples, seed, &sim.params())?;
            let ok = report.all_converged();
            emit_json(out, file.as_deref(), &json!({ "seed": seed, "certificate": cert, "report": report }))?;
            if !ok {
                writeln!(err, "{} of {} samples did not converge", report.samples - report.converged, report.samples)?;
                return Ok(1);
            }
            Ok(0)
        }
    }
}

fn radius_value(r: f64) -> Value {
    if r.is_finite() {
        json!(r)
    } else {
        json!("inf")
    }
}

fn verdict_str(v: &crate::dynamics::Verdict) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}
