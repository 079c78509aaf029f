//! Front end for the `nlab` binary. [`run`] parses an argument list, performs
//! one computation and returns the exit code with everything it printed, so
//! the whole pipeline is testable in-process.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlab_core::blowup::{
    profile_distance, subcritical_limit_check, subcritical_reference, theta_report, LiouvilleProfile,
    RescaledProfile,
};
use nlab_core::branch::{linear_grid, quantization_probe, sweep, BoundCertificate, QuantizationProbe, UnitBallSolution};
use nlab_core::counterexample::{CounterexampleInstance, EntropyCheck, TestFunction};
use nlab_core::nonlinearity::{classify_default, envelope, Criticality};
use nlab_core::radial::shoot;
use nlab_core::{LabError, Nonlinearity, RadialProblem, Weight};
use serde::{Deserialize, Serialize};

const FAMILY_HELP: &str = "Nonlinearity: powerlog:tau=<r>,p=<r>,alpha=<r> | expcrit:gamma=<r>,q=<r> | \
exppow:alpha=<r> | affine:a=<r>,b=<r> | scaled:c=<r>,inner=<spec>";

#[derive(Parser, Debug)]
#[command(name = "nlab", version, about = "Radial N-Laplacian laboratory: shooting, blow-up and quantization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify f by the limit of f'/f (Subcritical, Critical(beta), Supercritical).
    Classify(FamilyArgs),
    /// Exponential growth envelope D e^{(beta+eps)t} + C for f.
    Envelope(EnvelopeArgs),
    /// One shot from u(0) = M; CSV `r,u,q` or a JSON summary.
    Shoot(ShootArgs),
    /// Sweep M over [m-min, m-max]; CSV `M,R,mass,status` plus unit-ball JSON.
    Branch(SweepArgs),
    /// Blow-up rescaling at height M compared with the limit profile.
    Rescale(RescaleArgs),
    /// Quantized mass theta: closed form against quadrature.
    Theta(ThetaArgs),
    /// Extrapolated blow-up mass of a sweep tail against theta.
    Quantize(QuantizeArgs),
    /// Unbounded solution with bounded weight for f = e^{t^alpha}.
    Counterexample(CounterexampleArgs),
    /// Truncated entropy identity for the counterexample.
    EntropyCheck(EntropyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FamilyArgs {
    #[arg(long, help = FAMILY_HELP)]
    pub family: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct EnvelopeArgs {
    #[arg(long, help = FAMILY_HELP)]
    pub family: String,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long = "t-min", default_value_t = 1.0)]
    pub t_min: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ShootArgs {
    /// Dimension N >= 2.
    #[arg(long = "N", default_value_t = 2)]
    pub n: u32,
    #[arg(long, help = FAMILY_HELP)]
    pub family: String,
    /// Center height u(0).
    #[arg(long = "M")]
    pub m: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "r-cap", default_value_t = 1e6)]
    pub r_cap: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long = "N", default_value_t = 2)]
    pub n: u32,
    #[arg(long, help = FAMILY_HELP)]
    pub family: String,
    #[arg(long = "m-min")]
    pub m_min: f64,
    #[arg(long = "m-max")]
    pub m_max: f64,
    /// Number of grid intervals.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct RescaleArgs {
    #[arg(long = "N", default_value_t = 2)]
    pub n: u32,
    #[arg(long, help = FAMILY_HELP)]
    pub family: String,
    #[arg(long = "M")]
    pub m: f64,
    /// Slope of the Liouville reference; defaults to the classified one.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comparison radius in blow-up variables.
    #[arg(long = "r-cmp", default_value_t = 10.0)]
    pub r_cmp: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ThetaArgs {
    #[arg(long = "N", default_value_t = 2)]
    pub n: u32,
    #[arg(long)]
    pub beta: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Slope for theta; defaults to the classified one.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    #[arg(long = "N", default_value_t = 2)]
    pub n: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    #[arg(long = "N", default_value_t = 2)]
    pub n: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Truncation level.
    #[arg(long, default_value_t = 5.0)]
    pub k: f64,
    /// Bump test function `<amplitude>,<support>`; omitted means phi = 0.
    #[arg(long)]
    pub bump: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub family: String,
    pub criticality: String,
    pub beta: Option<f64>,
    pub beta_estimate: Option<f64>,
    pub last_relative_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub unit_ball_solutions: Vec<UnitBallSolution>,
    pub bound_certificate: Option<BoundCertificate>,
    pub mass_budget: f64,
    pub unit_ball_mass_budget: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    #[serde(rename = "N")]
    pub n: u32,
    pub family: String,
    #[serde(rename = "M")]
    pub m: f64,
    pub log_mu: f64,
    pub r_cmp: f64,
    pub reference: String,
    pub sup_gap_v: f64,
    pub sup_gap_vprime: Option<f64>,
}

/// Result of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum CliError {
    Lab(LabError),
    Io(String),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let shown = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Outcome {
                    code: 0,
                    stdout: shown,
                    stderr: String::new(),
                },
                _ => Outcome {
                    code: 1,
                    stdout: String::new(),
                    stderr: shown,
                },
            };
        }
    };
    match execute(cli.command) {
        Ok(stdout) => Outcome {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(CliError::Lab(e)) => Outcome {
            code: if e.is_numerical() { 2 } else { 1 },
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
        Err(CliError::Io(e)) => Outcome {
            code: 1,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn parse_family(spec: &str) -> CliResult<Nonlinearity> {
    Ok(spec.parse::<Nonlinearity>()?)
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `body` to `--out` and returns `summary`, or returns `body` itself.
fn emit(output: &Output, body: String, summary: String) -> CliResult<String> {
    match &output.out {
        Some(path) => {
            write_file(path, &body)?;
            Ok(summary + "\n")
        }
        None => Ok(body),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn classified_beta(nl: &Nonlinearity) -> CliResult<Option<f64>> {
    Ok(match classify_default(nl)?.criticality {
        Criticality::Critical { beta } => Some(beta),
        _ => None,
    })
}

fn execute(cmd: Command) -> CliResult<String> {
    match cmd {
        Command::Classify(a) => {
            let nl = parse_family(&a.family)?;
            let c = classify_default(&nl)?;
            let report = ClassifyReport {
                family: nl.spec(),
                criticality: c.criticality.name().to_string(),
                beta: match c.criticality {
                    Criticality::Critical { beta } => Some(beta),
                    _ => None,
                },
                beta_estimate: finite(c.beta_estimate),
                last_relative_change: c.last_relative_change,
            };
            let summary = format!("{}: {}", report.family, report.criticality);
            emit(&a.output, json(&report)?, summary)
        }
        Command::Envelope(a) => {
            let nl = parse_family(&a.family)?;
            let env = envelope(&nl, a.epsilon, a.t_min)?;
            let summary = format!("envelope C = {}, D = {} on [{}, inf)", env.c_eps, env.d_eps, env.t_min);
            emit(&a.output, json(&env)?, summary)
        }
        Command::Shoot(a) => {
            let nl = parse_family(&a.family)?;
            let p = RadialProblem::simple(a.n, nl, a.m)?;
            let s = shoot(&p, a.r_cap, a.tol)?;
            let summary = s.summary();
            let line = format!("shot M = {}: {:?}, R = {:?}, mass = {:?}", a.m, s.status, s.radius, s.mass);
            let body = match a.format {
                Format::Csv => s.to_csv(),
                Format::Json => json(&summary)?,
            };
            emit(&a.output, body, line)
        }
        Command::Branch(a) => {
            let (diagram, report) = run_sweep(&a)?;
            let line = format!(
                "{} unit-ball solutions: {:?}",
                report.unit_ball_solutions.len(),
                report.unit_ball_solutions.iter().map(|s| s.m).collect::<Vec<_>>()
            );
            match (&a.output.out, a.format) {
                (Some(path), Format::Csv) => {
                    write_file(path, &diagram.to_csv())?;
                    write_file(&sibling(path, "unit_ball.json"), &json(&report.unit_ball_solutions)?)?;
                    write_file(&sibling(path, "certificate.json"), &json(&report.bound_certificate)?)?;
                    Ok(line + "\n")
                }
                (_, Format::Csv) => Ok(diagram.to_csv()),
                (_, Format::Json) => emit(&a.output, json(&report)?, line),
            }
        }
        Command::Rescale(a) => {
            let nl = parse_family(&a.family)?;
            let p = RadialProblem::simple(a.n, nl.clone(), a.m)?;
            let rp = RescaledProfile::compute(&p, a.r_cmp, a.tol)?;
            let beta = match a.beta {
                Some(b) => Some(b),
                None => classified_beta(&nl)?,
            };
            let (report, csv) = match beta {
                Some(beta) => {
                    let lp = LiouvilleProfile::new(a.n, beta)?;
                    let (gv, gp) = profile_distance(&rp, &lp, a.r_cmp)?;
                    let report = RescaleReport {
                        n: a.n,
                        family: nl.spec(),
                        m: a.m,
                        log_mu: rp.log_mu,
                        r_cmp: a.r_cmp,
                        reference: format!("liouville(beta={beta})"),
                        sup_gap_v: gv,
                        sup_gap_vprime: Some(gp),
                    };
                    (report, rp.to_csv(|r| lp.eval(r).0, a.r_cmp))
                }
                None => {
                    let gap = subcritical_limit_check(&rp, a.n, a.r_cmp)?;
                    let report = RescaleReport {
                        n: a.n,
                        family: nl.spec(),
                        m: a.m,
                        log_mu: rp.log_mu,
                        r_cmp: a.r_cmp,
                        reference: "constant_source".into(),
                        sup_gap_v: gap,
                        sup_gap_vprime: None,
                    };
                    let n = a.n;
                    (report, rp.to_csv(|r| subcritical_reference(n, r).0, a.r_cmp))
                }
            };
            let line = format!("M = {}: sup gap {} against {}", a.m, report.sup_gap_v, report.reference);
            let body = match a.format {
                Format::Csv => csv,
                Format::Json => json(&report)?,
            };
            emit(&a.output, body, line)
        }
        Command::Theta(a) => {
            let r = theta_report(a.n, a.beta)?;
            let line = format!("theta = {} (rel err {})", r.theta_exact, r.rel_err);
            emit(&a.output, json(&r)?, line)
        }
        Command::Quantize(a) => {
            let (diagram, _) = run_sweep(&a.sweep)?;
            let nl = &diagram.nl;
            let beta = match a.beta {
                Some(b) => b,
                None => classified_beta(nl)?.ok_or_else(|| {
                    LabError::NotApplicable(format!("{} is not critical", nl.spec()))
                })?,
            };
            let probe: QuantizationProbe = quantization_probe(&diagram, beta)?;
            let line = format!(
                "limit mass {} vs theta {} (rel gap {})",
                probe.limit_mass_estimate, probe.theta_ref, probe.rel_gap
            );
            emit(&a.sweep.output, json(&probe)?, line)
        }
        Command::Counterexample(a) => {
            let inst = CounterexampleInstance::new(a.n, a.alpha, a.rho)?;
            let line = format!(
                "rho = {} (shrunk {}x), beta(rho) = {}",
                inst.rho, inst.rho_shrink_count, inst.beta_rho
            );
            let body = match a.format {
                Format::Csv => inst.to_csv()?,
                Format::Json => json(&inst)?,
            };
            emit(&a.output, body, line)
        }
        Command::EntropyCheck(a) => {
            let inst = CounterexampleInstance::new(a.n, a.alpha, a.rho)?;
            let phi = match &a.bump {
                None => TestFunction::Zero,
                Some(s) => parse_bump(s)?,
            };
            let chk: EntropyCheck = inst.entropy_identity_check(&phi, a.k)?;
            let line = format!("lhs = {}, rhs = {}, residual = {}", chk.lhs, chk.rhs, chk.residual);
            emit(&a.output, json(&chk)?, line)
        }
    }
}

fn parse_bump(s: &str) -> CliResult<TestFunction> {
    let bad = || LabError::Parse {
        input: s.to_string(),
        reason: "expected <amplitude>,<support>".into(),
    };
    let (a, r) = s.split_once(',').ok_or_else(bad)?;
    let amplitude: f64 = a.trim().parse().map_err(|_| bad())?;
    let support: f64 = r.trim().parse().map_err(|_| bad())?;
    Ok(TestFunction::Bump { amplitude, support })
}

fn run_sweep(a: &SweepArgs) -> CliResult<(nlab_core::branch::BranchDiagram, BranchReport)> {
    let nl = parse_family(&a.family)?;
    if a.steps == 0 || !(a.m_max > a.m_min) {
        return Err(LabError::Argument("need m-max > m-min and steps >= 1".into()).into());
    }
    let grid = linear_grid(a.m_min, a.m_max, a.steps + 1);
    let d = sweep(a.n, &nl, &Weight::default(), &grid, a.tol)?;
    let report = BranchReport {
        unit_ball_solutions: d.unit_ball_solutions.clone(),
        bound_certificate: d.bound_certificate,
        mass_budget: d.mass_budget,
        unit_ball_mass_budget: d.unit_ball_mass_budget,
        warnings: d.warnings.clone(),
    };
    Ok((d, report))
}
