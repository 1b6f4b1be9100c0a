//! Command-line front end for `kronprobe`.
//!
//! [`run`] is the whole program; `main` only wires it to the process
//! streams. Exit status is 0 on success, 2 for usage errors and 1 when the
//! computation itself fails.

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use kronprobe::estimators::{certify, max_estimator, one_sample_norm, trace_estimator, EstimateReport, Target};
use kronprobe::frechet::{frechet_norm_max_estimator, frechet_norm_power_method, ArnoldiOptions, MatrixFunction};
use kronprobe::harness::{
    estimator_table, failure_curve, generate_matrix, log_grid, trace_operator, write_csv, ExperimentTable,
    MatrixKind, MatrixTarget, NormKind, TestMatrixSpec,
};
use kronprobe::{failure_probability, BoundKind, BoundParams, Distribution};

pub const THREADS_ENV: &str = "KRONPROBE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kronprobe", version, about = "Randomized norm and trace estimation with rank-one probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the trace of a PSD matrix derived from a test matrix.
    EstimateTrace(TraceArgs),
    /// Estimate the spectral or Frobenius norm of a test matrix.
    EstimateNorm(NormArgs),
    /// Print failure-probability bounds for one-sample spectral-norm estimates.
    Bounds(BoundsArgs),
    /// Estimate the norm of the Fréchet derivative of the matrix exponential.
    FrechetNorm(FrechetArgs),
    /// Run a Monte Carlo experiment and write its CSV.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Matrix: a1..a7, ones, rank-one, laplace, convdiff, frechet-grid or mm:<path>.
    #[arg(long)]
    matrix: String,
    /// Order of the matrix (n = nhat * ntilde).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nhat: Option<usize>,
    #[arg(long)]
    ntilde: Option<usize>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// trace, trace-inv or frob-sq-inv. Defaults to the matrix's usual target.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = "rank1-gaussian")]
    dist: String,
    #[arg(long, default_value_t = 10)]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Certify the estimate at this confidence level.
    #[arg(long)]
    confidence: Option<f64>,
    /// Stable rank used by the certificate.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormTarget {
    Norm2,
    #[value(name = "normF", alias = "normf")]
    NormF,
}

#[derive(Debug, Args)]
struct NormArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, value_enum, default_value = "norm2")]
    target: NormTarget,
    #[arg(long, default_value = "rank1-gaussian")]
    dist: String,
    /// Number of samples; k > 1 reports Max_k.
    #[arg(long, default_value_t = 1)]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Comma-separated error factors.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,50")]
    theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrechetMethod {
    Power,
    Max,
    Both,
}

#[derive(Debug, Args)]
struct FrechetArgs {
    #[arg(long, default_value = "frechet-grid")]
    matrix: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nhat: Option<usize>,
    #[arg(long)]
    ntilde: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    method: FrechetMethod,
    #[arg(long, default_value_t = 7)]
    k: u64,
    #[arg(long, default_value_t = 10.0)]
    theta: f64,
    /// Power-method iterations.
    #[arg(long, default_value_t = 7)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Figure1,
    Tables,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    /// Comma-separated matrices. figure1 defaults to a1..a7.
    #[arg(long, value_delimiter = ',')]
    matrix: Vec<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nhat: Option<usize>,
    #[arg(long)]
    ntilde: Option<usize>,
    /// Defaults to 100000 for figure1 and 10000 for tables.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    dist: Vec<String>,
    /// Sample counts (tables).
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    k: Vec<u64>,
    /// Error factors (tables).
    #[arg(long, value_delimiter = ',', default_value = "1.2,2,4,8,30")]
    theta: Vec<f64>,
    /// Number of log-spaced tau values in [1, 100] (figure1).
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// norm2, normF, or both (figure1).
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<kronprobe::Error> for CliError {
    fn from(e: kronprobe::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parse `argv` (including the program name), execute, and return the exit
/// status. Results go to `out` once the command has finished, diagnostics
/// to `err`.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let mut buf = Vec::new();
    let result = thread_pool().and_then(|pool| pool.install(|| dispatch(cli.command, &mut buf)));
    let result = result.and_then(|()| out.write_all(&buf).map_err(CliError::from));
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Runtime(e.into()))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::EstimateTrace(a) => estimate_trace(a, out),
        Command::EstimateNorm(a) => estimate_norm(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::FrechetNorm(a) => frechet_norm(a, out),
        Command::Experiment(a) => experiment(a, out),
    }
}

fn parse_matrix(s: &str) -> CliResult<MatrixKind> {
    s.parse().map_err(|_| usage(format!("--matrix: unknown matrix `{s}`")))
}

fn parse_dist(s: &str) -> CliResult<Distribution> {
    s.parse().map_err(|_| {
        usage(format!(
            "--dist: unknown distribution `{s}` (expected gaussian, rademacher, rank1-gaussian or rank1-rademacher)"
        ))
    })
}

fn parse_trace_target(s: &str) -> CliResult<MatrixTarget> {
    match s.parse::<MatrixTarget>() {
        Ok(t) if t.is_trace() => Ok(t),
        _ => Err(usage(format!("--target: expected trace, trace-inv or frob-sq-inv, got `{s}`"))),
    }
}

fn default_shape(kind: &MatrixKind) -> Option<(usize, usize)> {
    match kind {
        MatrixKind::Ones | MatrixKind::RankOneVecIdentity | MatrixKind::Laplace2D | MatrixKind::ConvDiff => {
            Some((50, 50))
        }
        MatrixKind::FrechetGrid => Some((10, 10)),
        MatrixKind::MatrixMarket(_) => None,
        _ => Some((4, 4)),
    }
}

/// `(n̂, ñ)` from any consistent subset of `--n`, `--nhat`, `--ntilde`.
fn resolve_shape(
    n: Option<usize>,
    nhat: Option<usize>,
    ntilde: Option<usize>,
    default: Option<(usize, usize)>,
) -> CliResult<(usize, usize)> {
    for (flag, v) in [("--n", n), ("--nhat", nhat), ("--ntilde", ntilde)] {
        if v == Some(0) {
            return Err(usage(format!("{flag} must be positive")));
        }
    }
    let divide = |n: usize, d: usize, flag: &str| {
        if n.is_multiple_of(d) {
            Ok(n / d)
        } else {
            Err(usage(format!("{flag} {d} does not divide --n {n}")))
        }
    };
    match (n, nhat, ntilde) {
        (None, None, None) => default.ok_or_else(|| usage("--n is required for this matrix")),
        (Some(n), None, None) => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m == n {
                Ok((m, m))
            } else {
                Err(usage(format!("--n {n} is not a perfect square; pass --nhat or --ntilde")))
            }
        }
        (Some(n), Some(h), None) => Ok((h, divide(n, h, "--nhat")?)),
        (Some(n), None, Some(t)) => Ok((divide(n, t, "--ntilde")?, t)),
        (None, Some(h), None) => Ok((h, h)),
        (None, None, Some(t)) => Ok((t, t)),
        (None, Some(h), Some(t)) => Ok((h, t)),
        (Some(n), Some(h), Some(t)) => {
            if h * t == n {
                Ok((h, t))
            } else {
                Err(usage(format!("--nhat {h} times --ntilde {t} is not --n {n}")))
            }
        }
    }
}

fn check_k(k: u64) -> CliResult {
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    Ok(())
}

fn check_confidence(c: Option<f64>) -> CliResult {
    match c {
        Some(c) if !(c > 0.0 && c < 1.0) => Err(usage(format!("--confidence must lie in (0, 1), got {c}"))),
        _ => Ok(()),
    }
}

fn check_rho(rho: Option<f64>) -> CliResult {
    match rho {
        Some(r) if !(r.is_finite() && r > 0.0) => Err(usage(format!("--rho must be positive, got {r}"))),
        _ => Ok(()),
    }
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::SpectralNorm => "norm2",
        Target::FrobeniusNorm => "normF",
        Target::Trace => "trace",
    }
}

fn write_report(out: &mut dyn Write, rows: &[(&str, String)], report: &EstimateReport) -> CliResult {
    let mut lines: Vec<(String, String)> = rows.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    lines.push(("distribution".into(), report.distribution.tag().into()));
    lines.push(("k".into(), report.k.to_string()));
    lines.push(("seed".into(), report.seed.to_string()));
    lines.push(("estimate".into(), report.value.to_string()));
    if let Some(c) = &report.certified {
        lines.push(("confidence".into(), c.confidence.to_string()));
        let (lo, hi) = c.interval(report.value);
        if let Some(s) = &c.upper {
            lines.push(("upper_factor".into(), format!("{} ({})", s.factor, s.kind.name())));
        }
        match &c.lower {
            Some(s) => lines.push(("lower_factor".into(), format!("{} ({})", s.factor, s.kind.name()))),
            None => lines.push(("lower_factor".into(), "none".into())),
        }
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        lines.push(("interval".into(), format!("[{}, {}]", fmt(lo), fmt(hi))));
    }
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in lines {
        writeln!(out, "{k:<width$}  {v}")?;
    }
    Ok(())
}

fn estimate_trace(a: TraceArgs, out: &mut dyn Write) -> CliResult {
    let kind = parse_matrix(&a.shape.matrix)?;
    let dist = parse_dist(&a.dist)?;
    check_k(a.k)?;
    check_confidence(a.confidence)?;
    check_rho(a.rho)?;
    let target = match &a.target {
        Some(t) => parse_trace_target(t)?,
        None => match &kind {
            MatrixKind::Laplace2D => MatrixTarget::TraceOfInvA,
            MatrixKind::ConvDiff => MatrixTarget::FrobSqOfInvA,
            k if k.to_string().starts_with('A') => MatrixTarget::FrobSqOfInvA,
            _ => MatrixTarget::TraceOfA,
        },
    };
    let (nh, nt) = resolve_shape(a.shape.n, a.shape.nhat, a.shape.ntilde, default_shape(&kind))?;
    let spec = TestMatrixSpec::new(kind, nh, nt, target).map_err(|e| usage(format!("--nhat/--ntilde: {e}")))?;
    let b = trace_operator(&spec, generate_matrix(&spec, a.seed)?)?;
    let mut report = trace_estimator(&b, a.k, dist, a.seed)?;
    if let Some(c) = a.confidence {
        report = certify(&report, c, a.rho)?;
    }
    let mut rows = vec![
        ("matrix", spec.tag()),
        ("target", target.name().to_string()),
        ("shape", format!("{nh}x{nt}")),
    ];
    if let Some(t) = b.exact_trace() {
        rows.push(("exact", t.to_string()));
    }
    write_report(out, &rows, &report)
}

fn estimate_norm(a: NormArgs, out: &mut dyn Write) -> CliResult {
    let kind = parse_matrix(&a.shape.matrix)?;
    let dist = parse_dist(&a.dist)?;
    check_k(a.k)?;
    check_confidence(a.confidence)?;
    check_rho(a.rho)?;
    let (nh, nt) = resolve_shape(a.shape.n, a.shape.nhat, a.shape.ntilde, default_shape(&kind))?;
    let (target, mt) = match a.target {
        NormTarget::Norm2 => (Target::SpectralNorm, MatrixTarget::SpectralNorm),
        NormTarget::NormF => (Target::FrobeniusNorm, MatrixTarget::FrobeniusNorm),
    };
    let spec = TestMatrixSpec::new(kind, nh, nt, mt).map_err(|e| usage(format!("--nhat/--ntilde: {e}")))?;
    let op = generate_matrix(&spec, a.seed)?;
    let report = if a.k == 1 {
        one_sample_norm(&op, dist, a.seed)?
    } else {
        max_estimator(&op, a.k, dist, a.seed)?
    };
    let mut report = report.with_target(target);
    if let Some(c) = a.confidence {
        report = certify(&report, c, a.rho)?;
    }
    let rows = [
        ("matrix", spec.tag()),
        ("target", target_name(target).to_string()),
        ("shape", format!("{nh}x{nt}")),
    ];
    write_report(out, &rows, &report)
}

fn bounds(a: BoundsArgs, out: &mut dyn Write) -> CliResult {
    if let Some(t) = a.theta.iter().find(|t| !(**t >= 1.0 && t.is_finite())) {
        return Err(usage(format!("--theta values must be finite and at least 1, got {t}")));
    }
    writeln!(out, "{:>10}  {:>10}  {:>14}", "theta", "gaussian", "rank1-gaussian")?;
    for &theta in &a.theta {
        let p = BoundParams::new().theta(theta);
        let g = failure_probability(BoundKind::GaussNormUpper, &p)?;
        let r = failure_probability(BoundKind::RankOneGaussNormUpper, &p)?;
        writeln!(out, "{theta:>10}  {g:>10.6}  {r:>14.6}")?;
    }
    Ok(())
}

fn frechet_norm(a: FrechetArgs, out: &mut dyn Write) -> CliResult {
    let kind = parse_matrix(&a.matrix)?;
    check_k(a.k)?;
    if !(a.theta > 1.0 && a.theta.is_finite()) {
        return Err(usage(format!("--theta must exceed 1, got {}", a.theta)));
    }
    if a.iters == 0 && a.method != FrechetMethod::Max {
        return Err(usage("--iters must be at least 1"));
    }
    let (nh, nt) = resolve_shape(a.n, a.nhat, a.ntilde, default_shape(&kind))?;
    let spec = TestMatrixSpec::new(kind, nh, nt, MatrixTarget::SpectralNorm)
        .map_err(|e| usage(format!("--nhat/--ntilde: {e}")))?;
    let op = generate_matrix(&spec, a.seed)?;
    let f = MatrixFunction::Exp;
    writeln!(out, "matrix    {}", spec.tag())?;
    writeln!(out, "order     {}", op.nrows())?;
    writeln!(out, "function  {}", f.name())?;
    if a.method != FrechetMethod::Max {
        let v = frechet_norm_power_method(f, &op, a.iters, a.seed)?;
        writeln!(out, "power     {v} ({} iterations)", a.iters)?;
    }
    if a.method != FrechetMethod::Power {
        let r = frechet_norm_max_estimator(f, &op, a.k, a.theta, a.seed, ArnoldiOptions::default())?;
        writeln!(out, "max_k     {} (k = {})", r.max_norm, a.k)?;
        writeln!(out, "upper     {} (theta = {})", r.upper_bound, a.theta)?;
        writeln!(out, "p_fail    {}", max_failure(a.k, a.theta)?)?;
        writeln!(out, "krylov    {}{}", r.max_dimension, if r.all_converged { "" } else { " (not converged)" })?;
    }
    Ok(())
}

fn max_failure(k: u64, theta: f64) -> CliResult<f64> {
    Ok(failure_probability(BoundKind::MaxEstimatorUpper, &BoundParams::new().k(k).theta(theta))?)
}

fn experiment(a: ExperimentArgs, out: &mut dyn Write) -> CliResult {
    let dists = if a.dist.is_empty() {
        Distribution::ALL.to_vec()
    } else {
        a.dist.iter().map(|d| parse_dist(d)).collect::<CliResult<_>>()?
    };
    let trials = a.trials.unwrap_or(match a.kind {
        ExperimentKind::Figure1 => 100_000,
        ExperimentKind::Tables => 10_000,
    });
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let table = match a.kind {
        ExperimentKind::Figure1 => figure1(&a, &dists, trials)?,
        ExperimentKind::Tables => tables(&a, &dists, trials)?,
    };
    write_csv(&table, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(out, "wrote {} rows to {}", table.len(), a.out.display())?;
    Ok(())
}

fn figure1(a: &ExperimentArgs, dists: &[Distribution], trials: u64) -> CliResult<ExperimentTable> {
    let kinds: Vec<MatrixKind> = if a.matrix.is_empty() {
        MatrixKind::SYNTHETIC.to_vec()
    } else {
        a.matrix.iter().map(|m| parse_matrix(m)).collect::<CliResult<_>>()?
    };
    let norms = match a.norm.as_deref() {
        None | Some("both") => vec![NormKind::Spectral, NormKind::Frobenius],
        Some("norm2") => vec![NormKind::Spectral],
        Some("normF") | Some("normf") => vec![NormKind::Frobenius],
        Some(other) => return Err(usage(format!("--norm: expected norm2, normF or both, got `{other}`"))),
    };
    if a.points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let taus = log_grid(1.0, 100.0, a.points);
    let explicit = a.n.is_some() || a.nhat.is_some() || a.ntilde.is_some();
    let mut table = ExperimentTable::default();
    for kind in kinds {
        for &norm in &norms {
            // spectral curves at n = 16, Frobenius at n = 196 unless overridden
            let default = match norm {
                NormKind::Spectral => (4, 4),
                NormKind::Frobenius => (14, 14),
            };
            let (nh, nt) = if explicit {
                resolve_shape(a.n, a.nhat, a.ntilde, None)?
            } else {
                default
            };
            let target = match norm {
                NormKind::Spectral => MatrixTarget::SpectralNorm,
                NormKind::Frobenius => MatrixTarget::FrobeniusNorm,
            };
            let spec = TestMatrixSpec::new(kind.clone(), nh, nt, target)
                .map_err(|e| usage(format!("--nhat/--ntilde: {e}")))?;
            table.extend(failure_curve(&spec, norm, dists, &taus, trials, a.seed)?);
        }
    }
    Ok(table)
}

fn tables(a: &ExperimentArgs, dists: &[Distribution], trials: u64) -> CliResult<ExperimentTable> {
    if a.matrix.is_empty() {
        return Err(usage("--matrix is required for tables"));
    }
    if let Some(t) = a.theta.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(usage(format!("--theta values must be positive, got {t}")));
    }
    if a.k.contains(&0) {
        return Err(usage("--k values must be at least 1"));
    }
    let target = a.target.as_deref().map(parse_trace_target).transpose()?;
    let mut table = ExperimentTable::default();
    for m in &a.matrix {
        let kind = parse_matrix(m)?;
        let (nh, nt) = resolve_shape(a.n, a.nhat, a.ntilde, default_shape(&kind))?;
        let target = match target {
            Some(t) => t,
            None => match TestMatrixSpec::trace_suite(kind.clone()) {
                Ok(s) => s.target,
                Err(_) => MatrixTarget::TraceOfA,
            },
        };
        let spec =
            TestMatrixSpec::new(kind, nh, nt, target).map_err(|e| usage(format!("--nhat/--ntilde: {e}")))?;
        table.extend(estimator_table(&spec, dists, &a.k, &a.theta, trials, a.seed)?);
    }
    Ok(table)
}
