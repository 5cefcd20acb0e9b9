//! Command-line front end for the `stiffode` library.
//!
//! Exit codes: 0 success, 2 I/O failure, 3 solver failure, 4 domain
//! precondition violated, 64 usage error, 65 malformed input data.

pub mod format;
pub mod matrix;
pub mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::f64::consts::TAU;
use stiffode::integrate::{
    integrate_adaptive, integrate_fixed_with, problem_library, ProblemParams, StartMode,
};
use stiffode::methods::method_of_order;

use stiffode::stability::{
    boundary_locus, find_self_intersections, is_stiffly_stable, locus_point,
    stiff_stability_abscissa, stiffness_ratio, LocusSample, MIN_LOCUS_SAMPLES,
};
use stiffode::{
    linalg, ComplexNumber, Family, IntegrateError, IntegrationTrace, OdeProblem, ParamValue,
    Scheme, SolverConfig, StabilityError, TraceStatus,
};

use crate::format::{csv12, format_sig};
use crate::svg::{render_locus, PlotSpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_DOMAIN: u8 = 4;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

/// Magnitude past which an explicit run is reported as diverged.
const DIVERGENCE_THRESHOLD: f64 = 1e10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stiffode",
    version,
    about = "Stability regions of BDF and Adams-Moulton methods, and stiff ODE integration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the boundary locus and write it as CSV or SVG.
    Region(RegionArgs),
    /// Print the stiff-stability abscissa of a BDF method.
    Delta(DeltaArgs),
    /// List self-intersections of a boundary locus.
    Intersections(IntersectionsArgs),
    /// Integrate a library problem and write the trace as CSV.
    #[command(allow_negative_numbers = true)]
    Integrate(IntegrateArgs),
    /// Eigenvalues and stiffness ratio of a matrix file.
    #[command(after_help = MATRIX_FORMAT_HELP)]
    Ratio(RatioArgs),
}

const MATRIX_FORMAT_HELP: &str =
    "Matrix file format: plain text, first line `n`, then n rows of n \
whitespace-separated reals. Blank lines are ignored.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Bdf,
    #[value(name = "adams-moulton", alias = "am")]
    AdamsMoulton,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Bdf => Family::Bdf,
            FamilyArg::AdamsMoulton => Family::AdamsMoulton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Svg,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long, value_enum, default_value = "bdf")]
    pub family: FamilyArg,
    /// Order of accuracy (BDF 1..7, Adams-Moulton 1..6).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub order: u8,
    /// Number of intervals on [0, 2π]; the output has one more row.
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    #[arg(long, default_value_t = 600)]
    pub height: u32,
    /// Do not shade the stable region in SVG output.
    #[arg(long)]
    pub no_shade: bool,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    /// BDF order (1..6; order 7 is not stiffly stable).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub order: u8,
}

#[derive(Debug, Args)]
pub struct IntersectionsArgs {
    #[arg(long, value_enum, default_value = "bdf")]
    pub family: FamilyArg,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub order: u8,
    #[arg(long, default_value_t = 8192)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bdf,
    #[value(name = "adams-moulton", alias = "am")]
    AdamsMoulton,
    Euler,
    Rk4,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    /// dahlquist, linear_system or van_der_pol.
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Imaginary part of λ for dahlquist (gives a 2-D real system).
    #[arg(long)]
    pub lambda_im: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Matrix file for linear_system (see `ratio --help` for the format).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub y0: Option<Vec<f64>>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub x_end: Option<f64>,
    #[arg(long, value_enum, default_value = "bdf")]
    pub method: MethodArg,
    /// Method order for fixed-step multistep runs.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Adaptive variable-order BDF (requires --method bdf).
    #[arg(long)]
    pub adaptive: bool,
    /// Fixed step size.
    #[arg(long)]
    pub h: Option<f64>,
    /// Relative tolerance of adaptive runs.
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
    /// Absolute tolerance of adaptive runs; defaults to rtol.
    #[arg(long)]
    pub atol: Option<f64>,
    /// Highest order the adaptive driver may use (1..6).
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Take the first k-1 values of a fixed-step multistep run from the exact solution.
    #[arg(long)]
    pub exact_start: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    /// Matrix file, or `-` for standard input.
    pub matrix: PathBuf,
}

/// Parses arguments, runs the command and returns the exit code. Output
/// goes to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_exit_code() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(code)
}

fn dispatch(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, CliError> {
    match command {
        Command::Region(a) => cmd_region(&a, stdout, stderr),
        Command::Delta(a) => cmd_delta(&a, stdout),
        Command::Intersections(a) => cmd_intersections(&a, stdout),
        Command::Integrate(a) => cmd_integrate(&a, stdout, stderr),
        Command::Ratio(a) => cmd_ratio(&a, stdout, stderr),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn method(family: FamilyArg, order: u8) -> Result<stiffode::LinearMultistepMethod, CliError> {
    method_of_order(family.into(), usize::from(order)).map_err(|e| CliError::Usage(e.to_string()))
}

/// Samples `0..=n` of the locus. Counts below the library minimum are
/// evaluated point by point, which is only offered for CSV output.
fn sparse_locus(
    m: &stiffode::LinearMultistepMethod,
    n: usize,
) -> Result<Vec<LocusSample>, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    (0..=n)
        .map(|k| {
            let theta = if k == n {
                TAU
            } else {
                k as f64 * TAU / n as f64
            };
            locus_point(m, theta)
                .map(|sigma| LocusSample { theta, sigma })
                .map_err(locus_error)
        })
        .collect()
}

fn locus_error(e: StabilityError) -> CliError {
    match e {
        StabilityError::TooFewSamples { .. } => CliError::Usage(e.to_string()),
        StabilityError::DegenerateDenominator { .. } => CliError::Domain(format!(
            "{e}; the locus passes through infinity there, try an odd --samples"
        )),
        other => other.into(),
    }
}

pub fn cmd_region(
    a: &RegionArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, CliError> {
    let m = method(a.family, a.order)?;
    let dense = a.samples >= MIN_LOCUS_SAMPLES;
    if !dense && a.format == OutputFormat::Svg {
        return Err(CliError::Usage(format!(
            "SVG output needs --samples >= {MIN_LOCUS_SAMPLES}"
        )));
    }
    let (samples, crossings) = if dense {
        let locus = boundary_locus(&m, a.samples).map_err(locus_error)?;
        let crossings = find_self_intersections(&locus);
        (locus.samples().to_vec(), Some(crossings))
    } else {
        (sparse_locus(&m, a.samples)?, None)
    };
    let bdf = m.family() == Family::Bdf;
    let delta = if bdf && (1..=6).contains(&m.order()) {
        Some(stiff_stability_abscissa(&m)?)
    } else {
        None
    };

    let _ = writeln!(
        stderr,
        "{} order {}: {} samples",
        m.family(),
        m.order(),
        a.samples
    );
    match delta {
        Some(d) => {
            let _ = writeln!(stderr, "delta = {}", format_sig(d, 6));
        }
        None if bdf => {
            let _ = writeln!(
                stderr,
                "delta undefined: BDF{} is not stiffly stable",
                m.order()
            );
        }
        None => {}
    }
    match &crossings {
        Some(list) => {
            let _ = writeln!(stderr, "self-intersections: {}", list.len());
            for z in list {
                let _ = writeln!(stderr, "  {},{}", format_sig(z.re, 6), format_sig(z.im, 6));
            }
        }
        None => {
            let _ = writeln!(
                stderr,
                "self-intersections: not computed below {MIN_LOCUS_SAMPLES} samples"
            );
        }
    }

    let text = match a.format {
        OutputFormat::Csv => {
            let mut s = String::from("theta,re,im\n");
            for p in &samples {
                s.push_str(&format!(
                    "{},{},{}\n",
                    csv12(p.theta),
                    csv12(p.sigma.re),
                    csv12(p.sigma.im)
                ));
            }
            s
        }
        OutputFormat::Svg => {
            let points: Vec<ComplexNumber> = samples.iter().map(|p| p.sigma).collect();
            let dashed = delta.filter(|_| (3..=6).contains(&m.order()));
            let mut spec = PlotSpec::fit(&points, a.width, a.height, dashed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            spec.dashed_vertical_at = dashed;
            // BDF and implicit Euler are stable outside the locus, higher Adams-Moulton inside
            spec.shade_exterior = bdf || m.order() == 1;
            let title = format!("{} order {} boundary locus", m.family(), m.order());
            render_locus(&spec, &points, &title, !a.no_shade)
                .map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    emit(a.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

pub fn cmd_delta(a: &DeltaArgs, stdout: &mut dyn Write) -> Result<u8, CliError> {
    if a.order == 7 {
        return Err(CliError::Usage(
            "BDF7 is not stiffly stable: its boundary locus crosses itself, so delta is undefined"
                .into(),
        ));
    }
    let m = method(FamilyArg::Bdf, a.order)?;
    let d = stiff_stability_abscissa(&m)?;
    emit(
        None,
        &format!("order,delta\n{},{}\n", a.order, format_sig(d, 6)),
        stdout,
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_intersections(a: &IntersectionsArgs, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let m = method(a.family, a.order)?;
    let locus = boundary_locus(&m, a.samples).map_err(locus_error)?;
    let mut s = String::from("re,im\n");
    for z in find_self_intersections(&locus) {
        s.push_str(&format!("{},{}\n", csv12(z.re), csv12(z.im)));
    }
    if m.family() == Family::Bdf {
        let report = is_stiffly_stable(&m)?;
        s.push_str(&format!("stiffly_stable,{}\n", report.stiffly_stable));
    }
    emit(None, &s, stdout)?;
    Ok(EXIT_OK)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|source| {
            CliError::Io {
                path: "<stdin>".into(),
                source,
            }
        })?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_matrix(path: &Path) -> Result<stiffode::DenseMatrix, CliError> {
    let text = read_input(path)?;
    matrix::parse_matrix(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn build_problem(a: &IntegrateArgs) -> Result<OdeProblem, CliError> {
    let mut params: ProblemParams = BTreeMap::new();
    let mut scalar = |key: &str, v: Option<f64>| {
        if let Some(v) = v {
            params.insert(key.to_string(), ParamValue::Scalar(v));
        }
    };
    scalar("lambda", a.lambda);
    scalar("lambda_im", a.lambda_im);
    scalar("mu", a.mu);
    scalar("x0", a.x0);
    scalar("x_end", a.x_end);
    if let Some(y0) = &a.y0 {
        let value = if a.problem == "dahlquist" && y0.len() == 1 {
            ParamValue::Scalar(y0[0])
        } else {
            ParamValue::Vector(y0.clone())
        };
        params.insert("y0".into(), value);
    }
    if let Some(path) = &a.matrix {
        params.insert("matrix".into(), ParamValue::Matrix(read_matrix(path)?));
    }
    problem_library(&a.problem, &params).map_err(|e| match e {
        IntegrateError::UnknownProblem(_) | IntegrateError::BadParameter(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Domain(other.to_string()),
    })
}

fn trace_csv(trace: &IntegrationTrace, dim: usize) -> String {
    let mut s = String::from("x");
    for i in 1..=dim {
        s.push_str(&format!(",y{i}"));
    }
    s.push_str(",h,order,newton_iters\n");
    for i in 0..trace.xs.len() {
        s.push_str(&csv12(trace.xs[i]));
        for v in &trace.ys[i] {
            s.push(',');
            s.push_str(&csv12(*v));
        }
        s.push_str(&format!(
            ",{},{},{}\n",
            csv12(trace.hs[i]),
            trace.orders[i],
            trace.newton_iters[i]
        ));
    }
    s
}

pub fn cmd_integrate(
    a: &IntegrateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, CliError> {
    let problem = build_problem(a)?;
    let atol = a.atol.unwrap_or(a.rtol);
    let scheme = match a.method {
        MethodArg::Bdf => Scheme::Bdf,
        MethodArg::AdamsMoulton => Scheme::AdamsMoulton,
        MethodArg::Euler => Scheme::ExplicitEuler,
        MethodArg::Rk4 => Scheme::Rk4,
    };
    let result = if a.adaptive {
        if scheme != Scheme::Bdf {
            return Err(CliError::Usage("--adaptive requires --method bdf".into()));
        }
        if a.h.is_some() {
            return Err(CliError::Usage(
                "--adaptive and --h are mutually exclusive".into(),
            ));
        }
        let mut config = SolverConfig::with_tolerances(a.rtol, atol);
        if let Some(q) = a.max_order {
            config.max_order = q;
        }
        config
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        integrate_adaptive(&problem, &config)
    } else {
        let h = a.h.ok_or_else(|| {
            CliError::Usage("fixed-step runs need --h (or use --adaptive)".into())
        })?;
        let start = if a.exact_start {
            StartMode::Exact
        } else {
            StartMode::Ramp
        };
        // Newton is converged to near round-off so the method alone sets the error
        integrate_fixed_with(&problem, scheme, a.order, h, &SolverConfig::tight(), start)
    };
    let trace = result.map_err(|e| match e {
        IntegrateError::InvalidConfig(_)
        | IntegrateError::StepDoesNotDivide { .. }
        | IntegrateError::Method(_) => CliError::Usage(e.to_string()),
        IntegrateError::InvalidProblem(_) => CliError::Domain(e.to_string()),
        other => CliError::Solver(other.to_string()),
    })?;

    emit(
        a.out.as_deref(),
        &trace_csv(&trace, problem.dimension()),
        stdout,
    )?;

    let _ = writeln!(stderr, "problem: {}", problem.name());
    let _ = writeln!(
        stderr,
        "status: {:?}, steps: {}, rejected: {}, max order: {}",
        trace.status,
        trace.steps(),
        trace.rejected_steps,
        trace.max_order_used()
    );
    let final_y: Vec<String> = trace.last_y().iter().map(|v| format_sig(*v, 10)).collect();
    let _ = writeln!(
        stderr,
        "x = {}, y = [{}]",
        format_sig(trace.last_x(), 10),
        final_y.join(", ")
    );
    if let Some(err) = trace.final_error(&problem) {
        let exact: Vec<String> = problem
            .exact_at(trace.last_x())
            .unwrap_or_default()
            .iter()
            .map(|v| format_sig(*v, 10))
            .collect();
        let _ = writeln!(
            stderr,
            "exact = [{}], |error| = {}",
            exact.join(", "),
            format_sig(err, 6)
        );
    }
    let peak = trace.ys.iter().flatten().fold(0.0f64, |m, v| {
        if v.is_nan() {
            f64::INFINITY
        } else {
            m.max(v.abs())
        }
    });
    if peak > DIVERGENCE_THRESHOLD {
        let _ = writeln!(
            stderr,
            "diverged: max |y| = {} exceeds {}",
            format_sig(peak, 6),
            format_sig(DIVERGENCE_THRESHOLD, 6)
        );
    }
    Ok(match trace.status {
        TraceStatus::Completed => EXIT_OK,
        TraceStatus::StepSizeUnderflow | TraceStatus::NewtonFailure => EXIT_SOLVER,
    })
}

pub fn cmd_ratio(
    a: &RatioArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, CliError> {
    let m = read_matrix(&a.matrix)?;
    let mut eig = linalg::eigenvalues(&m).map_err(|e| CliError::Domain(e.to_string()))?;
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let mut s = String::from("re,im\n");
    for z in &eig {
        s.push_str(&format!("{},{}\n", csv12(z.re), csv12(z.im)));
    }
    match stiffness_ratio(&eig) {
        Ok(r) => {
            s.push_str(&format!("stiffness_ratio,{}\n", csv12(r)));
            emit(None, &s, stdout)?;
            Ok(EXIT_OK)
        }
        Err(StabilityError::NotAsymptoticallyStable { eigenvalue }) => {
            let _ = writeln!(
                stderr,
                "offending eigenvalue: {},{}",
                csv12(eigenvalue.re),
                csv12(eigenvalue.im)
            );
            Err(CliError::Domain(format!(
                "spectrum is not asymptotically stable: eigenvalue {},{} has Re >= 0",
                csv12(eigenvalue.re),
                csv12(eigenvalue.im)
            )))
        }
        Err(e) => Err(e.into()),
    }
}
