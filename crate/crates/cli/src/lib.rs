//! Command-line front end: argument parsing, run configuration, and the
//! versioned JSON/CSV records written for each command.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use lifespan_core::conditions::{ConditionPolicy, ConditionVerdict, Conditions, GammaConfig, LifespanBounds};
use lifespan_core::predictor::{predict, Regime, ScalingLaw};
use lifespan_core::sweep::{geometric, run_sweep, Source, SweepConfig, SweepResult};
use lifespan_core::volterra::{estimate_blowup_time, solve_boundary_trace, BlowupEstimate, StepPolicy, TraceMeta};
use lifespan_core::{Error, InitialProfile, Param, ProblemSpec};

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_REGIME: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lifespan-lab", version, about = "Life spans of the heat equation with a nonlinear boundary flux")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the predicted life-span law.
    Predict(PredictArgs),
    /// Evaluate solvability conditions at T, or search for life-span bounds.
    Check(CheckArgs),
    /// Solve the boundary-trace equation (N = 1) and estimate the blow-up time.
    Solve(SolveArgs),
    /// Sweep κ, fit the exponent and compare with the prediction.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Space dimension.
    #[arg(long = "N", value_name = "N")]
    pub n: usize,
    /// Exponent p > 1: decimal, rational (3/2) or `1+1/N`.
    #[arg(long)]
    pub p: String,
    /// e.g. singular-log:A=1/2,B=0, power-decay:A=1, gaussian-growth:lambda=0.25, constant:c=1
    #[arg(long)]
    pub profile: String,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// JSON record path; CSV data goes next to it with a .csv extension.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma1p: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub gamma3: Option<f64>,
    #[arg(long)]
    pub gamma4: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Integrability exponent a in (1, p) for the split condition.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub sigma_per_decade: Option<u32>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub w_max: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub regime: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub kappa: f64,
    /// Evaluate the conditions at this T; without it, search for bounds.
    #[arg(long = "T", value_name = "T")]
    pub t: Option<f64>,
    /// Also search for bounds when --T is given.
    #[arg(long)]
    pub bounds: bool,
    #[command(flatten)]
    pub gammas: GammaArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub kappa: f64,
    #[command(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub regime: String,
    /// volterra, upper_bound or lower_bound.
    #[arg(long, default_value = "volterra")]
    pub method: String,
    /// Explicit comma-separated κ list (geometric).
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    #[arg(long)]
    pub kappa_min: Option<f64>,
    #[arg(long)]
    pub kappa_max: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    /// Match band on the exponent; default max(0.1 |predicted|, 0.05).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Worker threads; default is the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub gammas: GammaArgs,
    #[command(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Everything a run depends on, echoed into each output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: Param,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub profile: InitialProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "T")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<GammaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub schema: u32,
    pub version: String,
    pub config: RunConfig,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResult {
    pub law: ScalingLaw,
    pub text: String,
    #[serde(with = "lifespan_core::float_serde::option")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub necessary: Option<ConditionVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub necessary_critical: Option<ConditionVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sufficient: Option<ConditionVerdict>,
    /// Why no sufficient condition was evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sufficient_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<LifespanBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub estimate: BlowupEstimate,
    pub trace: TraceMeta,
    pub trace_points: usize,
}

/// Failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_regime_error() {
            EXIT_REGIME
        } else if e.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_USAGE
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    usage(format!("cannot write {}: {e}", path.display()))
}

/// Accepts decimals, rationals and the shorthand `1+1/N`.
pub fn parse_p(s: &str, n: usize) -> Result<Param, Failure> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let compact = compact.strip_prefix("p=").unwrap_or(&compact);
    if compact == "1+1/N" || compact == "p*" || compact == "p_*" {
        return Ok(Param::critical_exponent(n));
    }
    compact.parse().map_err(|e: Error| usage(format!("invalid p: {e}")))
}

fn parse_problem(args: &ProblemArgs, kappa: f64) -> Result<ProblemSpec, Failure> {
    if args.n == 0 {
        return Err(usage("invalid N: dimension must be at least 1"));
    }
    let p = parse_p(&args.p, args.n)?;
    let profile: InitialProfile = args.profile.parse().map_err(Failure::from)?;
    let problem = ProblemSpec {
        n: args.n,
        p,
        kappa,
        profile,
    };
    problem.validate()?;
    Ok(problem)
}

fn parse_regime(s: &str) -> Result<Regime, Failure> {
    s.parse().map_err(Failure::from)
}

fn gammas_from(args: &GammaArgs) -> Result<(GammaConfig, ConditionPolicy), Failure> {
    let d = GammaConfig::default();
    let g = GammaConfig {
        gamma1: args.gamma1.unwrap_or(d.gamma1),
        gamma1p: args.gamma1p.unwrap_or(d.gamma1p),
        gamma2: args.gamma2.unwrap_or(d.gamma2),
        gamma3: args.gamma3.unwrap_or(d.gamma3),
        gamma4: args.gamma4.unwrap_or(d.gamma4),
        delta: args.delta.unwrap_or(d.delta),
        a: args.a,
    };
    g.validate()?;
    let dp = ConditionPolicy::default();
    let policy = ConditionPolicy {
        sigma_per_decade: args.sigma_per_decade.unwrap_or(dp.sigma_per_decade),
        t_min: args.t_min.unwrap_or(dp.t_min),
        t_max: args.t_max.unwrap_or(dp.t_max),
        ..dp
    };
    policy.validate()?;
    Ok((g, policy))
}

fn step_from(args: &StepArgs) -> StepPolicy {
    let d = StepPolicy::default();
    StepPolicy {
        horizon: args.horizon.unwrap_or(d.horizon),
        eta: args.eta.unwrap_or(d.eta),
        w_max: args.w_max.unwrap_or(d.w_max),
        ..d
    }
}

fn base_config(command: &str, problem: &ProblemSpec) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        n: problem.n,
        p: problem.p,
        kappa: None,
        profile: problem.profile,
        regime: None,
        method: None,
        t: None,
        kappas: None,
        gammas: None,
        conditions: None,
        step: None,
        tolerance: None,
        jobs: None,
    }
}

fn record<T: Serialize>(config: RunConfig, result: T) -> Record<T> {
    Record {
        schema: SCHEMA,
        version: VERSION.to_string(),
        config,
        result,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| usage(format!("cannot serialize the result: {e}")))
}

/// CSV with the version and config echoed as leading `#` lines.
fn stamped_csv(config: &RunConfig, body: &str) -> Result<String, Failure> {
    let echo = serde_json::to_string(config).map_err(|e| usage(e.to_string()))?;
    Ok(format!("# lifespan-lab {VERSION} schema {SCHEMA}\n# config {echo}\n{body}"))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

/// Writes the JSON record (and CSV data, if any) to --output, and prints
/// the requested format to stdout.
fn emit<T: Serialize>(
    out: &OutputArgs,
    rec: &Record<T>,
    csv: Option<&str>,
    text: Option<&str>,
    default: Format,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let json = to_json(rec)?;
    if let Some(path) = &out.output {
        write_file(path, &format!("{json}\n"))?;
        if let Some(body) = csv {
            write_file(&path.with_extension("csv"), &stamped_csv(&rec.config, body)?)?;
        }
    }
    let shown = match out.format.unwrap_or(default) {
        Format::Json => format!("{json}\n"),
        Format::Csv => match csv {
            Some(body) => body.to_string(),
            None => return Err(usage("this command has no CSV output")),
        },
        Format::Text => format!("{}\n", text.unwrap_or(&json)),
    };
    stdout
        .write_all(shown.as_bytes())
        .map_err(|e| usage(format!("cannot write to stdout: {e}")))
}

fn run_predict(args: &PredictArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let problem = parse_problem(&args.problem, 1.0)?;
    let regime = parse_regime(&args.regime)?;
    let law = predict(problem.n, problem.p, &problem.profile, regime)?;
    let text = law.to_string();
    let config = RunConfig {
        regime: Some(regime),
        ..base_config("predict", &problem)
    };
    let rec = record(
        config,
        PredictResult {
            law,
            text: text.clone(),
            exponent: law.exponent(),
        },
    );
    emit(&args.out, &rec, None, Some(&text), Format::Text, stdout)
}

fn run_check(args: &CheckArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let problem = parse_problem(&args.problem, args.kappa)?;
    let (gammas, policy) = gammas_from(&args.gammas)?;
    let c = Conditions::new(problem, gammas, policy)?;
    let mut result = CheckResult {
        necessary: None,
        necessary_critical: None,
        sufficient: None,
        sufficient_note: None,
        bounds: None,
    };
    if let Some(t) = args.t {
        result.necessary = Some(c.necessary_general(t)?);
        result.necessary_critical = match c.necessary_critical(t) {
            Ok(v) => Some(v),
            Err(e) if e.is_regime_error() => None,
            Err(e) => return Err(e.into()),
        };
        match c.sufficient(t) {
            Ok(v) => result.sufficient = Some(v),
            Err(e) if e.is_regime_error() => result.sufficient_note = Some(e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    if args.t.is_none() || args.bounds {
        result.bounds = Some(c.bounds()?);
    }
    let config = RunConfig {
        kappa: Some(problem.kappa),
        t: args.t,
        gammas: Some(gammas),
        conditions: Some(policy),
        ..base_config("check", &problem)
    };
    emit(&args.out, &record(config, result), None, None, Format::Json, stdout)
}

fn run_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let problem = parse_problem(&args.problem, args.kappa)?;
    if problem.n != 1 {
        return Err(usage(format!("invalid N: solve needs N = 1, got {}", problem.n)));
    }
    let step = step_from(&args.step);
    let estimate = estimate_blowup_time(&problem, &step)?;
    let end = estimate.t_est.unwrap_or(step.horizon).min(step.horizon);
    let trace = solve_boundary_trace(&problem, end, &step)?;
    let config = RunConfig {
        kappa: Some(problem.kappa),
        step: Some(step),
        ..base_config("solve", &problem)
    };
    let csv = trace.to_csv();
    let rec = record(
        config,
        SolveResult {
            estimate,
            trace: trace.meta.clone(),
            trace_points: trace.times.len(),
        },
    );
    emit(&args.out, &rec, Some(&csv), None, Format::Json, stdout)
}

fn run_sweep_cmd(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let problem = parse_problem(&args.problem, 1.0)?;
    let regime = parse_regime(&args.regime)?;
    let method: Source = args.method.parse().map_err(Failure::from)?;
    let (gammas, policy) = gammas_from(&args.gammas)?;
    let step = step_from(&args.step);
    let kappas = match &args.kappas {
        Some(list) => list.clone(),
        None => {
            let (lo, hi) = match regime {
                Regime::LargeKappa => (10.0, 1e4),
                Regime::SmallKappa => (1e-4, 1e-1),
            };
            let lo = args.kappa_min.unwrap_or(lo);
            let hi = args.kappa_max.unwrap_or(hi);
            if !(lo > 0.0 && hi > lo) {
                return Err(usage(format!("invalid kappa range [{lo}, {hi}]")));
            }
            geometric(lo, hi, args.points)
        }
    };
    let config = SweepConfig {
        step,
        gammas,
        conditions: policy,
        tolerance: args.tolerance,
    };
    let jobs = match args.jobs {
        Some(0) => return Err(usage("invalid jobs: must be at least 1")),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {jobs} workers: {e}")))?;
    let result: SweepResult = pool.install(|| run_sweep(&problem, &kappas, method, regime, &config))?;
    let run_config = RunConfig {
        regime: Some(regime),
        method: Some(method),
        kappas: Some(kappas),
        gammas: Some(gammas),
        conditions: Some(policy),
        step: Some(step),
        tolerance: args.tolerance,
        jobs: Some(jobs),
        ..base_config("sweep", &problem)
    };
    let csv = result.to_csv();
    emit(&args.out, &record(run_config, result), Some(&csv), None, Format::Json, stdout)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Predict(a) => run_predict(a, stdout),
        Command::Check(a) => run_check(a, stdout),
        Command::Solve(a) => run_solve(a, stdout),
        Command::Sweep(a) => run_sweep_cmd(a, stdout),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
