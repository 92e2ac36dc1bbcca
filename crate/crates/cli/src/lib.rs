//! The `steiner` command line: solve an instance, run a reference oracle, or
//! check analytic gradients. Results are pretty JSON with 17 significant
//! digits, so identical inputs give byte-identical files.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use steiner_core::fmt::to_json_pretty;
use steiner_core::{
    centroid, enumerate_critical_points, gradient_check, gradient_check_with, grid_search, weiszfeld, CriticalPoint,
    Diagnostics, DomainBox, FlowConfig, GradcheckConfig, InstanceFile, OracleReport, Point, PotentialKind,
    PotentialSpec, SolveOptions, SteinerError, Strategy, TestingPlan,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CRITICAL_POINT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "steiner", version, about = "Generalized Steiner point solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace testing points to rest and report the critical set and Steiner point
    Solve(SolveArgs),
    /// Run a reference method on the instance
    Oracle(OracleArgs),
    /// Compare analytic gradients against central differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Write one CSV per testing point to `<PREFIX>.<k>.csv`
    #[arg(long, value_name = "PREFIX")]
    pub trace: Option<String>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Number of testing points
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the multi-start (defaults to all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Grid,
    UniformRandom,
    AnchorsJittered,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Grid => Strategy::Grid,
            StrategyArg::UniformRandom => Strategy::UniformRandom,
            StrategyArg::AnchorsJittered => Strategy::AnchorsJittered,
        }
    }
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Weiszfeld stopping tolerance on the step length
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Grid spacing (defaults to 1/1000 of the box diagonal)
    #[arg(long)]
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Weiszfeld,
    Centroid,
    Grid,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Difference step relative to the box diagonal
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale the first gradient component by 1.01 (exercises the failure path)
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors are reported on stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Oracle(args) => oracle(args),
        Command::Gradcheck(args) => gradcheck(args),
    }
}

#[derive(Serialize)]
struct SteinerSummary<'a> {
    location: &'a Point,
    value: f64,
    grad_norm: f64,
}

#[derive(Serialize)]
struct SolveEcho<'a> {
    input: &'a Path,
    potential: PotentialSpec,
    testing_plan: TestingPlan,
    flow: &'a FlowConfig,
    cluster_radius: f64,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    steiner: Option<SteinerSummary<'a>>,
    critical_set: &'a [CriticalPoint],
    diagnostics: &'a Diagnostics,
    config_echo: SolveEcho<'a>,
}

fn solve(args: &SolveArgs) -> anyhow::Result<i32> {
    let instance = InstanceFile::read(&args.input)?;
    let obj = instance.objective()?;

    // flags override file fields, which override defaults
    let mut plan = instance.testing_plan.clone().unwrap_or_default();
    if let Some(n) = args.starts {
        plan.count = n;
    }
    if let Some(s) = args.strategy {
        plan.strategy = s.into();
    }
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if plan.count == 0 {
        bail!(SteinerError::InvalidConfig {
            field: "starts".into(),
            reason: "must be at least 1".into()
        });
    }
    let domain_box = plan.resolve_box(obj.anchors())?;
    let plan = plan.with_box(domain_box.clone());

    let mut flow = instance.flow.clone().unwrap_or_default();
    if let Some(tol) = args.grad_tol {
        flow.grad_tol = tol;
    }
    flow.validate()?;

    let opts = SolveOptions {
        cluster_radius: Some(1e-4 * domain_box.diagonal()),
        keep_traces: args.trace.is_some(),
    };
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = args.threads {
            if n == 0 {
                bail!(SteinerError::InvalidConfig {
                    field: "threads".into(),
                    reason: "must be at least 1".into()
                });
            }
            builder = builder.num_threads(n);
        }
        builder.build().context("cannot start worker threads")?
    };
    let outcome = pool.install(|| enumerate_critical_points(&obj, &plan, &flow, &opts));

    let echo = SolveEcho {
        input: &args.input,
        potential: obj.potential().spec(),
        testing_plan: plan.clone(),
        flow: &flow,
        cluster_radius: opts.cluster_radius.unwrap(),
    };
    match outcome {
        Ok(result) => {
            if let (Some(prefix), Some(traces)) = (&args.trace, &result.traces_kept) {
                for (k, trace) in traces.iter().enumerate() {
                    let path = format!("{prefix}.{k}.csv");
                    let file = fs::File::create(&path).with_context(|| format!("cannot create {path}"))?;
                    trace
                        .write_csv(BufWriter::new(file))
                        .with_context(|| format!("cannot write {path}"))?;
                }
            }
            let s = &result.steiner;
            let out = SolveOutput {
                steiner: Some(SteinerSummary {
                    location: &s.location,
                    value: s.value,
                    grad_norm: s.grad_norm,
                }),
                critical_set: &result.critical_set,
                diagnostics: &result.diagnostics,
                config_echo: echo,
            };
            write_json(&args.output, &out)?;
            Ok(EXIT_OK)
        }
        Err(SteinerError::NoCriticalPoint { diagnostics }) => {
            let out = SolveOutput {
                steiner: None,
                critical_set: &[],
                diagnostics: &diagnostics,
                config_echo: echo,
            };
            write_json(&args.output, &out)?;
            eprintln!(
                "error: {}",
                SteinerError::NoCriticalPoint {
                    diagnostics: diagnostics.clone()
                }
            );
            Ok(EXIT_NO_CRITICAL_POINT)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct OracleEcho<'a> {
    input: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain_box: Option<DomainBox>,
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    #[serde(flatten)]
    report: &'a OracleReport,
    config_echo: OracleEcho<'a>,
}

fn oracle(args: &OracleArgs) -> anyhow::Result<i32> {
    let instance = InstanceFile::read(&args.input)?;
    let obj = instance.objective()?;
    let anchors = obj.anchors();
    let mut echo = OracleEcho {
        input: &args.input,
        tol: None,
        max_iter: None,
        spacing: None,
        domain_box: None,
    };
    let report = match args.method {
        MethodArg::Weiszfeld => {
            let weights = match &instance.potential {
                PotentialSpec {
                    kind: PotentialKind::WeightedEuclidean,
                    weights,
                    ..
                } => weights.as_deref(),
                _ => None,
            };
            echo.tol = Some(args.tol);
            echo.max_iter = Some(args.max_iter);
            weiszfeld(anchors, weights, args.tol, args.max_iter)?
        }
        MethodArg::Centroid => centroid(anchors)?,
        MethodArg::Grid => {
            let domain_box = instance.testing_plan.clone().unwrap_or_default().resolve_box(anchors)?;
            let spacing = args.spacing.unwrap_or(domain_box.diagonal() / 1000.0);
            let report = grid_search(&obj, &domain_box, spacing)?;
            echo.spacing = Some(spacing);
            echo.domain_box = Some(domain_box);
            report
        }
    };
    write_json(
        &args.output,
        &OracleOutput {
            report: &report,
            config_echo: echo,
        },
    )?;
    Ok(EXIT_OK)
}

fn gradcheck(args: &GradcheckArgs) -> anyhow::Result<i32> {
    let instance = InstanceFile::read(&args.input)?;
    let obj = instance.objective()?;
    let domain_box = instance
        .testing_plan
        .clone()
        .unwrap_or_default()
        .resolve_box(obj.anchors())?;
    let cfg = GradcheckConfig {
        samples: args.samples,
        h: args.h,
        seed: args.seed,
        domain_box: Some(domain_box),
    };
    let report = if args.corrupt_gradient {
        gradient_check_with(&obj, &cfg, |x| {
            let mut g = obj.gradient(x)?.into_vec();
            g[0] *= 1.01;
            Point::new(g)
        })?
    } else {
        gradient_check(&obj, &cfg)?
    };
    write_json(&args.report, &report)?;
    if report.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "error: gradient check failed: max relative error {:e} exceeds {:e}",
            report.max_rel_error, report.tolerance
        );
        Ok(EXIT_INPUT)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = to_json_pretty(value).context("serializing output")?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
