use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use privtrade::baselines::{gradient_descent, simulated_annealing, AnnealParams, PenaltyParams};
use privtrade::covmodel::{estimate_from_samples, read_samples_csv, sample_dataset, write_samples_csv, Block, SampleLayout};
use privtrade::fisher::fisher_scalar;
use privtrade::gauss_info::info_point;
use privtrade::greedy::{greedy_optimize, verify_result};
use privtrade::harness::{default_delta_grid, fisher_budget, run_sweep, write_curve_csv, Algorithm, SweepSpec};
use privtrade::trace::{format_sig, write_trace_csv};
use privtrade::{datasets, Config, Error, Model, Noise, UtilityMetric};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CAPABILITY: u8 = 4;

#[derive(Parser)]
#[command(name = "privtrade", version, about = "Privacy-utility tradeoffs for Gaussian data released with additive noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print leakage, utility and Fisher information for one noise allocation.
    Evaluate {
        #[command(flatten)]
        source: ModelSource,
        /// Noise variances, comma separated; defaults to no noise.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
    },
    /// Run one optimizer and print the resulting allocation.
    Optimize {
        #[command(flatten)]
        source: ModelSource,
        /// Utility-loss budget in nats (mapped to a Fisher threshold with --metric fisher).
        #[arg(long)]
        delta: f64,
        /// Minimum end privacy gain per unit of end utility loss.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Greedy)]
        algorithm: AlgorithmArg,
        /// Seed for simulated annealing.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        sa_iters: usize,
        /// Write the step trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate a grid of budgets, ratios and saturation thresholds; write curve CSV.
    Sweep {
        #[command(flatten)]
        source: ModelSource,
        /// Explicit budgets in nats; defaults to an even grid up to 1.1 I(Xu;X).
        #[arg(long = "delta", value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        /// Size of the default budget grid.
        #[arg(long, default_value_t = 25)]
        delta_points: usize,
        #[arg(long = "gamma", value_delimiter = ',', default_value = "0")]
        gammas: Vec<f64>,
        #[arg(long = "eps0", value_delimiter = ',', default_value = "1e-6")]
        eps0s: Vec<f64>,
        #[arg(long = "algorithm", value_enum, value_delimiter = ',', default_value = "greedy")]
        algorithms: Vec<AlgorithmArg>,
        #[arg(long, value_enum, default_value_t = MetricArg::Mi)]
        metric: MetricArg,
        #[arg(long = "seed", value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        dtheta0: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        sa_iters: usize,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Record wall-clock seconds per cell (output is then not reproducible byte for byte).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a bundled model document, or list the bundled names.
    Datasets {
        name: Option<String>,
        /// Emit the second dataset with its original, non-positive-definite utility variance.
        #[arg(long)]
        as_printed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw Gaussian samples of [X; Xp] or [X; Xu].
    Sample {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, value_parser = parse_block)]
        block: Block,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a model document from sample CSVs of [X; Xp] and [X; Xu].
    Estimate {
        #[arg(long)]
        x_xp: PathBuf,
        #[arg(long)]
        x_xu: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Model document (TOML).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Bundled model name.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args)]
struct Tuning {
    #[arg(long)]
    dtheta0: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long, value_enum, default_value_t = MetricArg::Mi)]
    metric: MetricArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Greedy,
    Gd,
    Sa,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Greedy => Algorithm::Greedy,
            AlgorithmArg::Gd => Algorithm::GradientDescent,
            AlgorithmArg::Sa => Algorithm::SimulatedAnnealing,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Mi,
    Fisher,
}

impl From<MetricArg> for UtilityMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mi => UtilityMetric::MutualInformation,
            MetricArg::Fisher => UtilityMetric::Fisher,
        }
    }
}

fn parse_block(s: &str) -> Result<Block, String> {
    Block::parse(s).ok_or_else(|| format!("unknown block {s:?} (x_xp or x_xu)"))
}

/// A failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) => EXIT_USAGE,
            Error::Shape(_) | Error::Parse(_) | Error::InvalidModel(_) | Error::Estimation(_) | Error::Io(_) => {
                EXIT_VALIDATION
            }
            Error::NotPositiveDefinite { .. } | Error::NumericalConsistency { .. } => EXIT_NUMERICAL,
            Error::Capability(_) => EXIT_CAPABILITY,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Evaluate { source, theta } => evaluate(&load(&source)?, theta),
        Command::Optimize { source, delta, gamma, tuning, algorithm, seed, sa_iters, trace } => {
            optimize(&load(&source)?, delta, gamma, &tuning, algorithm.into(), seed, sa_iters, trace.as_deref())
        }
        Command::Sweep {
            source,
            deltas,
            delta_points,
            gammas,
            eps0s,
            algorithms,
            metric,
            seeds,
            dtheta0,
            eps,
            sa_iters,
            jobs,
            timing,
            out,
        } => {
            let model = load(&source)?;
            let mut spec = SweepSpec::new(match deltas {
                Some(d) => d,
                None => default_delta_grid(&model, delta_points)?,
            });
            spec.gamma_grid = gammas;
            spec.eps0_grid = eps0s;
            spec.algorithms = algorithms.into_iter().map(Algorithm::from).collect();
            spec.utility_metric = metric.into();
            spec.seeds = seeds;
            spec.dtheta0 = dtheta0;
            spec.eps = eps;
            spec.sa_iters = sa_iters;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            let rows = run_sweep(&model, &spec, jobs)?;
            let mut w = output(out.as_deref())?;
            write_curve_csv(&mut w, &rows, timing)?;
            w.flush()?;
            let errors = rows.iter().filter(|r| r.termination == "error").count();
            if errors > 0 {
                eprintln!("warning: {errors} of {} cells failed", rows.len());
            }
            Ok(())
        }
        Command::Datasets { name, as_printed, out } => {
            let Some(name) = name else {
                for n in datasets::NAMES {
                    println!("{n}");
                }
                return Ok(());
            };
            let model = match (name.as_str(), as_printed) {
                ("dataset2", true) => datasets::dataset2_as_printed(),
                (_, true) => return Err(Failure::usage("--as-printed applies to dataset2 only")),
                _ => datasets::by_name(&name)?,
            };
            let mut w = output(out.as_deref())?;
            w.write_all(model.emit().as_bytes())?;
            w.flush()?;
            Ok(())
        }
        Command::Sample { source, block, count, seed, out } => {
            let model = load(&source)?;
            let samples = sample_dataset(&model, count, seed, block)?;
            let mut w = output(out.as_deref())?;
            write_samples_csv(&mut w, &model.sample_headers(block), &samples)?;
            w.flush()?;
            Ok(())
        }
        Command::Estimate { x_xp, x_xu, out } => {
            let (hp, sp) = read_samples_csv::<f64, _>(File::open(&x_xp)?)?;
            let (hu, su) = read_samples_csv::<f64, _>(File::open(&x_xu)?)?;
            let layout = infer_layout(&hp, &hu)?;
            let model = estimate_from_samples(&sp, &su, layout)?;
            let mut w = output(out.as_deref())?;
            w.write_all(model.emit().as_bytes())?;
            w.flush()?;
            Ok(())
        }
    }
}

fn load(source: &ModelSource) -> Result<Model, Failure> {
    match (&source.model, &source.dataset) {
        (Some(path), _) => Model::load_path(path).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("{}: {}", path.display(), f.message);
            f
        }),
        (None, Some(name)) => Ok(datasets::by_name(name)?),
        (None, None) => Err(Failure::usage("either --model or --dataset is required")),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Counts columns named `<prefix><digits>`.
fn count_prefixed(headers: &[String], prefix: &str) -> usize {
    headers
        .iter()
        .filter(|h| h.strip_prefix(prefix).is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())))
        .count()
}

fn infer_layout(h_xp: &[String], h_xu: &[String]) -> Result<SampleLayout, Failure> {
    let n = count_prefixed(h_xp, "x");
    let n_p = count_prefixed(h_xp, "xp");
    let n_u = count_prefixed(h_xu, "xu");
    let invalid = |what: &str| Failure { code: EXIT_VALIDATION, message: format!("sample headers: {what}") };
    if n == 0 || n_p == 0 || n_u == 0 {
        return Err(invalid("need x1.. plus xp1.. in one file and x1.. plus xu1.. in the other"));
    }
    if count_prefixed(h_xu, "x") != n || h_xp[..n] != h_xu[..n] {
        return Err(invalid("the x columns of the two files differ"));
    }
    if n + n_p != h_xp.len() || n + n_u != h_xu.len() {
        return Err(invalid("unexpected extra columns"));
    }
    Ok(SampleLayout { n, n_p, n_u })
}

fn print_nats(name: &str, nats: f64) {
    println!("{name:<17} {} nats  {} bits", format_sig(nats), format_sig(nats / std::f64::consts::LN_2));
}

fn evaluate(model: &Model, theta: Option<Vec<f64>>) -> CmdResult {
    let theta = theta.unwrap_or_else(|| vec![0.0; model.n()]);
    if theta.len() != model.n() {
        return Err(Failure::usage(format!("--theta has {} entries, the model has {} features", theta.len(), model.n())));
    }
    let theta = Noise::new(theta).map_err(|e| Failure::usage(e.to_string()))?;
    let p = info_point(model, &theta)?;
    print_nats("i_xp_y", p.i_xp_y);
    print_nats("i_xu_y", p.i_xu_y);
    print_nats("utility_loss", p.utility_loss);
    if model.n_u() == 1 {
        println!("{:<17} {}", "fisher", format_sig(fisher_scalar(model, &theta)?));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    model: &Model,
    delta: f64,
    gamma: f64,
    tuning: &Tuning,
    algorithm: Algorithm,
    seed: u64,
    sa_iters: usize,
    trace_path: Option<&Path>,
) -> CmdResult {
    let metric = UtilityMetric::from(tuning.metric);
    if delta.is_nan() || delta < 0.0 {
        return Err(Failure::usage("--delta must be >= 0"));
    }
    let budget = match metric {
        UtilityMetric::MutualInformation => delta,
        UtilityMetric::Fisher => fisher_budget(model, delta)?,
    };
    let mut cfg = Config::for_model(model, budget, gamma).with_metric(metric);
    if let Some(d) = tuning.dtheta0 {
        cfg.dtheta0 = d;
        cfg.eps = 1e-6 * d;
    }
    if let Some(e) = tuning.eps {
        cfg.eps = e;
    }
    if let Some(e) = tuning.eps0 {
        cfg.eps0 = e;
    }
    let result = match algorithm {
        Algorithm::Greedy => greedy_optimize(model, &cfg).map_err(Error::from)?,
        Algorithm::GradientDescent => gradient_descent(model, &cfg, &PenaltyParams::for_model(model))?,
        Algorithm::SimulatedAnnealing => {
            simulated_annealing(model, &cfg, &AnnealParams::for_model(model, sa_iters, seed)?)?
        }
    };

    println!("{:<17} {algorithm}", "algorithm");
    println!("{:<17} {metric}", "utility_metric");
    if metric == UtilityMetric::Fisher {
        println!("{:<17} {}", "fisher_threshold", format_sig(budget));
    }
    println!("{:<17} {}", "termination", result.termination);
    println!("{:<17} {}", "iterations", result.iterations);
    let theta: Vec<String> = result.theta.as_slice().iter().map(|&v| format_sig(v)).collect();
    println!("{:<17} {}", "theta", theta.join(","));
    print_nats("i_xp_y", result.point.i_xp_y);
    print_nats("i_xu_y", result.point.i_xu_y);
    print_nats("utility_loss", result.point.utility_loss);
    if let Some(f) = result.fisher {
        println!("{:<17} {}", "fisher", format_sig(f));
    }
    println!("{:<17} {}", "cumulative_ratio", format_sig(result.cumulative_ratio));
    print!("constraints\n{}", verify_result(model, &cfg, &result));

    if let Some(path) = trace_path {
        let mut w = BufWriter::new(File::create(path)?);
        write_trace_csv(&mut w, algorithm.as_str(), &result.trace)?;
        w.flush()?;
    }
    Ok(())
}
