//! `ndual`: evaluate n-norms, semi-inner products and functional norms from
//! JSON files, and run the randomized property verifier.
//!
//! Exit status is 0 on success, 1 when a verified property fails and 2 on
//! usage or input errors.

mod input;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndual_core::functionals::{self, FunctionalNormEstimate};
use ndual_core::nnorms::{self, NNormConfig};
use ndual_core::ortho::left_g_orthogonalize;
use ndual_core::sip::{self, SipConfig, SipMethod};
use ndual_core::verify::{run_suite, Mutation, SuiteConfig, VerificationReport};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ndual", version, about = "n-norms and n-dual spaces on finite-dimensional l^p")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the l^p n-norm or the Gähler n-norm of a tuple.
    Nnorm(NnormArgs),
    /// Semi-inner product, one-sided derivatives and g-orthogonality of a pair.
    Sip(SipArgs),
    /// Left g-orthogonalize a tuple.
    Orth(TupleArgs),
    /// Estimate a norm of a multilinear functional or of its curried operator.
    Fnorm(FnormArgs),
    /// A priori bounds on the Gähler n-norm of a tuple.
    Bounds(TupleArgs),
    /// Run the randomized property suites and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct TupleArgs {
    /// JSON file holding the tuple.
    file: PathBuf,
    /// Exponent of the space; overrides the file.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
}

impl EstimatorArgs {
    fn config(&self) -> NNormConfig {
        NNormConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            seed: self.seed,
            ..NNormConfig::default()
        }
    }
}

#[derive(Args)]
struct NnormArgs {
    #[command(flatten)]
    tuple: TupleArgs,
    /// Estimate the Gähler n-norm instead of the l^p n-norm.
    #[arg(long)]
    gahler: bool,
    /// Print the full estimate as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Closed,
    Numeric,
}

#[derive(Args)]
struct SipArgs {
    #[command(flatten)]
    tuple: TupleArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Closed)]
    method: MethodArg,
    /// Relative tolerance of the orthogonality test.
    #[arg(long, default_value_t = 1e-10)]
    ortho_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    N1,
    Nn,
    Op,
    #[value(name = "opG", alias = "opg")]
    OpG,
}

#[derive(Args)]
struct FnormArgs {
    /// JSON file holding the tensor.
    file: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Exponent of the space; overrides the file.
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per cell for the vector properties.
    #[arg(long)]
    trials: Option<usize>,
    /// Trials per cell for the functional-norm properties.
    #[arg(long)]
    functional_trials: Option<usize>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    /// Tolerance overrides as `property=value,...`.
    #[arg(long, value_delimiter = ',')]
    tol: Vec<String>,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    parallel: bool,
    /// Restarts of the Gähler and functional estimators.
    #[arg(long)]
    restarts: Option<usize>,
    /// Run only these properties.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true)]
    mutate: Option<String>,
}

impl VerifyArgs {
    fn config(&self) -> Result<SuiteConfig> {
        let mut cfg = SuiteConfig::default().with_seed(self.seed);
        if let Some(t) = self.trials {
            cfg.trials_per_property = t;
        }
        if let Some(t) = self.functional_trials {
            cfg.functional_trials = t;
        }
        if let Some(p) = &self.p {
            cfg.exponents = p.clone();
        }
        if let Some(d) = &self.dims {
            cfg.dims = d.clone();
        }
        if let Some(o) = &self.orders {
            cfg.orders = o.clone();
        }
        if let Some(r) = self.restarts {
            cfg.estimator.restarts = r;
        }
        cfg.tolerances = parse_tolerances(&self.tol)?;
        cfg.parallel = self.parallel;
        cfg.only = self.only.clone();
        cfg.mutation = self.mutate.as_deref().map(Mutation::parse).transpose()?;
        Ok(cfg)
    }
}

fn parse_tolerances(items: &[String]) -> Result<BTreeMap<String, f64>> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("tolerance {item:?} is not of the form property=value"))?;
            let v: f64 = v.parse().with_context(|| format!("tolerance value in {item:?}"))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

fn print_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn nnorm(args: &NnormArgs) -> Result<()> {
    let xs = input::read_tuple(&args.tuple.file, args.tuple.p)?;
    if args.gahler {
        let est = nnorms::gahler_n_norm_estimate(&xs, &args.estimator.config())?;
        if args.json {
            print_json(&est)?;
        } else {
            println!("{}", est.value);
        }
    } else {
        let value = nnorms::lp_n_norm(&xs)?;
        if args.json {
            print_json(&json!({ "lp_n_norm": value }))?;
        } else {
            println!("{value}");
        }
    }
    Ok(())
}

fn sip(args: &SipArgs) -> Result<()> {
    let xs = input::read_tuple(&args.tuple.file, args.tuple.p)?;
    let [x, y] = xs.as_slice() else {
        bail!("sip expects exactly two vectors, found {}", xs.len());
    };
    let cfg = SipConfig {
        method: match args.method {
            MethodArg::Closed => SipMethod::ClosedForm,
            MethodArg::Numeric => SipMethod::Numeric,
        },
        ..SipConfig::default()
    };
    let tau = sip::tau(x, y, &cfg)?;
    print_json(&json!({
        "g": sip::g_with(x, y, &cfg)?,
        "g_reversed": sip::g_with(y, x, &cfg)?,
        "tau_minus": tau.tau_minus,
        "tau_plus": tau.tau_plus,
        "x_orthogonal_to_y": sip::is_g_orthogonal(x, y, args.ortho_tol),
        "y_orthogonal_to_x": sip::is_g_orthogonal(y, x, args.ortho_tol),
    }))
}

fn orth(args: &TupleArgs) -> Result<()> {
    let xs = input::read_tuple(&args.file, args.p)?;
    print_json(&left_g_orthogonalize(&xs)?)
}

fn bounds(args: &TupleArgs) -> Result<()> {
    let xs = input::read_tuple(&args.file, args.p)?;
    let (lower, upper) = nnorms::sandwich_bounds(&xs)?;
    print_json(&json!({ "lower": lower, "upper": upper }))
}

fn fnorm(args: &FnormArgs) -> Result<()> {
    let f = input::read_tensor(&args.file, args.p)?;
    let p = f.space().exponent();
    let cfg = args.estimator.config();
    let est: FunctionalNormEstimate = match args.mode {
        ModeArg::N1 => functionals::norm_n1(&f, p, &cfg)?,
        ModeArg::Nn => functionals::norm_nn(&f, p, &cfg)?,
        ModeArg::Op => functionals::op_norm(&functionals::curry(&f)?, p, &cfg)?,
        ModeArg::OpG => functionals::op_norm_g(&functionals::curry(&f)?, p, &cfg)?,
    };
    print_json(&est)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn summarize(report: &VerificationReport) {
    for p in &report.properties {
        let status = match (p.passed(), p.soft) {
            (true, _) => "PASS",
            (false, true) => "SOFT",
            (false, false) => "FAIL",
        };
        eprintln!(
            "{status} {:<34} {:>6}/{:<6} worst {:.3e} (tol {:.0e})",
            p.property_id, p.passes, p.trials, p.worst_violation, p.tolerance
        );
        if let Some(cx) = p.counterexample.as_ref().filter(|_| !p.passed()) {
            eprintln!("     first failure: trial {} at {:?}; rerun: {}", cx.trial, cx.cell, cx.rerun);
        }
    }
    eprintln!("{} ms", report.wall_time_ms);
}

fn verify(args: &VerifyArgs) -> Result<ExitCode> {
    let report = run_suite(&args.config()?)?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    match &args.out {
        Some(path) => write_atomically(path, &bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    summarize(&report);
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Nnorm(a) => nnorm(a)?,
        Command::Sip(a) => sip(a)?,
        Command::Orth(a) => orth(a)?,
        Command::Fnorm(a) => fnorm(a)?,
        Command::Bounds(a) => bounds(a)?,
        Command::Verify(a) => return verify(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
