//! `bondform` command-line front end.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 when the data or a
//! numerical routine fails.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bondform::acceptance;
use bondform::cashflow::{analytics, analytics_at_price, log_price_partials};
use bondform::data_io::{emit_dataset, load_schedule, load_series, series_to_csv};
use bondform::defaults::{diversification_experiment, verify_survival, IntensitySpec, RecoveryLaw};
use bondform::regression::{fit, select_lag, ModelKind, ModelSpec, RegressionResult};
use bondform::report;
use bondform::series::AssetClass;
use bondform::synthetic::{generate, MarketParams};
use bondform::Error;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "bondform", version, about = "Bond portfolio return models: pricing, regression, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price, yield, duration and convexity of a cashflow schedule
    Price(PriceArgs),
    /// Fit a return model to a monthly series and print the table
    Regress(RegressArgs),
    /// Generate a synthetic dataset
    Synth(SynthArgs),
    /// Monte Carlo checks of the default model
    Simulate(SimulateArgs),
    /// Run the acceptance suite
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct PriceArgs {
    /// Schedule CSV with header `time,amount` or `date,amount`
    #[arg(long = "in")]
    input: PathBuf,
    /// Valuation point: years for `time` schedules, YYYY-MM-DD for dated ones
    #[arg(long)]
    at: Option<String>,
    /// Continuously compounded yield
    #[arg(long = "yield", conflicts_with = "price", required_unless_present = "price")]
    yield_rate: Option<f64>,
    /// Market value to solve the yield from
    #[arg(long)]
    price: Option<f64>,
    /// Write the analytics as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegressArgs {
    /// Series CSV
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// Inclusive indexation-lag grid in months for infl2, e.g. 0..6
    #[arg(long, value_parser = parse_lag_grid)]
    lag_grid: Option<LagGrid>,
    /// Write the results table as CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write model residuals as tidy CSV
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// key = value parameter file; defaults apply to missing keys
    #[arg(long)]
    params: Option<PathBuf>,
    /// Overrides the seed in the parameter file
    #[arg(long, env = "BONDFORM_SEED")]
    seed: Option<u64>,
    /// Dataset CSV; printed to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("recovery").required(true).args(["rho", "rho_beta"]))]
struct SimulateArgs {
    /// Default intensity per year
    #[arg(long)]
    lambda: f64,
    /// Fixed recovery fraction
    #[arg(long)]
    rho: Option<f64>,
    /// Beta recovery parameters `a,b`
    #[arg(long, value_parser = parse_pair)]
    rho_beta: Option<(f64, f64)>,
    /// Horizon in years
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Issuer counts for the diversification experiment
    #[arg(long, value_delimiter = ',', default_value = "5,50,500")]
    issuers: Vec<usize>,
    #[arg(long, env = "BONDFORM_SEED")]
    seed: Option<u64>,
    /// Results CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run only these criteria
    #[arg(long, value_delimiter = ',')]
    criterion: Vec<u8>,
    /// Write the outcome lines to a file as well
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct LagGrid(Vec<usize>);

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
        .map_err(|_| format!("unknown model '{s}' (expected gov1, gov2, infl1, infl2, corp1 or corp2)"))
}

fn parse_lag_grid(s: &str) -> Result<LagGrid, String> {
    let bad = || format!("'{s}' is not a lag grid like 0..6");
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(LagGrid((a..=b).collect()))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let bad = || format!("'{s}' is not a pair like 2,2");
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Failure of a subcommand after argument parsing.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn write_file(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn price(args: PriceArgs) -> Outcome {
    let (epoch, t) = match args.at.as_deref() {
        None => (None, 0.0),
        Some(at) => match NaiveDate::parse_from_str(at, "%Y-%m-%d") {
            Ok(d) => (Some(d), 0.0),
            Err(_) => (
                None,
                at.parse::<f64>().map_err(|_| {
                    Failure::Usage(format!("--at '{at}' is neither a number of years nor a YYYY-MM-DD date"))
                })?,
            ),
        },
    };
    let schedule = load_schedule(&args.input, epoch)?;
    let a = match (args.yield_rate, args.price) {
        (Some(y), _) => analytics(&schedule, t, y)?,
        (None, Some(p)) => analytics_at_price(&schedule, t, p)?,
        (None, None) => unreachable!("clap requires one of --yield and --price"),
    };
    let p = log_price_partials(&schedule, t, a.yield_rate)?;
    println!("price      {:.10}", a.price);
    println!("yield      {:.10}", a.yield_rate);
    println!("duration   {:.10}", a.duration);
    println!("convexity  {:.10}", a.convexity);
    println!(
        "d lnP/dt {:.10}  d lnP/dY {:.10}  d2 lnP/dY2 {:.10}  d2 lnP/dtdY {:.1}",
        p.d_dt, p.d_dy, p.d2_dy2, p.d2_dt_dy
    );
    if let Some(out) = args.out {
        let csv = format!(
            "t,price,yield,duration,convexity\n{},{},{},{},{}\n",
            a.t, a.price, a.yield_rate, a.duration, a.convexity
        );
        write_file(&out, &csv)?;
    }
    Ok(())
}

fn class_of(kind: ModelKind) -> AssetClass {
    match kind {
        ModelKind::Gov1 | ModelKind::Gov2 => AssetClass::Government,
        ModelKind::Infl1 | ModelKind::Infl2 => AssetClass::InflationLinked,
        ModelKind::Corp1 | ModelKind::Corp2 => AssetClass::Corporate,
    }
}

fn regress(args: RegressArgs) -> Outcome {
    if args.lag_grid.is_some() && args.model != ModelKind::Infl2 {
        return Err(Failure::Usage("--lag-grid only applies to --model infl2".into()));
    }
    let series = load_series(&args.input, class_of(args.model))?;
    let mut results: Vec<RegressionResult> = Vec::new();
    if args.model.is_extended() {
        results.push(fit(&series, ModelSpec::new(args.model.baseline()))?);
    }
    let spec = if args.model == ModelKind::Infl2 {
        let grid = args.lag_grid.unwrap_or(LagGrid((0..=6).collect()));
        let sel = select_lag(&series, &grid.0)?;
        print!("{}", report::lag_table(&sel));
        println!();
        ModelSpec::inflation(sel.best_lag)
    } else {
        ModelSpec::new(args.model)
    };
    results.push(fit(&series, spec)?);
    print!("{}", report::text_table(&results));
    if let Some(out) = &args.out {
        write_file(out, &report::csv_table(&results))?;
    }
    if let Some(path) = &args.residuals {
        let mut csv = String::from("date,model,residual\n");
        for r in &results {
            let first = series.dates().len() - r.residuals.len();
            for (d, e) in series.dates()[first..].iter().zip(&r.residuals) {
                let _ = writeln!(csv, "{d},{},{e}", r.spec.kind);
            }
        }
        write_file(path, &csv)?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Outcome {
    let mut params = match &args.params {
        Some(p) => MarketParams::load(p)?,
        None => MarketParams::default(),
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    let series = generate(&params)?;
    match &args.out {
        Some(out) => {
            emit_dataset(&series, out)?;
            eprintln!(
                "wrote {} {} rows ({} to {}) to {}",
                series.len(),
                params.class,
                series.dates()[0],
                series.dates()[series.len() - 1],
                out.display()
            );
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(series_to_csv(&series).as_bytes())
                .map_err(|e| Failure::Data(format!("cannot write to stdout: {e}")))?;
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Outcome {
    let recovery = match (args.rho, args.rho_beta) {
        (Some(r), _) => RecoveryLaw::Fixed(r),
        (None, Some((a, b))) => RecoveryLaw::Beta { a, b },
        (None, None) => unreachable!("clap requires a recovery flag"),
    };
    if !(args.horizon > 0.0) {
        return Err(Failure::Usage(format!("--horizon {} must be positive", args.horizon)));
    }
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let spec = IntensitySpec::constant(args.lambda, recovery)?;
    let label = match recovery {
        RecoveryLaw::Fixed(r) => format!("lambda={} rho={r}", args.lambda),
        RecoveryLaw::Beta { a, b } => format!("lambda={} rho~beta({a},{b})", args.lambda),
    };

    let clock = Instant::now();
    let check = verify_survival(&spec, 0.0, args.horizon, args.paths, seed)?;
    let secs = clock.elapsed().as_secs_f64();
    let mut csv = String::from("spec_id,m_or_horizon,analytic,mc_mean,mc_stderr,z\n");
    let _ = writeln!(
        csv,
        "survival,{},{},{},{},{}",
        args.horizon, check.analytic, check.mc_mean, check.mc_stderr, check.z_score
    );
    println!("Conditional survival of outstanding payments ({label}, horizon {}y, {} paths, {secs:.2} s)", args.horizon, args.paths);
    println!("  analytic {:.6}  mc_mean {:.6}  mc_stderr {:.2e}  z {:+.2}", check.analytic, check.mc_mean, check.mc_stderr, check.z_score);

    if !args.issuers.is_empty() {
        let points = diversification_experiment(&spec, &args.issuers, 0.0, args.horizon, args.paths, seed)?;
        println!("Diversification: mean-square error vs conditional expectation");
        println!("  {:>8} {:>12} {:>12} {:>10} {:>7}", "issuers", "analytic", "mc_mse", "stderr", "z");
        for p in points {
            let analytic = spec.expected_diversification_mse(p.issuers, 0.0, args.horizon)?;
            let z = if p.mse_stderr > 0.0 { (p.mse - analytic) / p.mse_stderr } else { 0.0 };
            let _ = writeln!(csv, "diversification,{},{analytic},{},{},{z}", p.issuers, p.mse, p.mse_stderr);
            println!("  {:>8} {analytic:>12.4e} {:>12.4e} {:>10.2e} {z:>+7.2}", p.issuers, p.mse, p.mse_stderr);
        }
    }
    if let Some(out) = &args.out {
        write_file(out, &csv)?;
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Outcome {
    let ids: Vec<u8> = if args.criterion.is_empty() {
        acceptance::criterion_ids().collect()
    } else {
        args.criterion.clone()
    };
    let mut lines = String::new();
    let mut failed = 0;
    for id in ids {
        let outcome = acceptance::run_criterion(id)
            .ok_or_else(|| Failure::Usage(format!("no acceptance criterion {id}")))?;
        println!("{outcome}");
        let _ = writeln!(lines, "{outcome}");
        failed += usize::from(!outcome.passed);
    }
    if let Some(out) = &args.out {
        write_file(out, &lines)?;
    }
    if failed > 0 {
        return Err(Failure::Data(format!("{failed} criteria failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Price(a) => price(a),
        Command::Regress(a) => regress(a),
        Command::Synth(a) => synth(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
