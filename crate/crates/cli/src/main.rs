//! `orey`: simulate self-similar Gaussian trajectories, estimate the Orey
//! index from a sampled path, compute exact coefficient aggregates and the
//! limiting covariance, verify the CLT hypotheses numerically, and run
//! seeded Monte Carlo validations.
//!
//! Every run that writes an output file also writes a reproducibility
//! manifest (`<out>.manifest.json`) carrying the tool version, the full flag
//! set, and SHA-256 digests of the outputs; rerunning with the same flags
//! reproduces the digests bit-exactly.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or verification failure.

mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use orey_core::conditions::{self, CheckKind};
use orey_core::estimator;
use orey_core::montecarlo::{McConfig, McStatistic};
use orey_core::pathgen::{self, Generator};
use orey_core::quadvar::NormalizationMode;
use orey_core::{asymptotics, CovarianceModel, Error, Verdict};

#[derive(Parser)]
#[command(
    name = "orey",
    version,
    about = "Second-order quadratic variation toolkit for self-similar Gaussian processes"
)]
struct Cli {
    /// Worker threads for parallel sections (fallback: OREY_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory on the uniform grid and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the Orey index from a CSV path.
    Estimate(EstimateArgs),
    /// Exact coefficient aggregates (optionally full matrices) at (n, 2n).
    Coeffs(CoeffsArgs),
    /// Limiting covariance Sigma and estimator variance at a given gamma.
    Sigma(SigmaArgs),
    /// Numerical verification of the CLT hypotheses for a model.
    Verify(VerifyArgs),
    /// Seeded Monte Carlo validation of the bivariate or estimator CLT.
    Mc(McArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Model spec: fbm:gamma=0.7 | sfbm:H=0.7 | bifbm:H=0.6,K=0.5
    #[arg(long)]
    model: String,
    /// Grid count: the path has n + 1 points.
    #[arg(long)]
    n: usize,
    /// Seed (required; there is no wall-clock seeding).
    #[arg(long)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    /// Horizon T.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Generator: auto | cholesky | circulant | reflection
    #[arg(long, default_value = "auto")]
    generator: String,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    /// Input CSV path (header k,t,x).
    #[arg(long = "in")]
    input: PathBuf,
    /// Confidence level for the plug-in interval, e.g. 0.95.
    #[arg(long)]
    ci: Option<f64>,
    /// Output JSON file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CoeffsArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    /// Normalization: exact | orey
    #[arg(long, default_value = "orey")]
    mode: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit the full d and c matrices.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
}

#[derive(Args, Serialize)]
struct SigmaArgs {
    #[arg(long)]
    gamma: f64,
    /// Certified truncation tolerance.
    #[arg(long, default_value_t = asymptotics::DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    model: String,
    /// Comma-separated checks: rowsum,scov,gap,bias,begyn
    #[arg(long, default_value = "rowsum,scov,gap,bias,begyn")]
    checks: String,
    /// Largest n of the dyadic grid 32, 64, ..., nmax.
    #[arg(long, default_value_t = 1024)]
    nmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
}

#[derive(Args, Serialize)]
struct McArgs {
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Statistic: bivariate_v | gamma_hat
    #[arg(long, default_value = "gamma_hat")]
    stat: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Persist per-replication samples as CSV.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("OREY_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(threads) = threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("orey: could not configure {threads} worker threads: {err}");
            return ExitCode::from(1);
        }
    }

    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("orey: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// 1 for malformed inputs, 2 for numerical failures.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::Format { .. } | Error::MissingMetadata(_) | Error::Io(_) => 1,
        Error::NumericalConsistency(_)
        | Error::Factorization { .. }
        | Error::Embedding { .. }
        | Error::DegenerateInput(_)
        | Error::Truncation { .. }
        | Error::CiRefused { .. } => 2,
    }
}

fn parse_model(spec: &str, horizon: f64) -> orey_core::Result<CovarianceModel> {
    CovarianceModel::parse_spec(spec)?.with_horizon(horizon)
}

fn parse_mode(mode: &str) -> orey_core::Result<NormalizationMode> {
    match mode {
        "exact" => Ok(NormalizationMode::ExactVariance),
        "orey" => Ok(NormalizationMode::Orey),
        other => Err(Error::Domain(format!(
            "unknown normalization mode `{other}` (expected exact or orey)"
        ))),
    }
}

fn run(command: Command) -> orey_core::Result<ExitCode> {
    match command {
        Command::Simulate(args) => {
            let model = parse_model(&args.model, args.horizon)?;
            let path = match args.generator.as_str() {
                "auto" => pathgen::simulate(&model, args.n, args.seed)?,
                "cholesky" => {
                    pathgen::simulate_with(&model, args.n, args.seed, Generator::Cholesky)?
                }
                "circulant" => {
                    pathgen::simulate_with(&model, args.n, args.seed, Generator::CirculantFbm)?
                }
                "reflection" => {
                    pathgen::simulate_with(&model, args.n, args.seed, Generator::SfbmReflection)?
                }
                other => return Err(Error::Domain(format!(
                    "unknown generator `{other}` (expected auto, cholesky, circulant, reflection)"
                ))),
            };
            pathgen::export_path_file(&path, &args.out)?;
            manifest::write(
                "simulate",
                &args,
                Some(&args.model),
                Some(args.seed),
                std::slice::from_ref(&args.out),
                &args.out,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate(args) => {
            let path = pathgen::import_path_file(&args.input)?;
            let mut result = estimator::gamma_hat(&path)?;
            if let Some(level) = args.ci {
                match estimator::with_confidence(&mut result, level) {
                    Ok(()) => {}
                    Err(Error::CiRefused { gamma_hat }) => {
                        eprintln!(
                            "orey: warning: gamma_hat = {gamma_hat} outside (0.01, 0.99); confidence interval omitted"
                        );
                    }
                    Err(err) => return Err(err),
                }
            }
            output::emit(&result, args.out.as_deref())?;
            if let Some(out) = &args.out {
                manifest::write("estimate", &args, None, None, std::slice::from_ref(out), out)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Coeffs(args) => {
            let model = parse_model(&args.model, args.horizon)?;
            let mode = parse_mode(&args.mode)?;
            let report = output::coeffs_report(&model, &args.model, args.n, mode, args.full)?;
            output::emit(&report, args.out.as_deref())?;
            if let Some(out) = &args.out {
                manifest::write(
                    "coeffs",
                    &args,
                    Some(&args.model),
                    None,
                    std::slice::from_ref(out),
                    out,
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sigma(args) => {
            let sigma = asymptotics::sigma_matrix(args.gamma, args.tol)?;
            let report = output::SigmaReport::from(sigma);
            output::emit(&report, args.out.as_deref())?;
            if let Some(out) = &args.out {
                manifest::write("sigma", &args, None, None, std::slice::from_ref(out), out)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let model = parse_model(&args.model, args.horizon)?;
            let checks: Vec<CheckKind> = args
                .checks
                .split(',')
                .map(|c| CheckKind::parse(c.trim()))
                .collect::<orey_core::Result<_>>()?;
            if args.nmax < 32 {
                return Err(Error::Domain(format!(
                    "nmax = {} must be at least 32",
                    args.nmax
                )));
            }
            let n_grid: Vec<usize> = (5..)
                .map(|k| 1usize << k)
                .take_while(|&n| n <= args.nmax)
                .collect();
            let report = conditions::run_checks(&model, &n_grid, &checks)?;
            let overall = report.overall();
            output::emit(&output::VerifyReport::new(report), args.out.as_deref())?;
            if let Some(out) = &args.out {
                manifest::write(
                    "verify",
                    &args,
                    Some(&args.model),
                    None,
                    std::slice::from_ref(out),
                    out,
                )?;
            }
            Ok(if overall == Verdict::Fail {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Mc(args) => {
            let model = parse_model(&args.model, args.horizon)?;
            let statistic = match args.stat.as_str() {
                "bivariate_v" => McStatistic::BivariateV,
                "gamma_hat" => McStatistic::GammaHat,
                other => {
                    return Err(Error::Domain(format!(
                        "unknown statistic `{other}` (expected bivariate_v or gamma_hat)"
                    )))
                }
            };
            let mut cfg = McConfig::new(model, args.n, args.reps, args.seed, statistic);
            cfg.keep_samples = args.samples.is_some();
            let mut report = orey_core::montecarlo::run(&cfg)?;
            let samples = report.samples.take();
            output::emit(&report, args.out.as_deref())?;
            let mut outputs = Vec::new();
            if let Some(out) = &args.out {
                outputs.push(out.clone());
            }
            if let (Some(samples_path), Some(samples)) = (&args.samples, samples) {
                output::write_samples_csv(samples_path, statistic, &samples)?;
                outputs.push(samples_path.clone());
            }
            if let Some(out) = &args.out {
                manifest::write(
                    "mc",
                    &args,
                    Some(&args.model),
                    Some(args.seed),
                    &outputs,
                    out,
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
