//! Command-line driver: training, prediction, verification suites,
//! consistency curves and schedule condition reports.
//!
//! Exit codes: 0 on success, 1 when an invoked check fails, 2 on usage,
//! configuration or input errors.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use parnet_core::estimator::{predict_many, validate_theorem_conditions, ConditionReport, ConditionStatus, TrainOptions};
use parnet_core::experiments::{consistency_curve, derive_seed, generate_dataset, SeedPurpose};
use parnet_core::io::{parse_dataset_csv, parse_points_csv, weights_from_json, weights_to_json};
use parnet_core::report::{curve_csv, curve_json};
use parnet_core::suites::{self, CheckSettings, SuiteReport};
use parnet_core::{schedule, train, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{env_seed, load_config, Config, ConfigError, FALLBACK_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "parnet", version, about = "Parallel logistic network regression with executable checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on a generated sample of size n (or a CSV file) and write the weights as JSON.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Sample size; defaults to the first entry of experiment.sample_sizes.
        #[arg(long)]
        n: Option<usize>,
        /// Observations `x_1,...,x_d,y` per line instead of generated data.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Weight file to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-step CSV of risk, gradient norm and drift.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate the truncated estimate at points read from a CSV file.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Sample size the weights were trained with; sets the cube and truncation level.
        #[arg(long)]
        n: usize,
        /// One point per line, `d` comma-separated coordinates.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; printed to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized verification suite.
    Verify {
        suite: Suite,
        #[arg(long)]
        seed: Option<u64>,
        /// Suite size: instances for grad, ridge problems for lemma8, training
        /// runs for lemma1, perturbations for lemma5, Monte-Carlo points for
        /// lemma7, networks for covering. Ignored by lemma6.
        #[arg(long)]
        instances: Option<usize>,
        /// Config file whose `checks` block supplies tolerances and constants.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median L2 error over replicates for every sample size.
    Consistency {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print which convergence conditions the schedule satisfies; never fails on violations.
    Conditions {
        #[arg(long)]
        config: PathBuf,
        /// Sample size; defaults to every entry of experiment.sample_sizes.
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lemma1,
    Lemma5,
    Lemma6,
    Lemma7,
    Lemma8,
    Grad,
    Covering,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::RunFailed { .. } => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn default_seed(explicit: Option<u64>) -> Result<u64, Failure> {
    match explicit {
        Some(s) => Ok(s),
        None => Ok(env_seed()?.unwrap_or(FALLBACK_SEED)),
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code. Output goes to `out`, diagnostics to `err`.
pub fn run_with_output(argv: &[String], out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let mut text = String::new();
    let result = dispatch(cli.command, &mut text);
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Check(m)) => {
            let _ = writeln!(err, "check failed: {m}");
            EXIT_CHECK_FAILED
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
    }
}

/// [`run_with_output`] on the process's standard streams.
pub fn run_command(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_output(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(command: Command, out: &mut String) -> Result<(), Failure> {
    match command {
        Command::Train {
            config,
            n,
            data,
            seed,
            out: path,
            trace,
        } => cmd_train(&load_config(&config)?, n, data.as_deref(), seed, &path, trace.as_deref(), out),
        Command::Predict {
            config,
            weights,
            n,
            input,
            out: path,
        } => cmd_predict(&load_config(&config)?, &weights, n, &input, path.as_deref(), out),
        Command::Verify {
            suite,
            seed,
            instances,
            config,
            out: path,
        } => {
            let checks = match config {
                Some(p) => load_config(&p)?.checks,
                None => CheckSettings::default(),
            };
            cmd_verify(suite, default_seed(seed)?, instances, &checks, path.as_deref(), out)
        }
        Command::Consistency {
            config,
            seed,
            out: path,
            format,
        } => cmd_consistency(&load_config(&config)?, seed, path.as_deref(), format, out),
        Command::Conditions { config, n } => cmd_conditions(&load_config(&config)?, n, out),
    }
}

fn cmd_train(
    cfg: &Config,
    n: Option<usize>,
    data_path: Option<&Path>,
    seed: Option<u64>,
    weights_path: &Path,
    trace_path: Option<&Path>,
    out: &mut String,
) -> Result<(), Failure> {
    let seed = cfg.seed(seed)?;
    let data = match data_path {
        Some(p) => parse_dataset_csv(&read(p)?, cfg.topology.dim())?,
        None => {
            let n = n.unwrap_or(cfg.experiment.sample_sizes[0]);
            if n < 2 {
                return Err(Failure::Usage(format!("--n must be >= 2, got {n}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n, 0, SeedPurpose::Data));
            generate_dataset(&cfg.data, n, &mut rng)?
        }
    };
    if data.len() < 2 {
        return Err(Failure::Usage("need at least two observations".into()));
    }
    let n = data.len();
    let hp = schedule(n as f64, &cfg.constants, &cfg.topology)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n, 0, SeedPurpose::Init));
    let outcome = train(&data, &cfg.topology, &hp, &mut rng, TrainOptions::default())?;
    write(weights_path, &weights_to_json(&outcome.weights))?;
    if let Some(p) = trace_path {
        let t = &outcome.trace;
        let mut csv = String::from("step,risk,grad_norm,drift\n");
        for i in 0..t.len() {
            let _ = writeln!(csv, "{i},{:e},{:e},{:e}", t.risks[i], t.grad_norms[i], t.drifts[i]);
        }
        write(p, &csv)?;
    }
    let risks = &outcome.trace.risks;
    let _ = writeln!(out, "trained on n = {n} observations, seed {seed}");
    let _ = writeln!(
        out,
        "steps {} with L_n = {} ({:?} mode); risk {:.6e} -> {:.6e}",
        hp.steps,
        hp.inverse_step,
        hp.mode,
        risks[0],
        risks[risks.len() - 1]
    );
    let _ = writeln!(out, "weights written to {}", weights_path.display());
    render_conditions(&validate_theorem_conditions(&cfg.topology, &hp), out);
    Ok(())
}

fn cmd_predict(
    cfg: &Config,
    weights_path: &Path,
    n: usize,
    input: &Path,
    out_path: Option<&Path>,
    out: &mut String,
) -> Result<(), Failure> {
    let w = weights_from_json(&read(weights_path)?)?;
    if w.topology() != &cfg.topology {
        return Err(Failure::Usage("weight file topology differs from the config topology".into()));
    }
    let d = cfg.topology.dim();
    let hp = schedule(n as f64, &cfg.constants, &cfg.topology)?;
    let points = parse_points_csv(&read(input)?, d)?;
    let values = predict_many(&w, &hp, &points)?;
    let mut csv = String::new();
    for j in 1..=d {
        let _ = write!(csv, "x{j},");
    }
    csv.push_str("prediction\n");
    for (x, v) in points.chunks_exact(d).zip(&values) {
        for c in x {
            let _ = write!(csv, "{c},");
        }
        let _ = writeln!(csv, "{v:e}");
    }
    match out_path {
        Some(p) => {
            write(p, &csv)?;
            let _ = writeln!(out, "{} predictions written to {}", values.len(), p.display());
        }
        None => out.push_str(&csv),
    }
    Ok(())
}

fn cmd_verify(
    suite: Suite,
    seed: u64,
    instances: Option<usize>,
    checks: &CheckSettings,
    out_path: Option<&Path>,
    out: &mut String,
) -> Result<(), Failure> {
    let reports: Vec<SuiteReport> = match suite {
        Suite::Grad => vec![suites::gradient_suite(instances.unwrap_or(100), seed, checks)?],
        Suite::Lemma8 => {
            let count = instances.unwrap_or(1000);
            vec![
                suites::pl_suite(count, seed, checks)?,
                suites::decay_suite(count.div_ceil(10), 200, seed, checks)?,
            ]
        }
        Suite::Lemma1 => vec![suites::descent_suite(instances.unwrap_or(6), 20, seed, checks)?],
        Suite::Lemma5 => vec![suites::indicator_suite(instances.unwrap_or(50), seed, checks)?],
        Suite::Lemma6 => vec![suites::grid_suite(seed, checks)?],
        Suite::Lemma7 => vec![suites::shifted_grid_suite(instances.unwrap_or(100_000), seed, checks)?],
        Suite::Covering => vec![suites::covering_suite(instances.unwrap_or(100), seed, checks)?],
    };
    for r in &reports {
        out.push_str(&r.render());
    }
    if let Some(p) = out_path {
        let json = serde_json::to_string_pretty(&reports).map_err(|e| Failure::Usage(e.to_string()))?;
        write(p, &json)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("suite(s) {} failed", failed.join(", "))))
    }
}

fn cmd_consistency(
    cfg: &Config,
    seed: Option<u64>,
    out_path: Option<&Path>,
    format: Format,
    out: &mut String,
) -> Result<(), Failure> {
    let seed = cfg.seed(seed)?;
    let result = consistency_curve(&cfg.curve_config(seed))?;
    let _ = writeln!(out, "master seed {seed}");
    let _ = writeln!(out, "{:>8} {:>14} {:>14} {:>14} {:>14}", "n", "median_l2", "q25", "q75", "final_risk");
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{:>8} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.n, r.median_l2, r.q25, r.q75, r.mean_final_risk
        );
    }
    for report in &result.conditions {
        render_conditions(report, out);
    }
    let inversions = result.inversions();
    let _ = writeln!(out, "median error inversions across consecutive n: {inversions}");
    if let Some(p) = out_path {
        let text = match format {
            Format::Csv => curve_csv(&result.rows),
            Format::Json => curve_json(&result.rows)?,
        };
        write(p, &text)?;
    }
    if inversions > 1 {
        return Err(Failure::Check(format!(
            "median error increased {inversions} times; at most one inversion is allowed"
        )));
    }
    Ok(())
}

fn cmd_conditions(cfg: &Config, n: Option<usize>, out: &mut String) -> Result<(), Failure> {
    let sizes = match n {
        Some(n) => vec![n],
        None => cfg.experiment.sample_sizes.clone(),
    };
    for n in sizes {
        let hp = schedule(n as f64, &cfg.constants, &cfg.topology)?;
        render_conditions(&validate_theorem_conditions(&cfg.topology, &hp), out);
    }
    Ok(())
}

fn render_conditions(report: &ConditionReport, out: &mut String) {
    let violated = report.violated().count();
    let _ = writeln!(out, "conditions at n = {}: {violated} violated", report.n);
    for c in &report.conditions {
        let status = match c.status {
            ConditionStatus::Satisfied => "ok",
            ConditionStatus::Violated => "VIOLATED",
            ConditionStatus::NotEvaluated => "n/a",
        };
        let _ = writeln!(
            out,
            "  {:<9} {}: {} (lhs {:.4e}, rhs {:.4e})",
            status, c.name, c.statement, c.lhs, c.rhs
        );
    }
}
