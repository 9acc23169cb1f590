use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hnbr::io::{self, Artifact, ColumnRef, CsvSchema};
use hnbr::model::Coefficients;
use hnbr::simulate::{self, Scenario, SimulationConfig};
use hnbr::solver::{self, PenaltyConfig};
use hnbr::theory;
use hnbr::tuning;
use hnbr::Error;

const EXIT_DATA: u8 = 3;
const EXIT_NONCONVERGED: u8 = 4;
const EXIT_BUDGET: u8 = 5;

#[derive(Parser)]
#[command(
    name = "hnbr",
    about = "Negative binomial regression with covariate-dependent dispersion and double L1 penalties",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a CSV dataset and write a JSON artifact.
    Fit(FitArgs),
    /// Run a Monte Carlo benchmark scenario.
    Simulate(SimArgs),
    /// Evaluate and verify the theoretical bound constants.
    Theory(TheoryArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV path.
    #[arg(long)]
    data: String,
    /// Response column (header name, or 0-based index with --no-header).
    #[arg(long)]
    response: String,
    /// Treat the file as headerless; columns are referenced by index.
    #[arg(long)]
    no_header: bool,
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// Tune (lambda1, lambda2) over the default BIC grid instead.
    #[arg(long, conflicts_with_all = ["lambda1", "lambda2"])]
    auto_grid: bool,
    /// Fit the constant-dispersion baseline instead of the full model.
    #[arg(long, conflicts_with = "auto_grid")]
    constant_dispersion: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Multi-start seed; also makes the artifact byte-reproducible
    /// (no timestamp is recorded).
    #[arg(long)]
    seed: Option<u64>,
    /// Output artifact path.
    #[arg(long)]
    out: Option<String>,
    /// Add unpenalized intercepts to both blocks.
    #[arg(long)]
    intercept: bool,
    /// Standardize columns before solving.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<String>,
    /// Grid points per block for the BIC search (scenario example2).
    #[arg(long, default_value_t = 20)]
    grid_points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Example1,
    Example2,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    check: CheckArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    p: usize,
    /// Monte Carlo theta-pairs for the Lipschitz check, reps for oracle-rate.
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Concentration,
    Lipschitz,
    Re,
    Isometry,
    Kl,
    Maxresp,
    OracleRate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Theory(a) => cmd_theory(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::BudgetExceeded(_) => EXIT_BUDGET,
                Error::Numeric(_) => EXIT_NONCONVERGED,
                _ => EXIT_DATA,
            })
        }
    }
}

fn init_threads(threads: usize) -> hnbr::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn print_coefficients(names: Option<&[String]>, theta: &Coefficients) {
    println!("{:<16} {:>14} {:>14}", "feature", "mean", "dispersion");
    for j in 0..theta.p() {
        let name = names
            .and_then(|n| n.get(j).cloned())
            .unwrap_or_else(|| format!("x{j}"));
        println!(
            "{:<16} {:>14.6} {:>14.6}",
            name, theta.theta1[j], theta.theta2[j]
        );
    }
}

fn cmd_fit(a: FitArgs) -> hnbr::Result<ExitCode> {
    init_threads(a.threads)?;
    let response = if a.no_header {
        let idx: usize = a
            .response
            .parse()
            .map_err(|_| Error::invalid("--no-header needs a numeric --response index"))?;
        ColumnRef::Index(idx)
    } else {
        ColumnRef::Name(a.response.clone())
    };
    let schema = CsvSchema {
        response,
        features: None,
        has_header: !a.no_header,
        delimiter: b',',
    };
    let ds = io::read_csv(&a.data, &schema)?;
    let cfg = PenaltyConfig {
        lambda1: a.lambda1,
        lambda2: a.lambda2,
        tol: a.tol,
        max_iter: a.max_iter,
        unpenalized_intercepts: a.intercept,
        standardize: a.standardize,
        seed: a.seed.unwrap_or(0),
        ..PenaltyConfig::default()
    };

    let mut trace_json = serde_json::Value::Null;
    let (solution, best_pair) = if a.auto_grid {
        let grid = tuning::default_grid(&ds)?;
        let res = tuning::grid_search(&ds, &grid, &cfg)?;
        trace_json = serde_json::to_value(&res.trace)?;
        (res.best, Some(res.best_pair))
    } else if a.constant_dispersion {
        (solver::fit_constant_dispersion(&ds, &cfg)?, None)
    } else {
        (solver::fit(&ds, &cfg)?, None)
    };

    let support = |b: &[f64]| -> Vec<usize> {
        b.iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect()
    };
    let metrics = io::fe_metrics_json(&ds, &solution.theta)?;
    let results = serde_json::json!({
        "theta1": solution.theta.theta1,
        "theta2": solution.theta.theta2,
        "dispersion_intercept": solution.dispersion_intercept,
        "support1": support(&solution.theta.theta1),
        "support2": support(&solution.theta.theta2),
        "objective": solution.objective,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "kkt_residual": solution.kkt_residual,
        "best_pair": best_pair,
        "bic": tuning::bic(&ds, &solution.theta)?,
        "trace": trace_json,
    });
    let config = serde_json::json!({
        "data": a.data,
        "schema": schema,
        "fingerprint": io::fingerprint(&ds),
        "penalty": cfg,
        "auto_grid": a.auto_grid,
        "constant_dispersion": a.constant_dispersion,
        "seed": a.seed,
    });
    let mut artifact = Artifact::new("fit", config, results, metrics.clone());
    if a.seed.is_none() {
        artifact.timestamp = Some(timestamp());
    }
    if let Some(out) = &a.out {
        io::save_artifact(out, &artifact)?;
    }
    print_coefficients(ds.feature_names(), &solution.theta);
    println!(
        "objective {:.6}  kkt {:.3e}  converged {}  fe_signed {:.6}  fe_mae {:.6}",
        solution.objective,
        solution.kkt_residual,
        solution.converged,
        metrics["fe_signed"].as_f64().unwrap_or(f64::NAN),
        metrics["fe_mean_absolute"].as_f64().unwrap_or(f64::NAN),
    );
    Ok(if solution.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NONCONVERGED)
    })
}

fn cmd_simulate(a: SimArgs) -> hnbr::Result<ExitCode> {
    init_threads(a.threads)?;
    let scenario = match a.scenario {
        ScenarioArg::Example1 => Scenario::Example1,
        ScenarioArg::Example2 => Scenario::Example2,
    };
    let mut cfg = SimulationConfig::new(
        a.n,
        a.p,
        a.rho,
        SimulationConfig::standard_truth(a.p)?,
        a.reps,
        a.seed,
        scenario,
    )?;
    cfg.grid_points = a.grid_points;
    let report = match scenario {
        Scenario::Example1 => simulate::run_example1(&cfg)?,
        Scenario::Example2 => simulate::run_example2(&cfg)?,
    };
    let artifact = Artifact::new(
        "simulation",
        serde_json::to_value(&report.config)?,
        serde_json::json!({"per_rep": report.per_rep}),
        serde_json::to_value(&report.summary)?,
    );
    if let Some(out) = &a.out {
        io::save_artifact(out, &artifact)?;
    }
    let s = &report.summary;
    match scenario {
        Scenario::Example1 => {
            println!(
                "{:>6} {:>6} {:>12} {:>12} {:>12}",
                "n", "rho", "ase1", "ase1_const", "ase2"
            );
            println!(
                "{:>6} {:>6} {:>12.4} {:>12.4} {:>12.4}",
                a.n,
                a.rho,
                s.mean_ase1,
                s.mean_ase1_const_baseline.unwrap_or(f64::NAN),
                s.mean_ase2
            );
        }
        Scenario::Example2 => {
            println!("selection counts over {} reps (first 3 = true variables)", a.reps);
            println!(
                "mean block:       {:?}",
                &s.selection_counts1[..3.min(s.selection_counts1.len())]
            );
            println!(
                "dispersion block: {:?}",
                &s.selection_counts2[..3.min(s.selection_counts2.len())]
            );
            println!(
                "false selections per rep: mean {:.3}, dispersion {:.3}, total {:.3}",
                s.false_selected1, s.false_selected2, s.false_selected_total
            );
        }
    }
    if s.failed_reps > 0 {
        eprintln!("warning: {} repetitions failed", s.failed_reps);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_theory(a: TheoryArgs) -> hnbr::Result<ExitCode> {
    init_threads(a.threads)?;
    let report = match a.check {
        CheckArg::Concentration => theory::check_concentration(a.seed, a.n, a.trials, 20)?,
        CheckArg::Lipschitz => theory::check_stochastic_lipschitz(a.seed, a.n, a.p, a.pairs)?,
        CheckArg::Re => theory::check_re(a.seed)?,
        CheckArg::Isometry => theory::check_isometry(a.seed, a.n.min(20), a.p.min(8))?,
        CheckArg::Kl => theory::check_kl()?,
        CheckArg::Maxresp => theory::check_max_response(a.seed, &[10, 100], a.trials)?,
        CheckArg::OracleRate => {
            let mut reports = Vec::new();
            for &n in &[100usize, 200, 400] {
                let mut cfg = SimulationConfig::new(
                    n,
                    a.p.max(3),
                    0.0,
                    SimulationConfig::standard_truth(a.p.max(3))?,
                    a.pairs.clamp(3, 50),
                    a.seed,
                    Scenario::Example2,
                )?;
                cfg.grid_points = 10;
                reports.push(simulate::run_example2(&cfg)?);
            }
            let refs: Vec<&simulate::SimulationReport> = reports.iter().collect();
            let rate = theory::oracle_rate_check(&refs)?;
            let passed = rate.monotone_decreasing && rate.slope <= -0.5;
            theory::CheckReport {
                name: "oracle-rate".into(),
                passed,
                details: serde_json::to_value(&rate)?,
            }
        }
    };
    let artifact = Artifact::new(
        "theory",
        serde_json::json!({
            "check": report.name,
            "seed": a.seed,
            "trials": a.trials,
            "n": a.n,
            "p": a.p,
            "pairs": a.pairs,
        }),
        report.details.clone(),
        serde_json::json!({"passed": report.passed}),
    );
    if let Some(out) = &a.out {
        io::save_artifact(out, &artifact)?;
    }
    println!(
        "check {}: {}",
        report.name,
        if report.passed { "pass" } else { "FAIL" }
    );
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
