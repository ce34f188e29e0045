//! `bilid`: simulate, estimate and realize bilinear-observation systems, and
//! run the Monte Carlo experiments.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 validation-suite failure.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use bilinear_sysid::estimator::{
    bound_data_dependent, build_design, ellipsoidal_error, estimate_markov, EstimateSummary, SystemConstants,
};
use bilinear_sysid::excitation::{pe_certificate, Regime};
use bilinear_sysid::experiment::{
    run_double_descent, run_figure1, run_pe_campaign, run_validation, ExperimentConfig, SweepResult,
};
use bilinear_sysid::hokalman::{ho_kalman, realization_error_bounds, RealizationMeta};
use bilinear_sysid::io::{
    matrix_rows, matrix_to_csv, read_matrix, read_model, read_trajectory, trajectory_to_csv, write_model,
};
use bilinear_sysid::par::with_threads;
use bilinear_sysid::rng::derive_seed;
use bilinear_sysid::sysmodel::{markov_params, simulate};
use bilinear_sysid::Error;

#[derive(Parser)]
#[command(name = "bilid", version, about = "System identification with bilinear observations")]
struct Cli {
    /// Worker threads for the Monte Carlo loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a model from the config and simulate one trajectory.
    Simulate(SimulateArgs),
    /// Least-squares estimate of the Markov parameters from a trajectory.
    Estimate(EstimateArgs),
    /// Ho-Kalman realization of a Markov parameter matrix.
    Hokalman(HokalmanArgs),
    /// Persistence-of-excitation certificate for a trajectory.
    PeCheck(PeCheckArgs),
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Exp(ExpCommand),
    /// Run the oracle validation suites.
    Validate(ValidateArgs),
}

#[derive(Subcommand)]
enum ExpCommand {
    /// Estimation error over the (rho, L, T) grid.
    Figure1(ExpArgs),
    /// Error around the interpolation threshold T = L + p²L.
    DoubleDescent(ExpArgs),
    /// Excitation frequency at the required horizon.
    Pe(ExpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon; defaults to the largest T in the config.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Use this model instead of drawing one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Where to save the drawn model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Add state and noise columns.
    #[arg(long)]
    diagnostics: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long = "L")]
    l: usize,
    /// True model, to report errors and the bound.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Noise settings for the bound.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HokalmanArgs {
    /// Markov parameter matrix `p × pL` in matrix CSV form.
    #[arg(long)]
    markov: PathBuf,
    #[arg(long)]
    order: usize,
    /// Exact Markov parameters, for the perturbation bounds.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PeCheckArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Fourth-moment constant of the inputs.
    #[arg(long, default_value_t = 9.0)]
    m4: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    /// Defaults to the built-in small configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, move || dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical { .. } | Error::DegenerateRealization { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Hokalman(a) => cmd_hokalman(a),
        Command::PeCheck(a) => cmd_pe_check(a),
        Command::Exp(ExpCommand::Figure1(a)) => cmd_sweep(a, false),
        Command::Exp(ExpCommand::DoubleDescent(a)) => cmd_sweep(a, true),
        Command::Exp(ExpCommand::Pe(a)) => cmd_pe(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Writes to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn load_config(path: &Path, seed: Option<u64>) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let cfg = load_config(&a.config, a.seed)?;
    let horizon = a.horizon.unwrap_or_else(|| cfg.max_horizon());
    let model = match &a.model {
        Some(path) => read_model(path)?,
        None => cfg.model.draw_seeded(cfg.n, cfg.p, cfg.rho_values[0], derive_seed(cfg.base_seed, &[0]))?,
    };
    let noise = cfg.noise.to_spec(model.n())?;
    let inputs = cfg.input.to_design(model.p(), horizon + 1);
    let traj = simulate(&model, &noise, &inputs, horizon, derive_seed(cfg.base_seed, &[1]), a.diagnostics)?;
    if let Some(path) = &a.model_out {
        write_model(path, &model)?;
    }
    emit(a.out.as_deref(), &trajectory_to_csv(&traj))
}

fn cmd_estimate(a: EstimateArgs) -> CliResult {
    let traj = read_trajectory(&a.trajectory)?;
    let design = build_design(&traj, a.l)?;
    let report = estimate_markov(&design);
    if let Format::Csv = a.format {
        return emit(a.out.as_deref(), &matrix_to_csv(&report.g_hat));
    }
    let mut summary = EstimateSummary::new(&report);
    if let Some(path) = &a.model {
        let model = read_model(path)?;
        let g = markov_params(&model, a.l)?.g;
        summary.err_fro = Some((&report.g_hat - &g).norm());
        summary.err_ellipsoidal = Some(ellipsoidal_error(&report.g_hat, &g, &design)?);
        if let Some(cfg_path) = &a.config {
            let cfg = ExperimentConfig::load(cfg_path)?;
            let noise = cfg.noise.to_spec(model.n())?;
            let terms = SystemConstants::new(&model, &noise, None)?.terms(&model, a.l, traj.max_input_norm(), a.delta)?;
            summary.bound_value = Some(bound_data_dependent(&terms, traj.horizon())?.ellipsoidal);
            summary.bound_terms = Some(terms);
        }
    }
    let out = json!({ "L": a.l, "T": traj.horizon(), "g_hat": matrix_rows(&report.g_hat), "summary": summary });
    emit(a.out.as_deref(), &to_json(&out))
}

fn cmd_hokalman(a: HokalmanArgs) -> CliResult {
    let g_hat = read_matrix(&a.markov)?;
    let est = ho_kalman(&g_hat, a.order)?;
    let bounds = match &a.reference {
        Some(path) => {
            let g = read_matrix(path)?;
            let exact = ho_kalman(&g, a.order)?;
            let err = (&g - &g_hat).norm();
            Some(realization_error_bounds(&exact.hankel.h, &est.hankel.h, exact.hankel.sigma_min_l, err, exact.hankel.l)?)
        }
        None => None,
    };
    let meta = RealizationMeta::new(&est, bounds.map(|b| b.robustness_ok));
    let out = json!({
        "a": matrix_rows(&est.a_hat),
        "b": matrix_rows(&est.b_hat),
        "c": matrix_rows(&est.c_hat),
        "meta": meta,
        "singular_values": est.hankel.singular_values.as_slice().to_vec(),
        "bounds": bounds,
    });
    emit(a.out.as_deref(), &to_json(&out))
}

fn cmd_pe_check(a: PeCheckArgs) -> CliResult {
    let traj = read_trajectory(&a.trajectory)?;
    let design = build_design(&traj, a.l)?;
    let cert = pe_certificate(&design, a.delta, Regime::FourthMomentB { m4: a.m4 })?;
    emit(a.out.as_deref(), &to_json(&cert))
}

fn sweep_output(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output_path))
}

fn cmd_sweep(a: ExpArgs, double_descent: bool) -> CliResult {
    let cfg = load_config(&a.config, a.seed)?;
    let res: SweepResult = if double_descent { run_double_descent(&cfg)? } else { run_figure1(&cfg)? };
    let path = sweep_output(&cfg, a.out);
    match a.format {
        Format::Csv => {
            let summary = res.write(&path)?;
            eprintln!("wrote {} and {}", path.display(), summary.display());
        }
        Format::Json => emit(Some(&path), &to_json(&res))?,
    }
    Ok(())
}

fn cmd_pe(a: ExpArgs) -> CliResult {
    let cfg = load_config(&a.config, a.seed)?;
    let res = run_pe_campaign(&cfg)?;
    emit(a.out.as_deref(), &to_json(&res))
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::validation_default(),
    };
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    let report = run_validation(&cfg)?;
    emit(a.out.as_deref(), &to_json(&report))?;
    for c in &report.checks {
        eprintln!("{} {}: measured {:.4} limit {:.4}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.limit);
    }
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Validation(failed.join(", ")))
    }
}
