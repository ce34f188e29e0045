use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::Result;
use crate::estimator::{bound_data_dependent, build_design, solve_with_gram, SolverMode, SystemConstants};
use crate::io::fmt_f64;
use crate::par::map_indexed;
use crate::rng::derive_seed;
use crate::sysmodel::{markov_params, simulate};

/// One estimate in the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub rho: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub trial: usize,
    /// `‖Ĝ − G‖_F²`
    pub err_g_fro2: f64,
    pub lambda_min: f64,
    pub solver_mode: SolverMode,
    /// Squared Frobenius-norm bound at `δ`, on the same scale as `err_g_fro2`.
    pub bound_value: f64,
    pub runtime_ms: f64,
    pub residual_norm: f64,
}

/// Mean and sample standard deviation of `err_g_fro2` over the trials of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub rho: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub trials: usize,
    pub mean_err: f64,
    pub std_err: f64,
    pub mean_residual_norm: f64,
    /// `T = L + p²L`, where the regression becomes square.
    pub interpolation_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by `ρ`, `L` (config order), `T` (ascending), then trial.
    pub records: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
    /// Whether the summary carries the residual and threshold columns.
    pub double_descent: bool,
}

const TRIAL_HEADER: &str = "rho,L,T,trial,err_G_fro2,lambda_min,solver_mode,bound_value,runtime_ms";

impl SweepResult {
    pub fn cell(&self, rho: f64, l: usize, t: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.rho == rho && c.l == l && c.t == t)
    }

    /// Per-trial rows, each followed by its cell's `mean_err,std_err`.
    pub fn trials_csv(&self) -> String {
        let mut out = format!("{TRIAL_HEADER},mean_err,std_err\n");
        let per_cell = self.records.len() / self.cells.len().max(1);
        for (i, r) in self.records.iter().enumerate() {
            let cell = &self.cells[i / per_cell];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.rho),
                r.l,
                r.t,
                r.trial,
                fmt_f64(r.err_g_fro2),
                fmt_f64(r.lambda_min),
                r.solver_mode.as_str(),
                fmt_f64(r.bound_value),
                fmt_f64(r.runtime_ms),
                fmt_f64(cell.mean_err),
                fmt_f64(cell.std_err),
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("rho,L,T,trials,mean_err,std_err");
        if self.double_descent {
            out.push_str(",mean_residual_norm,interpolation_threshold");
        }
        out.push('\n');
        for c in &self.cells {
            write!(out, "{},{},{},{},{},{}", fmt_f64(c.rho), c.l, c.t, c.trials, fmt_f64(c.mean_err), fmt_f64(c.std_err))
                .expect("writing to a String cannot fail");
            if self.double_descent {
                write!(out, ",{},{}", fmt_f64(c.mean_residual_norm), c.interpolation_threshold)
                    .expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    /// Writes the trial table to `path` and the summary next to it as `<stem>_summary.csv`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.trials_csv())?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
        let summary = path.with_file_name(format!("{stem}_summary.csv"));
        std::fs::write(&summary, self.summary_csv())?;
        Ok(summary)
    }
}

/// Estimation error over the `(ρ, L, T, trial)` grid.
///
/// Each `(ρ, trial)` pair draws one model and one trajectory of the longest
/// horizon; shorter horizons are its prefixes.
pub fn run_figure1(config: &ExperimentConfig) -> Result<SweepResult> {
    sweep(config, false)
}

/// The same sweep with the interpolation threshold `T = L + p²L` marked in the summary.
pub fn run_double_descent(config: &ExperimentConfig) -> Result<SweepResult> {
    sweep(config, true)
}

fn sweep(config: &ExperimentConfig, double_descent: bool) -> Result<SweepResult> {
    config.validate()?;
    let mut horizons = config.t_values.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let (n_rho, n_trials) = (config.rho_values.len(), config.trials);

    let jobs = map_indexed(n_rho * n_trials, |j| run_job(config, &horizons, j / n_trials, j % n_trials));
    let mut per_job = Vec::with_capacity(jobs.len());
    for job in jobs {
        per_job.push(job?);
    }

    // per_job[rho * trials + trial][l_idx * |T| + t_idx]
    let p2 = config.p * config.p;
    let mut records = Vec::with_capacity(per_job.iter().map(Vec::len).sum());
    let mut cells = Vec::new();
    for ri in 0..n_rho {
        for (li, &l) in config.l_values.iter().enumerate() {
            for (ti, &t) in horizons.iter().enumerate() {
                let start = records.len();
                for trial in 0..n_trials {
                    records.push(per_job[ri * n_trials + trial][li * horizons.len() + ti].clone());
                }
                let cell = &records[start..];
                let errs: Vec<f64> = cell.iter().map(|r| r.err_g_fro2).collect();
                let (mean_err, std_err) = mean_std(&errs);
                let mean_residual_norm = cell.iter().map(|r| r.residual_norm).sum::<f64>() / n_trials as f64;
                cells.push(CellSummary {
                    rho: config.rho_values[ri],
                    l,
                    t,
                    trials: n_trials,
                    mean_err,
                    std_err,
                    mean_residual_norm,
                    interpolation_threshold: t == l + p2 * l,
                });
            }
        }
    }
    Ok(SweepResult { records, cells, double_descent })
}

/// Mean and sample (n − 1) standard deviation; zero spread for a single value.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_job(config: &ExperimentConfig, horizons: &[usize], ri: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let rho = config.rho_values[ri];
    let (n, p) = (config.n, config.p);
    let t_max = *horizons.last().expect("validated config has T values");
    let path = [ri as u64, trial as u64];
    let model = config.model.draw_seeded(n, p, rho, derive_seed(config.base_seed, &[0, path[0], path[1]]))?;
    let noise = config.noise.to_spec(n)?;
    let inputs = config.input.to_design(p, t_max + 1);
    let traj = simulate(&model, &noise, &inputs, t_max, derive_seed(config.base_seed, &[1, path[0], path[1]]), false)?;
    let constants = SystemConstants::new(&model, &noise, None)?;

    // running max of ‖u_t‖ gives the empirical β of every prefix
    let mut beta_prefix = Vec::with_capacity(traj.u.len());
    let mut running = 0.0f64;
    for u in &traj.u {
        running = running.max(u.norm());
        beta_prefix.push(running);
    }
    let design_beta = inputs.beta();

    let mut out = Vec::with_capacity(config.l_values.len() * horizons.len());
    for &l in &config.l_values {
        let g_true = markov_params(&model, l)?.g;
        let full = build_design(&traj, l)?;
        let cols = full.cols();
        let mut gram = DMatrix::zeros(cols, cols);
        let mut filled = 0;
        for &t in horizons {
            let clock = Instant::now();
            let rows = t - l;
            let chunk = full.u_tilde.rows(filled, rows - filled);
            gram += chunk.tr_mul(&chunk);
            filled = rows;
            let report = solve_with_gram(full.u_tilde.rows(0, rows), full.y.rows(0, rows), gram.clone(), p, l);
            let elapsed = clock.elapsed().as_secs_f64() * 1e3;

            let beta = design_beta.unwrap_or(beta_prefix[t]);
            let terms = constants.terms(&model, l, beta, config.delta)?;
            let bound = bound_data_dependent(&terms, t)?.frobenius(report.lambda_min);
            out.push(TrialRecord {
                rho,
                l,
                t,
                trial,
                err_g_fro2: (&report.g_hat - &g_true).norm_squared(),
                lambda_min: report.lambda_min,
                solver_mode: report.solver_mode,
                bound_value: bound * bound,
                runtime_ms: if config.record_runtime { elapsed } else { 0.0 },
                residual_norm: report.residual_norm,
            });
        }
    }
    Ok(out)
}
