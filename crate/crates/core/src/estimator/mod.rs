//! Least-squares estimation of the Markov parameter matrix `G` from the
//! regression `y_t = (ubar_{t-1} ⊗ u_t)' vec(G) + noise`.

mod autocov;
mod bounds;
mod predict;

pub use autocov::effective_noise_autocov;
pub use bounds::{bound_data_dependent, bound_terms, choose_l, BoundTerms, BoundValue, LChoice, SystemConstants};
pub use predict::{predict, prediction_with_bound, Prediction};

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::linalg::{mat_col_major, sym_eigenvalues, vec_col_major};
use crate::sysmodel::Trajectory;

/// Relative eigenvalue cutoff separating full-rank from min-norm solves.
pub const RANK_TOL: f64 = 1e-10;

/// Rows of the design hold `ubar_{t-1} ⊗ u_t` for `t = L+1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub u_tilde: DMatrix<f64>,
    pub y: DVector<f64>,
    pub l: usize,
    pub horizon: usize,
    pub p: usize,
}

impl DesignSystem {
    pub fn rows(&self) -> usize {
        self.u_tilde.nrows()
    }

    pub fn cols(&self) -> usize {
        self.u_tilde.ncols()
    }

    /// `Ṽ = Ũ'Ũ`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.u_tilde.tr_mul(&self.u_tilde)
    }
}

/// `ubar_t = [u_t; u_{t-1}; …; u_{t-L+1}]`.
pub fn stacked_inputs(u: &[DVector<f64>], t: usize, l: usize) -> DVector<f64> {
    let p = u[t].len();
    let mut out = DVector::zeros(p * l);
    for k in 0..l {
        out.rows_mut(k * p, p).copy_from(&u[t - k]);
    }
    out
}

/// Writes `ubar_{t-1} ⊗ u_t` into `row`.
fn fill_row(u: &[DVector<f64>], t: usize, l: usize, row: &mut [f64]) {
    let p = u[t].len();
    let ut = &u[t];
    for k in 0..l {
        let past = &u[t - 1 - k];
        for (a, &pa) in past.iter().enumerate() {
            let base = (k * p + a) * p;
            for i in 0..p {
                row[base + i] = pa * ut[i];
            }
        }
    }
}

fn check_horizon(traj: &Trajectory, l: usize) -> Result<(usize, usize)> {
    if l == 0 {
        return param("L must be at least 1");
    }
    let t = traj.horizon();
    if t <= l {
        return param(format!("need T ≥ L + 1, got T = {t}, L = {l}"));
    }
    Ok((t, traj.p()))
}

pub fn build_design(traj: &Trajectory, l: usize) -> Result<DesignSystem> {
    let (horizon, p) = check_horizon(traj, l)?;
    let rows = horizon - l;
    let cols = p * p * l;
    let mut u_tilde = DMatrix::zeros(rows, cols);
    let mut row = vec![0.0; cols];
    for r in 0..rows {
        let t = l + 1 + r;
        fill_row(&traj.u, t, l, &mut row);
        for (j, &v) in row.iter().enumerate() {
            u_tilde[(r, j)] = v;
        }
    }
    let y = DVector::from_iterator(rows, traj.y[l + 1..].iter().cloned());
    Ok(DesignSystem { u_tilde, y, l, horizon, p })
}

/// `Ũ'Ũ` accumulated in blocks of rows without materializing `Ũ`.
pub fn design_gram(traj: &Trajectory, l: usize) -> Result<DMatrix<f64>> {
    const CHUNK: usize = 2048;
    let (horizon, p) = check_horizon(traj, l)?;
    let cols = p * p * l;
    let mut gram = DMatrix::zeros(cols, cols);
    let mut block = DMatrix::zeros(CHUNK, cols);
    let mut row = vec![0.0; cols];
    let mut t = l + 1;
    while t <= horizon {
        let count = CHUNK.min(horizon + 1 - t);
        for r in 0..count {
            fill_row(&traj.u, t + r, l, &mut row);
            for (j, &v) in row.iter().enumerate() {
                block[(r, j)] = v;
            }
        }
        let filled = block.rows(0, count);
        gram += filled.tr_mul(&filled);
        t += count;
    }
    Ok(gram)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    FullRank,
    MinNorm,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::FullRank => "full_rank",
            SolverMode::MinNorm => "min_norm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub g_hat: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub residual_norm: f64,
    pub solver_mode: SolverMode,
}

/// Solves `min ‖y − Ũ vec(G)‖`.
///
/// When `λ_min(Ṽ) > RANK_TOL · λ_max(Ṽ)` the normal equations are solved by
/// Cholesky; otherwise the minimum-norm solution comes from an SVD of `Ũ`.
pub fn estimate_markov(design: &DesignSystem) -> EstimateReport {
    solve_with_gram(design.u_tilde.as_view(), design.y.as_view(), design.gram(), design.p, design.l)
}

/// Same as [`estimate_markov`] for the leading rows of a design whose Gram
/// matrix `gram = u'u` is already available.
pub fn solve_with_gram(
    u: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    gram: DMatrix<f64>,
    p: usize,
    l: usize,
) -> EstimateReport {
    let eig = sym_eigenvalues(&gram);
    let lambda_max = eig.last().cloned().unwrap_or(0.0).max(0.0);
    let lambda_min = eig.first().cloned().unwrap_or(0.0).max(0.0);
    let rhs = u.tr_mul(&y);

    let full_rank = lambda_max > 0.0 && lambda_min > RANK_TOL * lambda_max;
    let (theta, solver_mode) = match full_rank.then(|| gram.clone().cholesky()).flatten() {
        Some(chol) => {
            let mut theta = chol.solve(&rhs);
            // one step of iterative refinement
            let correction = chol.solve(&(&rhs - &gram * &theta));
            theta += correction;
            (theta, SolverMode::FullRank)
        }
        None => (min_norm_solve(&u.clone_owned(), &y.clone_owned()), SolverMode::MinNorm),
    };
    let residual_norm = (y - u * &theta).norm();
    EstimateReport {
        g_hat: mat_col_major(&theta, p, p * l),
        gram,
        lambda_min,
        lambda_max,
        residual_norm,
        solver_mode,
    }
}

fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let cols = a.ncols();
    if a.nrows() == 0 || a.amax() == 0.0 {
        return DVector::zeros(cols);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = f64::EPSILON * a.nrows().max(cols) as f64 * smax;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut coeffs = u.tr_mul(b);
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s > cutoff { *c / s } else { 0.0 };
    }
    vt.tr_mul(&coeffs)
}

/// `‖vec(Ĝ) − vec(G)‖_Ṽ`, evaluated as `‖Ũ (vec Ĝ − vec G)‖₂`.
pub fn ellipsoidal_error(g_hat: &DMatrix<f64>, g_true: &DMatrix<f64>, design: &DesignSystem) -> Result<f64> {
    if g_hat.shape() != g_true.shape() || g_hat.len() != design.cols() {
        return param(format!(
            "shape mismatch: Ĝ {:?}, G {:?}, design has {} columns",
            g_hat.shape(),
            g_true.shape(),
            design.cols()
        ));
    }
    let delta = vec_col_major(&(g_hat - g_true));
    Ok((&design.u_tilde * delta).norm())
}

/// JSON-friendly summary of one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub lambda_min: f64,
    pub residual_norm: f64,
    pub solver_mode: SolverMode,
    pub err_fro: Option<f64>,
    pub err_ellipsoidal: Option<f64>,
    pub bound_value: Option<f64>,
    pub bound_terms: Option<BoundTerms>,
}

impl EstimateSummary {
    pub fn new(report: &EstimateReport) -> Self {
        Self {
            lambda_min: report.lambda_min,
            residual_norm: report.residual_norm,
            solver_mode: report.solver_mode,
            err_fro: None,
            err_ellipsoidal: None,
            bound_value: None,
            bound_terms: None,
        }
    }
}
