use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ellipsoidal_error, stacked_inputs, DesignSystem};
use crate::error::{param, Result};
use crate::linalg::{kron_vec, mat_pow, spectral_norm};
use crate::sysmodel::{controllability_gramian, input_gramian, markov_params, Horizon, NoiseSpec, StateSpaceModel};

/// One-step prediction `ŷ_{T+1} = u_{T+1}' Ĝ ubar_T`, with the mean-squared
/// error bound when ground truth is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub y_hat: f64,
    pub mse_bound: Option<f64>,
    /// `‖ubar_T ⊗ u_{T+1}‖²_{Ṽ⁻¹}`; absent when `Ṽ` is singular.
    pub leverage: Option<f64>,
}

/// `ŷ = u_next' Ĝ ubar` where `ubar` stacks the last `L` inputs of `history`, newest first.
pub fn predict(g_hat: &DMatrix<f64>, history: &[DVector<f64>], u_next: &DVector<f64>) -> Result<f64> {
    let p = g_hat.nrows();
    if p == 0 || !g_hat.ncols().is_multiple_of(p) {
        return param(format!("Ĝ must be p × pL, got {:?}", g_hat.shape()));
    }
    let l = g_hat.ncols() / p;
    if history.len() < l {
        return param(format!("need {l} past inputs, got {}", history.len()));
    }
    if u_next.len() != p || history.iter().any(|u| u.len() != p) {
        return param("input dimension does not match Ĝ");
    }
    let ubar = stacked_inputs(history, history.len() - 1, l);
    Ok(u_next.dot(&(g_hat * ubar)))
}

/// Prediction at `T + 1` after the training trajectory `history = u_0..u_T`, with
///
/// `E(ŷ − y)² ≤ 2‖Δ‖²_Ṽ ‖ubar_T ⊗ u_{T+1}‖²_{Ṽ⁻¹} + 2β²‖CA^L‖²‖Γ_u + Γ_w^{(T)}‖ + β²‖Σ_w‖‖F‖_F² + σ_z²`.
///
/// `Γ_u` is the second moment of the input-driven part of `x_{T+1-L}`, the
/// state the truncated tail `C A^L x_{T+1-L}` acts on. `β` covers every input
/// including `u_next`.
pub fn prediction_with_bound(
    g_hat: &DMatrix<f64>,
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    design: &DesignSystem,
    history: &[DVector<f64>],
    u_next: &DVector<f64>,
    beta: f64,
) -> Result<Prediction> {
    let y_hat = predict(g_hat, history, u_next)?;
    let l = design.l;
    let horizon = history.len() - 1;
    if horizon != design.horizon {
        return param(format!("history has horizon {horizon}, design was built with {}", design.horizon));
    }
    let ubar = stacked_inputs(history, horizon, l);
    let feature = DVector::from_vec(kron_vec(ubar.as_slice(), u_next.as_slice()));
    let gram = design.gram();
    let leverage = match gram.cholesky() {
        Some(chol) => feature.dot(&chol.solve(&feature)),
        None => return Ok(Prediction { y_hat, mse_bound: None, leverage: None }),
    };

    let mp = markov_params(model, l)?;
    let err_v = ellipsoidal_error(g_hat, &mp.g, design)?;
    let tail = spectral_norm(&(&model.c * mat_pow(&model.a, l)));
    let gamma_u = input_gramian(model, &history[..=horizon - l])?;
    let gamma_w = controllability_gramian(model, &noise.sigma_w, Horizon::Finite(horizon))?;
    let b2 = beta * beta;
    let mse_bound = 2.0 * err_v * err_v * leverage
        + 2.0 * b2 * tail * tail * spectral_norm(&(gamma_u + gamma_w))
        + b2 * spectral_norm(&noise.sigma_w) * mp.f.norm_squared()
        + noise.sigma_z * noise.sigma_z;
    Ok(Prediction { y_hat, mse_bound: Some(mse_bound), leverage: Some(leverage) })
}
