use nalgebra::{DMatrix, DVector};

use crate::error::{param, Result};
use crate::linalg::{kron, mat_pow, vec_col_major};
use crate::sysmodel::{markov_params, NoiseSpec, StateSpaceModel};

fn kron_delta(k: i64) -> f64 {
    if k == 0 {
        1.0
    } else {
        0.0
    }
}

fn as_row(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

/// `L × L` Toeplitz matrix with entry `(k, k')` equal to `δ(τ − τ' + k' − k)`.
fn lag_toeplitz(tau: usize, tau_prime: usize, l: usize) -> DMatrix<f64> {
    let shift = tau as i64 - tau_prime as i64;
    DMatrix::from_fn(l, l, |k, kp| kron_delta(shift + kp as i64 - k as i64))
}

/// `1 × L` row with entry `k` equal to `δ(t − i − k)`.
fn lag_row(t: usize, i: usize, l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(1, l, |_, k| kron_delta(t as i64 - i as i64 - k as i64))
}

#[allow(clippy::too_many_arguments)]
/// `u_{τ'+1}' C A^L Σ_i A^{τ'-L-i} (δ_w(τ, i) ⊗ Σ_w) ⊗ u_{τ+1}'` applied to `vec(F)`.
fn cross_term(
    model: &StateSpaceModel,
    sigma_w: &DMatrix<f64>,
    f_vec: &DVector<f64>,
    u_left: &DVector<f64>,
    u_right: &DVector<f64>,
    window_end: usize,
    tail_end: usize,
    l: usize,
) -> f64 {
    let n = model.n();
    let lead = as_row(u_right) * &model.c * mat_pow(&model.a, l);
    let mut acc = DMatrix::zeros(n, n * l);
    for i in 0..=tail_end - l {
        let mix = kron(&lag_row(window_end, i, l), sigma_w);
        acc += mat_pow(&model.a, tail_end - l - i) * mix;
    }
    let row = kron(&(lead * acc), &as_row(u_left));
    (row * f_vec)[(0, 0)]
}

/// Conditional autocovariance `R[τ, τ']` of the effective regression noise
/// `ζ_{τ+1} = (wbar_τ' ⊗ u_{τ+1}') vec(F) + u_{τ+1}' e_{τ+1} + z_{τ+1}` given
/// the inputs `u_0..u_T`.
///
/// The four contributions are the window-window term, the tail-tail term, the
/// two window-tail cross terms and the measurement noise.
pub fn effective_noise_autocov(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    inputs: &[DVector<f64>],
    tau: usize,
    tau_prime: usize,
    l: usize,
) -> Result<f64> {
    if l == 0 {
        return param("L must be at least 1");
    }
    if inputs.is_empty() {
        return param("input sequence is empty");
    }
    let horizon = inputs.len() - 1;
    for t in [tau, tau_prime] {
        if t < l || t + 1 > horizon {
            return param(format!("index {t} outside [L, T−1] = [{l}, {}]", horizon as i64 - 1));
        }
    }
    let p = model.p();
    if inputs.iter().any(|u| u.len() != p) || noise.n() != model.n() {
        return param("dimension mismatch between model, noise and inputs");
    }
    let sw = &noise.sigma_w;
    let u = &inputs[tau + 1];
    let up = &inputs[tau_prime + 1];
    let f_vec = vec_col_major(&markov_params(model, l)?.f);

    let window = {
        let core = kron(&kron(&lag_toeplitz(tau, tau_prime, l), sw), &(u * up.transpose()));
        (f_vec.transpose() * core * &f_vec)[(0, 0)]
    };

    let mut tails = 0.0;
    for i in 0..=tau.min(tau_prime) - l {
        let left = u.transpose() * &model.c * mat_pow(&model.a, tau - i);
        let right = up.transpose() * &model.c * mat_pow(&model.a, tau_prime - i);
        tails += (left * sw * right.transpose())[(0, 0)];
    }

    let cross_a = cross_term(model, sw, &f_vec, u, up, tau, tau_prime, l);
    let cross_b = cross_term(model, sw, &f_vec, up, u, tau_prime, tau, l);
    let measurement = noise.sigma_z * noise.sigma_z * kron_delta(tau as i64 - tau_prime as i64);

    Ok(window + tails + cross_a + cross_b + measurement)
}
