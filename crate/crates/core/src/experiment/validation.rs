//! Oracle checks: closed-form quantities against Monte Carlo estimates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, InputConfig, ModelConfig, NoiseConfig, ValidationSettings};
use crate::error::{param, Result};
use crate::estimator::{
    bound_data_dependent, build_design, effective_noise_autocov, ellipsoidal_error, estimate_markov,
    prediction_with_bound, SystemConstants,
};
use crate::excitation::{estimate_m4, fourth_moment_along};
use crate::par::map_indexed;
use crate::rng::{derive_seed, trial_rng};
use crate::sysmodel::{simulate, simulate_with_rng, InputDesign, NoiseSpec, StateSpaceModel, Trajectory};

/// Pass/fail with the measured value and the limit it was held to.
/// `margin` is positive when the check passes with room to spare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub margin: f64,
}

impl CheckResult {
    fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: measured <= limit, measured, limit, margin: limit - measured }
    }

    fn at_least(name: &str, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: measured >= limit, measured, limit, margin: measured - limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovPair {
    pub tau: usize,
    pub tau_prime: usize,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub std_err: f64,
    /// `|closed − MC| / SE`; zero when both agree exactly with zero spread.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovCheck {
    pub draws: usize,
    pub pairs: Vec<AutocovPair>,
    pub max_z: f64,
}

impl AutocovCheck {
    pub fn passed(&self, z_limit: f64) -> bool {
        self.pairs.iter().all(|p| p.z <= z_limit)
    }
}

const MC_CHUNKS: usize = 64;

/// Compares the closed-form autocovariance of the effective noise with the
/// sample covariance of `y_t` over `draws` noise realizations with the inputs
/// held fixed, for every pair `L ≤ τ ≤ τ' ≤ L + span`.
///
/// The noise-driven part of `ζ_{τ+1}` is `y_{τ+1}` minus its noiseless value.
pub fn autocov_check(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    inputs: &[DVector<f64>],
    l: usize,
    span: usize,
    draws: usize,
    seed: u64,
) -> Result<AutocovCheck> {
    if draws < 2 {
        return param("need at least two Monte Carlo draws");
    }
    let last = l + span + 1;
    if inputs.len() < last + 2 {
        return param(format!("need at least {} inputs, got {}", last + 2, inputs.len()));
    }
    let taus: Vec<usize> = (l..=l + span).collect();
    let k = taus.len();
    let fixed = InputDesign::FixedSequence(inputs[..=last].to_vec());
    let baseline = simulate(model, &NoiseSpec::none(model.n()), &fixed, last, 0, false)?;

    // sums of d_i, d_i d_j and (d_i d_j)² per chunk, merged in chunk order
    let chunk_sums = map_indexed(MC_CHUNKS, |c| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let count = draws / MC_CHUNKS + usize::from(c < draws % MC_CHUNKS);
        let mut rng = trial_rng(seed, &[c as u64]);
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k * k];
        let mut s4 = vec![0.0; k * k];
        let mut d = vec![0.0; k];
        for _ in 0..count {
            let traj = simulate_with_rng(model, noise, &fixed, last, &mut rng, false)?;
            for (i, &tau) in taus.iter().enumerate() {
                d[i] = traj.y[tau + 1] - baseline.y[tau + 1];
                s1[i] += d[i];
            }
            for i in 0..k {
                for j in i..k {
                    let prod = d[i] * d[j];
                    s2[i * k + j] += prod;
                    s4[i * k + j] += prod * prod;
                }
            }
        }
        Ok((s1, s2, s4))
    });
    let mut s1 = vec![0.0; k];
    let mut s2 = vec![0.0; k * k];
    let mut s4 = vec![0.0; k * k];
    for chunk in chunk_sums {
        let (a, b, c) = chunk?;
        s1.iter_mut().zip(&a).for_each(|(x, y)| *x += y);
        s2.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        s4.iter_mut().zip(&c).for_each(|(x, y)| *x += y);
    }

    let nf = draws as f64;
    let mut pairs = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            let (mi, mj) = (s1[i] / nf, s1[j] / nf);
            let m2 = s2[i * k + j] / nf;
            let monte_carlo = (m2 - mi * mj) * nf / (nf - 1.0);
            let var_prod = (s4[i * k + j] / nf - m2 * m2).max(0.0);
            let std_err = (var_prod / nf).sqrt();
            let closed_form = effective_noise_autocov(model, noise, inputs, taus[i], taus[j], l)?;
            let gap = (closed_form - monte_carlo).abs();
            let z = if std_err > 0.0 {
                gap / std_err
            } else if gap <= 1e-12 * closed_form.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            pairs.push(AutocovPair { tau: taus[i], tau_prime: taus[j], closed_form, monte_carlo, std_err, z });
        }
    }
    let max_z = pairs.iter().map(|p| p.z).fold(0.0, f64::max);
    Ok(AutocovCheck { draws, pairs, max_z })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M4Check {
    pub p: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub directions: usize,
    pub samples: usize,
    pub max_estimate: f64,
    /// Smallest `9 + 3·SE − estimate` over directions.
    pub worst_margin: f64,
}

/// Fourth moment of Gaussian regression rows along random unit directions,
/// each held to `m4 + z·SE`.
pub fn m4_check(p: usize, l: usize, directions: usize, samples: usize, m4: f64, z: f64, seed: u64) -> Result<M4Check> {
    let est = estimate_m4(&InputDesign::GaussianIsotropic, p, l, directions, samples, seed)?;
    let worst_margin = est
        .estimates
        .iter()
        .zip(&est.std_errors)
        .map(|(e, se)| m4 + z * se - e)
        .fold(f64::INFINITY, f64::min);
    Ok(M4Check { p, l, directions, samples, max_estimate: est.max_estimate, worst_margin })
}

/// `(estimate, SE)` at `p = L = 1` along `v = 1`, where the exact value is 9.
pub fn m4_axis(samples: usize, seed: u64) -> Result<(f64, f64)> {
    fourth_moment_along(&InputDesign::GaussianIsotropic, 1, 1, &DVector::from_element(1, 1.0), samples, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTrial {
    pub err_ellipsoidal: f64,
    pub bound: f64,
    pub mse: f64,
    /// Absent when the design Gram matrix is singular.
    pub mse_bound: Option<f64>,
}

impl BoundTrial {
    pub fn covered(&self) -> bool {
        self.err_ellipsoidal <= self.bound
    }

    pub fn prediction_ok(&self) -> bool {
        self.mse_bound.is_some_and(|b| self.mse <= b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCampaign {
    pub trials: Vec<BoundTrial>,
    pub coverage: f64,
    pub prediction_ok: usize,
    /// Largest `mse / mse_bound` across trials.
    pub worst_mse_ratio: f64,
}

/// Runs `trials` independent fits of one model at horizon `T`. Each trial
/// checks the ellipsoidal error against the data-dependent bound at `δ`, then
/// holds `Ĝ` and the inputs fixed and resamples all noise `resamples` times to
/// measure the one-step prediction MSE at `T + 1`.
#[allow(clippy::too_many_arguments)]
pub fn bound_campaign(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    inputs: &InputDesign,
    l: usize,
    horizon: usize,
    delta: f64,
    trials: usize,
    resamples: usize,
    seed: u64,
) -> Result<BoundCampaign> {
    if trials == 0 || resamples == 0 {
        return param("need at least one trial and one resample");
    }
    let constants = SystemConstants::new(model, noise, None)?;
    let results = map_indexed(trials, |trial| -> Result<BoundTrial> {
        let full = simulate(model, noise, inputs, horizon + 1, derive_seed(seed, &[0, trial as u64]), false)?;
        let fit = Trajectory::new(full.u[..=horizon].to_vec(), full.y[..=horizon].to_vec())?;
        let design = build_design(&fit, l)?;
        let est = estimate_markov(&design);
        let beta = inputs.beta().unwrap_or_else(|| full.max_input_norm());
        let terms = constants.terms(model, l, beta, delta)?;
        let bound = bound_data_dependent(&terms, horizon)?.ellipsoidal;
        let err_ellipsoidal = ellipsoidal_error(&est.g_hat, &crate::sysmodel::markov_params(model, l)?.g, &design)?;

        let u_next = &full.u[horizon + 1];
        let pred = prediction_with_bound(&est.g_hat, model, noise, &design, &fit.u, u_next, beta)?;
        let mut rng = trial_rng(seed, &[1, trial as u64]);
        let mse = resampled_prediction_mse(model, noise, &fit.u, u_next, pred.y_hat, resamples, &mut rng);
        Ok(BoundTrial { err_ellipsoidal, bound, mse, mse_bound: pred.mse_bound })
    });
    let trials_out = results.into_iter().collect::<Result<Vec<_>>>()?;
    let covered = trials_out.iter().filter(|t| t.covered()).count();
    let prediction_ok = trials_out.iter().filter(|t| t.prediction_ok()).count();
    let worst_mse_ratio = trials_out
        .iter()
        .map(|t| t.mse_bound.map_or(f64::INFINITY, |b| t.mse / b))
        .fold(0.0, f64::max);
    Ok(BoundCampaign { coverage: covered as f64 / trials_out.len() as f64, trials: trials_out, prediction_ok, worst_mse_ratio })
}

/// Mean of `(y_hat − y_{T+1})²` over fresh draws of `w_0..w_T, z_{T+1}`.
///
/// With the inputs fixed, `y_{T+1} = u_{T+1}' C x^u_{T+1} + Σ_i g_i' ξ_i + σ_z ξ'`
/// where `x^u` is the input-driven state and `g_i = S' A^{T-i}' C' u_{T+1}`
/// with `S = Σ_w^{1/2}`.
pub fn resampled_prediction_mse<R: rand::Rng + ?Sized>(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    history: &[DVector<f64>],
    u_next: &DVector<f64>,
    y_hat: f64,
    resamples: usize,
    rng: &mut R,
) -> f64 {
    let n = model.n();
    let horizon = history.len() - 1;
    let readout = model.c.tr_mul(u_next); // C' u_{T+1}
    let mut x_u = DVector::zeros(n);
    for u in history {
        x_u = &model.a * x_u + &model.b * u;
    }
    let mean_part = readout.dot(&x_u);

    // weights[i] = g_i, built from A^{T-i}' C' u_{T+1}
    let mut weights = DMatrix::zeros(n, horizon + 1);
    let mut h = readout.clone();
    for i in (0..=horizon).rev() {
        weights.set_column(i, &noise.sqrt_w().tr_mul(&h));
        h = model.a.tr_mul(&h);
    }
    let w = weights.as_slice();
    let family = noise.family;
    let mut total = 0.0;
    for _ in 0..resamples {
        let mut y = mean_part;
        for &g in w {
            y += g * family.standardized(rng);
        }
        y += noise.sigma_z * family.standardized(rng);
        total += (y_hat - y).powi(2);
    }
    total / resamples as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
    pub autocov: AutocovCheck,
    pub m4: M4Check,
    pub m4_axis: (f64, f64),
    pub coverage: BoundCampaign,
}

impl ExperimentConfig {
    /// Small system for `run_validation`: `n = p = 2`, `L = 4`, `T = 60`,
    /// Gaussian noise, inputs on the sphere of radius `√2`, 200 trials.
    pub fn validation_default() -> Self {
        Self {
            n: 2,
            p: 2,
            rho_values: vec![0.5],
            l_values: vec![4],
            t_values: vec![60],
            trials: 200,
            noise: NoiseConfig::Gaussian { sigma_w: 0.5, sigma_z: 0.5 },
            input: InputConfig::Sphere { radius: None },
            delta: 0.1,
            base_seed: 0,
            output_path: "validation.json".into(),
            model: ModelConfig::RandomDiagonal,
            record_runtime: false,
            m4: 9.0,
            pe_horizon: None,
            validation: ValidationSettings::default(),
        }
    }
}

/// Runs every oracle suite on the first `(ρ, L)` of the config.
pub fn run_validation(config: &ExperimentConfig) -> Result<ValidationReport> {
    config.validate()?;
    let s = &config.validation;
    let (n, p, l, rho) = (config.n, config.p, config.l_values[0], config.rho_values[0]);
    let horizon = s.horizon.unwrap_or(config.t_values[0]);
    if horizon <= l {
        return param(format!("validation horizon {horizon} must exceed L = {l}"));
    }
    let seed = config.base_seed;
    let model = config.model.draw_seeded(n, p, rho, derive_seed(seed, &[3, 0]))?;
    let noise = config.noise.to_spec(n)?;

    let len = l + s.autocov_span + 3;
    let design = config.input.to_design(p, len);
    let mut rng = trial_rng(seed, &[3, 1]);
    let inputs: Vec<_> = (0..len).map(|t| design.input_at(t, p, &mut rng)).collect();
    let autocov = autocov_check(&model, &noise, &inputs, l, s.autocov_span, s.autocov_draws, derive_seed(seed, &[3, 2]))?;

    let m4 = m4_check(p, l, s.m4_directions, s.m4_samples, 9.0, 3.0, derive_seed(seed, &[3, 3]))?;
    let m4_axis = m4_axis(s.m4_samples, derive_seed(seed, &[3, 4]))?;

    let inputs = config.input.to_design(p, horizon + 2);
    let coverage = bound_campaign(
        &model,
        &noise,
        &inputs,
        l,
        horizon,
        config.delta,
        config.trials,
        s.prediction_resamples,
        derive_seed(seed, &[3, 5]),
    )?;

    let checks = vec![
        CheckResult::at_most("autocovariance_max_z", autocov.max_z, 3.0),
        CheckResult::at_least("m4_worst_margin", m4.worst_margin, 0.0),
        CheckResult::at_most("m4_axis_z", (m4_axis.0 - 9.0).abs() / m4_axis.1, 3.0),
        CheckResult::at_least("bound_coverage", coverage.coverage, 1.0 - config.delta - 0.05),
        CheckResult::at_most("prediction_mse_ratio", coverage.worst_mse_ratio, 1.0),
    ];
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { all_passed, checks, autocov, m4, m4_axis, coverage })
}
