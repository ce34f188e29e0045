use serde::{Deserialize, Serialize};

use super::sweep::mean_std;
use super::ExperimentConfig;
use crate::error::{param, Result};
use crate::estimator::design_gram;
use crate::excitation::{min_eig_gram, pe_certificate_from_parts, Regime};
use crate::par::map_indexed;
use crate::rng::trial_rng;
use crate::sysmodel::Trajectory;

/// Excitation frequency at one memory length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeCell {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "required_T")]
    pub required_t: u64,
    /// Horizon actually simulated.
    #[serde(rename = "T")]
    pub horizon: usize,
    pub trials: usize,
    pub successes: usize,
    /// Fraction of trials with `λ_min(Ũ'Ũ) ≥ (T − L)/4`.
    pub frequency: f64,
    pub threshold: f64,
    pub lambda_min_mean: f64,
    pub lambda_min_std: f64,
    pub lambda_min_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeCampaign {
    pub p: usize,
    pub delta: f64,
    pub regime: Regime,
    pub cells: Vec<PeCell>,
}

/// Monte Carlo frequency of the excitation event at the fourth-moment
/// requirement for every `L` in the config (or at `pe_T` when set).
///
/// Only the inputs are drawn: the design depends on nothing else.
pub fn run_pe_campaign(config: &ExperimentConfig) -> Result<PeCampaign> {
    if config.trials == 0 {
        return param("trials must be at least 1");
    }
    if config.l_values.is_empty() || config.l_values.contains(&0) {
        return param("L values must be positive");
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return param(format!("delta must lie in (0, 1), got {}", config.delta));
    }
    let regime = Regime::FourthMomentB { m4: config.m4 };
    let p = config.p;
    let mut cells = Vec::with_capacity(config.l_values.len());
    for (li, &l) in config.l_values.iter().enumerate() {
        let required_t = pe_certificate_from_parts(0.0, p, l, l + 1, config.delta, regime)?.required_t;
        let horizon = config.pe_horizon.unwrap_or(usize::try_from(required_t).unwrap_or(usize::MAX));
        if horizon <= l {
            return param(format!("excitation horizon {horizon} must exceed L = {l}"));
        }
        let inputs = config.input.to_design(p, horizon + 1);
        let lambdas = map_indexed(config.trials, |trial| -> Result<f64> {
            let mut rng = trial_rng(config.base_seed, &[2, li as u64, trial as u64]);
            let u: Vec<_> = (0..=horizon).map(|t| inputs.input_at(t, p, &mut rng)).collect();
            let traj = Trajectory::new(u, vec![0.0; horizon + 1])?;
            Ok(min_eig_gram(&design_gram(&traj, l)?))
        });
        let lambdas = lambdas.into_iter().collect::<Result<Vec<f64>>>()?;
        let threshold = (horizon - l) as f64 / 4.0;
        let successes = lambdas.iter().filter(|&&lm| lm >= threshold).count();
        let (lambda_min_mean, lambda_min_std) = mean_std(&lambdas);
        cells.push(PeCell {
            l,
            required_t,
            horizon,
            trials: config.trials,
            successes,
            frequency: successes as f64 / config.trials as f64,
            threshold,
            lambda_min_mean,
            lambda_min_std,
            lambda_min_min: lambdas.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    Ok(PeCampaign { p, delta: config.delta, regime, cells })
}
