//! Seeded Monte Carlo harness: configuration, estimation-error sweeps,
//! excitation campaigns and the oracle validation suite.
//!
//! Every random stream is derived from `base_seed` and the position of the
//! work item in the grid, so results do not depend on the thread count.

mod pe;
mod sweep;
pub mod validation;

pub use pe::{run_pe_campaign, PeCampaign, PeCell};
pub use sweep::{run_double_descent, run_figure1, CellSummary, SweepResult, TrialRecord};
pub use validation::{run_validation, ValidationReport};

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{rng_from_seed, standard_normal};
use crate::sysmodel::{random_model_with_rng, InputDesign, NoiseSpec, StateSpaceModel};

fn default_trials() -> usize {
    20
}

fn default_delta() -> f64 {
    0.1
}

/// `100, 150, …, 1600`.
pub fn default_t_grid() -> Vec<usize> {
    (100..=1600).step_by(50).collect()
}

fn default_output() -> String {
    "results.csv".to_string()
}

fn default_rate() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_scale() -> f64 {
    1.0
}

/// Noise parameters. Exponential noise uses the same rate for every entry of
/// `w_t` and for `z_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Exponential {
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default = "default_true")]
        centered: bool,
    },
    /// Standard deviations: `Σ_w = sigma_w² I`.
    Gaussian { sigma_w: f64, sigma_z: f64 },
    None,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::Exponential { rate: 1.0, centered: true }
    }
}

impl NoiseConfig {
    pub fn to_spec(&self, n: usize) -> Result<NoiseSpec> {
        match *self {
            NoiseConfig::Exponential { rate, centered } => NoiseSpec::exponential(n, rate, centered),
            NoiseConfig::Gaussian { sigma_w, sigma_z } => {
                if !(sigma_w >= 0.0) {
                    return param(format!("sigma_w must be nonnegative, got {sigma_w}"));
                }
                NoiseSpec::gaussian(DMatrix::identity(n, n) * (sigma_w * sigma_w), sigma_z)
            }
            NoiseConfig::None => Ok(NoiseSpec::none(n)),
        }
    }
}

/// Input parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    #[default]
    Gaussian,
    /// Uniform on a sphere; the radius defaults to `√p`.
    Sphere {
        #[serde(default)]
        radius: Option<f64>,
    },
    /// The same vector with every entry equal to `value` at every step.
    Constant { value: f64 },
}

impl InputConfig {
    /// Design for `p`-dimensional inputs; constant designs are materialized for `len` steps.
    pub fn to_design(&self, p: usize, len: usize) -> InputDesign {
        match *self {
            InputConfig::Gaussian => InputDesign::GaussianIsotropic,
            InputConfig::Sphere { radius } => InputDesign::BoundedSphere { radius: radius.unwrap_or((p as f64).sqrt()) },
            InputConfig::Constant { value } => InputDesign::FixedSequence(vec![DVector::from_element(p, value); len]),
        }
    }
}

/// How the per-trial system is drawn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Diagonal `A` with eigenvalues uniform on `[0, ρ]`, Gaussian `B`, `C`.
    #[default]
    RandomDiagonal,
    /// Strictly lower-triangular `A` with `N(0, scale²)` entries; `ρ` only labels the cell.
    Nilpotent {
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

impl ModelConfig {
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, p: usize, rho: f64, rng: &mut R) -> Result<StateSpaceModel> {
        let mut model = random_model_with_rng(n, p, rho, rng)?;
        if let ModelConfig::Nilpotent { scale } = *self {
            model.a = DMatrix::from_fn(n, n, |i, j| if i > j { scale * standard_normal(rng) } else { 0.0 });
        }
        Ok(model)
    }

    pub fn draw_seeded(&self, n: usize, p: usize, rho: f64, seed: u64) -> Result<StateSpaceModel> {
        self.draw(n, p, rho, &mut rng_from_seed(seed))
    }
}

/// Knobs for `run_validation`; the defaults match the acceptance settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    pub autocov_draws: usize,
    /// Number of lags checked after `L`: pairs `τ, τ' ∈ [L, L + autocov_span]`.
    pub autocov_span: usize,
    pub m4_directions: usize,
    pub m4_samples: usize,
    pub prediction_resamples: usize,
    /// Horizon of the coverage trials; defaults to the first `T_values` entry.
    pub horizon: Option<usize>,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            autocov_draws: 1_000_000,
            autocov_span: 4,
            m4_directions: 100,
            m4_samples: 100_000,
            prediction_resamples: 100_000,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub rho_values: Vec<f64>,
    #[serde(rename = "L_values")]
    pub l_values: Vec<usize>,
    #[serde(rename = "T_values", default = "default_t_grid")]
    pub t_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output_path: String,
    #[serde(default)]
    pub model: ModelConfig,
    /// Fill `runtime_ms`; off by default so outputs stay byte-identical.
    #[serde(default)]
    pub record_runtime: bool,
    /// Fourth-moment constant for the excitation requirement (9 for Gaussian inputs).
    #[serde(default = "default_m4")]
    pub m4: f64,
    /// Horizon for the excitation campaign; defaults to the required `T`.
    #[serde(default, rename = "pe_T")]
    pub pe_horizon: Option<usize>,
    #[serde(default)]
    pub validation: ValidationSettings,
}

fn default_m4() -> f64 {
    9.0
}

impl ExperimentConfig {
    /// The synthetic benchmark: `n = 5`, `p = 3`, centered unit-rate exponential noise,
    /// Gaussian inputs, 20 trials over the default `T` grid.
    pub fn figure1_default() -> Self {
        Self {
            n: 5,
            p: 3,
            rho_values: vec![0.5, 0.99],
            l_values: vec![12, 50],
            t_values: default_t_grid(),
            trials: default_trials(),
            noise: NoiseConfig::default(),
            input: InputConfig::Gaussian,
            delta: default_delta(),
            base_seed: 0,
            output_path: default_output(),
            model: ModelConfig::RandomDiagonal,
            record_runtime: false,
            m4: default_m4(),
            pe_horizon: None,
            validation: ValidationSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return param(format!("dimensions must be positive, got n={}, p={}", self.n, self.p));
        }
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if self.rho_values.is_empty() || self.l_values.is_empty() || self.t_values.is_empty() {
            return param("rho_values, L_values and T_values must be nonempty");
        }
        if let Some(r) = self.rho_values.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return param(format!("rho values must lie in (0, 1), got {r}"));
        }
        if self.l_values.contains(&0) {
            return param("L values must be positive");
        }
        let l_max = *self.l_values.iter().max().expect("nonempty");
        if let Some(t) = self.t_values.iter().find(|t| **t <= l_max) {
            return param(format!("every T must exceed max L = {l_max}, got T = {t}"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return param(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        self.noise.to_spec(self.n)?;
        if let InputConfig::Sphere { radius: Some(r) } = self.input {
            if !(r > 0.0 && r.is_finite()) {
                return param(format!("sphere radius must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn max_horizon(&self) -> usize {
        *self.t_values.iter().max().expect("validated config has T values")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_config() {
        let mut cfg = ExperimentConfig::figure1_default();
        cfg.noise = NoiseConfig::Gaussian { sigma_w: 0.3, sigma_z: 0.1 };
        cfg.input = InputConfig::Sphere { radius: Some(2.0) };
        cfg.model = ModelConfig::Nilpotent { scale: 0.5 };
        cfg.pe_horizon = Some(1000);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"n": 5, "p": 3, "rho_values": [0.5], "L_values": [12]}"#).unwrap();
        assert_eq!(cfg.trials, 20);
        assert_eq!(cfg.t_values.first(), Some(&100));
        assert_eq!(cfg.t_values.last(), Some(&1600));
        assert_eq!(cfg.t_values.len(), 31);
        assert_eq!(cfg.noise, NoiseConfig::Exponential { rate: 1.0, centered: true });
        assert_eq!(cfg.delta, 0.1);
    }

    #[test]
    fn invalid_grids_rejected() {
        let base = ExperimentConfig::figure1_default();
        let mut c = base.clone();
        c.trials = 0;
        assert!(matches!(c.validate(), Err(Error::Parameter(_))));
        let mut c = base.clone();
        c.t_values = vec![50];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.rho_values = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = base;
        c.delta = 0.0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"n": 5}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n":1,"p":1,"rho_values":[0.5],"L_values":[1],"bogus":1}"#).is_err());
    }

    #[test]
    fn nilpotent_family_is_strictly_lower_triangular() {
        let m = ModelConfig::Nilpotent { scale: 1.0 }.draw_seeded(4, 2, 0.5, 3).unwrap();
        for i in 0..4 {
            for j in i..4 {
                assert_eq!(m.a[(i, j)], 0.0);
            }
        }
        assert!(crate::linalg::mat_pow(&m.a, 4).amax() < 1e-12);
    }
}
