//! Persistence of excitation: empirical certificates for the design Gram
//! matrix, the sample sizes that guarantee them, and the fourth-moment constant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::estimator::DesignSystem;
use crate::linalg::{kron_vec, sym_eigenvalues};
use crate::par::map_indexed;
use crate::rng::{derive_seed, rng_from_seed, trial_rng, uniform_sphere};
use crate::sysmodel::InputDesign;

/// Smallest eigenvalue of a Gram matrix, with rounding noise below zero clamped.
pub fn min_eig_gram(gram: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(gram).first().cloned().unwrap_or(0.0).max(0.0)
}

/// `λ_min(Ũ'Ũ)`.
pub fn min_eig_design(design: &DesignSystem) -> f64 {
    min_eig_gram(&design.gram())
}

/// Which input assumption the sample-size requirement is computed under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// Inputs bounded by `‖u_t‖ ≤ beta`.
    BoundedA { beta: f64 },
    /// Fourth moments along every direction bounded by `m4`.
    FourthMomentB { m4: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::BoundedA { .. } => "bounded_a",
            Regime::FourthMomentB { .. } => "fourth_moment_b",
        }
    }

    /// `(γ₁, γ₂)` of the shared requirement `T − L ≳ γ₁ (L+1)(log(2(L+1)/δ) + γ₂ p² L)`.
    pub fn gammas(&self, p: usize, l: usize, delta: f64) -> (f64, f64) {
        let p2l = (p * p * l) as f64;
        match *self {
            Regime::BoundedA { beta } => (beta.powi(4) * l as f64, 1.0),
            Regime::FourthMomentB { m4 } => (m4, (1.0 + 16.0 * p2l / delta).ln()),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        param(format!("delta must lie in (0, 1), got {delta}"))
    }
}

/// Smallest `T − L` for which `λ_min(Ũ'Ũ) ≥ (T − L)/4` holds with probability `1 − δ`.
///
/// Bounded inputs: `8 (L+1) L β⁴ (log(2(L+1)/δ) + p² L log 9)`.
/// Fourth-moment inputs: `32 (L+1) m₄ (log(2(L+1)/δ) + p² L log(1 + 16 p² L/δ))`.
pub fn pe_required_samples(p: usize, l: usize, delta: f64, regime: Regime) -> Result<u64> {
    check_delta(delta)?;
    if p == 0 || l == 0 {
        return param("p and L must be positive");
    }
    match regime {
        Regime::BoundedA { beta } => pe_required_samples_eps(p, l, delta, beta, 0.5),
        Regime::FourthMomentB { m4 } => {
            if !(m4 > 0.0) {
                return param(format!("m4 must be positive, got {m4}"));
            }
            let lp1 = (l + 1) as f64;
            let p2l = (p * p * l) as f64;
            let value = 32.0 * lp1 * m4 * ((2.0 * lp1 / delta).ln() + p2l * (1.0 + 16.0 * p2l / delta).ln());
            Ok(value.ceil() as u64)
        }
    }
}

/// Bounded-input requirement for the two-sided level `λ_min ≥ (1 − ε)² (T − L)`:
/// `2 (L+1) L β⁴ / ε² · (log(2(L+1)/δ) + p² L log 9)`.
pub fn pe_required_samples_eps(p: usize, l: usize, delta: f64, beta: f64, eps: f64) -> Result<u64> {
    check_delta(delta)?;
    if !(beta > 0.0) {
        return param(format!("beta must be positive, got {beta}"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return param(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    let lp1 = (l + 1) as f64;
    let lf = l as f64;
    let p2l = (p * p * l) as f64;
    let value = 2.0 * lp1 * lf * beta.powi(4) / (eps * eps) * ((2.0 * lp1 / delta).ln() + p2l * 9f64.ln());
    Ok(value.ceil() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeCertificate {
    pub lambda_min: f64,
    pub threshold: f64,
    pub passed: bool,
    pub regime: String,
    #[serde(rename = "required_T")]
    pub required_t: u64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
    /// Whether the trajectory is at least `required_T` long.
    pub meets_requirement: bool,
}

/// Certificate from a precomputed `λ_min` for a trajectory of horizon `T` and memory `L`.
pub fn pe_certificate_from_parts(
    lambda_min: f64,
    p: usize,
    l: usize,
    horizon: usize,
    delta: f64,
    regime: Regime,
) -> Result<PeCertificate> {
    let required = pe_required_samples(p, l, delta, regime)?;
    let (gamma1, gamma2) = regime.gammas(p, l, delta);
    let samples = horizon.saturating_sub(l);
    let threshold = samples as f64 / 4.0;
    Ok(PeCertificate {
        lambda_min,
        threshold,
        passed: lambda_min >= threshold,
        regime: regime.name().to_string(),
        required_t: required + l as u64,
        gamma1,
        gamma2,
        delta,
        meets_requirement: samples as u64 >= required,
    })
}

pub fn pe_certificate(design: &DesignSystem, delta: f64, regime: Regime) -> Result<PeCertificate> {
    pe_certificate_from_parts(min_eig_design(design), design.p, design.l, design.horizon, delta, regime)
}

/// Monte Carlo estimate of `E[(v'(ubar ⊗ u))⁴]` along sampled unit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M4Estimate {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Largest per-direction estimate, the proxy for the supremum.
    pub max_estimate: f64,
}

/// Fourth moment of `v'(ubar ⊗ u)` from `n_samples` independent draws of
/// `(u_t, …, u_{t-L+1}, u_{t+1})`. Returns `(mean, standard error)`.
pub fn fourth_moment_along(
    inputs: &InputDesign,
    p: usize,
    l: usize,
    direction: &DVector<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if direction.len() != p * p * l {
        return param(format!("direction has length {}, expected p²L = {}", direction.len(), p * p * l));
    }
    if n_samples == 0 {
        return param("need at least one sample");
    }
    if let InputDesign::FixedSequence(seq) = inputs {
        if seq.is_empty() {
            return param("fixed input sequence is empty");
        }
    }
    inputs.validate(p, 0)?;
    let mut rng = rng_from_seed(seed);
    let cycle = match inputs {
        InputDesign::FixedSequence(seq) => seq.len(),
        _ => usize::MAX,
    };
    let mut counter = 0usize;
    let mut next = |rng: &mut _| {
        let u = inputs.input_at(counter % cycle, p, rng);
        counter += 1;
        u
    };
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut ubar = vec![0.0; p * l];
    for _ in 0..n_samples {
        for k in 0..l {
            ubar[k * p..(k + 1) * p].copy_from_slice(next(&mut rng).as_slice());
        }
        let u = next(&mut rng);
        let feature = kron_vec(&ubar, u.as_slice());
        let proj: f64 = feature.iter().zip(direction.iter()).map(|(a, b)| a * b).sum();
        let q = proj.powi(4);
        sum += q;
        sum_sq += q * q;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}

/// Directions are uniform on the unit sphere in `ℝ^{p²L}`; each direction uses
/// its own derived stream.
pub fn estimate_m4(
    inputs: &InputDesign,
    p: usize,
    l: usize,
    n_directions: usize,
    n_samples: usize,
    seed: u64,
) -> Result<M4Estimate> {
    if n_directions == 0 || n_samples == 0 {
        return param("need at least one direction and one sample");
    }
    let dim = p * p * l;
    let results = map_indexed(n_directions, |d| {
        let mut rng = trial_rng(seed, &[0, d as u64]);
        let v = DVector::from_vec(uniform_sphere(&mut rng, dim, 1.0));
        fourth_moment_along(inputs, p, l, &v, n_samples, derive_seed(seed, &[1, d as u64]))
    });
    let mut estimates = Vec::with_capacity(n_directions);
    let mut std_errors = Vec::with_capacity(n_directions);
    for r in results {
        let (m, se) = r?;
        estimates.push(m);
        std_errors.push(se);
    }
    let max_estimate = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(M4Estimate { estimates, std_errors, max_estimate })
}
