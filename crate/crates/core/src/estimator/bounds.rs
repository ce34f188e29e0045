use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::{mat_pow, spectral_norm};
use crate::sysmodel::{
    controllability_gramian, default_decay_rate, markov_params, transient_factor, Horizon, NoiseSpec,
    StateSpaceModel,
};

/// System and noise constants entering the data-dependent error bound at a given `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub p: usize,
    pub l: usize,
    pub delta: f64,
    pub beta: f64,
    pub rho: f64,
    pub phi: f64,
    /// `max(‖B‖, ‖C‖)`
    pub k: f64,
    pub sigma_z: f64,
    /// `‖Σ_w‖`
    pub sigma_w_norm: f64,
    /// `‖F‖_F²`
    pub f_fro_sq: f64,
    /// `‖Γ_w^∞‖`
    pub gamma_w_inf_norm: f64,
    /// `‖C A^L‖`
    pub tail_norm: f64,
    pub sigma_w_sq: f64,
    pub sigma_e_sq: f64,
    pub xi: f64,
}

impl BoundTerms {
    /// `σ_z² + σ_w² β² L + σ_e² β²`, the variance proxy of the sample-complexity result.
    pub fn variance_proxy(&self) -> f64 {
        let b2 = self.beta * self.beta;
        self.sigma_z * self.sigma_z + self.sigma_w_sq * b2 * self.l as f64 + self.sigma_e_sq * b2
    }
}

/// The `L`-independent constants: decay pair `(ρ, φ)`, `‖Γ_w^∞‖`, `‖Σ_w‖`, `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    pub rho: f64,
    pub phi: f64,
    pub k: f64,
    pub sigma_z: f64,
    pub sigma_w_norm: f64,
    pub gamma_w_inf_norm: f64,
}

impl SystemConstants {
    /// `rho` defaults to `(1 + ρ(A)) / 2`.
    pub fn new(model: &StateSpaceModel, noise: &NoiseSpec, rho: Option<f64>) -> Result<Self> {
        model.require_stable()?;
        if noise.n() != model.n() {
            return param(format!("noise dimension {} does not match n = {}", noise.n(), model.n()));
        }
        let rho = match rho {
            Some(r) => r,
            None => default_decay_rate(&model.a)?,
        };
        let phi = transient_factor(&model.a, rho).map_err(|e| match e {
            Error::Precondition(m) => Error::Parameter(m),
            other => other,
        })?;
        let gamma = controllability_gramian(model, &noise.sigma_w, Horizon::Infinite)?;
        Ok(Self {
            rho,
            phi,
            k: spectral_norm(&model.b).max(spectral_norm(&model.c)),
            sigma_z: noise.sigma_z,
            sigma_w_norm: spectral_norm(&noise.sigma_w),
            gamma_w_inf_norm: spectral_norm(&gamma),
        })
    }

    /// Bound constants at memory `l` for inputs bounded by `beta`.
    pub fn terms(&self, model: &StateSpaceModel, l: usize, beta: f64, delta: f64) -> Result<BoundTerms> {
        if !(beta > 0.0) || !beta.is_finite() {
            return param(format!("beta must be positive, got {beta}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return param(format!("delta must lie in (0, 1), got {delta}"));
        }
        let mp = markov_params(model, l)?;
        let f_fro_sq = mp.f.norm_squared();
        let tail_norm = spectral_norm(&(&model.c * mat_pow(&model.a, l)));
        let (rho, phi) = (self.rho, self.phi);
        let geometric = phi * rho.powi(l as i32) / (1.0 - rho);

        let sigma_w_sq = self.sigma_w_norm * f_fro_sq * (1.0 + geometric);
        let sigma_e_sq = self.gamma_w_inf_norm * tail_norm * tail_norm * phi / (1.0 - rho);
        let b2 = beta * beta;
        let xi = self.sigma_z * self.sigma_z + 3.0 * sigma_w_sq * b2 * l as f64 + 2.0 * sigma_e_sq * b2;

        Ok(BoundTerms {
            p: model.p(),
            l,
            delta,
            beta,
            rho,
            phi,
            k: self.k,
            sigma_z: self.sigma_z,
            sigma_w_norm: self.sigma_w_norm,
            f_fro_sq,
            gamma_w_inf_norm: self.gamma_w_inf_norm,
            tail_norm,
            sigma_w_sq,
            sigma_e_sq,
            xi,
        })
    }
}

/// Evaluates the bound constants. `rho` defaults to `(1 + ρ(A)) / 2`.
pub fn bound_terms(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    l: usize,
    beta: f64,
    rho: Option<f64>,
    delta: f64,
) -> Result<BoundTerms> {
    SystemConstants::new(model, noise, rho)?.terms(model, l, beta, delta)
}

/// The two pieces of the ellipsoidal-norm bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    /// `√(p² L Ξ / δ)`
    pub noise_term: f64,
    /// `β² K² φ ρ^L / (1 − ρ) · √(T − L)`
    pub truncation_term: f64,
    pub ellipsoidal: f64,
}

impl BoundValue {
    /// Frobenius-norm variant: the ellipsoidal bound divided by `√λ_min(Ũ'Ũ)`.
    pub fn frobenius(&self, lambda_min: f64) -> f64 {
        if lambda_min > 0.0 {
            self.ellipsoidal / lambda_min.sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Bound on `‖vec(Ĝ) − vec(G)‖_Ṽ` holding with probability `1 − δ` for a
/// trajectory of horizon `T`.
pub fn bound_data_dependent(terms: &BoundTerms, horizon: usize) -> Result<BoundValue> {
    if horizon <= terms.l {
        return param(format!("need T > L, got T = {horizon}, L = {}", terms.l));
    }
    let p2l = (terms.p * terms.p * terms.l) as f64;
    let noise_term = (p2l * terms.xi / terms.delta).sqrt();
    let b2k2 = terms.beta * terms.beta * terms.k * terms.k;
    let truncation_term = b2k2 * terms.phi * terms.rho.powi(terms.l as i32) / (1.0 - terms.rho)
        * ((horizon - terms.l) as f64).sqrt();
    Ok(BoundValue { noise_term, truncation_term, ellipsoidal: noise_term + truncation_term })
}

/// Outcome of the horizon-length selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LChoice {
    pub l: usize,
    /// Right-hand side of the memory condition at the chosen `L`.
    pub required: f64,
}

/// Smallest even `L ≥ max(2n, 2)` with
/// `L ≥ [log(T − L) + log(δ β² K² φ / (p² L V(L) (1 − ρ)))] / log(1/ρ)`,
/// where `V(L)` is [`BoundTerms::variance_proxy`] re-evaluated at each `L`.
#[allow(clippy::too_many_arguments)]
pub fn choose_l(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    beta: f64,
    rho: Option<f64>,
    delta: f64,
    horizon: usize,
    l_max: usize,
) -> Result<LChoice> {
    let start = (2 * model.n()).max(2);
    let constants = SystemConstants::new(model, noise, rho)?;
    let mut last = None;
    let mut l = start;
    while l <= l_max && l < horizon {
        let terms = constants.terms(model, l, beta, delta)?;
        let required = memory_requirement(&terms, horizon);
        if l as f64 >= required {
            return Ok(LChoice { l, required });
        }
        last = Some((l, required));
        l += 2;
    }
    Err(match last {
        Some((l, required)) => Error::Precondition(format!(
            "no even L ≤ {l_max} satisfies the memory condition; at L = {l} it requires L ≥ {required:.3}"
        )),
        None => Error::Parameter(format!("empty L range: start {start}, L_max {l_max}, T {horizon}")),
    })
}

fn memory_requirement(terms: &BoundTerms, horizon: usize) -> f64 {
    let p2l = (terms.p * terms.p * terms.l) as f64;
    let b2k2 = terms.beta * terms.beta * terms.k * terms.k;
    let ratio = terms.delta * b2k2 * terms.phi / (p2l * terms.variance_proxy() * (1.0 - terms.rho));
    (((horizon - terms.l) as f64).ln() + ratio.ln()) / (1.0 / terms.rho).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::random_model;
    use nalgebra::DMatrix;

    fn scalar(a: f64, b: f64, c: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
        )
        .unwrap()
    }

    #[test]
    fn scalar_bound_matches_closed_form() {
        // a = 0.5, b = c = 1, Σ_w = 1, σ_z = 1, β = 1, L = 4, T = 100, δ = 0.1, ρ = 0.75
        let (a, rho, l, delta, horizon) = (0.5f64, 0.75f64, 4usize, 0.1f64, 100usize);
        let noise = NoiseSpec::gaussian(DMatrix::identity(1, 1), 1.0).unwrap();
        let terms = bound_terms(&scalar(a, 1.0, 1.0), &noise, l, 1.0, Some(rho), delta).unwrap();
        let value = bound_data_dependent(&terms, horizon).unwrap();

        // φ = sup (a/ρ)^k = 1; ‖F‖_F² = Σ a^{2i}; Γ^∞ = 1/(1 − a²); ‖CA^L‖ = a^L
        let phi = 1.0;
        let f2: f64 = (0..l).map(|i| a.powi(2 * i as i32)).sum();
        let g_inf = 1.0 / (1.0 - a * a);
        let geo = phi * rho.powi(l as i32) / (1.0 - rho);
        let sw2 = f2 * (1.0 + geo);
        let se2 = g_inf * a.powi(2 * l as i32) * phi / (1.0 - rho);
        let xi = 1.0 + 3.0 * sw2 * l as f64 + 2.0 * se2;
        let expected = (l as f64 * xi / delta).sqrt() + geo * ((horizon - l) as f64).sqrt();

        assert_eq!(terms.phi, 1.0);
        assert!((terms.sigma_w_sq - sw2).abs() < 1e-12);
        assert!((terms.sigma_e_sq - se2).abs() < 1e-12);
        assert!((value.ellipsoidal - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn doubling_delta_scales_noise_term() {
        let m = random_model(3, 2, 0.7, 3).unwrap();
        let noise = NoiseSpec::exponential(3, 1.0, true).unwrap();
        let t1 = bound_terms(&m, &noise, 6, 2.0, None, 0.1).unwrap();
        let t2 = bound_terms(&m, &noise, 6, 2.0, None, 0.2).unwrap();
        let v1 = bound_data_dependent(&t1, 500).unwrap();
        let v2 = bound_data_dependent(&t2, 500).unwrap();
        assert!((v1.noise_term / v2.noise_term - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(v1.truncation_term, v2.truncation_term);
        assert!((v1.frobenius(4.0) - v1.ellipsoidal / 2.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_bound_vanishes_with_memory() {
        let m = random_model(2, 2, 0.6, 1).unwrap();
        let quiet = NoiseSpec::none(2);
        let mut prev = f64::INFINITY;
        for l in [5, 20, 80, 160] {
            let v = bound_data_dependent(&bound_terms(&m, &quiet, l, 1.0, None, 0.1).unwrap(), 10_000).unwrap();
            assert_eq!(v.noise_term, 0.0);
            assert!(v.ellipsoidal < prev);
            prev = v.ellipsoidal;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn preconditions_are_enforced() {
        let m = scalar(0.5, 1.0, 1.0);
        let noise = NoiseSpec::none(1);
        assert!(bound_terms(&m, &noise, 2, 1.0, Some(0.4), 0.1).is_err());
        assert!(bound_terms(&m, &noise, 2, 0.0, None, 0.1).is_err());
        assert!(bound_terms(&m, &noise, 2, 1.0, None, 1.0).is_err());
        assert!(bound_terms(&scalar(1.2, 1.0, 1.0), &noise, 2, 1.0, Some(0.9), 0.1).is_err());
    }

    /// Independent evaluation of the memory condition from raw matrices.
    fn scan_oracle(m: &StateSpaceModel, noise: &NoiseSpec, beta: f64, rho: f64, delta: f64, horizon: usize) -> Option<usize> {
        let n = m.n();
        let p = m.p() as f64;
        let phi = transient_factor(&m.a, rho).unwrap();
        let mut gamma = noise.sigma_w.clone();
        let mut term = noise.sigma_w.clone();
        for _ in 0..20_000 {
            term = &m.a * term * m.a.transpose();
            gamma += &term;
        }
        let k = spectral_norm(&m.b).max(spectral_norm(&m.c));
        for l in (2 * n..=200).step_by(2) {
            let lf = l as f64;
            let f2: f64 = (0..l).map(|i| (&m.c * mat_pow(&m.a, i)).norm_squared()).sum();
            let cal = spectral_norm(&(&m.c * mat_pow(&m.a, l)));
            let sw2 = spectral_norm(&noise.sigma_w) * f2 * (1.0 + phi * rho.powf(lf) / (1.0 - rho));
            let se2 = spectral_norm(&gamma) * cal * cal * phi / (1.0 - rho);
            let v = noise.sigma_z.powi(2) + sw2 * beta * beta * lf + se2 * beta * beta;
            let rhs = (((horizon - l) as f64).ln()
                + (delta * beta * beta * k * k * phi / (p * p * lf * v * (1.0 - rho))).ln())
                / (1.0 / rho).ln();
            if lf >= rhs {
                return Some(l);
            }
        }
        None
    }

    #[test]
    fn choose_l_matches_scan_oracle() {
        let m = random_model(2, 1, 0.9, 12).unwrap();
        let noise = NoiseSpec::exponential(2, 1.0, true).unwrap();
        let rho = default_decay_rate(&m.a).unwrap();
        let beta = 3.0;
        let got = choose_l(&m, &noise, beta, Some(rho), 0.1, 10_000, 200).unwrap();
        assert_eq!(Some(got.l), scan_oracle(&m, &noise, beta, rho, 0.1, 10_000));
    }

    #[test]
    fn choose_l_is_monotone_in_horizon() {
        let m = random_model(2, 2, 0.95, 2).unwrap();
        let noise = NoiseSpec::gaussian(DMatrix::identity(2, 2) * 0.01, 0.1).unwrap();
        let mut prev = 0;
        for horizon in [300, 1_000, 10_000, 100_000, 1_000_000] {
            let l = choose_l(&m, &noise, 2.0, None, 0.1, horizon, 400).unwrap().l;
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn fast_decay_returns_minimal_memory() {
        let m = StateSpaceModel::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 1), DMatrix::identity(1, 2)).unwrap();
        let noise = NoiseSpec::gaussian(DMatrix::identity(2, 2), 1.0).unwrap();
        let got = choose_l(&m, &noise, 1.0, Some(1e-6), 0.1, 10_000, 50).unwrap();
        assert_eq!(got.l, 4);
    }

    #[test]
    fn infeasible_range_is_reported() {
        let m = scalar(0.99, 1.0, 1.0);
        let noise = NoiseSpec::gaussian(DMatrix::identity(1, 1) * 1e-6, 1e-3).unwrap();
        let err = choose_l(&m, &noise, 1.0, None, 0.1, 100_000, 6).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
