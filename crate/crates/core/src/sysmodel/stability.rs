use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{param, Error, Result};
use crate::linalg::{spectral_norm, spectral_radius};

const TAIL_TOLERANCE: f64 = 1e-12;
const MIN_TERMS: usize = 64;
const MAX_TERMS: usize = 1 << 22;
const GRAMIAN_MAX_ITERS: usize = 100_000;

/// `(1 + ρ(A)) / 2`, halfway between the spectral radius and one.
pub fn default_decay_rate(a: &DMatrix<f64>) -> Result<f64> {
    let r = spectral_radius(a);
    if r >= 1.0 {
        return Err(Error::Precondition(format!("spectral radius {r} ≥ 1")));
    }
    Ok(0.5 * (1.0 + r))
}

/// `φ(A, ρ) = sup_k ‖A^k‖ / ρ^k`.
///
/// The supremum is taken over `k ≤ K`, where `K` is large enough that
/// `(ρ(A)/ρ)^K` falls below `1e-12`; `K` is doubled until `‖A^K‖/ρ^K` also
/// drops below the running supremum.
pub fn transient_factor(a: &DMatrix<f64>, rho: f64) -> Result<f64> {
    if !a.is_square() {
        return param("A must be square");
    }
    if !(rho > 0.0 && rho < 1.0) {
        return param(format!("decay rate must lie in (0, 1), got {rho}"));
    }
    let r = spectral_radius(a);
    if rho <= r {
        return Err(Error::Precondition(format!(
            "decay rate {rho} does not exceed spectral radius {r}"
        )));
    }
    let ratio = r / rho;
    let mut k_max = if ratio > 0.0 {
        let k = (TAIL_TOLERANCE.ln() / ratio.ln()).ceil();
        MIN_TERMS.max(k as usize)
    } else {
        MIN_TERMS
    };

    let scaled = a / rho;
    let mut power = DMatrix::identity(a.nrows(), a.ncols());
    let mut sup: f64 = 1.0;
    let mut k = 0;
    loop {
        while k < k_max {
            power = &power * &scaled;
            k += 1;
            sup = sup.max(spectral_norm(&power));
        }
        let tail = spectral_norm(&power);
        if tail < sup || tail == 0.0 {
            return Ok(sup);
        }
        if k_max >= MAX_TERMS {
            return Err(Error::Numerical {
                message: format!("transient factor did not settle within {k_max} powers"),
                residual: tail,
            });
        }
        k_max *= 2;
    }
}

/// Summation horizon for a Gramian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    /// Terms `i = 0..=T`.
    Finite(usize),
    Infinite,
}

/// `Σ_i A^i Σ (A^i)'` over the horizon.
///
/// The infinite sum is the fixed point of `Γ = A Γ A' + Σ`, found by iterating
/// from `Γ = Σ`.
pub fn controllability_gramian(
    model: &StateSpaceModel,
    source: &DMatrix<f64>,
    horizon: Horizon,
) -> Result<DMatrix<f64>> {
    let a = &model.a;
    let n = model.n();
    if source.shape() != (n, n) {
        return param(format!("source covariance must be {n}×{n}, got {:?}", source.shape()));
    }
    match horizon {
        Horizon::Finite(t) => {
            let mut total = source.clone();
            let mut term = source.clone();
            for _ in 0..t {
                term = a * &term * a.transpose();
                total += &term;
            }
            Ok(total)
        }
        Horizon::Infinite => {
            model.require_stable()?;
            let scale = source.norm();
            if scale == 0.0 {
                return Ok(DMatrix::zeros(n, n));
            }
            let at = a.transpose();
            let mut gram = source.clone();
            let mut residual = f64::INFINITY;
            for _ in 0..GRAMIAN_MAX_ITERS {
                let next = a * &gram * &at + source;
                residual = (&next - &gram).norm() / next.norm();
                gram = next;
                if residual <= 1e-15 {
                    return Ok(gram);
                }
            }
            if residual <= TAIL_TOLERANCE {
                return Ok(gram);
            }
            Err(Error::Numerical {
                message: format!("Gramian fixed point not reached in {GRAMIAN_MAX_ITERS} iterations"),
                residual,
            })
        }
    }
}

/// Second moment of the input-driven part of the state reached after
/// `inputs`, i.e. `v v'` with `v = Σ_i A^i B u_{k-1-i}` for `k = inputs.len()`.
pub fn input_gramian(model: &StateSpaceModel, inputs: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let p = model.p();
    let mut v = DVector::zeros(model.n());
    for u in inputs {
        if u.len() != p {
            return param(format!("input of length {} where p = {p}", u.len()));
        }
        v = &model.a * v + &model.b * u;
    }
    Ok(&v * v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_pow;
    use crate::sysmodel::random_model;

    fn scalar(a: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn nilpotent_transient_factor() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!((transient_factor(&a, 0.5).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normal_matrices_have_unit_factor() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -0.6, 0.1]));
        assert_eq!(transient_factor(&a, 0.7).unwrap(), 1.0);
        assert_eq!(transient_factor(&DMatrix::zeros(3, 3), 0.2).unwrap(), 1.0);
    }

    #[test]
    fn transient_factor_dominates_powers() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 2.0, 0.0, 0.8]);
        let rho = 0.95;
        let phi = transient_factor(&a, rho).unwrap();
        assert!(phi > 1.0);
        for k in 0..400 {
            let lhs = spectral_norm(&mat_pow(&a, k));
            assert!(lhs <= phi * rho.powi(k as i32) * (1.0 + 1e-12), "k = {k}");
        }
    }

    #[test]
    fn transient_factor_preconditions() {
        let a = DMatrix::from_element(1, 1, 0.5);
        assert!(matches!(transient_factor(&a, 0.5), Err(Error::Precondition(_))));
        assert!(matches!(transient_factor(&a, 0.4), Err(Error::Precondition(_))));
        assert!(matches!(transient_factor(&a, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn default_rate_is_midpoint() {
        let a = DMatrix::from_element(1, 1, -0.6);
        assert!((default_decay_rate(&a).unwrap() - 0.8).abs() < 1e-15);
        assert!(default_decay_rate(&DMatrix::from_element(1, 1, 1.0)).is_err());
    }

    #[test]
    fn scalar_gramian_is_geometric() {
        let g = controllability_gramian(&scalar(0.5), &DMatrix::identity(1, 1), Horizon::Infinite).unwrap();
        assert!((g[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let f = controllability_gramian(&scalar(0.5), &DMatrix::identity(1, 1), Horizon::Finite(2)).unwrap();
        assert!((f[(0, 0)] - 1.3125).abs() < 1e-15);
    }

    #[test]
    fn gramian_edge_cases() {
        let m = random_model(3, 2, 0.9, 5).unwrap();
        let zero = DMatrix::zeros(3, 3);
        assert_eq!(controllability_gramian(&m, &zero, Horizon::Infinite).unwrap(), zero);
        assert_eq!(controllability_gramian(&m, &zero, Horizon::Finite(7)).unwrap(), zero);
        let dead = StateSpaceModel::new(DMatrix::zeros(3, 3), m.b.clone(), m.c.clone()).unwrap();
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(controllability_gramian(&dead, &s, Horizon::Infinite).unwrap(), s);
    }

    #[test]
    fn gramian_fixed_point_residual() {
        for seed in 0..5 {
            let m = random_model(4, 2, 0.99, seed).unwrap();
            let s = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.2 });
            let g = controllability_gramian(&m, &s, Horizon::Infinite).unwrap();
            let r = (&m.a * &g * m.a.transpose() + &s - &g).norm() / g.norm();
            assert!(r <= 1e-10, "seed {seed}: {r}");
        }
    }

    #[test]
    fn unstable_infinite_gramian_rejected() {
        assert!(controllability_gramian(&scalar(1.1), &DMatrix::identity(1, 1), Horizon::Infinite).is_err());
    }

    #[test]
    fn input_gramian_matches_state() {
        let m = random_model(3, 2, 0.8, 2).unwrap();
        let inputs: Vec<_> = (0..6).map(|t| DVector::from_vec(vec![t as f64, 1.0 - t as f64])).collect();
        let mut x = DVector::zeros(3);
        for u in &inputs {
            x = &m.a * x + &m.b * u;
        }
        let g = input_gramian(&m, &inputs).unwrap();
        assert!((g - &x * x.transpose()).amax() < 1e-12);
    }
}
