use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{param, Result};
use crate::linalg::{is_symmetric_psd, psd_sqrt};
use crate::rng::{exponential, standard_normal, uniform_sphere};

/// Shape of the scalar noise draws before scaling by the covariance factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    /// Density `rate * exp(-rate x)` on `x ≥ 0`; `centered` subtracts the mean `1/rate`.
    Exponential { rate: f64, centered: bool },
}

impl NoiseFamily {
    /// Unit-variance draw. Zero mean except for uncentered exponential noise (mean 1).
    pub fn standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Gaussian => standard_normal(rng),
            NoiseFamily::Exponential { rate, centered } => rate * exponential(rng, rate, centered),
        }
    }
}

/// Process noise covariance `Σ_w`, measurement noise std `σ_z` and the draw family.
///
/// Draws are `w_t = Σ_w^{1/2} ξ_t` and `z_t = σ_z ξ'_t` with unit-variance `ξ`.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub sigma_w: DMatrix<f64>,
    pub sigma_z: f64,
    pub family: NoiseFamily,
    sqrt_w: DMatrix<f64>,
}

impl PartialEq for NoiseSpec {
    fn eq(&self, other: &Self) -> bool {
        self.sigma_w == other.sigma_w && self.sigma_z == other.sigma_z && self.family == other.family
    }
}

impl NoiseSpec {
    pub fn new(sigma_w: DMatrix<f64>, sigma_z: f64, family: NoiseFamily) -> Result<Self> {
        if !is_symmetric_psd(&sigma_w, 1e-10) {
            return param("sigma_w must be symmetric positive semidefinite");
        }
        if !(sigma_z >= 0.0) || !sigma_z.is_finite() {
            return param(format!("sigma_z must be a nonnegative number, got {sigma_z}"));
        }
        if let NoiseFamily::Exponential { rate, .. } = family {
            if !(rate > 0.0) || !rate.is_finite() {
                return param(format!("exponential rate must be positive, got {rate}"));
            }
        }
        let sqrt_w = psd_sqrt(&sigma_w);
        Ok(Self { sigma_w, sigma_z, family, sqrt_w })
    }

    pub fn none(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n), 0.0, NoiseFamily::Gaussian).expect("zero noise is valid")
    }

    pub fn gaussian(sigma_w: DMatrix<f64>, sigma_z: f64) -> Result<Self> {
        Self::new(sigma_w, sigma_z, NoiseFamily::Gaussian)
    }

    /// Every entry of `w_t` and `z_t` is an independent exponential(rate) draw,
    /// so `Σ_w = I / rate²` and `σ_z = 1 / rate`.
    pub fn exponential(n: usize, rate: f64, centered: bool) -> Result<Self> {
        Self::new(
            DMatrix::identity(n, n) / (rate * rate),
            1.0 / rate,
            NoiseFamily::Exponential { rate, centered },
        )
    }

    pub fn n(&self) -> usize {
        self.sigma_w.nrows()
    }

    /// Factor `Σ_w^{1/2}` applied to unit-variance draws.
    pub fn sqrt_w(&self) -> &DMatrix<f64> {
        &self.sqrt_w
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_z == 0.0 && self.sigma_w.amax() == 0.0
    }

    pub fn draw_w<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.n();
        let xi = DVector::from_fn(n, |_, _| self.family.standardized(rng));
        &self.sqrt_w * xi
    }

    pub fn draw_z<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sigma_z * self.family.standardized(rng)
    }
}

/// How the input sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDesign {
    /// `u_t ~ N(0, I_p)` i.i.d.
    GaussianIsotropic,
    /// Uniform on the sphere of the given radius; radius `√p` gives identity covariance.
    BoundedSphere { radius: f64 },
    /// A recorded sequence `u_0, u_1, …`, consumed in order.
    FixedSequence(Vec<DVector<f64>>),
}

impl InputDesign {
    pub fn unit_sphere_isotropic(p: usize) -> Self {
        InputDesign::BoundedSphere { radius: (p as f64).sqrt() }
    }

    /// Norm bound `β` when the design guarantees one.
    pub fn beta(&self) -> Option<f64> {
        match self {
            InputDesign::GaussianIsotropic => None,
            InputDesign::BoundedSphere { radius } => Some(*radius),
            InputDesign::FixedSequence(seq) => Some(seq.iter().map(|u| u.norm()).fold(0.0, f64::max)),
        }
    }

    pub fn validate(&self, p: usize, needed: usize) -> Result<()> {
        match self {
            InputDesign::GaussianIsotropic => Ok(()),
            InputDesign::BoundedSphere { radius } if *radius > 0.0 && radius.is_finite() => Ok(()),
            InputDesign::BoundedSphere { radius } => param(format!("sphere radius must be positive, got {radius}")),
            InputDesign::FixedSequence(seq) => {
                if seq.len() < needed {
                    return param(format!("fixed input sequence has {} vectors, need {needed}", seq.len()));
                }
                if let Some(bad) = seq.iter().find(|u| u.len() != p) {
                    return param(format!("input vector of length {} where p = {p}", bad.len()));
                }
                Ok(())
            }
        }
    }

    /// Input at time `t`. Random designs ignore `t` and draw from `rng`.
    pub fn input_at<R: Rng + ?Sized>(&self, t: usize, p: usize, rng: &mut R) -> DVector<f64> {
        match self {
            InputDesign::GaussianIsotropic => DVector::from_fn(p, |_, _| standard_normal(rng)),
            InputDesign::BoundedSphere { radius } => DVector::from_vec(uniform_sphere(rng, p, *radius)),
            InputDesign::FixedSequence(seq) => seq[t].clone(),
        }
    }
}
