//! The system `x_{t+1} = A x_t + B u_t + w_t`, `y_t = u_t' C x_t + z_t`:
//! model definition, simulation, Markov parameters and stability constants.

mod design;
mod simulate;
mod stability;

pub use design::{InputDesign, NoiseFamily, NoiseSpec};
pub use simulate::{simulate, simulate_with_rng, Diagnostics, Trajectory};
pub use stability::{
    controllability_gramian, default_decay_rate, input_gramian, transient_factor, Horizon,
};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{param, Result};
use crate::linalg::spectral_radius;
use crate::rng::{rng_from_seed, standard_normal};

/// The triple `(A, B, C)` with state dimension `n` and input dimension `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return param(format!("A must be square and nonempty, got {:?}", a.shape()));
        }
        let p = b.ncols();
        if p == 0 || b.nrows() != n {
            return param(format!("B must be {n}×p with p ≥ 1, got {:?}", b.shape()));
        }
        if c.shape() != (p, n) {
            return param(format!("C must be {p}×{n}, got {:?}", c.shape()));
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    /// Fails unless `ρ(A) < 1`, which every bound evaluation requires.
    pub fn require_stable(&self) -> Result<f64> {
        let r = self.spectral_radius();
        if r >= 1.0 {
            return Err(crate::Error::Precondition(format!(
                "spectral radius {r} ≥ 1; bounds need a strictly stable A"
            )));
        }
        Ok(r)
    }

    /// `(T A T⁻¹, T B, C T⁻¹)`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| crate::Error::Parameter("similarity transform is singular".into()))?;
        Self::new(t * &self.a * &t_inv, t * &self.b, &self.c * &t_inv)
    }
}

/// `G = [CB, CAB, …, CA^{L-1}B]` (p × pL) and `F = [C, CA, …, CA^{L-1}]` (p × nL).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovParams {
    pub g: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub l: usize,
}

impl MarkovParams {
    /// Wraps an estimated `G`; `F` is unknown and left empty.
    pub fn from_g(g: DMatrix<f64>) -> Result<Self> {
        let p = g.nrows();
        if p == 0 || !g.ncols().is_multiple_of(p) || g.ncols() == 0 {
            return param(format!("G must be p × pL, got {:?}", g.shape()));
        }
        let l = g.ncols() / p;
        Ok(Self { g, f: DMatrix::zeros(p, 0), l })
    }

    pub fn p(&self) -> usize {
        self.g.nrows()
    }

    /// Block `G_i = C A^i B`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let p = self.p();
        self.g.columns(i * p, p).into_owned()
    }
}

pub fn markov_params(model: &StateSpaceModel, l: usize) -> Result<MarkovParams> {
    if l == 0 {
        return param("L must be at least 1");
    }
    let (n, p) = (model.n(), model.p());
    let mut g = DMatrix::zeros(p, p * l);
    let mut f = DMatrix::zeros(p, n * l);
    // c_pow holds C A^i
    let mut c_pow = model.c.clone();
    for i in 0..l {
        f.columns_mut(i * n, n).copy_from(&c_pow);
        g.columns_mut(i * p, p).copy_from(&(&c_pow * &model.b));
        c_pow = &c_pow * &model.a;
    }
    Ok(MarkovParams { g, f, l })
}

/// Random model as used in the synthetic experiments: diagonal `A` with
/// eigenvalues uniform on `[0, rho]`, `B ~ N(0, 1/n)`, `C ~ N(0, 1/p)` entrywise.
pub fn random_model(n: usize, p: usize, rho: f64, seed: u64) -> Result<StateSpaceModel> {
    let mut rng = rng_from_seed(seed);
    random_model_with_rng(n, p, rho, &mut rng)
}

pub fn random_model_with_rng<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rho: f64,
    rng: &mut R,
) -> Result<StateSpaceModel> {
    if n == 0 || p == 0 {
        return param(format!("dimensions must be positive, got n={n}, p={p}"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return param(format!("rho must lie in (0, 1), got {rho}"));
    }
    let eig: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * rho).collect();
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
    let sb = (1.0 / n as f64).sqrt();
    let b = DMatrix::from_fn(n, p, |_, _| sb * standard_normal(rng));
    let sc = (1.0 / p as f64).sqrt();
    let c = DMatrix::from_fn(p, n, |_, _| sc * standard_normal(rng));
    StateSpaceModel::new(a, b, c)
}
