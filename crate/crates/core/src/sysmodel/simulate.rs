use nalgebra::DVector;
use rand::Rng;

use super::{InputDesign, NoiseSpec, StateSpaceModel};
use crate::error::{param, Result};
use crate::rng::rng_from_seed;

/// Hidden quantities recorded alongside a simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `x_0 … x_T`
    pub x: Vec<DVector<f64>>,
    /// `w_0 … w_T`
    pub w: Vec<DVector<f64>>,
    /// `z_0 … z_T`
    pub z: Vec<f64>,
}

/// Inputs `u_0 … u_T` and outputs `y_0 … y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: Vec<DVector<f64>>,
    pub y: Vec<f64>,
    pub diagnostics: Option<Diagnostics>,
}

impl Trajectory {
    pub fn new(u: Vec<DVector<f64>>, y: Vec<f64>) -> Result<Self> {
        if u.is_empty() || u.len() != y.len() {
            return param(format!("need matching nonempty u and y, got {} and {}", u.len(), y.len()));
        }
        let p = u[0].len();
        if p == 0 || u.iter().any(|v| v.len() != p) {
            return param("inputs must share a positive dimension");
        }
        Ok(Self { u, y, diagnostics: None })
    }

    /// Horizon `T`; samples are indexed `0..=T`.
    pub fn horizon(&self) -> usize {
        self.y.len() - 1
    }

    pub fn p(&self) -> usize {
        self.u[0].len()
    }

    /// The first `t + 1` samples.
    pub fn prefix(&self, t: usize) -> Trajectory {
        let k = (t + 1).min(self.y.len());
        Trajectory {
            u: self.u[..k].to_vec(),
            y: self.y[..k].to_vec(),
            diagnostics: self.diagnostics.as_ref().map(|d| Diagnostics {
                x: d.x[..k].to_vec(),
                w: d.w[..k].to_vec(),
                z: d.z[..k].to_vec(),
            }),
        }
    }

    /// Largest input norm, the empirical `β`.
    pub fn max_input_norm(&self) -> f64 {
        self.u.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }
}

/// Simulates `T + 1` steps from `x_0 = 0` with a stream seeded by `seed`.
pub fn simulate(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    inputs: &InputDesign,
    horizon: usize,
    seed: u64,
    record_diagnostics: bool,
) -> Result<Trajectory> {
    let mut rng = rng_from_seed(seed);
    simulate_with_rng(model, noise, inputs, horizon, &mut rng, record_diagnostics)
}

/// Draw order per step is `u_t`, `w_t`, `z_t`, so a longer horizon with the
/// same stream extends a shorter one.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    noise: &NoiseSpec,
    inputs: &InputDesign,
    horizon: usize,
    rng: &mut R,
    record_diagnostics: bool,
) -> Result<Trajectory> {
    let (n, p) = (model.n(), model.p());
    if horizon < 1 {
        return param("horizon T must be at least 1");
    }
    if noise.n() != n {
        return param(format!("noise dimension {} does not match n = {n}", noise.n()));
    }
    inputs.validate(p, horizon + 1)?;

    let steps = horizon + 1;
    let mut u = Vec::with_capacity(steps);
    let mut y = Vec::with_capacity(steps);
    let mut diag = record_diagnostics.then(|| Diagnostics {
        x: Vec::with_capacity(steps),
        w: Vec::with_capacity(steps),
        z: Vec::with_capacity(steps),
    });
    let mut x = DVector::zeros(n);
    let noiseless = noise.is_zero();
    for t in 0..steps {
        let ut = inputs.input_at(t, p, rng);
        let (wt, zt) = if noiseless {
            (DVector::zeros(n), 0.0)
        } else {
            (noise.draw_w(rng), noise.draw_z(rng))
        };
        let cx = &model.c * &x;
        y.push(ut.dot(&cx) + zt);
        let next = &model.a * &x + &model.b * &ut + &wt;
        if let Some(d) = diag.as_mut() {
            d.x.push(x.clone());
            d.w.push(wt);
            d.z.push(zt);
        }
        u.push(ut);
        x = next;
    }
    Ok(Trajectory { u, y, diagnostics: diag })
}
