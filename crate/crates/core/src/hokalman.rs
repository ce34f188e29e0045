//! Ho-Kalman realization from Markov parameters and perturbation bounds for it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::spectral_norm;

/// Truncations with `σ_n / σ_1` below this are refused.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Singular value decomposition with values descending and each left singular
/// vector flipped so its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
struct CanonicalSvd {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

fn canonical_svd(m: &DMatrix<f64>) -> CanonicalSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").transpose();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let k = order.len();
    let mut su = DMatrix::zeros(u.nrows(), k);
    let mut sv = DMatrix::zeros(v.nrows(), k);
    let mut ss = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let pivot = col.iter().cloned().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        su.set_column(dst, &(col * sign));
        sv.set_column(dst, &(v.column(src) * sign));
        ss[dst] = svd.singular_values[src];
    }
    CanonicalSvd { u: su, s: ss, v: sv }
}

/// The clipped Hankel matrix and the pieces Ho-Kalman works from.
#[derive(Debug, Clone)]
pub struct HankelSet {
    /// `pL/2 × p(L/2+1)`, block `(i, j)` equal to `G_{i+j}`.
    pub h: DMatrix<f64>,
    /// `H` without its last `p` columns.
    pub h_minus: DMatrix<f64>,
    /// `H` without its first `p` columns.
    pub h_plus: DMatrix<f64>,
    /// Best rank-`n` approximation of `H⁻`.
    pub l_hat: DMatrix<f64>,
    /// `σ_n(H⁻)`, the smallest retained singular value.
    pub sigma_min_l: f64,
    /// All singular values of `H⁻`, descending.
    pub singular_values: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub l: usize,
    svd: CanonicalSvd,
}

pub fn build_hankel(g: &DMatrix<f64>, n: usize) -> Result<HankelSet> {
    let p = g.nrows();
    if p == 0 || !g.ncols().is_multiple_of(p) || g.ncols() == 0 {
        return param(format!("G must be p × pL, got {:?}", g.shape()));
    }
    let l = g.ncols() / p;
    if n == 0 {
        return param("order n must be at least 1");
    }
    if l < 2 || !l.is_multiple_of(2) || l < 2 * n {
        return param(format!("need even L ≥ max(2, 2n); got L = {l}, n = {n}"));
    }
    let half = l / 2;
    let mut h = DMatrix::zeros(p * half, p * (half + 1));
    for i in 0..half {
        for j in 0..=half {
            h.view_mut((i * p, j * p), (p, p)).copy_from(&g.columns((i + j) * p, p));
        }
    }
    let h_minus = h.columns(0, p * half).into_owned();
    let h_plus = h.columns(p, p * half).into_owned();
    let svd = canonical_svd(&h_minus);
    if n > svd.s.len() {
        return param(format!("order {n} exceeds the Hankel dimension {}", svd.s.len()));
    }
    let l_hat = svd.u.columns(0, n) * DMatrix::from_diagonal(&svd.s.rows(0, n)) * svd.v.columns(0, n).transpose();
    Ok(HankelSet {
        sigma_min_l: svd.s[n - 1],
        singular_values: svd.s.iter().cloned().collect(),
        h,
        h_minus,
        h_plus,
        l_hat,
        n,
        p,
        l,
        svd,
    })
}

/// Recovered state-space matrices and the balanced factors `O = UΣ^{1/2}`, `Q = Σ^{1/2}V'`.
#[derive(Debug, Clone)]
pub struct Realization {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub c_hat: DMatrix<f64>,
    pub o: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub hankel: HankelSet,
}

impl Realization {
    pub fn n(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn p(&self) -> usize {
        self.c_hat.nrows()
    }

    /// Change of basis by an orthogonal `r`: `(R A R', R B, C R')`, with the
    /// factors transformed to match.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Realization {
        Realization {
            a_hat: r * &self.a_hat * r.transpose(),
            b_hat: r * &self.b_hat,
            c_hat: &self.c_hat * r.transpose(),
            o: &self.o * r.transpose(),
            q: r * &self.q,
            hankel: self.hankel.clone(),
        }
    }

    /// Markov blocks `Ĉ Â^i B̂`, `i = 0..count`, laid out like `G`.
    pub fn markov_blocks(&self, count: usize) -> DMatrix<f64> {
        let p = self.p();
        let mut out = DMatrix::zeros(p, p * count);
        let mut ca = self.c_hat.clone();
        for i in 0..count {
            out.columns_mut(i * p, p).copy_from(&(&ca * &self.b_hat));
            ca = &ca * &self.a_hat;
        }
        out
    }
}

/// Ho-Kalman: factor the rank-`n` truncation of `H⁻`, read `Ĉ` and `B̂` off the
/// factors and solve `Â = O⁺ H⁺ Q⁺`.
pub fn ho_kalman(g: &DMatrix<f64>, n: usize) -> Result<Realization> {
    let hankel = build_hankel(g, n)?;
    let s1 = hankel.singular_values[0];
    let sn = hankel.sigma_min_l;
    let relative = if s1 > 0.0 { sn / s1 } else { 0.0 };
    if relative < DEGENERACY_TOL {
        return Err(Error::DegenerateRealization { sigma_n: sn, relative });
    }
    let p = hankel.p;
    let svd = &hankel.svd;
    let sqrt_s = svd.s.rows(0, n).map(f64::sqrt);
    let inv_sqrt_s = sqrt_s.map(|x| 1.0 / x);
    let u_n = svd.u.columns(0, n);
    let v_n = svd.v.columns(0, n);
    let o = u_n * DMatrix::from_diagonal(&sqrt_s);
    let q = DMatrix::from_diagonal(&sqrt_s) * v_n.transpose();
    let o_pinv = DMatrix::from_diagonal(&inv_sqrt_s) * u_n.transpose();
    let q_pinv = v_n * DMatrix::from_diagonal(&inv_sqrt_s);
    let a_hat = o_pinv * &hankel.h_plus * q_pinv;
    let c_hat = o.rows(0, p).into_owned();
    let b_hat = q.columns(0, p).into_owned();
    Ok(Realization { a_hat, b_hat, c_hat, o, q, hankel })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub t: DMatrix<f64>,
    pub d_a: f64,
    pub d_b: f64,
    pub d_c: f64,
}

/// Orthogonal `T` minimizing `‖O_ref − O_other T‖_F`, and the aligned errors
/// `‖B_ref − T'B̂‖_F`, `‖C_ref − Ĉ T‖_F`, `‖A_ref − T'ÂT‖_F`.
pub fn align_realizations(reference: &Realization, other: &Realization) -> Result<Alignment> {
    if reference.n() != other.n() || reference.p() != other.p() || reference.o.shape() != other.o.shape() {
        return param("realizations differ in n, p or L");
    }
    let cross = other.o.tr_mul(&reference.o);
    let svd = cross.svd(true, true);
    let t = svd.u.expect("left singular vectors requested") * svd.v_t.expect("right singular vectors requested");
    let tt = t.transpose();
    Ok(Alignment {
        d_a: (&reference.a_hat - &tt * &other.a_hat * &t).norm(),
        d_b: (&reference.b_hat - &tt * &other.b_hat).norm(),
        d_c: (&reference.c_hat - &other.c_hat * &t).norm(),
        t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationBounds {
    /// Bound on the aligned `B` and `C` errors.
    pub bound_bc: f64,
    /// Bound on the aligned `A` error.
    pub bound_a: f64,
    /// `‖G − Ĝ‖_F ≤ σ_min / (2√(2L))`
    pub robustness_ok: bool,
}

/// Perturbation bounds for Ho-Kalman given `‖H‖`, `‖Ĥ‖`, `σ_min` of the exact
/// rank-`n` truncation and `‖G − Ĝ‖_F`:
/// `√(10L/σ)·ε` for `B`, `C` and `(9√L(‖H‖+‖Ĥ‖)/σ² + √(2L)/σ)·ε` for `A`.
pub fn realization_error_bounds(
    h: &DMatrix<f64>,
    h_hat: &DMatrix<f64>,
    sigma_min: f64,
    g_err_fro: f64,
    l: usize,
) -> Result<RealizationBounds> {
    if !(sigma_min > 0.0) {
        return Err(Error::Precondition(format!("σ_min of the truncation must be positive, got {sigma_min}")));
    }
    let lf = l as f64;
    let hn = spectral_norm(h) + spectral_norm(h_hat);
    Ok(RealizationBounds {
        bound_bc: (10.0 * lf / sigma_min).sqrt() * g_err_fro,
        bound_a: (9.0 * lf.sqrt() * hn / (sigma_min * sigma_min) + (2.0 * lf).sqrt() / sigma_min) * g_err_fro,
        robustness_ok: g_err_fro <= sigma_min / (2.0 * (2.0 * lf).sqrt()),
    })
}

/// JSON record accompanying a serialized realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationMeta {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "sigma_min_L")]
    pub sigma_min_l: f64,
    pub robustness_ok: Option<bool>,
}

impl RealizationMeta {
    pub fn new(r: &Realization, robustness_ok: Option<bool>) -> Self {
        Self { n: r.n(), p: r.p(), l: r.hankel.l, sigma_min_l: r.hankel.sigma_min_l, robustness_ok }
    }
}
