//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Vectorization is column-major throughout: `vec(M)[j * rows + i] = M[(i, j)]`,
//! so that `u' G ubar = (ubar' ⊗ u') vec(G)`.

use nalgebra::{DMatrix, DVector};

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square());
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn mat_pow(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

pub fn vec_col_major(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn mat_col_major(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), rows * cols);
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Kronecker product of two vectors, `a ⊗ b`.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Kronecker product of two matrices.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clamped).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

pub fn is_symmetric_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > tol * scale {
        return false;
    }
    sym_eigenvalues(m).first().is_none_or(|&l| l >= -tol * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_mat_convention_matches_bilinear_form() {
        let g = DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 0.5, 3.0, 4.0, 0.0, -1.0, 2.0]);
        let u = [0.3, -1.2];
        let ubar = [1.0, 2.0, -0.5, 0.7];
        let direct = (DVector::from_row_slice(&u).transpose() * &g * DVector::from_row_slice(&ubar))[0];
        let row = kron_vec(&ubar, &u);
        let via_vec = DVector::from_vec(row).dot(&vec_col_major(&g));
        assert!((direct - via_vec).abs() < 1e-14);
        assert_eq!(mat_col_major(&vec_col_major(&g), 2, 4), g);
    }

    #[test]
    fn kron_matrix_agrees_with_vector_form() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(3, 1, &[3.0, 4.0, 5.0]);
        let k = kron(&a, &b);
        assert_eq!(k.as_slice(), kron_vec(&[1.0, 2.0], &[3.0, 4.0, 5.0]).as_slice());
    }

    #[test]
    fn radius_of_rotation_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.8, 0.8, 0.0]);
        assert!((spectral_radius(&a) - 0.8).abs() < 1e-12);
        assert!((spectral_norm(&a) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = psd_sqrt(&m);
        assert!((&s * &s - &m).amax() < 1e-12);
        assert!(is_symmetric_psd(&m, 1e-10));
        assert!(!is_symmetric_psd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), 1e-10));
    }
}
