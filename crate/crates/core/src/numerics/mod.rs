//! Dense linear-algebra kernels used throughout the crate.
//!
//! Factorizations that are pure plumbing (SVD, real Schur, symmetric
//! eigen-decomposition, LU) are delegated to `nalgebra`; the Lyapunov solver,
//! the matrix exponential and the H-infinity norm are implemented here.

mod expm;
mod hinf;
mod lyapunov;
mod svd;

pub use expm::{expm, matrix_exponential};
pub use hinf::{hinf_norm, hinf_norm_with_peak, HinfResult};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use svd::{numerical_rank, skinny_svd, RankFactorization, DEFAULT_RANK_TOL};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn check_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::dims(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Real Schur decomposition `A = Q T Q^T` with `T` upper quasi-triangular.
///
/// 2x2 diagonal blocks carry complex-conjugate eigenvalue pairs; blocks with
/// real eigenvalues are split.
pub fn real_schur(a: &Matrix) -> Result<(Matrix, Matrix)> {
    check_square(a, "A")?;
    check_finite(a, "A")?;
    let n = a.nrows();
    if n == 0 {
        return Ok((Matrix::zeros(0, 0), Matrix::zeros(0, 0)));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| Error::Numerical("real Schur iteration did not converge".into()))?;
    let (q, mut t) = schur.unpack();
    // Clear the strictly lower part apart from genuine 2x2 block couplings.
    for j in 0..n {
        for i in (j + 1)..n {
            if i > j + 1 {
                t[(i, j)] = 0.0;
            } else {
                let scale = t[(i, i)].abs() + t[(j, j)].abs();
                if t[(i, j)].abs() <= f64::EPSILON * scale {
                    t[(i, j)] = 0.0;
                }
            }
        }
    }
    Ok((q, t))
}

/// Eigenvalues of a real square matrix (complex, unordered).
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    check_square(a, "A")?;
    check_finite(a, "A")?;
    let (_, t) = real_schur(a)?;
    Ok(quasi_triangular_eigenvalues(&t))
}

pub(crate) fn quasi_triangular_eigenvalues(t: &Matrix) -> Vec<Complex64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc < 0.0 {
                let im = (-disc).sqrt();
                out.push(Complex64::new(tr, im));
                out.push(Complex64::new(tr, -im));
            } else {
                let s = disc.sqrt();
                out.push(Complex64::new(tr + s, 0.0));
                out.push(Complex64::new(tr - s, 0.0));
            }
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Largest real part of the spectrum; `-inf` for the empty matrix.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Errors unless every eigenvalue of `a` lies in the open left half-plane.
pub fn ensure_hurwitz(a: &Matrix) -> Result<()> {
    let alpha = spectral_abscissa(a)?;
    if alpha < 0.0 {
        Ok(())
    } else {
        Err(Error::unstable(alpha))
    }
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn cnorm2(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_max_sym(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

pub fn lambda_min_sym(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Factor `L` with `L L^T ~= P` for a symmetric positive semidefinite `P`.
///
/// Negative eigenvalues caused by round-off are clipped to zero, so this
/// works on numerically indefinite Gramians where Cholesky would fail.
pub fn psd_factor(p: &Matrix) -> Matrix {
    let n = p.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let eig = symmetrize(p).symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

/// 2-norm condition number; `inf` for singular matrices.
pub fn condition_number(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the square system `a x = b`, erroring on singular `a`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_square(a, "coefficient matrix")?;
    if a.nrows() != b.nrows() {
        return Err(Error::dims("right-hand side row count"));
    }
    if a.nrows() == 0 {
        return Ok(Matrix::zeros(0, b.ncols()));
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

pub fn csolve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    if a.nrows() == 0 {
        return Some(CMatrix::zeros(0, b.ncols()));
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Orthonormal basis of the leading `r` left singular directions of `m`.
pub fn leading_left_singular_basis(m: &Matrix, r: usize) -> Matrix {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("U requested");
    u.columns(0, r.min(u.ncols())).into_owned()
}

/// Block-diagonal concatenation.
pub fn blkdiag(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Horizontal concatenation `[M_1 M_2 ...]`; all blocks share a row count.
pub fn hcat(rows: usize, blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

/// Vertical concatenation; all blocks share a column count.
pub fn vcat(cols: usize, blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schur_reconstructs_and_exposes_complex_pair() {
        let a = Matrix::from_row_slice(3, 3, &[0.0, -1.0, 0.3, 1.0, 0.0, 0.1, 0.0, 0.0, -2.0]);
        let (q, t) = real_schur(&a).unwrap();
        let back = &q * &t * q.transpose();
        assert!((back - &a).norm() < 1e-12);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.im.total_cmp(&y.im));
        assert!((ev[0].im + 1.0).abs() < 1e-12);
        assert!((ev[2].im - 1.0).abs() < 1e-12);
        assert!(ev.iter().any(|l| (l.re + 2.0).abs() < 1e-12));
    }

    #[test]
    fn psd_factor_clips_roundoff() {
        let p = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-17]);
        let l = psd_factor(&p);
        assert!((&l * l.transpose() - &p).norm() < 1e-14);
    }

    #[test]
    fn block_helpers() {
        let a = Matrix::identity(2, 2);
        let b = Matrix::from_element(1, 1, 3.0);
        let d = blkdiag(&[&a, &b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(2, 2)], 3.0);
        assert_eq!(hcat(2, &[&a, &a]).shape(), (2, 4));
        assert_eq!(vcat(2, &[&a, &a]).shape(), (4, 2));
    }
}
