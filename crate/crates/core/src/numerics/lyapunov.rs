use nalgebra::DMatrix;

use super::{check_finite, check_square, real_schur, symmetrize, Matrix};
use crate::error::{Error, Result};

/// Solves `A X + X A^T + RHS = 0` by Bartels–Stewart on the real Schur form of `A`.
///
/// Returns the symmetric solution. Fails with [`Error::DegenerateSpectrum`] when
/// `A` has two eigenvalues summing to zero.
pub fn solve_lyapunov(a: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    check_square(rhs, "RHS")?;
    check_finite(a, "A")?;
    check_finite(rhs, "RHS")?;
    let n = a.nrows();
    if rhs.nrows() != n {
        return Err(Error::dims(format!(
            "A is {n}x{n} but RHS is {}x{}",
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let asym = (rhs - rhs.transpose()).norm();
    if asym > 1e-10 * rhs.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid("Lyapunov right-hand side is not symmetric"));
    }

    let (q, t) = real_schur(a)?;
    let f = q.transpose() * symmetrize(rhs) * &q;
    let y = solve_quasi_triangular(&t, &f)?;
    Ok(symmetrize(&(&q * y * q.transpose())))
}

/// Frobenius norm of `A X + X A^T + RHS`.
pub fn lyapunov_residual(a: &Matrix, x: &Matrix, rhs: &Matrix) -> f64 {
    (a * x + x * a.transpose() + rhs).norm()
}

fn diagonal_blocks(t: &Matrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves `T Y + Y T^T = -F` for upper quasi-triangular `T`.
fn solve_quasi_triangular(t: &Matrix, f: &Matrix) -> Result<Matrix> {
    let n = t.nrows();
    let blocks = diagonal_blocks(t);
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let mut y = Matrix::zeros(n, n);

    for &(j0, q) in blocks.iter().rev() {
        for &(i0, p) in blocks.iter().rev() {
            // c = -F_IJ - sum_{k > I} T_Ik Y_kJ - sum_{l > J} Y_Il T_Jl^T
            let mut c = [[0.0f64; 2]; 2];
            for (di, row) in c.iter_mut().enumerate().take(p) {
                let i = i0 + di;
                for (dj, entry) in row.iter_mut().enumerate().take(q) {
                    let j = j0 + dj;
                    let mut acc = -f[(i, j)];
                    for k in (i0 + p)..n {
                        acc -= t[(i, k)] * y[(k, j)];
                    }
                    for l in (j0 + q)..n {
                        acc -= y[(i, l)] * t[(j, l)];
                    }
                    *entry = acc;
                }
            }
            let z = small_sylvester(t, i0, p, j0, q, &c, tnorm)?;
            for di in 0..p {
                for dj in 0..q {
                    y[(i0 + di, j0 + dj)] = z[di][dj];
                }
            }
        }
    }
    Ok(y)
}

/// Solves `T_II Z + Z T_JJ^T = C` for blocks of size at most 2.
fn small_sylvester(
    t: &Matrix,
    i0: usize,
    p: usize,
    j0: usize,
    q: usize,
    c: &[[f64; 2]; 2],
    tnorm: f64,
) -> Result<[[f64; 2]; 2]> {
    let degenerate = || {
        Error::DegenerateSpectrum(
            "A has eigenvalues summing to zero; the Lyapunov operator is singular".into(),
        )
    };
    let thresh = 1e2 * f64::EPSILON * tnorm;
    if p == 1 && q == 1 {
        let k = t[(i0, i0)] + t[(j0, j0)];
        if k.abs() <= thresh {
            return Err(degenerate());
        }
        let mut z = [[0.0; 2]; 2];
        z[0][0] = c[0][0] / k;
        return Ok(z);
    }
    // Column-major vec: (I_q (x) T_II + T_JJ (x) I_p) vec(Z) = vec(C)
    let dim = p * q;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DMatrix::<f64>::zeros(dim, 1);
    for b in 0..q {
        for a in 0..p {
            let row = b * p + a;
            rhs[(row, 0)] = c[a][b];
            for a2 in 0..p {
                k[(row, b * p + a2)] += t[(i0 + a, i0 + a2)];
            }
            for b2 in 0..q {
                k[(row, b2 * p + a)] += t[(j0 + b, j0 + b2)];
            }
        }
    }
    let smin = k
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin <= thresh {
        return Err(degenerate());
    }
    let sol = k.full_piv_lu().solve(&rhs).ok_or_else(degenerate)?;
    let mut z = [[0.0; 2]; 2];
    for b in 0..q {
        for a in 0..p {
            z[a][b] = sol[(b * p + a, 0)];
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: vec(AX + XA^T) = (I (x) A + A (x) I) vec(X).
    fn kronecker_lyapunov(a: &Matrix, rhs: &Matrix) -> Matrix {
        let n = a.nrows();
        let eye = Matrix::identity(n, n);
        let op = eye.kronecker(a) + a.kronecker(&eye);
        let b = -Matrix::from_column_slice(n * n, 1, rhs.as_slice());
        let x = op.lu().solve(&b).unwrap();
        Matrix::from_column_slice(n, n, x.as_slice())
    }

    fn check_residual(a: &Matrix, x: &Matrix, rhs: &Matrix) {
        let res = lyapunov_residual(a, x, rhs);
        let scale = norm2(a) * x.norm() + rhs.norm();
        assert!(res <= 1e-10 * scale, "residual {res} vs scale {scale}");
    }

    #[test]
    fn scalar() {
        let x = solve_lyapunov(&Matrix::from_element(1, 1, -1.0), &Matrix::identity(1, 1)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diagonal_decouples() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let x = solve_lyapunov(&a, &Matrix::identity(2, 2)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((x[(1, 1)] - 0.25).abs() < 1e-15);
        assert!(x[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn rlc_mode_one_gramian_matches_kronecker_oracle() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 2.0, -4.0]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let rhs = &b * b.transpose();
        let x = solve_lyapunov(&a, &rhs).unwrap();
        check_residual(&a, &x, &rhs);
        let oracle = kronecker_lyapunov(&a, &rhs);
        assert!((x - oracle).norm() < 1e-12);
    }

    #[test]
    fn complex_pairs_match_oracle() {
        let a = Matrix::from_row_slice(
            4,
            4,
            &[
                -0.5, 3.0, 0.2, 0.0, -3.0, -0.5, 0.1, 0.4, 0.0, 0.0, -1.0, 2.0, 0.3, 0.0, -2.0, -1.0,
            ],
        );
        let b = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 2.0, 1.0, 1.0]);
        let rhs = &b * b.transpose();
        let x = solve_lyapunov(&a, &rhs).unwrap();
        check_residual(&a, &x, &rhs);
        assert!((x - kronecker_lyapunov(&a, &rhs)).norm() < 1e-11);
    }

    #[test]
    fn degenerate_spectrum_is_reported() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = solve_lyapunov(&a, &Matrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum(_)));
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_lyapunov(&rot, &Matrix::identity(2, 2)),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn random_stable_up_to_200() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[5usize, 40, 120, 200] {
            let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let shift = crate::numerics::spectral_abscissa(&a).unwrap() + 0.5;
            for i in 0..n {
                a[(i, i)] -= shift;
            }
            let g = Matrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
            let rhs = &g * g.transpose();
            let x = solve_lyapunov(&a, &rhs).unwrap();
            check_residual(&a, &x, &rhs);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residual_bound_on_random_stable(n in 1usize..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let shift = crate::numerics::spectral_abscissa(&a).unwrap() + 0.1;
            for i in 0..n { a[(i, i)] -= shift; }
            let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let rhs = &g * g.transpose();
            let x = solve_lyapunov(&a, &rhs).unwrap();
            let res = lyapunov_residual(&a, &x, &rhs);
            prop_assert!(res <= 1e-10 * (norm2(&a) * x.norm() + rhs.norm()));
        }
    }
}
