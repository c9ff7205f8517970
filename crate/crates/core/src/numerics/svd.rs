use super::{check_finite, Matrix};
use crate::error::{Error, Result};

/// Default relative singular-value cutoff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Low-rank factorization `M ~= left * core * right^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankFactorization {
    /// `rows x rank`
    pub left: Matrix,
    /// `rank x rank`
    pub core: Matrix,
    /// `cols x rank`
    pub right: Matrix,
}

impl RankFactorization {
    pub fn rank(&self) -> usize {
        self.core.nrows()
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.left * &self.core * self.right.transpose()
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        RankFactorization {
            left: Matrix::zeros(rows, 0),
            core: Matrix::zeros(0, 0),
            right: Matrix::zeros(cols, 0),
        }
    }
}

/// Truncated SVD with `left = U_r`, `core = I_r`, `right = V_r * Sigma_r`,
/// keeping singular values strictly above `tol * sigma_1`.
pub fn skinny_svd(m: &Matrix, tol: f64) -> Result<RankFactorization> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("rank tolerance {tol} not in (0, 1)")));
    }
    check_finite(m, "matrix")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(RankFactorization::empty(rows, cols));
    }
    let svd = m.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let s1 = sigma[0];
    if s1 == 0.0 {
        return Ok(RankFactorization::empty(rows, cols));
    }
    let rank = sigma.iter().take_while(|&&s| s > tol * s1).count();
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("V^T requested");
    let left = u.columns(0, rank).into_owned();
    let mut right = v_t.rows(0, rank).transpose();
    for j in 0..rank {
        right.column_mut(j).scale_mut(sigma[j]);
    }
    Ok(RankFactorization {
        left,
        core: Matrix::identity(rank, rank),
        right,
    })
}

/// Number of singular values above `tol * sigma_1`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let s1 = sv.iter().cloned().fold(0.0, f64::max);
    if s1 == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * s1).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_matrix_has_rank_zero() {
        let f = skinny_svd(&Matrix::zeros(2, 2), 1e-12).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.left.shape(), (2, 0));
        assert_eq!(f.right.shape(), (2, 0));
    }

    #[test]
    fn rlc_mode_difference_is_rank_one() {
        // A1 - A2 for the switched RLC circuit
        let d = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -2.0]);
        let f = skinny_svd(&d, 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.reconstruct() - d).norm() < 1e-14);
    }

    #[test]
    fn outer_product_reconstruction() {
        let d = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let f = skinny_svd(&d, 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.core, Matrix::identity(1, 1));
        // left is a unit vector along [1, 1]
        assert!((f.left.norm() - 1.0).abs() < 1e-14);
        assert!((f.left[(0, 0)] - f.left[(1, 0)]).abs() < 1e-14);
        let expect = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!((f.reconstruct() - expect).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = Matrix::identity(2, 2);
        assert!(skinny_svd(&m, 0.0).is_err());
        m[(0, 1)] = f64::NAN;
        assert!(matches!(skinny_svd(&m, 1e-10), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn reconstruction_within_truncation(
            rows in 1usize..8, cols in 1usize..8,
            seed in proptest::collection::vec(-1.0f64..1.0, 64),
            tol in 1e-12f64..1e-2,
        ) {
            let m = Matrix::from_fn(rows, cols, |i, j| seed[i * 8 + j]);
            let f = skinny_svd(&m, tol).unwrap();
            let s1 = super::super::norm2(&m);
            let bound = tol * s1 * (rows.min(cols) as f64).sqrt() + 1e-13;
            prop_assert!((f.reconstruct() - &m).norm() <= bound);
            prop_assert!(f.rank() <= rows.min(cols));
        }
    }
}
