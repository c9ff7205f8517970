//! Quadratic stability certificates and dissipative-Hamiltonian splittings.

use crate::error::{Error, Result};
use crate::model::SwitchedModel;
use crate::numerics::{
    check_square, ensure_hurwitz, lambda_max_sym, lambda_min_sym, norm2, solve, solve_lyapunov,
    symmetrize, Matrix,
};

/// Default relative strictness margin of the Lyapunov inequalities.
pub const DEFAULT_MARGIN: f64 = 1e-8;

/// Outcome of checking `A_i^T Q + Q A_i < 0` for every mode.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub passed: bool,
    pub q_min_eigenvalue: f64,
    /// `lambda_max(A_i^T Q + Q A_i)` per mode.
    pub lambda_max: Vec<f64>,
    /// Required negativity per mode, `margin ||A_i|| ||Q||`.
    pub thresholds: Vec<f64>,
}

impl StabilityCertificate {
    /// Smallest slack `-(lambda_max + threshold)` over the modes.
    pub fn slack(&self) -> f64 {
        self.lambda_max
            .iter()
            .zip(&self.thresholds)
            .map(|(l, t)| -(l + t))
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_symmetric(q: &Matrix) -> Result<()> {
    check_square(q, "Q")?;
    let asym = norm2(&(q - q.transpose()));
    if asym > 1e-10 * norm2(q).max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!("Q is not symmetric (asymmetry {asym:.3e})")));
    }
    Ok(())
}

fn lyapunov_form(a: &Matrix, q: &Matrix) -> Matrix {
    symmetrize(&(a.transpose() * q + q * a))
}

/// Checks the Lyapunov inequalities with the default margin.
pub fn verify_quadratic_stability(sys: &SwitchedModel, q: &Matrix) -> Result<StabilityCertificate> {
    verify_with_margin(sys, q, DEFAULT_MARGIN)
}

/// Passes iff `Q > 0` and `lambda_max(A_i^T Q + Q A_i) < -margin ||A_i|| ||Q||` for all modes.
pub fn verify_with_margin(
    sys: &SwitchedModel,
    q: &Matrix,
    margin: f64,
) -> Result<StabilityCertificate> {
    check_symmetric(q)?;
    let sys = sys.standard_form()?;
    if q.nrows() != sys.states() {
        return Err(Error::dims(format!(
            "Q is {}x{}, system has {} states",
            q.nrows(),
            q.ncols(),
            sys.states()
        )));
    }
    let qn = norm2(q);
    let q_min = lambda_min_sym(q);
    let mut lambda_max = Vec::new();
    let mut thresholds = Vec::new();
    for mode in sys.modes() {
        lambda_max.push(lambda_max_sym(&lyapunov_form(mode.a(), q)));
        thresholds.push(margin * norm2(mode.a()) * qn);
    }
    let passed = q_min > 0.0 && lambda_max.iter().zip(&thresholds).all(|(l, t)| *l < -t);
    Ok(StabilityCertificate {
        passed,
        q_min_eigenvalue: q_min,
        lambda_max,
        thresholds,
    })
}

fn spd_inverse(q: &Matrix) -> Result<Matrix> {
    check_symmetric(q)?;
    let chol = symmetrize(q)
        .cholesky()
        .ok_or_else(|| Error::invalid("Q is not positive definite"))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Splits `A = (J - R) Q` with `J` skew-symmetric and `R` symmetric.
pub fn dh_split(a: &Matrix, q: &Matrix) -> Result<(Matrix, Matrix)> {
    check_square(a, "A")?;
    if a.nrows() != q.nrows() {
        return Err(Error::dims("A and Q have different sizes"));
    }
    let qi = spd_inverse(q)?;
    let aq = a * &qi;
    let j = (&aq - aq.transpose()) * 0.5;
    let r = -(&aq + aq.transpose()) * 0.5;
    Ok((j, r))
}

/// Port-Hamiltonian mode `x' = (J - R) Q x + B u`, `y = B^T Q x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortHamiltonianMode {
    pub j: Matrix,
    pub r: Matrix,
    pub q: Matrix,
    pub b: Matrix,
}

impl PortHamiltonianMode {
    pub fn new(j: Matrix, r: Matrix, q: Matrix, b: Matrix) -> Result<Self> {
        let n = j.nrows();
        for (m, name) in [(&j, "J"), (&r, "R"), (&q, "Q")] {
            check_square(m, name)?;
            if m.nrows() != n {
                return Err(Error::dims(format!("{name} must be {n}x{n}")));
            }
        }
        if b.nrows() != n {
            return Err(Error::dims(format!("B must have {n} rows")));
        }
        Ok(PortHamiltonianMode { j, r, q, b })
    }

    pub fn a(&self) -> Matrix {
        (&self.j - &self.r) * &self.q
    }

    pub fn c(&self) -> Matrix {
        self.b.transpose() * &self.q
    }

    /// Largest entry of `J + J^T` relative to `||J||`.
    pub fn skewness_defect(&self) -> f64 {
        norm2(&(&self.j + self.j.transpose())) / norm2(&self.j).max(1.0)
    }
}

/// Splitting of every mode against a shared `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PHDecomposition {
    pub j: Vec<Matrix>,
    pub r: Vec<Matrix>,
    pub q: Matrix,
}

impl PHDecomposition {
    pub fn new(sys: &SwitchedModel, q: &Matrix) -> Result<Self> {
        let sys = sys.standard_form()?;
        let (mut js, mut rs) = (Vec::new(), Vec::new());
        for mode in sys.modes() {
            let (j, r) = dh_split(mode.a(), q)?;
            js.push(j);
            rs.push(r);
        }
        Ok(PHDecomposition {
            j: js,
            r: rs,
            q: q.clone(),
        })
    }

    pub fn reconstruct(&self, mode: usize) -> Matrix {
        (&self.j[mode] - &self.r[mode]) * &self.q
    }

    /// `lambda_min(R_i)` per mode.
    pub fn dissipation(&self) -> Vec<f64> {
        self.r.iter().map(lambda_min_sym).collect()
    }

    pub fn is_strictly_dissipative(&self) -> bool {
        self.dissipation().iter().all(|&l| l > 0.0)
    }
}

/// Best-effort search for a common quadratic Lyapunov matrix.
///
/// Starts from the Lyapunov solution of the averaged dynamics and then applies
/// correction sweeps `Q <- Q + c X_i` with `A_i^T X_i + X_i A_i = -I`, which
/// lower `lambda_max` of the violated inequality by exactly `c`. `None` does not
/// prove that no common `Q` exists.
pub fn search_common_q(sys: &SwitchedModel, margin: f64) -> Result<Option<Matrix>> {
    if !(margin >= 0.0) {
        return Err(Error::invalid("margin must be nonnegative"));
    }
    let sys = sys.standard_form()?;
    let n = sys.states();
    for mode in sys.modes() {
        ensure_hurwitz(mode.a())?;
    }
    let eye = Matrix::identity(n, n);
    let accept = |q: &Matrix| -> Result<bool> { Ok(verify_with_margin(&sys, q, margin)?.passed) };

    let mut avg = Matrix::zeros(n, n);
    for mode in sys.modes() {
        avg += mode.a();
    }
    avg /= sys.num_modes() as f64;
    let mut q = match solve_lyapunov(&avg.transpose(), &eye) {
        Ok(q) if lambda_min_sym(&q) > 0.0 => q,
        _ => eye.clone(),
    };
    if accept(&q)? {
        return Ok(Some(q));
    }

    let corrections: Vec<Matrix> = sys
        .modes()
        .iter()
        .map(|m| solve_lyapunov(&m.a().transpose(), &eye))
        .collect::<Result<_>>()?;
    for _ in 0..200 {
        for (mode, x) in sys.modes().iter().zip(&corrections) {
            let target = 2.0 * margin.max(1e-6) * norm2(mode.a()) * norm2(&q);
            let l = lambda_max_sym(&lyapunov_form(mode.a(), &q));
            if l > -target {
                q += x * (l + target);
                q = symmetrize(&q);
                q /= norm2(&q);
            }
        }
        if accept(&q)? {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

/// `W = Q V (V^T Q V)^{-1}`, so that `W^T V = I`.
pub(crate) fn weighted_left_basis(v: &Matrix, q: &Matrix) -> Result<Matrix> {
    if v.nrows() != q.nrows() {
        return Err(Error::dims("V and Q have incompatible sizes"));
    }
    check_symmetric(q)?;
    if lambda_min_sym(q) <= 0.0 {
        return Err(Error::invalid("Q is not positive definite"));
    }
    if crate::numerics::numerical_rank(v, 1e-12) < v.ncols() {
        return Err(Error::invalid("V does not have full column rank"));
    }
    let qv = q * v;
    let qt = symmetrize(&(v.transpose() * &qv));
    Ok(solve(&qt, &qv.transpose())?.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpaceModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    fn switched(a: &[Matrix]) -> SwitchedModel {
        let n = a[0].nrows();
        SwitchedModel::new(
            a.iter()
                .map(|a| {
                    StateSpaceModel::strictly_proper(
                        a.clone(),
                        Matrix::zeros(n, 1),
                        Matrix::zeros(1, n),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn rlc_a1() -> Matrix {
        m(2, 2, &[0.0, -1.0, 2.0, -4.0])
    }

    #[test]
    fn scalar_mode_certificate() {
        let cert = verify_quadratic_stability(&switched(&[m(1, 1, &[-1.0])]), &m(1, 1, &[1.0])).unwrap();
        assert!(cert.passed);
        assert_eq!(cert.lambda_max, vec![-2.0]);
    }

    #[test]
    fn identity_q_fails_for_rlc_mode() {
        // A1^T + A1 = [[0, 1], [1, -8]] has a positive eigenvalue
        let cert = verify_quadratic_stability(&switched(&[rlc_a1()]), &Matrix::identity(2, 2)).unwrap();
        assert!(!cert.passed);
        let want = -4.0 + 17f64.sqrt();
        assert!((cert.lambda_max[0] - want).abs() < 1e-12);
    }

    #[test]
    fn indefinite_q_always_fails() {
        let q = m(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        let cert = verify_quadratic_stability(&switched(&[-Matrix::identity(2, 2)]), &q).unwrap();
        assert!(!cert.passed);
        assert!(verify_quadratic_stability(&switched(&[rlc_a1()]), &m(2, 2, &[1.0, 1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn dh_split_examples() {
        let (j, r) = dh_split(&m(1, 1, &[-2.0]), &m(1, 1, &[1.0])).unwrap();
        assert_eq!((j[(0, 0)], r[(0, 0)]), (0.0, 2.0));

        let rot = m(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let (j, r) = dh_split(&rot, &Matrix::identity(2, 2)).unwrap();
        assert_eq!(j, rot);
        assert_eq!(r, Matrix::zeros(2, 2));

        let (_, r) = dh_split(&rlc_a1(), &Matrix::identity(2, 2)).unwrap();
        assert!((&r - m(2, 2, &[0.0, -0.5, -0.5, 4.0])).norm() < 1e-15);
        assert!(lambda_min_sym(&r) < 0.0);

        assert!(dh_split(&rot, &m(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn single_mode_search_returns_lyapunov_solution() {
        let a = m(2, 2, &[-1.0, 3.0, 0.0, -2.0]);
        let q = search_common_q(&switched(&[a.clone()]), DEFAULT_MARGIN).unwrap().unwrap();
        let want = solve_lyapunov(&a.transpose(), &Matrix::identity(2, 2)).unwrap();
        assert!((&q - want).norm() < 1e-12);
    }

    #[test]
    fn commuting_modes_share_q() {
        let sys = switched(&[
            Matrix::from_diagonal(&nalgebra::dvector![-1.0, -2.0]),
            Matrix::from_diagonal(&nalgebra::dvector![-3.0, -1.0]),
        ]);
        let q = search_common_q(&sys, DEFAULT_MARGIN).unwrap().unwrap();
        assert!(verify_quadratic_stability(&sys, &q).unwrap().passed);
    }

    #[test]
    fn search_finds_q_for_rlc_modes() {
        let sys = switched(&[rlc_a1(), m(2, 2, &[0.0, -1.0, 1.0, -2.0])]);
        let q = search_common_q(&sys, DEFAULT_MARGIN).unwrap().unwrap();
        assert!(verify_quadratic_stability(&sys, &q).unwrap().passed);
    }

    #[test]
    fn no_common_q_counterexample() {
        let a1 = m(2, 2, &[-1.0, 0.0, 10.0, -1.0]);
        let a2 = m(2, 2, &[-1.0, 10.0, 0.0, -1.0]);
        // a common Q would make every convex combination Hurwitz; the midpoint is not
        let unstable = (0..=100).any(|k| {
            let t = k as f64 / 100.0;
            crate::numerics::spectral_abscissa(&(&a1 * t + &a2 * (1.0 - t))).unwrap() > 0.0
        });
        assert!(unstable);
        assert!(search_common_q(&switched(&[a1, a2]), DEFAULT_MARGIN).unwrap().is_none());
    }

    #[test]
    fn weighted_left_basis_biorthogonal() {
        let v = m(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let w = weighted_left_basis(&v, &Matrix::identity(3, 3)).unwrap();
        let want = &v * (v.transpose() * &v).try_inverse().unwrap();
        assert!((&w - want).norm() < 1e-14);
        let rank_deficient = m(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(weighted_left_basis(&rank_deficient, &Matrix::identity(3, 3)).is_err());
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let x = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &x * x.transpose() + Matrix::identity(n, n) * 0.5
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dh_split_round_trip(seed in any::<u64>(), n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let q = random_spd(&mut rng, n);
            let (j, r) = dh_split(&a, &q).unwrap();
            prop_assert!((&j + j.transpose()).norm() <= 1e-12 * j.norm().max(1.0));
            prop_assert!((&r - r.transpose()).norm() <= 1e-12 * r.norm().max(1.0));
            let back = (&j - &r) * &q;
            prop_assert!((&back - &a).norm() <= 1e-10 * a.norm().max(1.0));
        }

        #[test]
        fn certificate_agrees_with_dissipation(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_spd(&mut rng, n);
            let a: Vec<Matrix> = (0..2)
                .map(|_| Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) - Matrix::identity(n, n) * rng.random_range(0.0..2.0))
                .collect();
            let sys = switched(&a);
            let cert = verify_with_margin(&sys, &q, 0.0).unwrap();
            let ph = PHDecomposition::new(&sys, &q).unwrap();
            // A^T Q + Q A = -2 Q R Q, a congruence of -2R
            for (l, d) in cert.lambda_max.iter().zip(ph.dissipation()) {
                prop_assert_eq!(*l < 0.0, d > 0.0, "lambda_max {} vs lambda_min(R) {}", l, d);
            }
        }
    }
}
