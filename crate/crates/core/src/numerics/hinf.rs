use num_complex::Complex64;

use super::{
    check_finite, cnorm2, csolve, eigenvalues, norm2, solve, spectral_abscissa, to_complex,
    CMatrix, Matrix,
};
use crate::error::{Error, Result};

/// H-infinity norm together with the frequency where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfResult {
    pub norm: f64,
    /// Angular frequency of the peak; `f64::INFINITY` when the peak is the feedthrough.
    pub peak_frequency: f64,
    pub iterations: usize,
}

/// `G(s) = C (sI - A)^{-1} B + D`.
pub(crate) fn freq_response(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    s: Complex64,
) -> Result<CMatrix> {
    let n = a.nrows();
    let mut shifted = to_complex(&(-a));
    for i in 0..n {
        shifted[(i, i)] += s;
    }
    let x = csolve(&shifted, &to_complex(b)).ok_or(Error::Pole { re: s.re, im: s.im })?;
    Ok(to_complex(c) * x + to_complex(d))
}

fn check_shapes(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || c.ncols() != n {
        return Err(Error::dims("A, B, C sizes are inconsistent"));
    }
    if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
        return Err(Error::dims(format!(
            "D must be {}x{}, got {}x{}",
            c.nrows(),
            b.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    for (m, name) in [(a, "A"), (b, "B"), (c, "C"), (d, "D")] {
        check_finite(m, name)?;
    }
    Ok(())
}

/// H-infinity norm `sup_w sigma_max(G(iw))` of a stable system, to relative accuracy `1e-9`.
pub fn hinf_norm(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<f64> {
    Ok(hinf_norm_with_peak(a, b, c, d, 1e-9)?.norm)
}

/// Level-set iteration on the Hamiltonian imaginary-axis eigenvalues.
///
/// Each candidate frequency interval is verified by evaluating `sigma_max(G(iw))`
/// directly, so the returned value is always attained at `peak_frequency`.
pub fn hinf_norm_with_peak(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    tol: f64,
) -> Result<HinfResult> {
    check_shapes(a, b, c, d)?;
    if !(tol > 0.0 && tol < 0.1) {
        return Err(Error::invalid(format!("H-infinity tolerance {tol} not in (0, 0.1)")));
    }
    let n = a.nrows();
    let d_norm = norm2(d);
    if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
        return Ok(HinfResult {
            norm: d_norm,
            peak_frequency: f64::INFINITY,
            iterations: 0,
        });
    }
    let alpha = spectral_abscissa(a)?;
    if alpha >= 0.0 {
        return Err(Error::unstable(alpha));
    }

    let sigma_at = |w: f64| -> Result<f64> {
        Ok(cnorm2(&freq_response(a, b, c, d, Complex64::new(0.0, w))?))
    };

    let mut best = d_norm;
    let mut peak = f64::INFINITY;
    let consider = |w: f64, best: &mut f64, peak: &mut f64| -> Result<()> {
        let s = sigma_at(w)?;
        if s > *best {
            *best = s;
            *peak = w;
        }
        Ok(())
    };

    let poles = eigenvalues(a)?;
    let mags: Vec<f64> = poles.iter().map(|l| l.norm()).filter(|m| *m > 0.0).collect();
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().cloned().fold(0.0, f64::max);
    consider(0.0, &mut best, &mut peak)?;
    for l in &poles {
        if l.im.abs() > 0.0 {
            consider(l.im.abs(), &mut best, &mut peak)?;
        }
    }
    if hi > 0.0 {
        let (l0, l1) = ((lo / 10.0).ln(), (hi * 10.0).ln());
        let samples = 60;
        for k in 0..=samples {
            let w = (l0 + (l1 - l0) * k as f64 / samples as f64).exp();
            consider(w, &mut best, &mut peak)?;
        }
    }
    if best == 0.0 {
        return Ok(HinfResult {
            norm: 0.0,
            peak_frequency: 0.0,
            iterations: 0,
        });
    }

    let mut iterations = 0;
    while iterations < 100 {
        iterations += 1;
        let gamma = best * (1.0 + 2.0 * tol);
        let freqs = imaginary_eigenfrequencies(a, b, c, d, gamma)?;
        if freqs.is_empty() {
            break;
        }
        let mut improved = best;
        let mut improved_peak = peak;
        for pair in freqs.windows(2) {
            let mid = 0.5 * (pair[0] + pair[1]);
            let s = sigma_at(mid.abs())?;
            if s > improved {
                improved = s;
                improved_peak = mid.abs();
            }
        }
        if freqs.len() == 1 {
            let s = sigma_at(freqs[0].abs())?;
            if s > improved {
                improved = s;
                improved_peak = freqs[0].abs();
            }
        }
        if improved <= best * (1.0 + tol) {
            if improved > best {
                best = improved;
                peak = improved_peak;
            }
            break;
        }
        best = improved;
        peak = improved_peak;
    }
    Ok(HinfResult {
        norm: best,
        peak_frequency: peak,
        iterations,
    })
}

/// Sorted imaginary parts of the Hamiltonian eigenvalues lying on the imaginary axis.
fn imaginary_eigenfrequencies(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    let r = Matrix::identity(m, m) * (gamma * gamma) - d.transpose() * d;
    let r_inv_bt = solve(&r, &b.transpose())?;
    let r_inv_dtc = solve(&r, &(d.transpose() * c))?;
    let ah = a + b * &r_inv_dtc;
    let upper_right = b * &r_inv_bt;
    let lower_left = -(c.transpose() * c) - c.transpose() * d * &r_inv_dtc;
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ah);
    h.view_mut((0, n), (n, n)).copy_from(&upper_right);
    h.view_mut((n, 0), (n, n)).copy_from(&lower_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-ah.transpose()));

    let scale = h.norm().max(1.0);
    let mut freqs: Vec<f64> = eigenvalues(&h)?
        .into_iter()
        .filter(|l| l.re.abs() <= 1e-7 * scale.max(l.norm()))
        .map(|l| l.im)
        .collect();
    freqs.sort_by(|x, y| x.total_cmp(y));
    Ok(freqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn first_order_low_pass() {
        let h = hinf_norm(&scalar(-1.0), &scalar(1.0), &scalar(1.0), &scalar(0.0)).unwrap();
        assert!((h - 1.0).abs() < 1e-9);
    }

    #[test]
    fn feedthrough_is_accounted_for() {
        let h = hinf_norm(&scalar(-1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((h - 2.0).abs() < 1e-9);
    }

    #[test]
    fn resonant_peak_is_found() {
        // w0 = 10, zeta = 0.01: peak 1 / (2 zeta sqrt(1 - zeta^2)) at w0 sqrt(1 - 2 zeta^2)
        let (w0, z): (f64, f64) = (10.0, 0.01);
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -w0 * w0, -2.0 * z * w0]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, w0 * w0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let res = hinf_norm_with_peak(&a, &b, &c, &scalar(0.0), 1e-10).unwrap();
        let want = 1.0 / (2.0 * z * (1.0 - z * z).sqrt());
        assert!((res.norm - want).abs() < 1e-7 * want, "{} vs {want}", res.norm);
        assert!((res.peak_frequency - w0 * (1.0 - 2.0 * z * z).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn rlc_second_mode_has_unit_norm() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, -2.0]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        // transfer function 1 / (s + 1)
        let h = hinf_norm(&a, &b, &c, &scalar(0.0)).unwrap();
        assert!((h - 1.0).abs() < 1e-9, "{h}");
    }

    #[test]
    fn dominates_sampled_response() {
        let a = Matrix::from_row_slice(
            3,
            3,
            &[-0.2, 5.0, 0.0, -5.0, -0.2, 1.0, 0.0, 0.0, -1.0],
        );
        let b = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let c = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let d = Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]);
        let h = hinf_norm(&a, &b, &c, &d).unwrap();
        assert!(h >= norm2(&d));
        for k in 0..2000 {
            let w = k as f64 * 0.01;
            let s = cnorm2(&freq_response(&a, &b, &c, &d, Complex64::new(0.0, w)).unwrap());
            assert!(s <= h * (1.0 + 1e-8));
        }
    }

    #[test]
    fn unstable_is_rejected() {
        let err = hinf_norm(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(0.0)).unwrap_err();
        assert!(matches!(err, Error::Instability { .. }));
    }
}
