//! Matrix exponential, Lyapunov solver and H-infinity norm on small systems.

use envmor::numerics::{expm, hinf_norm, lyapunov_residual, solve_lyapunov, Matrix};

fn main() -> envmor::Result<()> {
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let e = expm(&(a * std::f64::consts::FRAC_PI_2))?;
    println!("exp(pi/2 J) = {e:.6}");

    let a = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
    let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let p = solve_lyapunov(&a, &(-&b * b.transpose()))?;
    println!("controllability Gramian {p:.6}residual {:.1e}", lyapunov_residual(&a, &p, &(-&b * b.transpose())));

    // G(s) = 1 / ((s + 1)(s + 2)) peaks at s = 0
    let g = hinf_norm(&a, &b, &c, &Matrix::zeros(1, 1))?;
    println!("H-infinity norm {g:.12} (expected 0.5)");
    Ok(())
}
