use super::{check_finite, check_square, solve, Matrix};
use crate::error::Result;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const LOW_ORDER: [(f64, &[f64]); 4] = [
    (1.495585217958292e-2, &[120.0, 60.0, 12.0, 1.0]),
    (
        2.539398330063230e-1,
        &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
    ),
    (
        9.504178996162932e-1,
        &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
    ),
    (
        2.097847961257068,
        &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
    ),
];

const THETA13: f64 = 5.371920351148152;

fn norm1(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential `e^A` by scaling and squaring with diagonal Padé approximants
/// of degree 3 through 13.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    check_finite(a, "A")?;
    let n = a.nrows();
    let eye = Matrix::identity(n, n);
    if n == 0 {
        return Ok(eye);
    }
    let nrm = norm1(a);
    if nrm == 0.0 {
        return Ok(eye);
    }

    for (theta, b) in LOW_ORDER {
        if nrm <= theta {
            let a2 = a * a;
            let mut u = &eye * b[1];
            let mut v = &eye * b[0];
            let mut pow = eye.clone();
            for k in 1..b.len() / 2 {
                pow = &pow * &a2;
                u += &pow * b[2 * k + 1];
                v += &pow * b[2 * k];
            }
            let u = a * u;
            return solve(&(&v - &u), &(&v + &u));
        }
    }

    let s = (nrm / THETA13).log2().ceil().max(0.0) as i32;
    let a = a * 2f64.powi(-s);
    let b = &B13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &eye * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &eye * b[0];
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `e^{A t}`.
pub fn matrix_exponential(a: &Matrix, t: f64) -> Result<Matrix> {
    expm(&(a * t))
}
