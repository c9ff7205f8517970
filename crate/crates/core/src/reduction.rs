//! Envelope reduction by balanced truncation or IRKA, reduced switched systems
//! and the per-mode baseline.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::envelope::EnvelopeModel;
use crate::error::{Error, Result};
use crate::model::{state_transition, ProjectionPair, StateSpaceModel, SwitchedModel};
use crate::numerics::{
    condition_number, csolve, eigenvalues, leading_left_singular_basis, psd_factor, solve,
    to_complex, CMatrix, Matrix,
};
use crate::simulation::Transitions;
use crate::stability::{weighted_left_basis, PortHamiltonianMode};

type CVector = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMethod {
    BalancedTruncation,
    Irka,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub method: ReductionMethod,
    /// Order actually used (balanced truncation never splits a group of equal values).
    pub r: usize,
    /// Hankel singular values of the full model, descending; empty for IRKA.
    pub hsv: Vec<f64>,
    /// Twice the sum of the distinct neglected Hankel singular values.
    pub bt_bound: Option<f64>,
    pub projection: ProjectionPair,
    /// Condition number of `W^T V` before normalization.
    pub condition: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Relative gap below which two Hankel singular values count as equal.
const HSV_TIE: f64 = 1e-8;

fn same_hsv(a: f64, b: f64) -> bool {
    (a - b).abs() <= HSV_TIE * a.abs().max(b.abs())
}

/// `2 sum` over the distinct values in `tail`.
pub fn bt_error_bound(tail: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut last: Option<f64> = None;
    for &s in tail {
        if last.map_or(true, |l| !same_hsv(l, s)) {
            sum += s;
        }
        last = Some(s);
    }
    2.0 * sum
}

fn check_order(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::invalid(format!("reduced order {r} must lie in 1..={n}")));
    }
    Ok(())
}

fn with_envelope_hint(e: Error) -> Error {
    match e {
        Error::Instability { abscissa, .. } => Error::Instability {
            abscissa,
            hint: "; reduce against a stable hypothesized base system instead".into(),
        },
        other => other,
    }
}

/// Square-root balanced truncation of a single LTI model.
pub fn balanced_truncation_lti(
    sys: &StateSpaceModel,
    r: usize,
) -> Result<(StateSpaceModel, ReductionReport)> {
    let sys = sys.standard_form()?;
    let n = sys.states();
    check_order(r, n)?;
    let (p, q) = sys.gramians()?;
    let lp = psd_factor(&p);
    let lq = psd_factor(&q);
    let svd = (lq.transpose() * &lp).svd(true, true);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let hsv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let mut r = r;
    while r < n && same_hsv(hsv[r - 1], hsv[r]) {
        r += 1;
    }
    let bt_bound = bt_error_bound(&hsv[r..]);

    if r == n {
        let projection = ProjectionPair::identity(n);
        return Ok((
            sys,
            ReductionReport {
                method: ReductionMethod::BalancedTruncation,
                r,
                hsv,
                bt_bound: Some(bt_bound),
                projection,
                condition: 1.0,
                converged: true,
                iterations: 0,
            },
        ));
    }
    if hsv[r - 1] <= 1e-14 * hsv[0] {
        return Err(Error::Numerical(format!(
            "order {r} exceeds the numerical rank of the Gramian product (sigma_r = {:.3e})",
            hsv[r - 1]
        )));
    }
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut v = Matrix::zeros(n, r);
    let mut w = Matrix::zeros(n, r);
    for (k, &i) in order.iter().take(r).enumerate() {
        let scale = 1.0 / hsv[k].sqrt();
        v.set_column(k, &(&lp * vt.row(i).transpose() * scale));
        w.set_column(k, &(&lq * u.column(i) * scale));
    }
    let projection = ProjectionPair::new(v, w)?;
    let condition = projection.condition();
    let reduced = sys.project(&projection)?;
    Ok((
        reduced,
        ReductionReport {
            method: ReductionMethod::BalancedTruncation,
            r,
            hsv,
            bt_bound: Some(bt_bound),
            projection,
            condition,
            converged: true,
            iterations: 0,
        },
    ))
}

fn standard_envelope(env: &EnvelopeModel) -> Result<EnvelopeModel> {
    Ok(EnvelopeModel {
        sys: env.sys.standard_form()?,
        ..env.clone()
    })
}

/// Balanced truncation of the envelope system to order `r`.
pub fn balanced_truncation(env: &EnvelopeModel, r: usize) -> Result<(EnvelopeModel, ReductionReport)> {
    let env = standard_envelope(env)?;
    let (_, report) = balanced_truncation_lti(&env.sys, r).map_err(with_envelope_hint)?;
    Ok((env.project(&report.projection)?, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrkaOptions {
    pub max_iters: usize,
    /// Relative change of the sorted shifts that counts as converged.
    pub shift_tol: f64,
    /// Closed under conjugation, in the right half-plane.
    pub initial_shifts: Option<Vec<Complex64>>,
}

impl Default for IrkaOptions {
    fn default() -> Self {
        IrkaOptions {
            max_iters: 100,
            shift_tol: 1e-6,
            initial_shifts: None,
        }
    }
}

fn sorted_shifts(mut s: Vec<Complex64>) -> Vec<Complex64> {
    s.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    s
}

fn shift_change(old: &[Complex64], new: &[Complex64]) -> f64 {
    let num: f64 = old.iter().zip(new).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = old.iter().map(|a| a.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Real orthonormal basis of the span of complex columns closed under conjugation.
fn real_basis(x: &CMatrix, r: usize) -> Matrix {
    let (n, k) = x.shape();
    let mut m = Matrix::zeros(n, 2 * k);
    for j in 0..k {
        for i in 0..n {
            m[(i, j)] = x[(i, j)].re;
            m[(i, k + j)] = x[(i, j)].im;
        }
    }
    leading_left_singular_basis(&m, r)
}

/// Eigenvector of `a` for eigenvalue `lambda` as the right singular vector of `a - lambda I`.
fn eigenvector(a: &CMatrix, lambda: Complex64) -> CVector {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.unwrap();
    let k = (0..n)
        .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
        .unwrap();
    vt.row(k).adjoint()
}

struct TangentialData {
    shifts: Vec<Complex64>,
    b_dirs: Vec<CVector>,
    c_dirs: Vec<CVector>,
}

fn initial_data(sys: &StateSpaceModel, r: usize, opts: &IrkaOptions) -> Result<TangentialData> {
    let shifts = match &opts.initial_shifts {
        Some(s) => {
            if s.len() != r {
                return Err(Error::invalid(format!("need {r} initial shifts, got {}", s.len())));
            }
            s.clone()
        }
        None => {
            let re: Vec<f64> = eigenvalues(sys.a())?.iter().map(|l| l.re.abs()).collect();
            let lo = re.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-12);
            let hi = re.iter().cloned().fold(0.0, f64::max).max(lo);
            (0..r)
                .map(|k| {
                    let t = if r == 1 { 0.5 } else { k as f64 / (r - 1) as f64 };
                    Complex64::new((lo.ln() + t * (hi.ln() - lo.ln())).exp(), 0.0)
                })
                .collect()
        }
    };
    let (mut b_dirs, mut c_dirs) = (Vec::new(), Vec::new());
    for &s in &shifts {
        let h = sys.transfer_eval(s)?;
        let svd = h.svd(true, true);
        let k = (0..svd.singular_values.len())
            .max_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
            .unwrap_or(0);
        b_dirs.push(svd.v_t.unwrap().row(k).adjoint());
        c_dirs.push(svd.u.unwrap().column(k).into_owned());
    }
    Ok(TangentialData {
        shifts,
        b_dirs,
        c_dirs,
    })
}

fn irka_bases(sys: &StateSpaceModel, data: &TangentialData, r: usize) -> Result<(Matrix, Matrix)> {
    let n = sys.states();
    let a = to_complex(sys.a());
    let at = a.adjoint();
    let b = to_complex(sys.b());
    let ct = to_complex(&sys.c().transpose());
    let mut vc = CMatrix::zeros(n, r);
    let mut wc = CMatrix::zeros(n, r);
    for (k, &s) in data.shifts.iter().enumerate() {
        let mut m = -&a;
        let mut mh = -&at;
        for i in 0..n {
            m[(i, i)] += s;
            mh[(i, i)] += s.conj();
        }
        let col = |v: CVector| CMatrix::from_column_slice(n, 1, v.as_slice());
        let v = csolve(&m, &col(&b * &data.b_dirs[k])).ok_or(Error::Pole { re: s.re, im: s.im })?;
        let w = csolve(&mh, &col(&ct * &data.c_dirs[k])).ok_or(Error::Pole { re: s.re, im: s.im })?;
        vc.set_column(k, &v.column(0));
        wc.set_column(k, &w.column(0));
    }
    Ok((real_basis(&vc, r), real_basis(&wc, r)))
}

/// Tangential IRKA for a single LTI model.
pub fn irka_lti(
    sys: &StateSpaceModel,
    r: usize,
    opts: &IrkaOptions,
) -> Result<(StateSpaceModel, ReductionReport)> {
    let sys = sys.standard_form()?;
    let n = sys.states();
    check_order(r, n)?;
    crate::numerics::ensure_hurwitz(sys.a())?;
    let mut data = initial_data(&sys, r, opts)?;

    let mut best: Option<(f64, Matrix, Matrix)> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let (v, w) = irka_bases(&sys, &data, r)?;
        let wtv = w.transpose() * &v;
        let ar = solve(&wtv, &(w.transpose() * sys.a() * &v))?;
        let br = solve(&wtv, &(w.transpose() * sys.b()))?;
        let cr = sys.c() * &v;
        let poles = eigenvalues(&ar)?;
        let arc = to_complex(&ar);
        let mut x = CMatrix::zeros(r, r);
        for (k, &l) in poles.iter().enumerate() {
            x.set_column(k, &eigenvector(&arc, l));
        }
        let bh = csolve(&x, &to_complex(&br))
            .ok_or_else(|| Error::Numerical("reduced model is not diagonalizable".into()))?;
        let ch = to_complex(&cr) * &x;
        let new_shifts: Vec<Complex64> = poles
            .iter()
            .map(|l| Complex64::new(l.re.abs(), -l.im))
            .collect();
        let change = shift_change(
            &sorted_shifts(data.shifts.clone()),
            &sorted_shifts(new_shifts.clone()),
        );
        if best.as_ref().map_or(true, |b| change < b.0) {
            best = Some((change, v, w));
        }
        data = TangentialData {
            shifts: new_shifts,
            b_dirs: (0..r).map(|k| bh.row(k).adjoint()).collect(),
            c_dirs: (0..r).map(|k| ch.column(k).into_owned()).collect(),
        };
        if change < opts.shift_tol {
            converged = true;
            break;
        }
    }
    let (_, v, w) = best.expect("at least one iteration");
    let condition = condition_number(&(w.transpose() * &v));
    // rescale so that W^T V = I
    let vtw = v.transpose() * &w;
    let w = solve(&vtw.transpose(), &w.transpose())
        .map_err(|_| Error::ProjectionDegenerate { condition })?
        .transpose();
    let projection = ProjectionPair::new(v, w)?;
    let reduced = sys.project(&projection)?;
    Ok((
        reduced,
        ReductionReport {
            method: ReductionMethod::Irka,
            r,
            hsv: Vec::new(),
            bt_bound: None,
            projection,
            condition,
            converged,
            iterations,
        },
    ))
}

/// IRKA applied to the envelope system.
pub fn irka(
    env: &EnvelopeModel,
    r: usize,
    opts: &IrkaOptions,
) -> Result<(EnvelopeModel, ReductionReport)> {
    let env = standard_envelope(env)?;
    let (_, report) = irka_lti(&env.sys, r, opts).map_err(with_envelope_hint)?;
    Ok((env.project(&report.projection)?, report))
}

/// Reduces every mode with the same projection pair.
pub fn reduce_switched(sys: &SwitchedModel, pair: &ProjectionPair) -> Result<SwitchedModel> {
    SwitchedModel::new(
        sys.modes()
            .iter()
            .map(|m| m.standard_form()?.project(pair))
            .collect::<Result<_>>()?,
    )
}

/// Independently reduced modes with the transitions applied at switches.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveReducedModel {
    pub modes: Vec<StateSpaceModel>,
    pub transitions: Transitions,
}

pub fn naive_per_mode_reduction(
    sys: &SwitchedModel,
    pairs: &[ProjectionPair],
) -> Result<NaiveReducedModel> {
    if pairs.len() != sys.num_modes() {
        return Err(Error::dims(format!(
            "{} projection pairs for {} modes",
            pairs.len(),
            sys.num_modes()
        )));
    }
    let modes = sys
        .modes()
        .iter()
        .zip(pairs)
        .map(|(m, p)| m.standard_form()?.project(p))
        .collect::<Result<Vec<_>>>()?;
    let mut transitions = Vec::new();
    for (i, pi) in pairs.iter().enumerate() {
        let mut row = Vec::new();
        for (j, pj) in pairs.iter().enumerate() {
            row.push(if i == j {
                Matrix::identity(pi.reduced_order(), pi.reduced_order())
            } else {
                state_transition(pi, pj)?
            });
        }
        transitions.push(row);
    }
    Ok(NaiveReducedModel { modes, transitions })
}

/// Balanced-truncation pair of every mode with its own order.
pub fn per_mode_balanced_pairs(sys: &SwitchedModel, orders: &[usize]) -> Result<Vec<ProjectionPair>> {
    if orders.len() != sys.num_modes() {
        return Err(Error::dims("one reduced order per mode is required"));
    }
    sys.modes()
        .iter()
        .zip(orders)
        .map(|(m, &r)| Ok(balanced_truncation_lti(m, r)?.1.projection))
        .collect()
}

/// `W = Q V (V^T Q V)^{-1}`: reduced modes inherit `A^T Q + Q A < 0` with `V^T Q V`.
pub fn stability_preserving_pair(v: &Matrix, q: &Matrix) -> Result<ProjectionPair> {
    ProjectionPair::new(v.clone(), weighted_left_basis(v, q)?)
}

/// Same construction with the Hamiltonian weight `Q_i` of one mode.
pub fn ph_preserving_pair(v: &Matrix, q: &Matrix) -> Result<ProjectionPair> {
    stability_preserving_pair(v, q)
}

/// `(W^T J W, W^T R W, V^T Q V, W^T B)` for a pair built by [`ph_preserving_pair`].
pub fn reduce_port_hamiltonian(
    mode: &PortHamiltonianMode,
    pair: &ProjectionPair,
) -> Result<PortHamiltonianMode> {
    let (v, w) = (&pair.v, &pair.w);
    if v.nrows() != mode.q.nrows() {
        return Err(Error::dims("projection does not match the mode"));
    }
    let wt = w.transpose();
    PortHamiltonianMode::new(
        &wt * &mode.j * w,
        &wt * &mode.r * w,
        v.transpose() * &mode.q * v,
        &wt * &mode.b,
    )
}
