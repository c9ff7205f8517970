//! System data model: LTI modes, switched systems, projections and the exact
//! piecewise-constant-input solution of a switched system.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, check_finite, check_square, condition_number, expm, psd_factor, solve, solve_lyapunov,
    CMatrix, Matrix, Vector,
};
use crate::simulation::InputSignal;

/// Largest acceptable condition number of `W^T V` or of a descriptor matrix `E`.
pub const MAX_CONDITION: f64 = 1e12;

/// One LTI mode `E x' = A x + B u`, `y = C x + D u`; `E` absent means identity.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
    e: Option<Matrix>,
}

impl StateSpaceModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        check_square(&a, "A")?;
        let n = a.nrows();
        if b.nrows() != n {
            return Err(Error::dims(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::dims(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::dims(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            check_finite(m, name)?;
        }
        Ok(StateSpaceModel { a, b, c, d, e: None })
    }

    /// Model with zero feedthrough.
    pub fn strictly_proper(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let d = Matrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    /// Generalized state-space model; `E` must be nonsingular.
    pub fn descriptor(a: Matrix, b: Matrix, c: Matrix, d: Matrix, e: Matrix) -> Result<Self> {
        let mut sys = Self::new(a, b, c, d)?;
        if e.shape() != sys.a.shape() {
            return Err(Error::dims("E must have the shape of A"));
        }
        check_finite(&e, "E")?;
        let cond = condition_number(&e);
        if cond > MAX_CONDITION {
            return Err(Error::invalid(format!(
                "E is singular or ill-conditioned (condition number {cond:.3e})"
            )));
        }
        sys.e = Some(e);
        Ok(sys)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }
    pub fn e(&self) -> Option<&Matrix> {
        self.e.as_ref()
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_standard(&self) -> bool {
        self.e.is_none()
    }

    /// Condition number of `E`, if present.
    pub fn descriptor_condition(&self) -> Option<f64> {
        self.e.as_ref().map(condition_number)
    }

    /// `(E^{-1} A, E^{-1} B, C, D)`.
    pub fn standard_form(&self) -> Result<StateSpaceModel> {
        match &self.e {
            None => Ok(self.clone()),
            Some(e) => StateSpaceModel::new(
                solve(e, &self.a)?,
                solve(e, &self.b)?,
                self.c.clone(),
                self.d.clone(),
            ),
        }
    }

    fn require_standard(&self, what: &str) -> Result<()> {
        if self.is_standard() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{what} needs a standard-form model; call standard_form() first"
            )))
        }
    }

    /// Petrov–Galerkin reduction with `(W^T V)^{-1} W^T` applied on the left.
    pub fn project(&self, pair: &ProjectionPair) -> Result<StateSpaceModel> {
        self.require_standard("projection")?;
        if pair.v.nrows() != self.states() {
            return Err(Error::dims(format!(
                "projection acts on dimension {}, model has {} states",
                pair.v.nrows(),
                self.states()
            )));
        }
        let wt = pair.left_inverse()?;
        StateSpaceModel::new(
            &wt * &self.a * &pair.v,
            &wt * &self.b,
            &self.c * &pair.v,
            self.d.clone(),
        )
    }

    /// `C (sE - A)^{-1} B + D`.
    pub fn transfer_eval(&self, s: Complex64) -> Result<CMatrix> {
        let n = self.states();
        let mut pencil = numerics::to_complex(&(-&self.a));
        match &self.e {
            None => {
                for i in 0..n {
                    pencil[(i, i)] += s;
                }
            }
            Some(e) => pencil += numerics::to_complex(e) * s,
        }
        let x = numerics::csolve(&pencil, &numerics::to_complex(&self.b))
            .ok_or(Error::Pole { re: s.re, im: s.im })?;
        let g = numerics::to_complex(&self.c) * x + numerics::to_complex(&self.d);
        if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Pole { re: s.re, im: s.im });
        }
        Ok(g)
    }

    /// Controllability and observability Gramians of the standard-form realization.
    pub fn gramians(&self) -> Result<(Matrix, Matrix)> {
        let sys = self.standard_form()?;
        numerics::ensure_hurwitz(&sys.a)?;
        let p = solve_lyapunov(&sys.a, &(&sys.b * sys.b.transpose()))?;
        let q = solve_lyapunov(&sys.a.transpose(), &(sys.c.transpose() * &sys.c))?;
        Ok((p, q))
    }

    /// Hankel singular values, descending.
    pub fn hankel_singular_values(&self) -> Result<Vec<f64>> {
        let (p, q) = self.gramians()?;
        Ok(hsv_from_gramians(&p, &q))
    }

    /// H2 norm `sqrt(tr(C P C^T))`; only finite for strictly proper models.
    pub fn h2_norm(&self) -> Result<f64> {
        if self.d.iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("the H2 norm of a model with feedthrough is infinite"));
        }
        let sys = self.standard_form()?;
        numerics::ensure_hurwitz(&sys.a)?;
        let p = solve_lyapunov(&sys.a, &(&sys.b * sys.b.transpose()))?;
        Ok((&sys.c * p * sys.c.transpose()).trace().max(0.0).sqrt())
    }

    /// H-infinity norm of the standard-form realization.
    pub fn hinf_norm(&self, tol: f64) -> Result<f64> {
        let sys = self.standard_form()?;
        Ok(numerics::hinf_norm_with_peak(&sys.a, &sys.b, &sys.c, &sys.d, tol)?.norm)
    }

    pub fn output(&self, x: &Vector, u: &Vector) -> Vector {
        &self.c * x + &self.d * u
    }
}

/// Stacked realization of `G_a - G_b` with block-diagonal state matrix.
pub fn error_system(a: &StateSpaceModel, b: &StateSpaceModel) -> Result<StateSpaceModel> {
    if a.inputs() != b.inputs() || a.outputs() != b.outputs() {
        return Err(Error::dims("error system needs equal input and output sizes"));
    }
    let (a, b) = (a.standard_form()?, b.standard_form()?);
    StateSpaceModel::new(
        numerics::blkdiag(&[&a.a, &b.a]),
        numerics::vcat(a.inputs(), &[&a.b, &b.b]),
        numerics::hcat(a.outputs(), &[&a.c, &(-&b.c)]),
        &a.d - &b.d,
    )
}

/// Square roots of the eigenvalues of `P Q` from symmetric factors `P = L L^T`, `Q = R R^T`
/// as the singular values of `R^T L`.
pub(crate) fn hsv_from_gramians(p: &Matrix, q: &Matrix) -> Vec<f64> {
    if p.is_empty() {
        return Vec::new();
    }
    let lp = psd_factor(p);
    let lq = psd_factor(q);
    let mut sv: Vec<f64> = (lq.transpose() * lp)
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Ordered list of modes sharing `(n, m, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedModel {
    modes: Vec<StateSpaceModel>,
}

impl SwitchedModel {
    pub fn new(modes: Vec<StateSpaceModel>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::invalid("a switched model needs at least one mode"))?;
        let dims = (first.states(), first.inputs(), first.outputs());
        for (i, m) in modes.iter().enumerate() {
            if (m.states(), m.inputs(), m.outputs()) != dims {
                return Err(Error::dims(format!(
                    "mode {i} has dimensions {:?}, mode 0 has {dims:?}",
                    (m.states(), m.inputs(), m.outputs())
                )));
            }
        }
        Ok(SwitchedModel { modes })
    }

    pub fn modes(&self) -> &[StateSpaceModel] {
        &self.modes
    }
    pub fn mode(&self, i: usize) -> &StateSpaceModel {
        &self.modes[i]
    }
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }
    pub fn states(&self) -> usize {
        self.modes[0].states()
    }
    pub fn inputs(&self) -> usize {
        self.modes[0].inputs()
    }
    pub fn outputs(&self) -> usize {
        self.modes[0].outputs()
    }

    pub fn is_standard(&self) -> bool {
        self.modes.iter().all(|m| m.is_standard())
    }

    /// Every mode converted to `E = I`.
    pub fn standard_form(&self) -> Result<SwitchedModel> {
        SwitchedModel::new(
            self.modes
                .iter()
                .map(|m| m.standard_form())
                .collect::<Result<_>>()?,
        )
    }
}

/// Right and left projection bases `V`, `W` of size `n x r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub v: Matrix,
    pub w: Matrix,
}

impl ProjectionPair {
    pub fn new(v: Matrix, w: Matrix) -> Result<Self> {
        if v.shape() != w.shape() {
            return Err(Error::dims(format!(
                "V is {}x{} but W is {}x{}",
                v.nrows(),
                v.ncols(),
                w.nrows(),
                w.ncols()
            )));
        }
        if v.ncols() > v.nrows() {
            return Err(Error::dims("reduced order exceeds the full order"));
        }
        check_finite(&v, "V")?;
        check_finite(&w, "W")?;
        let pair = ProjectionPair { v, w };
        let cond = pair.condition();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::ProjectionDegenerate { condition: cond });
        }
        Ok(pair)
    }

    /// Galerkin pair `V = W`.
    pub fn galerkin(v: Matrix) -> Result<Self> {
        Self::new(v.clone(), v)
    }

    pub fn identity(n: usize) -> Self {
        ProjectionPair {
            v: Matrix::identity(n, n),
            w: Matrix::identity(n, n),
        }
    }

    pub fn full_order(&self) -> usize {
        self.v.nrows()
    }
    pub fn reduced_order(&self) -> usize {
        self.v.ncols()
    }

    /// Condition number of `W^T V`.
    pub fn condition(&self) -> f64 {
        condition_number(&(self.w.transpose() * &self.v))
    }

    /// `(W^T V)^{-1} W^T`.
    pub fn left_inverse(&self) -> Result<Matrix> {
        let wtv = self.w.transpose() * &self.v;
        solve(&wtv, &self.w.transpose()).map_err(|_| Error::ProjectionDegenerate {
            condition: condition_number(&wtv),
        })
    }
}

/// Reduced-state transition `(W_j^T V_j)^{-1} W_j^T V_i` applied when switching from mode `i` to `j`.
pub fn state_transition(pi: &ProjectionPair, pj: &ProjectionPair) -> Result<Matrix> {
    if pi.full_order() != pj.full_order() {
        return Err(Error::dims("projection pairs act on different full orders"));
    }
    Ok(pj.left_inverse()? * &pi.v)
}

#[derive(Deserialize)]
struct RawSchedule {
    breakpoints: Vec<f64>,
    modes: Vec<usize>,
}

/// Time-driven switching: mode `modes[k]` is active on `(breakpoints[k], breakpoints[k+1]]`,
/// with `breakpoints[0] = 0` and the last mode held forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct SwitchSchedule {
    breakpoints: Vec<f64>,
    modes: Vec<usize>,
}

impl TryFrom<RawSchedule> for SwitchSchedule {
    type Error = Error;
    fn try_from(raw: RawSchedule) -> Result<Self> {
        SwitchSchedule::new(raw.breakpoints, raw.modes)
    }
}

impl SwitchSchedule {
    pub fn new(breakpoints: Vec<f64>, modes: Vec<usize>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != modes.len() {
            return Err(Error::invalid(
                "schedule needs one mode per breakpoint and at least one entry",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::invalid("schedule must start at t = 0"));
        }
        if !breakpoints.iter().all(|t| t.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid("schedule times must be strictly increasing"));
        }
        if modes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("consecutive schedule modes must differ"));
        }
        Ok(SwitchSchedule { breakpoints, modes })
    }

    pub fn constant(mode: usize) -> Self {
        SwitchSchedule {
            breakpoints: vec![0.0],
            modes: vec![mode],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Switching instants `t_1, ..., t_s`.
    pub fn switch_times(&self) -> &[f64] {
        &self.breakpoints[1..]
    }

    pub fn mode_at(&self, t: f64) -> usize {
        self.modes[self.switch_times().partition_point(|&s| s < t)]
    }

    pub(crate) fn check_modes(&self, num_modes: usize) -> Result<()> {
        match self.modes.iter().find(|&&m| m >= num_modes) {
            Some(m) => Err(Error::invalid(format!(
                "schedule references mode {m}, system has {num_modes}"
            ))),
            None => Ok(()),
        }
    }
}

/// Caches `(e^{A h}, int_0^h e^{A s} ds B)` per mode and step length.
struct Propagator<'a> {
    modes: &'a [StateSpaceModel],
    cache: HashMap<(usize, i64), (Matrix, Matrix)>,
}

impl<'a> Propagator<'a> {
    fn new(modes: &'a [StateSpaceModel]) -> Self {
        Propagator {
            modes,
            cache: HashMap::new(),
        }
    }

    fn advance(&mut self, mode: usize, h: f64, x: &Vector, u: &Vector) -> Result<Vector> {
        if h <= 0.0 {
            return Ok(x.clone());
        }
        let key = (mode, (h * 1e13).round() as i64);
        if !self.cache.contains_key(&key) {
            let sys = &self.modes[mode];
            let (n, m) = (sys.states(), sys.inputs());
            let mut aug = Matrix::zeros(n + m, n + m);
            aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * h));
            aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * h));
            let f = expm(&aug)?;
            let phi = f.view((0, 0), (n, n)).into_owned();
            let gamma = f.view((0, n), (n, m)).into_owned();
            self.cache.insert(key, (phi, gamma));
        }
        let (phi, gamma) = &self.cache[&key];
        Ok(phi * x + gamma * u)
    }
}

/// States of the switched system at nondecreasing `times`, with zero initial state,
/// evaluated with matrix exponentials on every constant-input, constant-mode segment.
pub fn exact_switched_states(
    sys: &SwitchedModel,
    sched: &SwitchSchedule,
    u: &InputSignal,
    times: &[f64],
) -> Result<Vec<Vector>> {
    let sys = sys.standard_form()?;
    sched.check_modes(sys.num_modes())?;
    u.check_dim(sys.inputs())?;
    if !u.is_piecewise_constant() {
        return Err(Error::Unsupported(
            "the exact solution needs a piecewise-constant input".into(),
        ));
    }
    if let Some(&t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::Domain(t));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("evaluation times must be nondecreasing"));
    }
    let mut events: Vec<f64> = sched
        .switch_times()
        .iter()
        .cloned()
        .chain(u.breakpoints())
        .filter(|&t| t > 0.0)
        .collect();
    events.sort_by(|a, b| a.total_cmp(b));
    events.dedup();

    let mut prop = Propagator::new(sys.modes());
    let mut x = Vector::zeros(sys.states());
    let mut now = 0.0;
    let mut next_event = 0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while now < target {
            while next_event < events.len() && events[next_event] <= now {
                next_event += 1;
            }
            let end = match events.get(next_event) {
                Some(&e) if e < target => e,
                _ => target,
            };
            // mode and input are constant on (now, end]
            x = prop.advance(sched.mode_at(end), end - now, &x, &u.eval(end))?;
            now = end;
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// State and output at time `t` (outputs use the mode active at `t`).
pub fn exact_switched_solution(
    sys: &SwitchedModel,
    sched: &SwitchSchedule,
    u: &InputSignal,
    t: f64,
) -> Result<(Vector, Vector)> {
    let x = exact_switched_states(sys, sched, u, &[t])?.remove(0);
    let y = sys.mode(sched.mode_at(t)).output(&x, &u.eval(t));
    Ok((x, y))
}
