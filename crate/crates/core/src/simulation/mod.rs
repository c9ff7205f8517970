//! Time integration of switched systems and of the closed-loop envelope system.
//!
//! All runs start from the zero state. Time-driven switch instants and input
//! breakpoints are hard restart points of the integrator.

mod dopri;
mod implicit;
mod signals;
mod trajectory;

pub use signals::{Comparison, InputSignal, OutputDriven, SwitchRule, SwitchingSignal, Waveform};
pub use trajectory::{l2_norm, l2_norm_series, linf_norm, SwitchEvent, Trajectory};

use crate::envelope::{EnvelopeModel, FeedbackMaps};
use crate::error::{Error, Result};
use crate::model::{StateSpaceModel, SwitchedModel};
use crate::numerics::{Matrix, Vector};

/// Tolerances and sampling for the adaptive integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of recorded samples; `None` gives 500 intervals over the horizon.
    pub output_step: Option<f64>,
    pub record_states: bool,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rtol: 1e-6,
            atol: 1e-8,
            output_step: None,
            record_states: false,
            max_steps: 2_000_000,
            initial_step: None,
        }
    }
}

impl SimOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        SimOptions {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::invalid("integration tolerances must be positive"));
        }
        if let Some(h) = self.output_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid("output step must be positive"));
            }
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid("initial step must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-mode transition matrices, `transitions[i][j]` maps the state of mode `i` to mode `j`.
pub type Transitions = Vec<Vec<Matrix>>;

/// Linear dynamics per mode, with optional envelope-input readout and state transitions.
pub(crate) struct ModeSet {
    a: Vec<Matrix>,
    b: Vec<Matrix>,
    c: Vec<Matrix>,
    d: Vec<Matrix>,
    /// `(K C_E, K0)` so that `u_E = K C_E x + K0 u` in uncompressed coordinates.
    ue: Option<Vec<(Matrix, Matrix)>>,
    transitions: Option<Transitions>,
    inputs: usize,
    outputs: usize,
}

impl ModeSet {
    fn from_models(modes: &[StateSpaceModel], transitions: Option<&Transitions>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::invalid("at least one mode is required"))?;
        let (m, p) = (first.inputs(), first.outputs());
        let mut set = ModeSet {
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            d: Vec::new(),
            ue: None,
            transitions: transitions.cloned(),
            inputs: m,
            outputs: p,
        };
        for (i, mode) in modes.iter().enumerate() {
            if mode.inputs() != m || mode.outputs() != p {
                return Err(Error::dims(format!("mode {i} has different input/output sizes")));
            }
            let s = mode.standard_form()?;
            set.a.push(s.a().clone());
            set.b.push(s.b().clone());
            set.c.push(s.c().clone());
            set.d.push(s.d().clone());
        }
        set.check_transitions()?;
        Ok(set)
    }

    fn from_envelope(env: &EnvelopeModel, maps: &FeedbackMaps) -> Result<Self> {
        let sys = env.sys.standard_form()?;
        let (m, p) = (env.layout.inputs, env.layout.outputs);
        let mut set = ModeSet {
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            d: Vec::new(),
            ue: Some(Vec::new()),
            transitions: None,
            inputs: m,
            outputs: p,
        };
        // envelope inputs are recorded in uncompressed coordinates
        let full = env.full_io_model()?.standard_form()?;
        let raw = env.uncompressed_feedback_maps();
        let closed = env.closed_loop(maps)?;
        for (sigma, (mm, mode)) in maps.maps.iter().zip(closed.modes()).enumerate() {
            set.a.push(mode.a().clone());
            set.b.push(mode.b().clone());
            set.c.push(mode.c().clone());
            set.d.push(mode.d().clone());
            let ue = match &env.compression {
                None => (&mm.k * sys.c(), mm.k0.clone()),
                Some(_) => (&raw.maps[sigma].k * full.c(), raw.maps[sigma].k0.clone()),
            };
            set.ue.as_mut().unwrap().push(ue);
        }
        Ok(set)
    }

    fn check_transitions(&self) -> Result<()> {
        let q = self.a.len();
        match &self.transitions {
            None => {
                if self.a.iter().any(|a| a.nrows() != self.a[0].nrows()) {
                    return Err(Error::dims(
                        "modes of different orders need transition matrices",
                    ));
                }
            }
            Some(t) => {
                if t.len() != q || t.iter().any(|row| row.len() != q) {
                    return Err(Error::dims(format!("transitions must be {q} x {q}")));
                }
                for i in 0..q {
                    for j in 0..q {
                        let tij = &t[i][j];
                        if i != j && (tij.nrows() != self.dim(j) || tij.ncols() != self.dim(i)) {
                            return Err(Error::dims(format!(
                                "transition {i} -> {j} must be {}x{}",
                                self.dim(j),
                                self.dim(i)
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn num_modes(&self) -> usize {
        self.a.len()
    }

    pub(crate) fn dim(&self, mode: usize) -> usize {
        self.a[mode].nrows()
    }

    pub(crate) fn derivative(&self, mode: usize, x: &Vector, u: &Vector) -> Vector {
        &self.a[mode] * x + &self.b[mode] * u
    }

    pub(crate) fn output(&self, mode: usize, x: &Vector, u: &Vector) -> Vector {
        &self.c[mode] * x + &self.d[mode] * u
    }

    pub(crate) fn envelope_input(&self, mode: usize, x: &Vector, u: &Vector) -> Option<Vector> {
        self.ue
            .as_ref()
            .map(|v| &v[mode].0 * x + &v[mode].1 * u)
    }

    pub(crate) fn jump(&self, from: usize, to: usize, x: &Vector) -> Vector {
        match &self.transitions {
            Some(t) => &t[from][to] * x,
            None => x.clone(),
        }
    }

    pub(crate) fn a(&self, mode: usize) -> &Matrix {
        &self.a[mode]
    }

    pub(crate) fn b(&self, mode: usize) -> &Matrix {
        &self.b[mode]
    }
}

/// Bookkeeping shared by the integrators: sampling grid, switching logic and recording.
pub(crate) struct Run<'a> {
    pub(crate) modes: &'a ModeSet,
    pub(crate) sig: &'a SwitchingSignal,
    pub(crate) u: &'a InputSignal,
    pub(crate) horizon: f64,
    pub(crate) traj: Trajectory,
    grid: Vec<f64>,
    next_grid: usize,
    /// Hard stops in `(0, horizon]`: switch instants, input breakpoints and the horizon.
    stops: Vec<f64>,
    pub(crate) dwell_end: f64,
    same_time_switches: usize,
    last_switch: f64,
}

impl<'a> Run<'a> {
    pub(crate) fn new(
        modes: &'a ModeSet,
        sig: &'a SwitchingSignal,
        u: &'a InputSignal,
        horizon: f64,
        output_step: Option<f64>,
        record_states: bool,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        u.check_dim(modes.inputs)?;
        sig.validate(modes.num_modes(), modes.outputs)?;
        let switches = match sig {
            SwitchingSignal::TimeDriven { schedule } => schedule
                .switch_times()
                .iter()
                .cloned()
                .filter(|&s| s < horizon)
                .collect(),
            SwitchingSignal::OutputDriven(_) => Vec::new(),
        };
        let mut stops: Vec<f64> = switches
            .iter()
            .cloned()
            .chain(u.breakpoints().into_iter().filter(|&b| b > 0.0 && b < horizon))
            .chain(std::iter::once(horizon))
            .collect();
        stops.sort_by(|a, b| a.total_cmp(b));
        stops.dedup();

        let dt = output_step.unwrap_or(horizon / 500.0).min(horizon);
        let n = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
        let mut grid: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        grid.push(horizon);
        let near_switch = |g: f64| {
            switches
                .iter()
                .any(|&s: &f64| (g - s).abs() <= 1e-9 * dt)
        };
        grid.retain(|&g| g == 0.0 || !near_switch(g));

        Ok(Run {
            modes,
            sig,
            u,
            horizon,
            traj: Trajectory::empty(record_states, modes.ue.is_some()),
            grid,
            next_grid: 0,
            stops,
            dwell_end: 0.0,
            same_time_switches: 0,
            last_switch: f64::NEG_INFINITY,
        })
    }

    /// First hard stop strictly after `t`, including the end of a dwell period.
    pub(crate) fn next_stop(&self, t: f64) -> f64 {
        let k = self.stops.partition_point(|&s| s <= t);
        let stop = self.stops.get(k).copied().unwrap_or(self.horizon);
        if self.dwell_end > t {
            stop.min(self.dwell_end)
        } else {
            stop
        }
    }

    pub(crate) fn record(&mut self, t: f64, mode: usize, x: &Vector, u: &Vector) {
        let y = self.modes.output(mode, x, u);
        let ue = self.modes.envelope_input(mode, x, u);
        self.traj.push(t, mode, x, y, ue);
    }

    /// Records grid samples in `(t0, t1]` (or `(t0, t1)` when `open`) from a state interpolant.
    pub(crate) fn emit_grid(
        &mut self,
        t1: f64,
        open: bool,
        mode: usize,
        mut state_at: impl FnMut(f64) -> Vector,
    ) {
        let tol = 1e-12 * self.horizon;
        while let Some(&g) = self.grid.get(self.next_grid) {
            let inside = if open { g < t1 - tol } else { g <= t1 + tol };
            if !inside {
                break;
            }
            self.next_grid += 1;
            if g == 0.0 {
                continue;
            }
            let x = state_at(g);
            let u = self.u.eval(g);
            self.record(g, mode, &x, &u);
        }
    }

    /// Mode after a time-driven switch at `t`, if `t` is a switch instant.
    pub(crate) fn scheduled_switch(&self, t: f64, mode: usize) -> Option<usize> {
        match self.sig {
            SwitchingSignal::TimeDriven { schedule } => {
                let st = schedule.switch_times();
                let k = st.partition_point(|&s| s < t);
                if st.get(k) == Some(&t) {
                    Some(schedule.modes()[k + 1]).filter(|&m| m != mode)
                } else {
                    None
                }
            }
            SwitchingSignal::OutputDriven(_) => None,
        }
    }

    /// Target mode of the first output-driven rule that fires for output `y` in `mode`.
    pub(crate) fn firing_rule(&self, t: f64, mode: usize, y: &Vector) -> Option<usize> {
        match self.sig {
            SwitchingSignal::OutputDriven(od) if t >= self.dwell_end => od
                .rules
                .iter()
                .find(|r| r.from == mode && r.fires(y[r.channel]))
                .map(|r| r.to),
            _ => None,
        }
    }

    pub(crate) fn is_output_driven(&self) -> bool {
        matches!(self.sig, SwitchingSignal::OutputDriven(_))
    }

    /// Records the outgoing sample, applies the switch and records the incoming sample.
    pub(crate) fn switch(&mut self, t: f64, from: usize, to: usize, x: &Vector) -> Result<Vector> {
        if t == self.last_switch {
            self.same_time_switches += 1;
            if self.same_time_switches > self.modes.num_modes() {
                return Err(Error::Numerical(format!(
                    "switching rules chatter at t = {t}; increase min_dwell"
                )));
            }
        } else {
            self.same_time_switches = 0;
            self.last_switch = t;
        }
        let u_left = self.u.eval(t);
        self.record(t, from, x, &u_left);
        let xn = self.modes.jump(from, to, x);
        self.record(t, to, &xn, &u_left);
        self.traj.events.push(SwitchEvent { time: t, from, to });
        if let SwitchingSignal::OutputDriven(od) = self.sig {
            self.dwell_end = t + od.min_dwell;
        }
        Ok(xn)
    }
}

fn run_adaptive(
    modes: &ModeSet,
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    let run = Run::new(modes, sig, u, horizon, opts.output_step, opts.record_states)?;
    dopri::integrate(run, opts)
}

/// Adaptive Dormand-Prince simulation of a switched system from the zero state.
///
/// `transitions[i][j]` is applied to the state when switching from mode `i` to `j`.
pub fn simulate_switched(
    sys: &SwitchedModel,
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    opts: &SimOptions,
    transitions: Option<&Transitions>,
) -> Result<Trajectory> {
    simulate_modes(sys.modes(), sig, u, horizon, opts, transitions)
}

/// Like [`simulate_switched`] for modes whose state dimensions may differ.
pub fn simulate_modes(
    modes: &[StateSpaceModel],
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    opts: &SimOptions,
    transitions: Option<&Transitions>,
) -> Result<Trajectory> {
    let set = ModeSet::from_models(modes, transitions)?;
    run_adaptive(&set, sig, u, horizon, opts)
}

/// Simulates the envelope system in closed loop, `u_E = K(sigma) y_E + K0(sigma) u`,
/// recording `y = C0(sigma) y_E + D0(sigma) u` and the envelope inputs.
pub fn simulate_envelope_closed_loop(
    env: &EnvelopeModel,
    maps: &FeedbackMaps,
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let set = ModeSet::from_envelope(env, maps)?;
    run_adaptive(&set, sig, u, horizon, opts)
}

/// Fixed-step backward Euler simulation; steps are shortened to land on every hard stop.
pub fn simulate_implicit(
    sys: &SwitchedModel,
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    simulate_implicit_modes(sys.modes(), sig, u, horizon, step, None)
}

/// Backward Euler for modes of possibly different orders with state transitions.
pub fn simulate_implicit_modes(
    modes: &[StateSpaceModel],
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    step: f64,
    transitions: Option<&Transitions>,
) -> Result<Trajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("invalid step size {step}")));
    }
    let set = ModeSet::from_models(modes, transitions)?;
    let run = Run::new(&set, sig, u, horizon, Some(step), false)?;
    implicit::integrate(run, step)
}

/// Backward Euler for the closed-loop envelope system.
pub fn simulate_envelope_implicit(
    env: &EnvelopeModel,
    maps: &FeedbackMaps,
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("invalid step size {step}")));
    }
    let set = ModeSet::from_envelope(env, maps)?;
    let run = Run::new(&set, sig, u, horizon, Some(step), false)?;
    implicit::integrate(run, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::envelope_of;
    use crate::model::{exact_switched_states, SwitchSchedule};

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    fn scalar() -> SwitchedModel {
        let s = StateSpaceModel::strictly_proper(m(1, 1, &[-1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]))
            .unwrap();
        SwitchedModel::new(vec![s]).unwrap()
    }

    fn rlc() -> SwitchedModel {
        let c = m(1, 2, &[0.0, 1.0]);
        SwitchedModel::new(vec![
            StateSpaceModel::strictly_proper(
                m(2, 2, &[0.0, -1.0, 2.0, -4.0]),
                m(2, 1, &[1.0, 2.0]),
                c.clone(),
            )
            .unwrap(),
            StateSpaceModel::strictly_proper(m(2, 2, &[0.0, -1.0, 1.0, -2.0]), m(2, 1, &[1.0, 1.0]), c)
                .unwrap(),
        ])
        .unwrap()
    }

    fn tight() -> SimOptions {
        SimOptions::with_tolerances(1e-10, 1e-12)
    }

    #[test]
    fn scalar_step_response() {
        let u = InputSignal::constant(&[1.0]).unwrap();
        let tr = simulate_switched(&scalar(), &SwitchingSignal::constant(0), &u, 1.0, &tight(), None)
            .unwrap();
        let y = tr.final_output().unwrap()[0];
        assert!((y - (1.0 - (-1f64).exp())).abs() < 1e-7, "{y}");
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert_eq!(tr.len(), 501);
    }

    #[test]
    fn implicit_is_first_order() {
        let u = InputSignal::constant(&[1.0]).unwrap();
        let exact = 1.0 - (-1f64).exp();
        let err = |h: f64| {
            let tr = simulate_implicit(&scalar(), &SwitchingSignal::constant(0), &u, 1.0, h).unwrap();
            (tr.final_output().unwrap()[0] - exact).abs()
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 < 1e-3);
        assert!((e1 / e2 - 2.0).abs() < 0.05, "ratio {}", e1 / e2);
        assert!(simulate_implicit(&scalar(), &SwitchingSignal::constant(0), &u, 1.0, 0.0).is_err());
    }

    #[test]
    fn implicit_rejects_singular_step() {
        let s = StateSpaceModel::strictly_proper(m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]))
            .unwrap();
        let sys = SwitchedModel::new(vec![s]).unwrap();
        let err = simulate_implicit(&sys, &SwitchingSignal::constant(0), &InputSignal::zero(1), 2.0, 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn matches_exact_solution_across_switches() {
        let sys = rlc();
        let sched = SwitchSchedule::new(vec![0.0, 0.3, 0.7, 1.3], vec![0, 1, 0, 1]).unwrap();
        let u = InputSignal::scalar(Waveform::PiecewiseConstant {
            breakpoints: vec![0.5, 1.0],
            levels: vec![1.0, -2.0, 0.5],
        })
        .unwrap();
        let sig = SwitchingSignal::time_driven(sched.clone());
        let mut opts = tight();
        opts.record_states = true;
        let tr = simulate_switched(&sys, &sig, &u, 2.0, &opts, None).unwrap();
        assert_eq!(tr.switch_count(), 3);
        let xs = exact_switched_states(&sys, &sched, &u, &tr.times).unwrap();
        for (x, xe) in tr.states.as_ref().unwrap().iter().zip(&xs) {
            assert!((x - xe).norm() < 1e-8);
        }
        // duplicated samples at the switch carry the two modes
        let k = tr.times.iter().position(|&t| t == 0.3).unwrap();
        assert_eq!((tr.times[k + 1], tr.modes[k], tr.modes[k + 1]), (0.3, 0, 1));
    }

    #[test]
    fn rlc_steering_scenario() {
        // controlled to (xi, 2 xi) at t = 1 with u = 0 afterwards, mode 2 then decays as xi e^{-(t-1)}
        let xi = 0.7;
        let sys = rlc();
        let sched = SwitchSchedule::new(vec![0.0, 1.0], vec![0, 1]).unwrap();
        let probe = |lv: [f64; 2]| {
            let u = InputSignal::scalar(Waveform::PiecewiseConstant {
                breakpoints: vec![0.5, 1.0],
                levels: vec![lv[0], lv[1], 0.0],
            })
            .unwrap();
            exact_switched_states(&sys, &sched, &u, &[1.0]).unwrap().remove(0)
        };
        let (g1, g2) = (probe([1.0, 0.0]), probe([0.0, 1.0]));
        let gm = Matrix::from_columns(&[g1, g2]);
        let lv = gm.lu().solve(&Vector::from_vec(vec![xi, 2.0 * xi])).unwrap();
        let u = InputSignal::scalar(Waveform::PiecewiseConstant {
            breakpoints: vec![0.5, 1.0],
            levels: vec![lv[0], lv[1], 0.0],
        })
        .unwrap();
        let tr = simulate_switched(&sys, &SwitchingSignal::time_driven(sched), &u, 2.0, &tight(), None)
            .unwrap();
        let y = tr.final_output().unwrap()[0];
        assert!((y - xi * (-1f64).exp()).abs() < 1e-6, "{y}");
    }

    #[test]
    fn single_mode_envelope_is_the_system() {
        let sys = scalar();
        let (env, maps) = envelope_of(&sys).unwrap();
        let u = InputSignal::scalar(Waveform::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        })
        .unwrap();
        let sig = SwitchingSignal::constant(0);
        let a = simulate_switched(&sys, &sig, &u, 2.0, &tight(), None).unwrap();
        let b = simulate_envelope_closed_loop(&env, &maps, &sig, &u, 2.0, &tight()).unwrap();
        assert!(linf_norm(&a.difference(&b).unwrap(), None).unwrap() < 1e-9);
    }

    #[test]
    fn envelope_closed_loop_reproduces_switched_output() {
        let sys = rlc();
        let (env, maps) = envelope_of(&sys).unwrap();
        let sched = SwitchSchedule::new(vec![0.0, 0.4, 0.9, 1.5], vec![0, 1, 0, 1]).unwrap();
        let sig = SwitchingSignal::time_driven(sched);
        let u = InputSignal::new(vec![Waveform::Exp {
            scale: 1.0,
            rate: 1.0,
        }])
        .unwrap();
        let opts = SimOptions::default();
        let a = simulate_switched(&sys, &sig, &u, 2.0, &opts, None).unwrap();
        let b = simulate_envelope_closed_loop(&env, &maps, &sig, &u, 2.0, &opts).unwrap();
        let ymax = linf_norm(&a, None).unwrap();
        let d = linf_norm(&a.difference(&b).unwrap(), None).unwrap();
        assert!(d <= 10.0 * opts.rtol * (1.0 + ymax), "{d}");
        assert_eq!(b.envelope_inputs.as_ref().unwrap().len(), b.len());
    }

    #[test]
    fn output_driven_crossing_is_located() {
        // y = (1 + p)(1 - e^{-t}) crosses (1 + p/2)(1 - e^{-1}) inside (0, 1)
        let p = 0.1;
        let theta = (1.0 + p / 2.0) * (1.0 - (-1f64).exp());
        let full = StateSpaceModel::strictly_proper(
            m(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            m(2, 1, &[1.0, 1.0]),
            m(1, 2, &[1.0, p]),
        )
        .unwrap();
        let other = StateSpaceModel::strictly_proper(
            m(2, 2, &[-2.0, 0.0, 0.0, -2.0]),
            m(2, 1, &[1.0, 1.0]),
            m(1, 2, &[1.0, p]),
        )
        .unwrap();
        let sys = SwitchedModel::new(vec![full, other]).unwrap();
        let sig = SwitchingSignal::OutputDriven(OutputDriven {
            rules: vec![SwitchRule {
                from: 0,
                to: 1,
                comparison: Comparison::Above,
                threshold: theta,
                channel: 0,
            }],
            initial_mode: 0,
            min_dwell: 0.0,
        });
        let u = InputSignal::scalar(Waveform::PiecewiseConstant {
            breakpoints: vec![1.0],
            levels: vec![1.0, 0.0],
        })
        .unwrap();
        let t1 = -(1.0 - theta / (1.0 + p)).ln();
        let tr = simulate_switched(&sys, &sig, &u, 2.0, &tight(), None).unwrap();
        assert_eq!(tr.switch_count(), 1);
        assert!((tr.events[0].time - t1).abs() < 1e-8, "{} vs {t1}", tr.events[0].time);

        let be = simulate_implicit(&sys, &sig, &u, 2.0, 1e-4).unwrap();
        assert_eq!(be.switch_count(), 1);
        assert!((be.events[0].time - t1).abs() < 1e-3);
    }

    #[test]
    fn hysteresis_with_dwell() {
        // mode 0 charges towards 1, mode 1 discharges towards 0
        let charge = StateSpaceModel::strictly_proper(m(1, 1, &[-1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]))
            .unwrap();
        let discharge =
            StateSpaceModel::strictly_proper(m(1, 1, &[-1.0]), m(1, 1, &[0.0]), m(1, 1, &[1.0]))
                .unwrap();
        let sys = SwitchedModel::new(vec![charge, discharge]).unwrap();
        let mut od = OutputDriven::hysteresis(0, 0.3, 0.6, 0, 1, 0);
        let u = InputSignal::constant(&[1.0]).unwrap();
        let tr = simulate_switched(&sys, &SwitchingSignal::OutputDriven(od.clone()), &u, 5.0, &tight(), None)
            .unwrap();
        assert!(tr.switch_count() >= 4);
        let y = tr.channel(0);
        assert!(y.iter().all(|&v| v <= 0.6 + 1e-8));
        assert!(y.iter().skip(tr.len() / 2).all(|&v| v >= 0.3 - 1e-8));
        // first rise 0 -> 0.6 takes ln(1 / 0.4); first decay 0.6 -> 0.3 takes ln 2
        assert!((tr.events[0].time - (2.5f64).ln()).abs() < 1e-8);
        assert!((tr.events[1].time - (2.5f64).ln() - 2f64.ln()).abs() < 1e-8);

        od.min_dwell = 1.0;
        let slow = simulate_switched(&sys, &SwitchingSignal::OutputDriven(od), &u, 5.0, &tight(), None)
            .unwrap();
        for w in slow.events.windows(2) {
            assert!(w[1].time - w[0].time >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn transitions_are_applied() {
        let sys = scalar();
        let two = SwitchedModel::new(vec![sys.mode(0).clone(), sys.mode(0).clone()]).unwrap();
        let tr_mats = vec![
            vec![Matrix::identity(1, 1), m(1, 1, &[0.0])],
            vec![m(1, 1, &[0.0]), Matrix::identity(1, 1)],
        ];
        let sched = SwitchSchedule::new(vec![0.0, 1.0], vec![0, 1]).unwrap();
        let u = InputSignal::constant(&[1.0]).unwrap();
        let tr = simulate_switched(
            &two,
            &SwitchingSignal::time_driven(sched),
            &u,
            2.0,
            &tight(),
            Some(&tr_mats),
        )
        .unwrap();
        // reset to zero at t = 1, so y(2) = 1 - e^{-1}
        assert!((tr.final_output().unwrap()[0] - (1.0 - (-1f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let sys = rlc();
        let sig = SwitchingSignal::time_driven(SwitchSchedule::new(vec![0.0, 0.5], vec![1, 0]).unwrap());
        let u = InputSignal::scalar(Waveform::Sine {
            amplitude: 2.0,
            frequency: 3.0,
        })
        .unwrap();
        let a = simulate_switched(&sys, &sig, &u, 3.0, &SimOptions::default(), None).unwrap();
        let b = simulate_switched(&sys, &sig, &u, 3.0, &SimOptions::default(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stiff_problem_reports_stiffness() {
        let s = StateSpaceModel::strictly_proper(m(1, 1, &[-1e9]), m(1, 1, &[1e9]), m(1, 1, &[1.0]))
            .unwrap();
        let sys = SwitchedModel::new(vec![s]).unwrap();
        let mut opts = SimOptions::default();
        opts.max_steps = 1000;
        let err = simulate_switched(
            &sys,
            &SwitchingSignal::constant(0),
            &InputSignal::constant(&[1.0]).unwrap(),
            10.0,
            &opts,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Stiffness { .. }));
    }
}
