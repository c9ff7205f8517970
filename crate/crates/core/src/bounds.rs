//! A-posteriori output error bound for reduced envelope systems and the
//! balanced-truncation envelope bound.

use log::{debug, warn};

use crate::envelope::EnvelopeModel;
use crate::error::{Error, Result};
use crate::model::error_system;
use crate::numerics::ensure_hurwitz;
use crate::reduction::{bt_error_bound, ReductionReport};
use crate::simulation::{
    l2_norm, l2_norm_series, simulate_envelope_closed_loop, InputSignal, SimOptions,
    SwitchingSignal,
};

/// Relative accuracy of the H-infinity norms used in the bound.
const HINF_TOL: f64 = 1e-9;

/// `max_j ||M_j||_2 * ||Sigma_E||_inf` and whether it is below one.
pub fn check_condition(env: &EnvelopeModel) -> Result<(f64, bool)> {
    let full = env.full_io_model()?.standard_form()?;
    ensure_hurwitz(full.a())?;
    let m = env.max_core_norm();
    if m == 0.0 {
        return Ok((0.0, true));
    }
    let value = m * full.hinf_norm(HINF_TOL)?;
    Ok((value, value < 1.0))
}

/// `sqrt(2) / (1 - condition_value)`.
pub fn eta(condition_value: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&condition_value) {
        return Err(Error::BoundInapplicable { condition_value });
    }
    Ok(std::f64::consts::SQRT_2 / (1.0 - condition_value))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub condition_value: f64,
    pub condition_ok: bool,
    pub eta: f64,
    /// `||Sigma_E - Sigma~_E||_inf`.
    pub hinf_error: f64,
    /// `||u~_E||_L2` of the reduced closed loop over the horizon.
    pub u_tilde_l2: f64,
    pub bound: f64,
    /// `||y - y~||_L2` from simulating both closed loops.
    pub measured_error: f64,
    pub output_l2: f64,
    /// Sample spacing at which the quadrature settled.
    pub output_step: f64,
}

impl BoundReport {
    /// `bound / measured_error`.
    pub fn conservativeness(&self) -> f64 {
        self.bound / self.measured_error
    }
}

/// Evaluates the a-posteriori bound for a time-driven switching signal.
///
/// Both envelope closed loops are simulated; the sampling is refined by halving
/// until two successive L2 norms agree to `1e-6` relative.
pub fn posterior_bound(
    env: &EnvelopeModel,
    reduced: &EnvelopeModel,
    sig: &SwitchingSignal,
    u: &InputSignal,
    horizon: f64,
    opts: &SimOptions,
) -> Result<BoundReport> {
    if matches!(sig, SwitchingSignal::OutputDriven(_)) {
        return Err(Error::Unsupported(
            "the error bound needs switching that depends only on time; \
             output-driven switching can amplify reduction errors without bound"
                .into(),
        ));
    }
    if env.layout != reduced.layout || env.core_matrices != reduced.core_matrices {
        return Err(Error::invalid(
            "the reduced envelope must share the block layout and core matrices",
        ));
    }
    let (condition_value, condition_ok) = check_condition(env)?;
    if !condition_ok {
        return Err(Error::BoundInapplicable { condition_value });
    }
    let eta = eta(condition_value)?;
    let err_sys = error_system(&env.full_io_model()?, &reduced.full_io_model()?)?;
    let hinf_error = err_sys.hinf_norm(HINF_TOL)?;

    let maps = env.feedback_maps();
    let mut o = opts.clone();
    let mut step = o.output_step.unwrap_or(horizon / 500.0);
    let mut last: Option<(f64, f64)> = None;
    let mut result = None;
    for round in 0..8 {
        o.output_step = Some(step);
        let full = simulate_envelope_closed_loop(env, &maps, sig, u, horizon, &o)?;
        let red = simulate_envelope_closed_loop(reduced, &maps, sig, u, horizon, &o)?;
        let ue = red
            .envelope_inputs
            .as_ref()
            .ok_or_else(|| Error::Numerical("closed loop did not record u_E".into()))?;
        let u_tilde_l2 = l2_norm_series(&red.times, ue, None)?;
        let measured = l2_norm(&full.difference(&red)?, None)?;
        let output_l2 = l2_norm(&full, None)?;
        debug!("bound quadrature round {round}: step {step:.3e}, |u~_E| {u_tilde_l2:.6e}, error {measured:.6e}");
        result = Some((u_tilde_l2, measured, output_l2, step));
        if let Some((pu, pm)) = last {
            let agree = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-300);
            if agree(pu, u_tilde_l2) && (agree(pm, measured) || measured <= 1e-9 * output_l2) {
                break;
            }
        }
        if round == 7 {
            warn!("bound quadrature did not settle to 1e-6 relative; using step {step:.3e}");
        }
        last = Some((u_tilde_l2, measured));
        step /= 2.0;
    }
    let (u_tilde_l2, measured_error, output_l2, output_step) = result.unwrap();
    Ok(BoundReport {
        condition_value,
        condition_ok,
        eta,
        hinf_error,
        u_tilde_l2,
        bound: eta * hinf_error * u_tilde_l2,
        measured_error,
        output_l2,
        output_step,
    })
}

/// `2 sum_{i > r} sigma_i` over distinct values, times `||u_E||_L2`.
pub fn bt_envelope_bound_from(hsv: &[f64], r: usize, ue_l2: f64) -> f64 {
    if r >= hsv.len() {
        return 0.0;
    }
    bt_error_bound(&hsv[r..]) * ue_l2
}

/// Balanced-truncation bound for a reduction report; requires Hankel singular values.
pub fn bt_envelope_bound(report: &ReductionReport, ue_l2: f64) -> Result<f64> {
    if report.hsv.is_empty() {
        return Err(Error::invalid(
            "the balanced-truncation bound needs Hankel singular values",
        ));
    }
    Ok(bt_envelope_bound_from(&report.hsv, report.r, ue_l2))
}
