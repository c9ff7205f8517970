//! Benchmark systems: the RLC circuit, the tangential toy problem, seeded random
//! switched systems, the two-room heat model and the CD-player loader.
//!
//! Modes are 0-based throughout, so "mode 1" of a benchmark description is mode `0` here.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_matrix_market;
use crate::model::{
    exact_switched_states, ProjectionPair, StateSpaceModel, SwitchSchedule, SwitchedModel,
};
use crate::numerics::{spectral_abscissa, Matrix, Vector};
use crate::simulation::{Comparison, InputSignal, OutputDriven, SwitchRule, SwitchingSignal, Waveform};

fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
    Matrix::from_row_slice(r, c, v)
}

/// Two-mode RLC circuit with `R = C = 1`, `L_1 = 1/2`, `L_2 = 1`.
pub fn rlc_example() -> SwitchedModel {
    let c = m(1, 2, &[0.0, 1.0]);
    SwitchedModel::new(vec![
        StateSpaceModel::strictly_proper(m(2, 2, &[0.0, -1.0, 2.0, -4.0]), m(2, 1, &[1.0, 2.0]), c.clone())
            .expect("valid RLC mode"),
        StateSpaceModel::strictly_proper(m(2, 2, &[0.0, -1.0, 1.0, -2.0]), m(2, 1, &[1.0, 1.0]), c)
            .expect("valid RLC mode"),
    ])
    .expect("RLC modes share dimensions")
}

/// Mode 0 on `[0, 1]`, mode 1 afterwards.
pub fn rlc_schedule() -> SwitchSchedule {
    SwitchSchedule::new(vec![0.0, 1.0], vec![0, 1]).expect("valid schedule")
}

pub const RLC_HORIZON: f64 = 2.0;

/// Piecewise-constant input steering mode 0 to `x(1) = (xi, 2 xi)`, zero after `t = 1`.
///
/// The input takes one level on `[0, 1/2]` and another on `(1/2, 1]`.
pub fn rlc_steering_input(xi: f64) -> Result<InputSignal> {
    let sys = rlc_example();
    let sched = rlc_schedule();
    let input = |lv: [f64; 2]| {
        InputSignal::scalar(Waveform::PiecewiseConstant {
            breakpoints: vec![0.5, 1.0],
            levels: vec![lv[0], lv[1], 0.0],
        })
    };
    let g0 = exact_switched_states(&sys, &sched, &input([1.0, 0.0])?, &[1.0])?.remove(0);
    let g1 = exact_switched_states(&sys, &sched, &input([0.0, 1.0])?, &[1.0])?.remove(0);
    let lv = Matrix::from_columns(&[g0, g1])
        .lu()
        .solve(&Vector::from_vec(vec![xi, 2.0 * xi]))
        .ok_or_else(|| Error::Numerical("steering system is singular".into()))?;
    input([lv[0], lv[1]])
}

/// Per-mode projections that leave mode 0 untouched and remove the uncontrollable
/// state of mode 1 with `V_2^T = [1 1]`, `W_2^T = [2 -1]`.
pub fn rlc_naive_pairs() -> Vec<ProjectionPair> {
    vec![
        ProjectionPair::identity(2),
        ProjectionPair::new(m(2, 1, &[1.0, 1.0]), m(2, 1, &[2.0, -1.0])).expect("biorthogonal pair"),
    ]
}

/// Output-driven switching toy problem with parameter `p > 0`.
#[derive(Debug, Clone)]
pub struct TangentialToy {
    pub p: f64,
    pub full: SwitchedModel,
    /// One-state approximation of mode 0, paired with the reduced mode 1.
    pub reduced: SwitchedModel,
    /// `(1 + p/2)(1 - e^{-1})`
    pub threshold: f64,
    /// `1` on `[0, 1]`, `0` afterwards.
    pub input: InputSignal,
    /// Start in mode 0 and switch to mode 1 once the output exceeds the threshold.
    pub switching: SwitchingSignal,
}

impl TangentialToy {
    /// Time at which the full output reaches the threshold, `-ln(1 - threshold / (1 + p))`.
    pub fn crossing_time(&self) -> f64 {
        -(1.0 - self.threshold / (1.0 + self.p)).ln()
    }
}

/// Toy problem whose second mode is a copy of the first (the benchmark leaves it open).
pub fn tangential_toy(p: f64) -> Result<TangentialToy> {
    tangential_toy_with(p, None)
}

/// Toy problem with a user-chosen second mode `(full, reduced)`, of orders 2 and 1.
pub fn tangential_toy_with(
    p: f64,
    second_mode: Option<(StateSpaceModel, StateSpaceModel)>,
) -> Result<TangentialToy> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("parameter p = {p} must be positive")));
    }
    let full0 = StateSpaceModel::strictly_proper(
        -Matrix::identity(2, 2),
        m(2, 1, &[1.0, 1.0]),
        m(1, 2, &[1.0, p]),
    )?;
    let red0 = StateSpaceModel::strictly_proper(m(1, 1, &[-1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]))?;
    let (full1, red1) = second_mode.unwrap_or_else(|| (full0.clone(), red0.clone()));
    let full = SwitchedModel::new(vec![full0, full1])?;
    let reduced = SwitchedModel::new(vec![red0, red1])?;
    if full.states() != 2 || reduced.states() != 1 {
        return Err(Error::dims("second mode must have orders 2 (full) and 1 (reduced)"));
    }
    let threshold = (1.0 + p / 2.0) * (1.0 - (-1f64).exp());
    let input = InputSignal::scalar(Waveform::PiecewiseConstant {
        breakpoints: vec![1.0],
        levels: vec![1.0, 0.0],
    })?;
    let switching = SwitchingSignal::OutputDriven(OutputDriven {
        rules: vec![SwitchRule {
            from: 0,
            to: 1,
            comparison: Comparison::Above,
            threshold,
            channel: 0,
        }],
        initial_mode: 0,
        min_dwell: 0.0,
    });
    Ok(TangentialToy {
        p,
        full,
        reduced,
        threshold,
        input,
        switching,
    })
}

pub const DEFAULT_STABILITY_MARGIN: f64 = 0.5;

/// Seeded single-input single-output switched system with `modes` random modes of order `n`.
///
/// Entries are standard normal; each `A_i` is shifted by `-(alpha_i + margin) I`, where
/// `alpha_i` is its spectral abscissa, so every mode has abscissa `-margin`.
pub fn random_lss(seed: u64, n: usize, modes: usize, margin: f64) -> Result<SwitchedModel> {
    random_lss_with(seed, n, modes, 1, 1, margin)
}

pub fn random_lss_with(
    seed: u64,
    n: usize,
    modes: usize,
    inputs: usize,
    outputs: usize,
    margin: f64,
) -> Result<SwitchedModel> {
    if n == 0 || modes == 0 || inputs == 0 || outputs == 0 {
        return Err(Error::invalid("random system dimensions must be positive"));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::invalid(format!("stability margin {margin} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |r: usize, c: usize| -> Matrix {
        // fill row by row so the draw order does not depend on storage layout
        let v: Vec<f64> = (0..r * c).map(|_| StandardNormal.sample(&mut rng)).collect();
        Matrix::from_row_slice(r, c, &v)
    };
    let mut out = Vec::with_capacity(modes);
    for _ in 0..modes {
        let mut a = normal(n, n);
        let alpha = spectral_abscissa(&a)?;
        for i in 0..n {
            a[(i, i)] -= alpha + margin;
        }
        let b = normal(n, inputs);
        let c = normal(outputs, n);
        out.push(StateSpaceModel::strictly_proper(a, b, c)?);
    }
    SwitchedModel::new(out)
}

/// The two switching signals of the random benchmark, on `[0, 1.2]`.
pub fn random_schedules() -> [SwitchSchedule; 2] {
    [
        SwitchSchedule::new(vec![0.0, 0.2, 0.6, 0.8], vec![1, 0, 1, 0]).expect("valid schedule"),
        SwitchSchedule::new(vec![0.0, 0.4, 0.7, 0.9], vec![0, 1, 0, 1]).expect("valid schedule"),
    ]
}

/// `sin(2 pi t)` and `exp(-t)`.
pub fn random_inputs() -> [InputSignal; 2] {
    [
        InputSignal::scalar(Waveform::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        })
        .expect("valid input"),
        InputSignal::scalar(Waveform::Exp { scale: 1.0, rate: 1.0 }).expect("valid input"),
    ]
}

pub const RANDOM_HORIZON: f64 = 1.2;

/// Physical and discretization parameters of the two-room model. Subdomains are
/// room, door and room; only the door (subdomain 2) switches material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatParams {
    /// Volumetric heat capacity of the closed door, J/(m^3 K).
    pub zeta1: f64,
    /// Volumetric heat capacity of air, J/(m^3 K).
    pub zeta2: f64,
    /// Thermal conductivity of the closed door, W/(m K).
    pub k1: f64,
    /// Thermal conductivity of air, W/(m K).
    pub k2: f64,
    /// Heat-transfer coefficient at the outer wall, W/(m^2 K).
    pub h: f64,
    pub lengths: [f64; 3],
    pub dx: [f64; 3],
    pub cells: [usize; 3],
    /// Seconds per model time unit; the default 3600 measures time in hours.
    pub time_scale: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            zeta1: 2e6,
            zeta2: 700.0,
            k1: 0.015,
            k2: 3.0,
            h: 100.0,
            lengths: [5.0, 0.3, 5.0],
            dx: [0.1, 0.1, 0.1],
            cells: [50, 3, 50],
            time_scale: 3600.0,
        }
    }
}

/// Conductivity at the face between two cells of widths `dx_a`, `dx_b`.
pub fn interface_conductivity(dx_a: f64, k_a: f64, dx_b: f64, k_b: f64) -> f64 {
    (dx_a + dx_b) / (dx_a / k_a + dx_b / k_b)
}

impl HeatParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [self.zeta1, self.zeta2, self.k1, self.k2, self.h, self.time_scale];
        let all = scalars.iter().chain(&self.lengths).chain(&self.dx);
        if !all.clone().all(|v| v.is_finite() && *v > 0.0) || self.cells.contains(&0) {
            return Err(Error::invalid("heat parameters must all be positive"));
        }
        for i in 0..3 {
            let covered = self.cells[i] as f64 * self.dx[i];
            if (covered - self.lengths[i]).abs() > 1e-9 * self.lengths[i] {
                return Err(Error::invalid(format!(
                    "subdomain {}: {} cells of width {} do not cover length {}",
                    i + 1,
                    self.cells[i],
                    self.dx[i],
                    self.lengths[i]
                )));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.cells.iter().sum()
    }

    /// Door conductivity and heat capacity in `mode` (0 closed, 1 open).
    pub fn door(&self, mode: usize) -> (f64, f64) {
        if mode == 0 {
            (self.k1, self.zeta1)
        } else {
            (self.k2, self.zeta2)
        }
    }

    /// Conductivities at the room/door and door/room faces.
    pub fn interface_conductivities(&self, mode: usize) -> (f64, f64) {
        let (kd, _) = self.door(mode);
        let [d1, d2, d3] = self.dx;
        (
            interface_conductivity(d1, self.k2, d2, kd),
            interface_conductivity(d3, self.k2, d2, kd),
        )
    }

    fn mode(&self, mode: usize) -> Result<StateSpaceModel> {
        let [n1, n2, n3] = self.cells;
        let [d1, d2, d3] = self.dx;
        let n = n1 + n2 + n3;
        let (kd, zd) = self.door(mode);
        let (k12, k23) = self.interface_conductivities(mode);
        let g12 = 2.0 * k12 / (d1 + d2);
        let g23 = 2.0 * k23 / (d3 + d2);
        let mut a = Matrix::zeros(n, n);
        let mut tridiag = |start: usize, len: usize, scale: f64| {
            for i in 0..len {
                a[(start + i, start + i)] = -2.0 * scale;
                if i + 1 < len {
                    a[(start + i, start + i + 1)] = scale;
                    a[(start + i + 1, start + i)] = scale;
                }
            }
        };
        let (s1, s2, s3) = (self.k2 / d1, kd / d2, self.k2 / d3);
        tridiag(0, n1, s1);
        tridiag(n1, n2, s2);
        tridiag(n1 + n2, n3, s3);
        let (last1, first2, last2, first3) = (n1 - 1, n1, n1 + n2 - 1, n1 + n2);
        a[(0, 0)] += s1;
        a[(last1, last1)] += s1 - g12;
        a[(first2, first2)] += s2 - g12;
        a[(last2, last2)] += s2 - g23;
        a[(first3, first3)] += s3 - g23;
        a[(n - 1, n - 1)] += s3 - self.h / 2.0;
        a[(last1, first2)] = g12;
        a[(first2, last1)] = g12;
        a[(last2, first3)] = g23;
        a[(first3, last2)] = g23;

        let mut e = Matrix::zeros(n, n);
        for i in 0..n {
            e[(i, i)] = if i < n1 {
                self.zeta2 * d1
            } else if i < n1 + n2 {
                zd * d2
            } else {
                self.zeta2 * d3
            };
        }
        let mut b = Matrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        let mut c = Matrix::zeros(1, n);
        for j in first3..n {
            c[(0, j)] = 1.0 / n3 as f64;
        }
        StateSpaceModel::descriptor(a * self.time_scale, b * self.time_scale, c, Matrix::zeros(1, 1), e)
    }
}

/// Finite-volume two-room model in descriptor form; mode 0 is the closed door, mode 1 the open door.
///
/// The output is the mean temperature of the second room relative to ambient; the input
/// is the heat flux at the outer wall of the first room.
pub fn heat_two_rooms(params: &HeatParams) -> Result<SwitchedModel> {
    params.validate()?;
    SwitchedModel::new(vec![params.mode(0)?, params.mode(1)?])
}

/// Door open on `[0, 1.1]` and `(1.6, 1.7]`, closed otherwise.
pub fn heat_schedule() -> SwitchSchedule {
    SwitchSchedule::new(vec![0.0, 1.1, 1.6, 1.7], vec![1, 0, 1, 0]).expect("valid schedule")
}

pub const HEAT_HORIZON: f64 = 6.0;

/// Unit heat flux.
pub fn heat_input() -> InputSignal {
    InputSignal::constant(&[1.0]).expect("valid input")
}

/// Thermostat-style door control starting open: the door opens when the output drops below
/// `theta_low` and closes once it exceeds `theta_high`.
pub fn heat_hysteresis(theta_low: f64, theta_high: f64) -> Result<SwitchingSignal> {
    if !(theta_low < theta_high) {
        return Err(Error::invalid(format!(
            "hysteresis thresholds need theta_low < theta_high, got {theta_low} and {theta_high}"
        )));
    }
    Ok(SwitchingSignal::OutputDriven(OutputDriven::hysteresis(
        0, theta_low, theta_high, 1, 0, 1,
    )))
}

/// Switched single-input single-output model from the CD-player matrices `A.mtx`, `B.mtx`,
/// `C.mtx` in `dir`.
///
/// Mode 0 uses the second column of `B` and the first row of `C` scaled by `2/1000`;
/// mode 1 uses the first column of `B` and the second row of `C` scaled by `5`.
pub fn cd_player_switched(dir: impl AsRef<Path>) -> Result<SwitchedModel> {
    let dir = dir.as_ref();
    let a = read_matrix_market(dir.join("A.mtx"))?;
    let b = read_matrix_market(dir.join("B.mtx"))?;
    let c = read_matrix_market(dir.join("C.mtx"))?;
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n || b.ncols() < 2 || c.nrows() < 2 {
        return Err(Error::dims(format!(
            "CD-player matrices need A n x n, B n x 2, C 2 x n; got A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    let mode = |col: usize, row: usize, scale: f64| {
        StateSpaceModel::strictly_proper(
            a.clone(),
            b.columns(col, 1).into_owned(),
            c.rows(row, 1).into_owned() * scale,
        )
    };
    SwitchedModel::new(vec![mode(1, 0, 2.0 / 1000.0)?, mode(0, 1, 5.0)?])
}

/// Mode 1 on `[0, 0.5]` and `(1, 1.5]`, mode 0 otherwise.
pub fn cd_player_schedule() -> SwitchSchedule {
    SwitchSchedule::new(vec![0.0, 0.5, 1.0, 1.5], vec![1, 0, 1, 0]).expect("valid schedule")
}

/// `exp(-5 t)`.
pub fn cd_player_input() -> InputSignal {
    InputSignal::scalar(Waveform::Exp { scale: 1.0, rate: 5.0 }).expect("valid input")
}

pub const CD_PLAYER_HORIZON: f64 = 2.0;
