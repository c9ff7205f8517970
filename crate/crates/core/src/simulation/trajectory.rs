use crate::error::{Error, Result};
use crate::numerics::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// Sampled simulation result.
///
/// At a switch the time is recorded twice: once with the outgoing mode and once
/// with the incoming mode, so discontinuous outputs are represented exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<Vector>,
    pub modes: Vec<usize>,
    pub states: Option<Vec<Vector>>,
    /// Envelope inputs `u_E = K y_E + K0 u` for closed-loop envelope runs.
    pub envelope_inputs: Option<Vec<Vector>>,
    pub events: Vec<SwitchEvent>,
    /// Accepted integrator steps.
    pub steps: usize,
}

impl Trajectory {
    pub(crate) fn empty(record_states: bool, record_envelope_inputs: bool) -> Self {
        Trajectory {
            times: Vec::new(),
            outputs: Vec::new(),
            modes: Vec::new(),
            states: record_states.then(Vec::new),
            envelope_inputs: record_envelope_inputs.then(Vec::new),
            events: Vec::new(),
            steps: 0,
        }
    }

    pub(crate) fn push(&mut self, t: f64, mode: usize, x: &Vector, y: Vector, ue: Option<Vector>) {
        self.times.push(t);
        self.outputs.push(y);
        self.modes.push(mode);
        if let Some(s) = self.states.as_mut() {
            s.push(x.clone());
        }
        if let (Some(v), Some(ue)) = (self.envelope_inputs.as_mut(), ue) {
            v.push(ue);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn switch_count(&self) -> usize {
        self.events.len()
    }

    pub fn final_output(&self) -> Option<&Vector> {
        self.outputs.last()
    }

    /// Output channel `c` as a plain series.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.outputs.iter().map(|y| y[c]).collect()
    }

    /// Outputs linearly interpolated at `t`; at duplicated times the later sample wins.
    pub fn output_at(&self, t: f64) -> Vector {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.outputs[0].clone();
        }
        if k == self.times.len() || self.times[k - 1] == t {
            return self.outputs[k - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        &self.outputs[k - 1] * (1.0 - w) + &self.outputs[k] * w
    }

    /// Output difference `self - other` on `self`'s sample times.
    ///
    /// Identical grids are subtracted sample by sample; otherwise `other` is
    /// linearly interpolated.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::invalid("cannot difference an empty trajectory"));
        }
        let same_grid = self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        let outputs: Vec<Vector> = if same_grid {
            self.outputs
                .iter()
                .zip(&other.outputs)
                .map(|(a, b)| {
                    if a.len() != b.len() {
                        return Err(Error::dims("trajectories have different output widths"));
                    }
                    Ok(a - b)
                })
                .collect::<Result<_>>()?
        } else {
            self.times
                .iter()
                .zip(&self.outputs)
                .map(|(&t, a)| {
                    let b = other.output_at(t);
                    if a.len() != b.len() {
                        return Err(Error::dims("trajectories have different output widths"));
                    }
                    Ok(a - b)
                })
                .collect::<Result<_>>()?
        };
        Ok(Trajectory {
            times: self.times.clone(),
            outputs,
            modes: self.modes.clone(),
            states: None,
            envelope_inputs: None,
            events: Vec::new(),
            steps: 0,
        })
    }
}

fn select(v: &Vector, channels: Option<&[usize]>) -> f64 {
    match channels {
        None => v.norm_squared(),
        Some(cs) => cs.iter().map(|&c| v[c] * v[c]).sum(),
    }
}

/// `L2` norm of a sampled vector signal by the trapezoidal rule.
pub fn l2_norm_series(times: &[f64], values: &[Vector], channels: Option<&[usize]>) -> Result<f64> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::invalid("L2 norm needs a nonempty, consistent series"));
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        acc += 0.5 * dt * (select(&values[k - 1], channels) + select(&values[k], channels));
    }
    Ok(acc.sqrt())
}

/// `L2` norm of the outputs (all channels when `channels` is `None`).
pub fn l2_norm(traj: &Trajectory, channels: Option<&[usize]>) -> Result<f64> {
    l2_norm_series(&traj.times, &traj.outputs, channels)
}

/// Largest Euclidean norm of the sampled outputs.
pub fn linf_norm(traj: &Trajectory, channels: Option<&[usize]>) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::invalid("L-infinity norm of an empty trajectory"));
    }
    Ok(traj
        .outputs
        .iter()
        .map(|y| select(y, channels).sqrt())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Trajectory {
        let mut tr = Trajectory::empty(false, false);
        for t in times {
            tr.push(t, 0, &Vector::zeros(0), Vector::from_element(1, f(t)), None);
        }
        tr
    }

    #[test]
    fn constant_signal_norms() {
        let tr = traj(vec![0.0, 0.5, 1.0], |_| 1.0);
        assert!((l2_norm(&tr, None).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(linf_norm(&tr, None).unwrap(), 1.0);
    }

    #[test]
    fn ramp_l2() {
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let tr = traj(grid, |t| t);
        assert!((l2_norm(&tr, None).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn self_difference_is_zero() {
        let tr = traj(vec![0.0, 0.3, 0.3, 1.0], |t| t.sin());
        let d = tr.difference(&tr).unwrap();
        assert_eq!(linf_norm(&d, None).unwrap(), 0.0);
        assert!(l2_norm(&Trajectory::empty(false, false), None).is_err());
    }

    #[test]
    fn interpolated_difference() {
        let fine = traj((0..=100).map(|k| k as f64 / 100.0).collect(), |t| 2.0 * t);
        let coarse = traj(vec![0.0, 1.0], |t| 2.0 * t);
        let d = fine.difference(&coarse).unwrap();
        assert!(linf_norm(&d, None).unwrap() < 1e-14);
    }
}
