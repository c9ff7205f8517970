use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SwitchSchedule;
use crate::numerics::Vector;

/// Scalar input waveform.
///
/// Piecewise-constant levels are left-continuous: `levels[k]` holds on
/// `(breakpoints[k-1], breakpoints[k]]`, matching the interval convention of
/// switching schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Constant {
        level: f64,
    },
    /// `amplitude * sin(2 pi frequency t)`
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    /// `scale * exp(-rate t)`
    Exp {
        scale: f64,
        rate: f64,
    },
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
    /// Linear interpolation between samples, held constant outside the sampled range.
    Samples {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl Waveform {
    pub fn constant(level: f64) -> Self {
        Waveform::Constant { level }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Waveform::Constant { level } => {
                if !level.is_finite() {
                    return Err(Error::invalid("constant input level is not finite"));
                }
            }
            Waveform::Sine {
                amplitude,
                frequency,
            } => {
                if !finite(&[*amplitude, *frequency]) {
                    return Err(Error::invalid("sine parameters must be finite"));
                }
            }
            Waveform::Exp { scale, rate } => {
                if !finite(&[*scale, *rate]) {
                    return Err(Error::invalid("exponential parameters must be finite"));
                }
            }
            Waveform::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::invalid(format!(
                        "piecewise-constant input needs {} levels for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        levels.len()
                    )));
                }
                if !finite(breakpoints) || !finite(levels) || !strictly_increasing(breakpoints) {
                    return Err(Error::invalid(
                        "piecewise-constant breakpoints must be finite and strictly increasing",
                    ));
                }
            }
            Waveform::Samples { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::invalid("sampled input needs equal, nonzero lengths"));
                }
                if !finite(times) || !finite(values) || !strictly_increasing(times) {
                    return Err(Error::invalid(
                        "sample times must be finite and strictly increasing",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant { level } => *level,
            Waveform::Sine {
                amplitude,
                frequency,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            Waveform::Exp { scale, rate } => scale * (-rate * t).exp(),
            Waveform::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[breakpoints.partition_point(|&b| b < t)],
            Waveform::Samples { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    let w = (t - t0) / (t1 - t0);
                    values[k - 1] * (1.0 - w) + values[k] * w
                }
            }
        }
    }

    /// Limit from the right, which differs from `eval` only at piecewise-constant jumps.
    pub fn eval_right(&self, t: f64) -> f64 {
        match self {
            Waveform::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[breakpoints.partition_point(|&b| b <= t)],
            _ => self.eval(t),
        }
    }

    /// Times where the waveform or its derivative is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Waveform::PiecewiseConstant { breakpoints, .. } => breakpoints.clone(),
            Waveform::Samples { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(
            self,
            Waveform::Constant { .. } | Waveform::PiecewiseConstant { .. }
        )
    }
}

/// Vector-valued input, one waveform per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    channels: Vec<Waveform>,
}

impl InputSignal {
    pub fn new(channels: Vec<Waveform>) -> Result<Self> {
        for c in &channels {
            c.validate()?;
        }
        Ok(InputSignal { channels })
    }

    pub fn scalar(w: Waveform) -> Result<Self> {
        Self::new(vec![w])
    }

    pub fn constant(levels: &[f64]) -> Result<Self> {
        Self::new(levels.iter().map(|&l| Waveform::constant(l)).collect())
    }

    pub fn zero(channels: usize) -> Self {
        InputSignal {
            channels: vec![Waveform::constant(0.0); channels],
        }
    }

    pub fn channels(&self) -> &[Waveform] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, t: f64) -> Vector {
        Vector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.eval(t)))
    }

    pub fn eval_right(&self, t: f64) -> Vector {
        Vector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|c| c.eval_right(t)),
        )
    }

    /// Sorted union of all channel breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.channels.iter().flat_map(|c| c.breakpoints()).collect();
        all.sort_by(|a, b| a.total_cmp(b));
        all.dedup();
        all
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.channels.iter().all(|c| c.is_piecewise_constant())
    }

    pub(crate) fn check_dim(&self, m: usize) -> Result<()> {
        if self.dim() == m {
            Ok(())
        } else {
            Err(Error::dims(format!(
                "input has {} channels, system has {m} inputs",
                self.dim()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Above,
    Below,
}

/// Switch from `from` to `to` once output channel `channel` is strictly above or below `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRule {
    pub from: usize,
    pub to: usize,
    pub comparison: Comparison,
    pub threshold: f64,
    #[serde(default)]
    pub channel: usize,
}

impl SwitchRule {
    pub fn fires(&self, y: f64) -> bool {
        match self.comparison {
            Comparison::Above => y > self.threshold,
            Comparison::Below => y < self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDriven {
    pub rules: Vec<SwitchRule>,
    pub initial_mode: usize,
    #[serde(default)]
    pub min_dwell: f64,
}

impl OutputDriven {
    /// Two-mode hysteresis: leave `high_mode` for `low_mode` when the output drops below
    /// `theta_low`, and go back once it exceeds `theta_high`.
    pub fn hysteresis(
        channel: usize,
        theta_low: f64,
        theta_high: f64,
        low_mode: usize,
        high_mode: usize,
        initial_mode: usize,
    ) -> Self {
        OutputDriven {
            rules: vec![
                SwitchRule {
                    from: high_mode,
                    to: low_mode,
                    comparison: Comparison::Below,
                    threshold: theta_low,
                    channel,
                },
                SwitchRule {
                    from: low_mode,
                    to: high_mode,
                    comparison: Comparison::Above,
                    threshold: theta_high,
                    channel,
                },
            ],
            initial_mode,
            min_dwell: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchingSignal {
    TimeDriven { schedule: SwitchSchedule },
    OutputDriven(OutputDriven),
}

impl SwitchingSignal {
    pub fn time_driven(schedule: SwitchSchedule) -> Self {
        SwitchingSignal::TimeDriven { schedule }
    }

    /// A single mode for all time.
    pub fn constant(mode: usize) -> Self {
        SwitchingSignal::TimeDriven {
            schedule: SwitchSchedule::constant(mode),
        }
    }

    pub fn initial_mode(&self) -> usize {
        match self {
            SwitchingSignal::TimeDriven { schedule } => schedule.modes()[0],
            SwitchingSignal::OutputDriven(o) => o.initial_mode,
        }
    }

    pub fn validate(&self, num_modes: usize, outputs: usize) -> Result<()> {
        match self {
            SwitchingSignal::TimeDriven { schedule } => schedule.check_modes(num_modes),
            SwitchingSignal::OutputDriven(o) => {
                if o.initial_mode >= num_modes {
                    return Err(Error::invalid(format!(
                        "initial mode {} out of range for {num_modes} modes",
                        o.initial_mode
                    )));
                }
                if !(o.min_dwell >= 0.0 && o.min_dwell.is_finite()) {
                    return Err(Error::invalid("min_dwell must be finite and nonnegative"));
                }
                for r in &o.rules {
                    if r.from >= num_modes || r.to >= num_modes || r.from == r.to {
                        return Err(Error::invalid(format!(
                            "switch rule {} -> {} is invalid for {num_modes} modes",
                            r.from, r.to
                        )));
                    }
                    if r.channel >= outputs {
                        return Err(Error::invalid(format!(
                            "switch rule watches output {} but the system has {outputs}",
                            r.channel
                        )));
                    }
                    if !r.threshold.is_finite() {
                        return Err(Error::invalid("switch threshold must be finite"));
                    }
                }
                for a in &o.rules {
                    for b in &o.rules {
                        let paired = a.from == b.to && a.to == b.from && a.channel == b.channel;
                        if paired
                            && a.comparison == Comparison::Below
                            && b.comparison == Comparison::Above
                            && a.threshold >= b.threshold
                        {
                            return Err(Error::invalid(format!(
                                "hysteresis thresholds must satisfy low < high, got {} >= {}",
                                a.threshold, b.threshold
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_constant_is_left_continuous() {
        let w = Waveform::PiecewiseConstant {
            breakpoints: vec![0.5, 1.0],
            levels: vec![1.0, 2.0, 3.0],
        };
        w.validate().unwrap();
        assert_eq!(w.eval(0.0), 1.0);
        assert_eq!(w.eval(0.5), 1.0);
        assert_eq!(w.eval(0.5000001), 2.0);
        assert_eq!(w.eval_right(0.5), 2.0);
        assert_eq!(w.eval(1.0), 2.0);
        assert_eq!(w.eval(7.0), 3.0);
    }

    #[test]
    fn samples_interpolate_linearly() {
        let w = Waveform::Samples {
            times: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(w.eval(0.5), 1.0);
        assert_eq!(w.eval(1.5), 1.0);
        assert_eq!(w.eval(5.0), 0.0);
    }

    #[test]
    fn sine_and_exp() {
        let s = Waveform::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        };
        assert!((s.eval(0.25) - 1.0).abs() < 1e-15);
        let e = Waveform::Exp {
            scale: 1.0,
            rate: 1.0,
        };
        assert!((e.eval(1.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_inconsistent_levels() {
        let w = Waveform::PiecewiseConstant {
            breakpoints: vec![1.0],
            levels: vec![1.0],
        };
        assert!(w.validate().is_err());
    }

    #[test]
    fn hysteresis_thresholds_are_ordered() {
        let good = SwitchingSignal::OutputDriven(OutputDriven::hysteresis(0, 0.2, 0.5, 1, 0, 1));
        good.validate(2, 1).unwrap();
        let bad = SwitchingSignal::OutputDriven(OutputDriven::hysteresis(0, 0.5, 0.2, 1, 0, 1));
        assert!(bad.validate(2, 1).is_err());
    }
}
