//! JSON run manifests for the command-line front end.
//!
//! Mode and output-channel indices in manifests are 1-based; they are converted to
//! the 0-based library convention when a manifest is resolved. Relative file paths
//! are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::{self, HeatParams};
use crate::envelope::{
    build_envelope, compress_io, compute_deltas_with, DeltaOptions, EnvelopeModel, FeedbackMaps,
    Reference,
};
use crate::error::{Error, Result};
use crate::io::read_matrix_market;
use crate::model::{StateSpaceModel, SwitchSchedule, SwitchedModel};
use crate::numerics::{Matrix, DEFAULT_RANK_TOL};
use crate::reduction::IrkaOptions;
use crate::simulation::{
    Comparison, InputSignal, OutputDriven, SimOptions, SwitchRule, SwitchingSignal,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub system: SystemSpec,
    #[serde(default)]
    pub envelope: EnvelopeSpec,
    /// Defaults to the benchmark's own scenario for builtin systems.
    #[serde(default)]
    pub switching: Option<SwitchingSpec>,
    #[serde(default)]
    pub input: Option<InputSignal>,
    #[serde(default)]
    pub reduction: Option<ReductionSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    /// Directory relative paths are resolved against; set by [`Manifest::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Builtin(Builtin),
    /// One entry per mode.
    Files(Vec<ModeFiles>),
}

fn one() -> f64 {
    1.0
}
fn default_n() -> usize {
    11
}
fn default_modes() -> usize {
    2
}
fn default_io() -> usize {
    1
}
fn default_margin() -> f64 {
    benchmarks::DEFAULT_STABILITY_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    Rlc {
        /// Steering target `x(1) = (xi, 2 xi)`.
        #[serde(default = "one")]
        xi: f64,
    },
    Tangential {
        p: f64,
    },
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_io")]
        inputs: usize,
        #[serde(default = "default_io")]
        outputs: usize,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    Heat {
        #[serde(default)]
        params: HeatParams,
    },
    CdPlayer {
        /// Directory holding `A.mtx`, `B.mtx`, `C.mtx`.
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFiles {
    pub a: PathBuf,
    pub b: PathBuf,
    pub c: PathBuf,
    #[serde(default)]
    pub d: Option<PathBuf>,
    #[serde(default)]
    pub e: Option<PathBuf>,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}
fn default_reference() -> usize {
    1
}
fn default_compress_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    /// Base mode, 1-based.
    #[serde(default = "default_reference")]
    pub reference: usize,
    #[serde(default)]
    pub compress: bool,
    #[serde(default = "default_compress_tol")]
    pub compress_tol: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        EnvelopeSpec {
            rank_tol: DEFAULT_RANK_TOL,
            reference: 1,
            compress: false,
            compress_tol: default_compress_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub from: usize,
    pub to: usize,
    pub comparison: Comparison,
    pub threshold: f64,
    #[serde(default = "default_reference")]
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SwitchingSpec {
    /// `modes[k]` is active on `(breakpoints[k], breakpoints[k+1]]`; `breakpoints[0] = 0`.
    TimeDriven {
        breakpoints: Vec<f64>,
        modes: Vec<usize>,
    },
    /// Leave `high_mode` for `low_mode` below `theta_low`, return above `theta_high`.
    Hysteresis {
        theta_low: f64,
        theta_high: f64,
        low_mode: usize,
        high_mode: usize,
        initial_mode: usize,
        #[serde(default = "default_reference")]
        channel: usize,
        #[serde(default)]
        min_dwell: f64,
    },
    OutputDriven {
        rules: Vec<RuleSpec>,
        initial_mode: usize,
        #[serde(default)]
        min_dwell: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    #[serde(alias = "balanced_truncation")]
    Bt,
    Irka,
}

fn default_max_iters() -> usize {
    100
}
fn default_shift_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    pub method: MethodSpec,
    pub r: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_shift_tol")]
    pub shift_tol: f64,
}

impl ReductionSpec {
    pub fn irka_options(&self) -> IrkaOptions {
        IrkaOptions {
            max_iters: self.max_iters,
            shift_tol: self.shift_tol,
            initial_shifts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Adaptive Dormand-Prince 5(4).
    Dopri,
    /// Fixed-step backward Euler.
    Implicit,
}

fn default_rtol() -> f64 {
    1e-6
}
fn default_atol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    /// Defaults to the benchmark's horizon.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Backward Euler step, default `horizon / 1000`.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub output_step: Option<f64>,
}

fn default_integrator() -> Integrator {
    Integrator::Dopri
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            horizon: None,
            integrator: Integrator::Dopri,
            rtol: default_rtol(),
            atol: default_atol(),
            step: None,
            output_step: None,
        }
    }
}

impl SimulationSpec {
    pub fn options(&self) -> SimOptions {
        let mut o = SimOptions::with_tolerances(self.rtol, self.atol);
        o.output_step = self.output_step;
        o
    }
}

/// A manifest turned into library objects.
#[derive(Debug, Clone)]
pub struct Problem {
    pub system: SwitchedModel,
    pub switching: SwitchingSignal,
    pub input: InputSignal,
    pub horizon: f64,
}

fn zero_based(index: usize, what: &str) -> Result<usize> {
    index
        .checked_sub(1)
        .ok_or_else(|| Error::invalid(format!("{what} indices are 1-based, got 0")))
}

impl SwitchingSpec {
    pub fn to_signal(&self) -> Result<SwitchingSignal> {
        Ok(match self {
            SwitchingSpec::TimeDriven { breakpoints, modes } => {
                let modes = modes
                    .iter()
                    .map(|&m| zero_based(m, "mode"))
                    .collect::<Result<_>>()?;
                SwitchingSignal::time_driven(SwitchSchedule::new(breakpoints.clone(), modes)?)
            }
            SwitchingSpec::Hysteresis {
                theta_low,
                theta_high,
                low_mode,
                high_mode,
                initial_mode,
                channel,
                min_dwell,
            } => {
                if !(theta_low < theta_high) {
                    return Err(Error::invalid("hysteresis needs theta_low < theta_high"));
                }
                let mut od = OutputDriven::hysteresis(
                    zero_based(*channel, "channel")?,
                    *theta_low,
                    *theta_high,
                    zero_based(*low_mode, "mode")?,
                    zero_based(*high_mode, "mode")?,
                    zero_based(*initial_mode, "mode")?,
                );
                od.min_dwell = *min_dwell;
                SwitchingSignal::OutputDriven(od)
            }
            SwitchingSpec::OutputDriven {
                rules,
                initial_mode,
                min_dwell,
            } => SwitchingSignal::OutputDriven(OutputDriven {
                rules: rules
                    .iter()
                    .map(|r| {
                        Ok(SwitchRule {
                            from: zero_based(r.from, "mode")?,
                            to: zero_based(r.to, "mode")?,
                            comparison: r.comparison,
                            threshold: r.threshold,
                            channel: zero_based(r.channel, "channel")?,
                        })
                    })
                    .collect::<Result<_>>()?,
                initial_mode: zero_based(*initial_mode, "mode")?,
                min_dwell: *min_dwell,
            }),
        })
    }
}

impl Manifest {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Manifest = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<manifest>".into(),
            message: e.to_string(),
        })?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::from_json(&text, base).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Schema checks beyond what deserialization enforces, including file existence.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::invalid(format!(
                "unsupported manifest version {}, expected {MANIFEST_VERSION}",
                self.version
            )));
        }
        let mut files: Vec<&Path> = Vec::new();
        match &self.system {
            SystemSpec::Files(modes) => {
                if modes.is_empty() {
                    return Err(Error::invalid("manifest needs at least one mode"));
                }
                for f in modes {
                    files.extend([f.a.as_path(), f.b.as_path(), f.c.as_path()]);
                    files.extend(f.d.as_deref());
                    files.extend(f.e.as_deref());
                }
                if self.switching.is_none() || self.input.is_none() {
                    return Err(Error::invalid(
                        "file-based systems need explicit switching and input specifications",
                    ));
                }
                if self.simulation.horizon.is_none() {
                    return Err(Error::invalid("file-based systems need a simulation horizon"));
                }
            }
            SystemSpec::Builtin(Builtin::CdPlayer { dir }) => {
                let dir = self.resolve_path(dir);
                for name in ["A.mtx", "B.mtx", "C.mtx"] {
                    let p = dir.join(name);
                    if !p.is_file() {
                        return Err(Error::invalid(format!("referenced file {} does not exist", p.display())));
                    }
                }
            }
            SystemSpec::Builtin(_) => {}
        }
        for f in files {
            let p = self.resolve_path(f);
            if !p.is_file() {
                return Err(Error::invalid(format!("referenced file {} does not exist", p.display())));
            }
        }
        if let Some(h) = self.simulation.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid("simulation horizon must be positive"));
            }
        }
        if self.envelope.reference == 0 {
            return Err(Error::invalid("reference mode is 1-based"));
        }
        if let Some(r) = &self.reduction {
            if r.r == 0 {
                return Err(Error::invalid("reduced order must be positive"));
            }
        }
        Ok(())
    }

    /// Builds the switched system; `seed` overrides the seed of a random system.
    pub fn build_system(&self, seed: Option<u64>) -> Result<SwitchedModel> {
        match &self.system {
            SystemSpec::Builtin(b) => match b {
                Builtin::Rlc { .. } => Ok(benchmarks::rlc_example()),
                Builtin::Tangential { p } => Ok(benchmarks::tangential_toy(*p)?.full),
                Builtin::Random {
                    seed: s,
                    n,
                    modes,
                    inputs,
                    outputs,
                    margin,
                } => benchmarks::random_lss_with(seed.unwrap_or(*s), *n, *modes, *inputs, *outputs, *margin),
                Builtin::Heat { params } => benchmarks::heat_two_rooms(params),
                Builtin::CdPlayer { dir } => benchmarks::cd_player_switched(self.resolve_path(dir)),
            },
            SystemSpec::Files(modes) => {
                let mut out = Vec::with_capacity(modes.len());
                for f in modes {
                    let read = |p: &Path| read_matrix_market(self.resolve_path(p));
                    let (a, b, c) = (read(&f.a)?, read(&f.b)?, read(&f.c)?);
                    let d = match &f.d {
                        Some(p) => read(p)?,
                        None => Matrix::zeros(c.nrows(), b.ncols()),
                    };
                    out.push(match &f.e {
                        Some(p) => StateSpaceModel::descriptor(a, b, c, d, read(p)?)?,
                        None => StateSpaceModel::new(a, b, c, d)?,
                    });
                }
                SwitchedModel::new(out)
            }
        }
    }

    /// System, switching signal, input and horizon, with benchmark defaults filled in.
    pub fn problem(&self, seed: Option<u64>) -> Result<Problem> {
        let system = self.build_system(seed)?;
        let (sig, input, horizon) = match &self.system {
            SystemSpec::Builtin(b) => {
                let (s, u, h) = builtin_scenario(b)?;
                (Some(s), Some(u), Some(h))
            }
            SystemSpec::Files(_) => (None, None, None),
        };
        let switching = match &self.switching {
            Some(s) => s.to_signal()?,
            None => sig.ok_or_else(|| Error::invalid("missing switching specification"))?,
        };
        let input = match &self.input {
            Some(u) => u.clone(),
            None => input.ok_or_else(|| Error::invalid("missing input specification"))?,
        };
        let horizon = self
            .simulation
            .horizon
            .or(horizon)
            .ok_or_else(|| Error::invalid("missing simulation horizon"))?;
        switching.validate(system.num_modes(), system.outputs())?;
        input.check_dim(system.inputs())?;
        Ok(Problem {
            system,
            switching,
            input,
            horizon,
        })
    }

    /// Envelope of the standard-form system according to the envelope section.
    pub fn envelope(&self, sys: &SwitchedModel) -> Result<(EnvelopeModel, FeedbackMaps)> {
        let sys = sys.standard_form()?;
        let deltas = compute_deltas_with(
            &sys,
            &DeltaOptions {
                rank_tol: self.envelope.rank_tol,
                reference: Reference::Mode(zero_based(self.envelope.reference, "mode")?),
                weights: None,
            },
        )?;
        let (env, maps) = build_envelope(&sys, &deltas)?;
        if self.envelope.compress {
            let env = compress_io(&env, self.envelope.compress_tol)?;
            let maps = env.feedback_maps();
            Ok((env, maps))
        } else {
            Ok((env, maps))
        }
    }
}

fn builtin_scenario(b: &Builtin) -> Result<(SwitchingSignal, InputSignal, f64)> {
    Ok(match b {
        Builtin::Rlc { xi } => (
            SwitchingSignal::time_driven(benchmarks::rlc_schedule()),
            benchmarks::rlc_steering_input(*xi)?,
            benchmarks::RLC_HORIZON,
        ),
        Builtin::Tangential { p } => {
            let toy = benchmarks::tangential_toy(*p)?;
            (toy.switching, toy.input, 2.0)
        }
        Builtin::Random { .. } => {
            let [s, _] = benchmarks::random_schedules();
            let [u, _] = benchmarks::random_inputs();
            (SwitchingSignal::time_driven(s), u, benchmarks::RANDOM_HORIZON)
        }
        Builtin::Heat { .. } => (
            SwitchingSignal::time_driven(benchmarks::heat_schedule()),
            benchmarks::heat_input(),
            benchmarks::HEAT_HORIZON,
        ),
        Builtin::CdPlayer { .. } => (
            SwitchingSignal::time_driven(benchmarks::cd_player_schedule()),
            benchmarks::cd_player_input(),
            benchmarks::CD_PLAYER_HORIZON,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Manifest> {
        Manifest::from_json(text, ".")
    }

    #[test]
    fn builtin_defaults_fill_the_scenario() {
        let m = parse(r#"{"version": 1, "system": {"builtin": {"name": "heat"}}}"#).unwrap();
        let p = m.problem(None).unwrap();
        assert_eq!(p.system.states(), 103);
        assert_eq!(p.horizon, 6.0);
        assert_eq!(p.switching.initial_mode(), 1);
    }

    #[test]
    fn modes_are_one_based() {
        let m = parse(
            r#"{"version": 1, "system": {"builtin": {"name": "rlc"}},
                "switching": {"kind": "time_driven", "breakpoints": [0, 0.5], "modes": [2, 1]},
                "simulation": {"horizon": 1.0}}"#,
        )
        .unwrap();
        let p = m.problem(None).unwrap();
        let SwitchingSignal::TimeDriven { schedule } = &p.switching else {
            panic!()
        };
        assert_eq!(schedule.modes(), &[1, 0]);
        assert_eq!(p.horizon, 1.0);

        let bad = parse(
            r#"{"version": 1, "system": {"builtin": {"name": "rlc"}},
                "switching": {"kind": "time_driven", "breakpoints": [0], "modes": [0]}}"#,
        )
        .unwrap();
        assert!(bad.problem(None).is_err());
    }

    #[test]
    fn schema_violations_are_rejected() {
        for text in [
            r#"{"version": 2, "system": {"builtin": {"name": "rlc"}}}"#,
            r#"{"version": 1, "system": {"builtin": {"name": "nope"}}}"#,
            r#"{"version": 1, "system": {"builtin": {"name": "rlc"}}, "extra": 1}"#,
            r#"{"version": 1, "system": {"files": []}}"#,
            r#"{"version": 1, "system": {"files": [{"a": "missing.mtx", "b": "b", "c": "c"}]},
                "switching": {"kind": "time_driven", "breakpoints": [0], "modes": [1]},
                "input": {"channels": [{"kind": "constant", "level": 1}]},
                "simulation": {"horizon": 1}}"#,
            r#"{"version": 1, "system": {"builtin": {"name": "cd_player", "dir": "/nonexistent"}}}"#,
        ] {
            assert!(parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn seed_override_changes_random_system() {
        let m = parse(r#"{"version": 1, "system": {"builtin": {"name": "random", "seed": 3}}}"#).unwrap();
        let a = m.build_system(None).unwrap();
        assert_eq!(a, m.build_system(Some(3)).unwrap());
        assert_ne!(a, m.build_system(Some(4)).unwrap());
    }

    #[test]
    fn hysteresis_spec_converts() {
        let s = SwitchingSpec::Hysteresis {
            theta_low: 0.2,
            theta_high: 0.5,
            low_mode: 2,
            high_mode: 1,
            initial_mode: 2,
            channel: 1,
            min_dwell: 0.0,
        };
        assert_eq!(
            s.to_signal().unwrap(),
            SwitchingSignal::OutputDriven(OutputDriven::hysteresis(0, 0.2, 0.5, 1, 0, 1))
        );
    }
}
