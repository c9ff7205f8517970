//! Command-line front end: `build`, `reduce`, `simulate`, `bound` and `hsv`.
//!
//! Every command reads a manifest and writes its artifacts below `--out`. Failures are
//! reported as a JSON object on stderr (and as `error.json` in the output directory)
//! with exit code 2 for invalid input, 3 for numerical failures and 4 for unsupported
//! configurations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bounds::{check_condition, posterior_bound};
use crate::envelope::{EnvelopeModel, FeedbackMaps};
use crate::error::{Error, Result};
use crate::io::write_matrix_market;
use crate::manifest::{Integrator, Manifest, MethodSpec, Problem};
use crate::model::{StateSpaceModel, SwitchedModel};
use crate::reduction::{balanced_truncation, irka, ReductionMethod, ReductionReport};
use crate::simulation::{
    l2_norm, linf_norm, simulate_envelope_closed_loop, simulate_envelope_implicit,
    simulate_implicit, simulate_switched, Trajectory,
};

pub const THREADS_ENV: &str = "ENVMOR_NUM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "envmor", version, about = "Model reduction of linear switched systems via envelope systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Run manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed of a random benchmark system.
    #[arg(long)]
    pub seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, default_value = "warn")]
    pub log_level: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Envelope matrices, block layout, delta ranks and the bound condition value.
    Build(CommonArgs),
    /// Reduced envelope, reduced switched modes and the reduction report.
    Reduce(CommonArgs),
    /// Output trajectory of the full model, and of the reduced model if one is specified.
    Simulate(CommonArgs),
    /// A-posteriori output error bound of the reduced model.
    Bound(CommonArgs),
    /// Hankel singular values of the envelope and of every mode.
    Hsv(CommonArgs),
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Build(c)
            | Command::Reduce(c)
            | Command::Simulate(c)
            | Command::Bound(c)
            | Command::Hsv(c) => c,
        }
    }
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::DegenerateSpectrum(_) => "degenerate_spectrum",
        Error::Instability { .. } => "instability",
        Error::ProjectionDegenerate { .. } => "projection_degenerate",
        Error::Pole { .. } => "pole",
        Error::Domain(_) => "domain",
        Error::Stiffness { .. } => "stiffness",
        Error::Unsupported(_) => "unsupported",
        Error::BoundInapplicable { .. } => "bound_inapplicable",
        Error::Numerical(_) => "numerical",
        Error::Io { .. } => "io",
        Error::Parse { .. } => "parse",
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_)
        | Error::DimensionMismatch(_)
        | Error::Domain(_)
        | Error::Io { .. }
        | Error::Parse { .. } => 2,
        Error::Unsupported(_) | Error::BoundInapplicable { .. } => 4,
        Error::DegenerateSpectrum(_)
        | Error::Instability { .. }
        | Error::ProjectionDegenerate { .. }
        | Error::Pole { .. }
        | Error::Stiffness { .. }
        | Error::Numerical(_) => 3,
    }
}

pub fn error_json(e: &Error) -> Value {
    json!({
        "error": {
            "kind": error_kind(e),
            "message": e.to_string(),
            "exit_code": exit_code(e),
        }
    })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    write_text(path, &s)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_model(dir: &Path, sys: &StateSpaceModel) -> Result<()> {
    create_dir(dir)?;
    write_matrix_market(dir.join("A.mtx"), sys.a())?;
    write_matrix_market(dir.join("B.mtx"), sys.b())?;
    write_matrix_market(dir.join("C.mtx"), sys.c())?;
    write_matrix_market(dir.join("D.mtx"), sys.d())?;
    if let Some(e) = sys.e() {
        write_matrix_market(dir.join("E.mtx"), e)?;
    }
    Ok(())
}

fn write_switched(dir: &Path, sys: &SwitchedModel) -> Result<()> {
    for (i, mode) in sys.modes().iter().enumerate() {
        write_model(&dir.join(format!("mode_{}", i + 1)), mode)?;
    }
    Ok(())
}

/// CSV with columns `t, y_1 .. y_p, mode`, modes 1-based.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let p = traj.outputs.first().map_or(0, |y| y.len());
    let mut s = String::from("t");
    for k in 1..=p {
        write!(s, ",y_{k}").unwrap();
    }
    s.push_str(",mode\n");
    for ((t, y), mode) in traj.times.iter().zip(&traj.outputs).zip(&traj.modes) {
        write!(s, "{t:e}").unwrap();
        for v in y.iter() {
            write!(s, ",{v:e}").unwrap();
        }
        writeln!(s, ",{}", mode + 1).unwrap();
    }
    s
}

/// CSV with columns `index, value, normalized`, indices 1-based.
pub fn hsv_csv(hsv: &[f64]) -> String {
    let mut s = String::from("index,value,normalized\n");
    let first = hsv.first().copied().unwrap_or(0.0);
    for (i, v) in hsv.iter().enumerate() {
        let norm = if first > 0.0 { v / first } else { 0.0 };
        writeln!(s, "{},{v:e},{norm:e}", i + 1).unwrap();
    }
    s
}

/// Runs one command.
pub fn run(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let manifest = Manifest::load(&common.manifest)?;
    create_dir(&common.out)?;
    match cmd {
        Command::Build(_) => cmd_build(&manifest, common),
        Command::Reduce(_) => cmd_reduce(&manifest, common),
        Command::Simulate(_) => cmd_simulate(&manifest, common),
        Command::Bound(_) => cmd_bound(&manifest, common),
        Command::Hsv(_) => cmd_hsv(&manifest, common),
    }
}

fn one_based(v: impl IntoIterator<Item = usize>) -> Vec<usize> {
    v.into_iter().map(|i| i + 1).collect()
}

pub fn cmd_build(manifest: &Manifest, args: &CommonArgs) -> Result<()> {
    let sys = manifest.build_system(args.seed)?;
    let (env, _) = manifest.envelope(&sys)?;
    let dir = args.out.join("envelope");
    write_model(&dir, &env.sys)?;
    for (slot, m) in env.core_matrices.iter().enumerate() {
        let mode = env.layout.delta_modes[slot] + 1;
        write_matrix_market(dir.join(format!("M_{mode}.mtx")), m)?;
    }
    let condition = match check_condition(&env) {
        Ok((v, ok)) => json!({ "value": v, "satisfied": ok }),
        Err(e) => json!({ "value": null, "satisfied": false, "error": e.to_string() }),
    };
    let lay = &env.layout;
    let meta = json!({
        "states": env.states(),
        "modes": sys.num_modes(),
        "inputs": lay.inputs,
        "outputs": lay.outputs,
        "envelope_inputs": lay.envelope_inputs(),
        "envelope_outputs": lay.envelope_outputs(),
        "base_mode": lay.base_mode.map(|m| m + 1),
        "delta_modes": one_based(lay.delta_modes.iter().copied()),
        "delta_ranks": lay.ranks,
        "input_offsets": lay.input_offsets(),
        "output_offsets": lay.output_offsets(),
        "max_core_norm": env.max_core_norm(),
        "condition": condition,
        "compressed": env.compression.is_some(),
    });
    info!("envelope with {} states, {} inputs, {} outputs", env.states(), lay.envelope_inputs(), lay.envelope_outputs());
    write_json(&args.out.join("metadata.json"), &meta)
}

fn reduce(manifest: &Manifest, env: &EnvelopeModel) -> Result<(EnvelopeModel, ReductionReport)> {
    let spec = manifest
        .reduction
        .as_ref()
        .ok_or_else(|| Error::invalid("manifest has no reduction section"))?;
    match spec.method {
        MethodSpec::Bt => balanced_truncation(env, spec.r),
        MethodSpec::Irka => irka(env, spec.r, &spec.irka_options()),
    }
}

fn report_json(report: &ReductionReport, requested: usize, full_order: usize) -> Value {
    json!({
        "method": match report.method {
            ReductionMethod::BalancedTruncation => "bt",
            ReductionMethod::Irka => "irka",
        },
        "full_order": full_order,
        "requested_r": requested,
        "r": report.r,
        "hsv": report.hsv,
        "bt_bound": report.bt_bound,
        "projection_condition": report.condition,
        "converged": report.converged,
        "iterations": report.iterations,
    })
}

pub fn cmd_reduce(manifest: &Manifest, args: &CommonArgs) -> Result<()> {
    let sys = manifest.build_system(args.seed)?;
    let (env, maps) = manifest.envelope(&sys)?;
    let (red, report) = reduce(manifest, &env)?;
    let dir = args.out.join("reduced");
    write_model(&dir.join("envelope"), &red.sys)?;
    write_switched(&dir, &red.closed_loop(&maps)?)?;
    write_matrix_market(dir.join("V.mtx"), &report.projection.v)?;
    write_matrix_market(dir.join("W.mtx"), &report.projection.w)?;
    let requested = manifest.reduction.as_ref().map_or(report.r, |s| s.r);
    write_json(&args.out.join("report.json"), &report_json(&report, requested, env.states()))
}

fn simulate_full(manifest: &Manifest, p: &Problem) -> Result<Trajectory> {
    match manifest.simulation.integrator {
        Integrator::Dopri => simulate_switched(
            &p.system,
            &p.switching,
            &p.input,
            p.horizon,
            &manifest.simulation.options(),
            None,
        ),
        Integrator::Implicit => simulate_implicit(
            &p.system,
            &p.switching,
            &p.input,
            p.horizon,
            manifest.simulation.step.unwrap_or(p.horizon / 1000.0),
        ),
    }
}

fn simulate_reduced(
    manifest: &Manifest,
    p: &Problem,
    red: &EnvelopeModel,
    maps: &FeedbackMaps,
) -> Result<Trajectory> {
    match manifest.simulation.integrator {
        Integrator::Dopri => simulate_envelope_closed_loop(
            red,
            maps,
            &p.switching,
            &p.input,
            p.horizon,
            &manifest.simulation.options(),
        ),
        Integrator::Implicit => simulate_envelope_implicit(
            red,
            maps,
            &p.switching,
            &p.input,
            p.horizon,
            manifest.simulation.step.unwrap_or(p.horizon / 1000.0),
        ),
    }
}

fn events_json(traj: &Trajectory) -> Value {
    Value::Array(
        traj.events
            .iter()
            .map(|e| json!({ "time": e.time, "from": e.from + 1, "to": e.to + 1 }))
            .collect(),
    )
}

pub fn cmd_simulate(manifest: &Manifest, args: &CommonArgs) -> Result<()> {
    let p = manifest.problem(args.seed)?;
    let full = simulate_full(manifest, &p)?;
    write_text(&args.out.join("trajectory.csv"), &trajectory_csv(&full))?;
    let mut summary = json!({
        "horizon": p.horizon,
        "samples": full.len(),
        "steps": full.steps,
        "switch_count": full.switch_count(),
        "events": events_json(&full),
        "final_output": full.final_output().map(|y| y.as_slice().to_vec()),
        "output_l2": l2_norm(&full, None)?,
    });
    if manifest.reduction.is_some() {
        let (env, maps) = manifest.envelope(&p.system)?;
        let (red, report) = reduce(manifest, &env)?;
        let rom = simulate_reduced(manifest, &p, &red, &maps)?;
        write_text(&args.out.join("trajectory_reduced.csv"), &trajectory_csv(&rom))?;
        let mut reduced = json!({
            "r": report.r,
            "switch_count": rom.switch_count(),
            "events": events_json(&rom),
            "final_output": rom.final_output().map(|y| y.as_slice().to_vec()),
        });
        // the difference needs identical sample times, which output-driven runs need not share
        if let Ok(diff) = full.difference(&rom) {
            reduced["linf_error"] = json!(linf_norm(&diff, None)?);
            reduced["l2_error"] = json!(l2_norm(&diff, None)?);
        }
        summary["reduced"] = reduced;
    }
    write_json(&args.out.join("simulation.json"), &summary)
}

pub fn cmd_bound(manifest: &Manifest, args: &CommonArgs) -> Result<()> {
    let p = manifest.problem(args.seed)?;
    let (env, _) = manifest.envelope(&p.system)?;
    let (red, report) = reduce(manifest, &env)?;
    let b = posterior_bound(&env, &red, &p.switching, &p.input, p.horizon, &manifest.simulation.options())?;
    let v = json!({
        "r": report.r,
        "condition_value": b.condition_value,
        "condition_ok": b.condition_ok,
        "eta": b.eta,
        "hinf_error": b.hinf_error,
        "u_tilde_l2": b.u_tilde_l2,
        "bound": b.bound,
        "measured_error": b.measured_error,
        "output_l2": b.output_l2,
        "conservativeness": b.conservativeness(),
        "output_step": b.output_step,
        "horizon": p.horizon,
    });
    write_json(&args.out.join("bound.json"), &v)
}

pub fn cmd_hsv(manifest: &Manifest, args: &CommonArgs) -> Result<()> {
    let sys = manifest.build_system(args.seed)?.standard_form()?;
    let (env, _) = manifest.envelope(&sys)?;
    let mut models: Vec<(String, StateSpaceModel)> = vec![("hsv.csv".into(), env.full_io_model()?)];
    for (i, m) in sys.modes().iter().enumerate() {
        models.push((format!("hsv_mode_{}.csv", i + 1), m.clone()));
    }
    let results: Vec<(String, Result<Vec<f64>>)> = models
        .par_iter()
        .map(|(name, m)| (name.clone(), m.hankel_singular_values()))
        .collect();
    for (name, hsv) in results {
        write_text(&args.out.join(name), &hsv_csv(&hsv?))?;
    }
    Ok(())
}

/// Parses `ENVMOR_NUM_THREADS`; `None` when unset or empty.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        _ => Ok(None),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let common = cli.command.common().clone();
    let _ = env_logger::Builder::new()
        .parse_filters(&common.log_level)
        .format_timestamp(None)
        .try_init();
    let result = thread_limit().and_then(|limit| {
        if let Some(n) = limit {
            // a pool configured earlier in the process stays in place
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        run(&cli.command)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let v = error_json(&e);
            eprintln!("{v}");
            if common.out.is_dir() {
                let _ = write_json(&common.out.join("error.json"), &v);
            }
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::SwitchEvent;
    use nalgebra::DVector;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), 2);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 3);
        assert_eq!(exit_code(&Error::Unsupported("x".into())), 4);
        assert_eq!(exit_code(&Error::BoundInapplicable { condition_value: 2.0 }), 4);
        let v = error_json(&Error::Unsupported("nope".into()));
        assert_eq!(v["error"]["kind"], "unsupported");
        assert_eq!(v["error"]["exit_code"], 4);
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            times: vec![0.0, 0.5, 0.5],
            outputs: vec![DVector::from_vec(vec![0.0, 1.0]); 3],
            modes: vec![0, 0, 1],
            states: None,
            envelope_inputs: None,
            events: vec![SwitchEvent { time: 0.5, from: 0, to: 1 }],
            steps: 2,
        };
        let csv = trajectory_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,y_1,y_2,mode");
        assert_eq!(lines[3], "5e-1,0e0,1e0,2");
        let h = hsv_csv(&[2.0, 1.0]);
        assert_eq!(h, "index,value,normalized\n1,2e0,1e0\n2,1e0,5e-1\n");
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
