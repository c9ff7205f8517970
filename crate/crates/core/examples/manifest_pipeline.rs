//! Loads a JSON manifest and runs build, reduction and simulation in-process.
//!
//! `cargo run --example manifest_pipeline -- examples/manifests/heat.json`

use envmor::manifest::Manifest;
use envmor::reduction::balanced_truncation;
use envmor::simulation::{linf_norm, simulate_envelope_closed_loop, simulate_switched};

fn main() -> envmor::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/manifests/rlc.json").to_string());
    let manifest = Manifest::load(&path)?;
    let p = manifest.problem(None)?;
    let (env, maps) = manifest.envelope(&p.system)?;
    println!("{path}: {} modes, n = {}, m_E = {}, p_E = {}", p.system.num_modes(), env.states(), env.layout.envelope_inputs(), env.layout.envelope_outputs());

    let opts = manifest.simulation.options();
    let fom = simulate_switched(&p.system, &p.switching, &p.input, p.horizon, &opts, None)?;
    println!("full model: {} steps, {} switches", fom.steps, fom.switch_count());
    if let Some(spec) = &manifest.reduction {
        let (red, report) = balanced_truncation(&env, spec.r)?;
        let rom = simulate_envelope_closed_loop(&red, &maps, &p.switching, &p.input, p.horizon, &opts)?;
        match fom.difference(&rom) {
            Ok(d) => println!("BT r = {}: Linf error {:.3e}", report.r, linf_norm(&d, None)?),
            Err(_) => println!("BT r = {}: {} switches", report.r, rom.switch_count()),
        }
    }
    Ok(())
}
