//! Output-driven door control of the heat benchmark, full against reduced models.

use envmor::benchmarks::{heat_hysteresis, heat_input, heat_two_rooms, HeatParams, HEAT_HORIZON};
use envmor::envelope::envelope_of;
use envmor::reduction::balanced_truncation;
use envmor::simulation::{simulate_envelope_closed_loop, simulate_switched, SimOptions, Trajectory};

fn describe(name: &str, t: &Trajectory) {
    let times: Vec<String> = t.events.iter().map(|e| format!("{:.4}", e.time)).collect();
    println!("{name:<12} {} switches at [{}]", t.switch_count(), times.join(", "));
}

fn main() -> envmor::Result<()> {
    let sys = heat_two_rooms(&HeatParams::default())?.standard_form()?;
    let sig = heat_hysteresis(0.2, 0.5)?;
    let u = heat_input();
    let opts = SimOptions::default();
    describe("full", &simulate_switched(&sys, &sig, &u, HEAT_HORIZON, &opts, None)?);
    let (env, maps) = envelope_of(&sys)?;
    for r in [6, 8, 10, 14] {
        let (red, _) = balanced_truncation(&env, r)?;
        let t = simulate_envelope_closed_loop(&red, &maps, &sig, &u, HEAT_HORIZON, &opts)?;
        describe(&format!("BT r = {r}"), &t);
    }
    Ok(())
}
