//! Per-mode reduction of the switched RLC circuit loses the output that the
//! envelope reduction keeps.

use envmor::benchmarks::{rlc_example, rlc_naive_pairs, rlc_schedule, rlc_steering_input, RLC_HORIZON};
use envmor::envelope::envelope_of;
use envmor::model::exact_switched_states;
use envmor::reduction::{balanced_truncation, naive_per_mode_reduction};
use envmor::simulation::{simulate_envelope_closed_loop, simulate_modes, SimOptions, SwitchingSignal};

fn main() -> envmor::Result<()> {
    let xi = 1.0;
    let sys = rlc_example();
    let sched = rlc_schedule();
    let sig = SwitchingSignal::time_driven(sched.clone());
    let u = rlc_steering_input(xi)?;
    let opts = SimOptions::with_tolerances(1e-10, 1e-12);

    let x = exact_switched_states(&sys, &sched, &u, &[RLC_HORIZON])?.remove(0);
    println!("full model        y(2) = {:.12}", (sys.mode(1).c() * x)[0]);

    let naive = naive_per_mode_reduction(&sys, &rlc_naive_pairs())?;
    let yn = simulate_modes(&naive.modes, &sig, &u, RLC_HORIZON, &opts, Some(&naive.transitions))?;
    println!("per-mode reduced  y(2) = {:.12}", yn.final_output().unwrap()[0]);

    let (env, maps) = envelope_of(&sys)?;
    let (red, report) = balanced_truncation(&env, 2)?;
    let ye = simulate_envelope_closed_loop(&red, &maps, &sig, &u, RLC_HORIZON, &opts)?;
    println!("envelope BT r = 2 y(2) = {:.12}", ye.final_output().unwrap()[0]);
    println!("envelope Hankel singular values {:?}", report.hsv);
    Ok(())
}
