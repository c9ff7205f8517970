//! Two-room heat benchmark: Hankel spectra and envelope reductions of several orders.

use envmor::benchmarks::{heat_input, heat_schedule, heat_two_rooms, HeatParams, HEAT_HORIZON};
use envmor::envelope::envelope_of;
use envmor::reduction::{balanced_truncation, irka, IrkaOptions};
use envmor::simulation::{
    l2_norm, linf_norm, simulate_envelope_closed_loop, simulate_switched, SimOptions, SwitchingSignal,
};

fn main() -> envmor::Result<()> {
    let sys = heat_two_rooms(&HeatParams::default())?.standard_form()?;
    let (env, maps) = envelope_of(&sys)?;
    println!(
        "n = {}, envelope inputs {} outputs {}",
        env.states(),
        env.layout.envelope_inputs(),
        env.layout.envelope_outputs()
    );
    for (i, m) in sys.modes().iter().enumerate() {
        let h = m.hankel_singular_values()?;
        let lead: Vec<String> = h.iter().take(6).map(|v| format!("{:.4e}", v / h[0])).collect();
        println!("mode {} normalized HSVs {}", i + 1, lead.join(" "));
    }

    let sig = SwitchingSignal::time_driven(heat_schedule());
    let u = heat_input();
    let opts = SimOptions::with_tolerances(1e-9, 1e-8);
    let fom = simulate_switched(&sys, &sig, &u, HEAT_HORIZON, &opts, None)?;
    println!("full model: {} integration steps", fom.steps);
    for r in [4, 6, 8, 10, 12] {
        let (bt, report) = balanced_truncation(&env, r)?;
        let (ir, ir_report) = irka(&env, r, &IrkaOptions::default())?;
        let e_bt = fom.difference(&simulate_envelope_closed_loop(&bt, &maps, &sig, &u, HEAT_HORIZON, &opts)?)?;
        let e_ir = fom.difference(&simulate_envelope_closed_loop(&ir, &maps, &sig, &u, HEAT_HORIZON, &opts)?)?;
        println!(
            "r = {r:>2}: BT Linf {:.3e} L2 {:.3e} (2*tail {:.3e}) | IRKA Linf {:.3e} ({} iterations)",
            linf_norm(&e_bt, None)?,
            l2_norm(&e_bt, None)?,
            report.bt_bound.unwrap_or(f64::NAN),
            linf_norm(&e_ir, None)?,
            ir_report.iterations
        );
    }
    Ok(())
}
