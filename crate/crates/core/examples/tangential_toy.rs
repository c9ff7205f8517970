//! A reduced model that never reaches the switching threshold of the full model.

use envmor::benchmarks::tangential_toy;
use envmor::simulation::{simulate_modes, simulate_switched, SimOptions};

fn main() -> envmor::Result<()> {
    let p: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let toy = tangential_toy(p)?;
    let opts = SimOptions::with_tolerances(1e-10, 1e-12);
    let full = simulate_switched(&toy.full, &toy.switching, &toy.input, 3.0, &opts, None)?;
    let red = simulate_modes(toy.reduced.modes(), &toy.switching, &toy.input, 3.0, &opts, None)?;

    println!("p = {p}, threshold = {:.6}", toy.threshold);
    println!("predicted crossing at t = {:.9}", toy.crossing_time());
    for e in &full.events {
        println!("full model switches {} -> {} at t = {:.9}", e.from + 1, e.to + 1, e.time);
    }
    let peak = red.outputs.iter().map(|y| y[0]).fold(f64::MIN, f64::max);
    println!("reduced model: {} switches, peak output {peak:.6}", red.switch_count());
    Ok(())
}
