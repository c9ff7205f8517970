//! Switched CD-player model read from Matrix Market files.
//!
//! `cargo run --example cd_player -- <dir>` with `A.mtx`, `B.mtx`, `C.mtx`; without
//! an argument a small synthetic fixture is used.

use std::path::PathBuf;

use envmor::benchmarks::{cd_player_input, cd_player_schedule, cd_player_switched, CD_PLAYER_HORIZON};
use envmor::envelope::envelope_of;
use envmor::reduction::{balanced_truncation, irka, IrkaOptions};
use envmor::simulation::{linf_norm, simulate_envelope_closed_loop, simulate_switched, SimOptions, SwitchingSignal};

fn main() -> envmor::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/cd_player_synthetic")
    });
    let sys = cd_player_switched(&dir)?;
    let (env, maps) = envelope_of(&sys)?;
    println!("{}: n = {}, envelope rank of deltas {}", dir.display(), sys.states(), env.layout.total_rank());

    let sig = SwitchingSignal::time_driven(cd_player_schedule());
    let u = cd_player_input();
    let opts = SimOptions::default();
    let fom = simulate_switched(&sys, &sig, &u, CD_PLAYER_HORIZON, &opts, None)?;
    let scale = linf_norm(&fom, None)?;
    let r = (sys.states() / 4).clamp(1, 20);
    let (bt, _) = balanced_truncation(&env, r)?;
    let (ir, _) = irka(&env, r, &IrkaOptions::default())?;
    for (name, red) in [("BT", bt), ("IRKA", ir)] {
        let rom = simulate_envelope_closed_loop(&red, &maps, &sig, &u, CD_PLAYER_HORIZON, &opts)?;
        println!("{name} r = {r}: relative Linf error {:.3e}", linf_norm(&fom.difference(&rom)?, None)? / scale);
    }
    Ok(())
}
