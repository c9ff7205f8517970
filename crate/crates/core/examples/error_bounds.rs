//! A-priori and a-posteriori error bounds for envelope reductions.

use envmor::benchmarks::random_lss;
use envmor::bounds::{bt_envelope_bound, check_condition, posterior_bound};
use envmor::envelope::envelope_of;
use envmor::model::{StateSpaceModel, SwitchSchedule, SwitchedModel};
use envmor::numerics::Matrix;
use envmor::reduction::balanced_truncation;
use envmor::simulation::{InputSignal, SimOptions, SwitchingSignal, Waveform};

fn main() -> envmor::Result<()> {
    // three modes sharing A, so the small-gain condition holds trivially
    let a = random_lss(7, 12, 1, 1.0)?.mode(0).a().clone();
    let mut modes = Vec::new();
    for k in 0..3 {
        let b = Matrix::from_fn(12, 1, |i, _| ((i + k) as f64 * 0.7).sin() * 0.2);
        let c = Matrix::from_fn(1, 12, |_, j| ((j * (k + 1)) as f64 * 0.3).cos() * 0.2);
        modes.push(StateSpaceModel::strictly_proper(a.clone(), b, c)?);
    }
    let sys = SwitchedModel::new(modes)?;
    let (env, _) = envelope_of(&sys)?;
    let (value, ok) = check_condition(&env)?;
    println!("condition value {value:.3e}, satisfied: {ok}");

    let sig = SwitchingSignal::time_driven(SwitchSchedule::new(vec![0.0, 1.0, 2.5, 3.0], vec![0, 2, 1, 0])?);
    let u = InputSignal::scalar(Waveform::Sine { amplitude: 1.0, frequency: 0.5 })?;
    for r in [2, 4, 6] {
        let (red, report) = balanced_truncation(&env, r)?;
        let b = posterior_bound(&env, &red, &sig, &u, 4.0, &SimOptions::default())?;
        println!(
            "r = {r}: measured {:.3e}, a-posteriori bound {:.3e} ({:.1}x), a-priori 2*tail*||u_E|| {:.3e}",
            b.measured_error,
            b.bound,
            b.conservativeness(),
            bt_envelope_bound(&report, b.u_tilde_l2)?
        );
    }
    Ok(())
}
