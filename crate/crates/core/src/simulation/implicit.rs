use std::collections::HashMap;

use nalgebra::LU;

use super::{Run, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

type Factor = LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

fn factor<'c>(
    cache: &'c mut HashMap<(usize, u64), Factor>,
    run: &Run,
    mode: usize,
    h: f64,
) -> Result<&'c Factor> {
    let key = (mode, h.to_bits());
    if !cache.contains_key(&key) {
        let a = run.modes.a(mode);
        let n = a.nrows();
        let m = Matrix::identity(n, n) - a * h;
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::invalid(format!(
                "invalid step size {h}: I - hA is singular in mode {mode}"
            )));
        }
        cache.insert(key, lu);
    }
    Ok(&cache[&key])
}

pub(super) fn integrate(mut run: Run, step: f64) -> Result<Trajectory> {
    let mut cache = HashMap::new();
    let mut mode = run.sig.initial_mode();
    let mut x = Vector::zeros(run.modes.dim(mode));
    let mut t = 0.0;
    run.record(0.0, mode, &x, &run.u.eval(0.0));
    run.emit_grid(0.0, false, mode, |_| unreachable!());
    let mut steps = 0usize;

    'segments: while t < run.horizon {
        let stop = run.next_stop(t);
        let mut y = run.modes.output(mode, &x, &run.u.eval_right(t));
        if let Some(to) = run.firing_rule(t, mode, &y) {
            x = run.switch(t, mode, to, &x)?;
            mode = to;
            continue 'segments;
        }

        let t0 = t;
        let n = ((stop - t0) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (stop - t0) / n as f64;
        for i in 1..=n {
            let t_new = if i == n { stop } else { t0 + i as f64 * h };
            let hi = t_new - t;
            let u_new = run.u.eval(t_new);
            let rhs = &x + run.modes.b(mode) * &u_new * hi;
            let lu = if i == n || (hi - h).abs() > 1e-15 * h {
                // the final step of a segment can differ from h by rounding
                factor(&mut cache, &run, mode, hi)?
            } else {
                factor(&mut cache, &run, mode, h)?
            };
            let x_new = lu
                .solve(&rhs)
                .ok_or_else(|| Error::invalid(format!("invalid step size {hi}")))?;
            steps += 1;
            let y_new = run.modes.output(mode, &x_new, &u_new);

            if let Some(to) = run.firing_rule(t_new, mode, &y_new) {
                let theta = crossing_fraction(&run, mode, &y, &y_new);
                let te = t + theta * hi;
                let xe = &x + (&x_new - &x) * theta;
                let xs = x.clone();
                run.emit_grid(te, true, mode, |g| &xs + (&x_new - &xs) * ((g - t) / hi));
                x = run.switch(te, mode, to, &xe)?;
                mode = to;
                t = te;
                continue 'segments;
            }

            let open = t_new == stop && run.scheduled_switch(stop, mode).is_some();
            let xs = x.clone();
            run.emit_grid(t_new, open, mode, |g| {
                &xs + (&x_new - &xs) * ((g - t) / hi).clamp(0.0, 1.0)
            });
            t = t_new;
            x = x_new;
            y = y_new;
        }

        if let Some(to) = run.scheduled_switch(t, mode) {
            x = run.switch(t, mode, to, &x)?;
            mode = to;
        }
    }
    run.traj.steps = steps;
    Ok(run.traj)
}

/// Linear interpolation of the first firing rule's threshold crossing within a step.
fn crossing_fraction(run: &Run, mode: usize, y0: &Vector, y1: &Vector) -> f64 {
    let super::SwitchingSignal::OutputDriven(od) = run.sig else {
        return 1.0;
    };
    od.rules
        .iter()
        .find(|r| r.from == mode && r.fires(y1[r.channel]))
        .map(|r| {
            let (a, b) = (y0[r.channel], y1[r.channel]);
            if (b - a).abs() > 0.0 {
                ((r.threshold - a) / (b - a)).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .unwrap_or(1.0)
}
