use super::{Run, SimOptions, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::Vector;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];

/// Continuous extension: `x(t + th h) = x + h sum_i k_i (P_i . [th, th^2, th^3, th^4])`.
const P: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

struct Step {
    x_new: Vector,
    k: Vec<Vector>,
    err: f64,
}

fn rms_scaled(v: &Vector, x0: &Vector, x1: &Vector, opts: &SimOptions) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = (0..v.len())
        .map(|i| {
            let sc = opts.atol + opts.rtol * x0[i].abs().max(x1[i].abs());
            (v[i] / sc).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

fn dense(x: &Vector, k: &[Vector], h: f64, theta: f64) -> Vector {
    let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
    let mut out = x.clone();
    for (ki, pi) in k.iter().zip(P.iter()) {
        let w: f64 = pi.iter().zip(&powers).map(|(a, b)| a * b).sum();
        if w != 0.0 {
            out.axpy(h * w, ki, 1.0);
        }
    }
    out
}

fn attempt(run: &Run, mode: usize, t: f64, x: &Vector, h: f64, opts: &SimOptions) -> Step {
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut xs = x.clone();
        for (j, a) in A[s].iter().enumerate() {
            if *a != 0.0 {
                xs.axpy(h * a, &k[j], 1.0);
            }
        }
        let us = if s == 0 {
            run.u.eval_right(t)
        } else {
            run.u.eval(t + C[s] * h)
        };
        k.push(run.modes.derivative(mode, &xs, &us));
    }
    // the seventh stage is evaluated at the fifth-order solution
    let mut x_new = x.clone();
    for (j, b) in A[6].iter().enumerate() {
        x_new.axpy(h * b, &k[j], 1.0);
    }
    let mut e = Vector::zeros(x.len());
    for (j, ej) in E.iter().enumerate() {
        if *ej != 0.0 {
            e.axpy(h * ej, &k[j], 1.0);
        }
    }
    let err = rms_scaled(&e, x, &x_new, opts);
    Step { x_new, k, err }
}

fn initial_step(run: &Run, mode: usize, x: &Vector, opts: &SimOptions) -> f64 {
    let u0 = run.u.eval_right(0.0);
    let f0 = run.modes.derivative(mode, x, &u0);
    let d0 = rms_scaled(x, x, x, opts);
    let d1 = rms_scaled(&f0, x, x, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let x1 = x + &f0 * h0;
    let f1 = run.modes.derivative(mode, &x1, &run.u.eval(h0));
    let d2 = rms_scaled(&(f1 - &f0), x, x, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(run.horizon)
}

/// Bisects `(lo, hi]` for the earliest firing of an output rule, to within `1e-10` time units.
fn locate_event(
    run: &Run,
    mode: usize,
    t: f64,
    x: &Vector,
    k: &[Vector],
    h: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    while (hi - lo) * h > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let tm = t + mid * h;
        let y = run.modes.output(mode, &dense(x, k, h, mid), &run.u.eval(tm));
        if run.firing_rule(tm, mode, &y).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub(super) fn integrate(mut run: Run, opts: &SimOptions) -> Result<Trajectory> {
    let mut mode = run.sig.initial_mode();
    let mut x = Vector::zeros(run.modes.dim(mode));
    let mut t = 0.0;
    run.record(0.0, mode, &x, &run.u.eval(0.0));
    run.emit_grid(0.0, false, mode, |_| unreachable!());
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(&run, mode, &x, opts));
    let mut steps = 0usize;

    'segments: while t < run.horizon {
        let stop = run.next_stop(t);

        if run.is_output_driven() {
            let y = run.modes.output(mode, &x, &run.u.eval_right(t));
            if let Some(to) = run.firing_rule(t, mode, &y) {
                x = run.switch(t, mode, to, &x)?;
                mode = to;
                continue 'segments;
            }
        }

        while t < stop {
            let last = t + 1.01 * h >= stop;
            let hs = if last { stop - t } else { h };
            let step = attempt(&run, mode, t, &x, hs, opts);
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Stiffness { t, h: hs });
            }
            if !step.err.is_finite() || step.err > 1.0 {
                let fac = if step.err.is_finite() {
                    (0.9 * step.err.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h = hs * fac;
                if h < 1e-13 * run.horizon.max(t.abs()) {
                    return Err(Error::Stiffness { t, h });
                }
                continue;
            }
            let t_new = if last { stop } else { t + hs };

            if run.is_output_driven() {
                let mut prev = 0.0;
                for theta in [0.25, 0.5, 0.75, 1.0] {
                    let tt = t + theta * hs;
                    let xt = if theta == 1.0 {
                        step.x_new.clone()
                    } else {
                        dense(&x, &step.k, hs, theta)
                    };
                    let y = run.modes.output(mode, &xt, &run.u.eval(tt));
                    if let Some(to) = run.firing_rule(tt, mode, &y) {
                        let th = locate_event(&run, mode, t, &x, &step.k, hs, prev, theta);
                        let te = if th >= 1.0 { t_new } else { t + th * hs };
                        let xe = if th >= 1.0 {
                            step.x_new.clone()
                        } else {
                            dense(&x, &step.k, hs, th)
                        };
                        let (x0, k) = (x.clone(), step.k);
                        run.emit_grid(te, true, mode, |g| dense(&x0, &k, hs, (g - t) / hs));
                        let to = run
                            .firing_rule(te, mode, &run.modes.output(mode, &xe, &run.u.eval(te)))
                            .unwrap_or(to);
                        x = run.switch(te, mode, to, &xe)?;
                        mode = to;
                        t = te;
                        run.traj.steps = steps;
                        continue 'segments;
                    }
                    prev = theta;
                }
            }

            let open = t_new == stop && run.scheduled_switch(stop, mode).is_some();
            {
                let (x0, k) = (&x, &step.k);
                run.emit_grid(t_new, open, mode, |g| {
                    dense(x0, k, hs, ((g - t) / hs).clamp(0.0, 1.0))
                });
            }
            t = t_new;
            x = step.x_new;
            let fac = if step.err == 0.0 {
                5.0
            } else {
                (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a step shortened to hit a stop says little about the admissible size
            h = if last { h.max(hs * fac) } else { hs * fac };
        }

        if let Some(to) = run.scheduled_switch(t, mode) {
            x = run.switch(t, mode, to, &x)?;
            mode = to;
        }
    }
    run.traj.steps = steps;
    Ok(run.traj)
}
