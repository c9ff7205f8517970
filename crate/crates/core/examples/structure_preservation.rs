//! Reduction that keeps a common quadratic Lyapunov function and port-Hamiltonian structure.

use envmor::envelope::envelope_of;
use envmor::model::{StateSpaceModel, SwitchedModel};
use envmor::numerics::{lambda_min_sym, Matrix};
use envmor::reduction::{balanced_truncation, ph_preserving_pair, reduce_port_hamiltonian, reduce_switched, stability_preserving_pair};
use envmor::stability::{search_common_q, verify_quadratic_stability, PortHamiltonianMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> envmor::Result<()> {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut normal = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let l = normal(n, n) / (n as f64).sqrt();
    let q = &l * l.transpose() + Matrix::identity(n, n) * 0.5;
    let mut ph = Vec::new();
    for _ in 0..3 {
        let x = normal(n, n);
        let y = normal(n, n) / (n as f64).sqrt();
        ph.push(PortHamiltonianMode::new(&x - x.transpose(), &y * y.transpose() + Matrix::identity(n, n) * 0.1, q.clone(), normal(n, 1))?);
    }
    let sys = SwitchedModel::new(
        ph.iter()
            .map(|m| StateSpaceModel::strictly_proper(m.a(), m.b.clone(), m.c()))
            .collect::<envmor::Result<_>>()?,
    )?;
    let cert = verify_quadratic_stability(&sys, &q)?;
    println!("full model: common Q certified {}, slack {:.3e}", cert.passed, cert.slack());
    if let Some(found) = search_common_q(&sys, 1e-8)? {
        println!("independent search also found a common Q (min eigenvalue {:.3e})", lambda_min_sym(&found));
    }

    let (env, _) = envelope_of(&sys)?;
    let r = 5;
    let (_, report) = balanced_truncation(&env, r)?;
    let v = report.projection.v.columns(0, r).into_owned();
    let pair = stability_preserving_pair(&v, &q)?;
    let reduced = reduce_switched(&sys, &pair)?;
    let qr = v.transpose() * &q * &v;
    let cert = verify_quadratic_stability(&reduced, &qr)?;
    println!("reduced r = {r}: Q~ = V^T Q V certified {}, lambda_max {:?}", cert.passed, cert.lambda_max);

    let pair = ph_preserving_pair(&v, &q)?;
    for (i, m) in ph.iter().enumerate() {
        let red = reduce_port_hamiltonian(m, &pair)?;
        println!(
            "mode {}: skewness defect {:.1e}, min eigenvalue of R~ {:.3e}",
            i + 1,
            red.skewness_defect(),
            lambda_min_sym(&red.r)
        );
    }
    Ok(())
}
