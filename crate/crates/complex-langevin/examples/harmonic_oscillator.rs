//! Exact quadratic-action results checked against a Langevin ensemble.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use complex_langevin::actions::{Action, NoiseConfig};
use complex_langevin::harmonic::{generating_functional_check, harmonic_ground_state, harmonic_moment_flow, mehler_kernel, mehler_spectral_sum, spectral_norm_generating_function, spectral_norms_closed_form};
use complex_langevin::langevin::{density_histogram_2d, ensemble_moments, HistogramGrid, SimulationConfig};

fn main() -> complex_langevin::Result<()> {
    let theta = PI / 2.0;
    let gs = harmonic_ground_state(1.0, theta, 1.0)?;
    println!("A0 = {:.6}, B0 = {:.6}, C0 = {:.6}, λ± = {:.6}, {:.6}", gs.a0, gs.b0, gs.c0, gs.lambda_plus, gs.lambda_minus);
    println!("generating functional residual at j=1: {:.2e}", generating_functional_check(1.0, 1.0, theta, 1.0)?);
    let norms = spectral_norm_generating_function(theta, 8)?;
    println!("N_n: {:?}; closed form N_0..2 = {:?}", norms, spectral_norms_closed_form(theta));
    println!("Mehler kernel {:.10} vs 30-term sum {:.10}", mehler_kernel(1.0, -1.0, 1.0)?, mehler_spectral_sum(1.0, -1.0, 1.0, 30));

    let action = Action::quadratic(1.0, theta)?;
    let cfg = SimulationConfig::new(action, NoiseConfig::new(1.0)?, vec![0.25, 0.5, 1.0, 2.0], 20_000, 3)?.with_delta(1e-4)?;
    let ens = ensemble_moments(&cfg)?;
    for c in &ens.checkpoints {
        let exact = harmonic_moment_flow(2, c.t, 1.0, theta, &BTreeMap::new())?;
        println!("t={:.2}  Langevin {:.4}{:+.4}i ± {:.4}  exact {:.4}{:+.4}i", c.t, c.m2.re, c.m2.im, c.se_m2_abs(), exact.re, exact.im);
    }
    let hist = density_histogram_2d(&cfg.clone().with_delta(1e-3)?, 5.0, HistogramGrid::square(4.0, 24))?;
    println!("histogram L1 distance to φ0: {:.4}", hist.l1_distance(|x, y| gs.density(x, y)));
    Ok(())
}
