//! Ensemble moments of the quartic action against the Borel transform.
//!
//! cargo run --release --example langevin_ensemble -- [ntraj] [ai] [delta] [theta/π] [tfinal] [checkpoints]

use std::f64::consts::PI;
use std::time::Instant;

use complex_langevin::actions::{Action, NoiseConfig};
use complex_langevin::borel::{default_s_max, BorelTabulation};
use complex_langevin::langevin::{detect_breakdown, ensemble_moments, BreakdownParams, SimulationConfig};

fn main() -> complex_langevin::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let ntraj: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let ai: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let delta: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let theta = PI * args.get(4).and_then(|s| s.parse::<f64>().ok()).unwrap_or(0.5);
    let tfinal: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let action = Action::quartic(1.0, theta)?;
    let nc: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(20);
    let checkpoints: Vec<f64> = (1..=nc).map(|k| tfinal * k as f64 / nc as f64).collect();
    let cfg = SimulationConfig::new(action, NoiseConfig::new(ai)?, checkpoints, ntraj, 2024)?.with_delta(delta)?;

    let start = Instant::now();
    let ens = ensemble_moments(&cfg)?;
    let elapsed = start.elapsed();
    let tab = { let a = action.alpha().norm(); BorelTabulation::cached(2, a, 500, default_s_max(a), 1e-3)? };
    println!("{:>6} {:>22} {:>22} {:>10}", "t", "langevin m2", "borel M2", "sigma");
    for c in &ens.checkpoints {
        let m = tab.transform(theta, c.t)?.value;
        let z = (c.m2 - m).norm() / c.se_m2_abs();
        println!("{:6.2} {:10.5}{:+10.5}i {:10.5}{:+10.5}i {:10.2}", c.t, c.m2.re, c.m2.im, m.re, m.im, z);
    }
    let tc = detect_breakdown(&ens, |t| tab.transform(theta, t).map(|v| v.value).unwrap_or_default(), BreakdownParams::default());
    println!("A_I = {ai}: breakdown t_c = {tc:?}; {} excluded; {:.1?}", ens.n_excluded, elapsed);
    Ok(())
}
