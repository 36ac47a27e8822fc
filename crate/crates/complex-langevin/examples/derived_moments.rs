//! m₄, m₆, m₈ reconstructed from finite differences of the Borel transform M₂(t).

use complex_langevin::actions::Action;
use complex_langevin::borel::{derived_higher_moments, BorelOptions, BorelResult, RICHARDSON_TOL};

fn main() -> complex_langevin::Result<()> {
    let (t0, dt) = (0.5, 0.01);
    let times: Vec<f64> = (0..=150).map(|k| t0 + dt * k as f64).collect();
    let m2 = BorelResult::compute(2, 0.0, 1.0, &times, BorelOptions::default())?;
    let m4 = BorelResult::compute(4, 0.0, 1.0, &times, BorelOptions::default())?;
    let alpha = Action::quartic(1.0, 0.0)?.alpha();
    let d = derived_higher_moments(t0, dt, &m2.m_values, alpha, RICHARDSON_TOL)?;
    for k in (0..d.t.len()).step_by(25) {
        let direct = m4.m_values[k + 2];
        println!(
            "t={:.2}  m4 = {:.5} (direct {:.5})  m6 = {:.5}  m8 = {:.5}",
            d.t[k], d.m4[k].re, direct.re, d.m6[k].re, d.m8[k].re
        );
    }
    println!("step-h vs step-2h disagreement: {:.2e}", d.richardson);
    Ok(())
}
