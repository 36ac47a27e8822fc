//! Borel-resummed moments M₂(t), M₄(t) for the quartic action.

use std::f64::consts::PI;

use complex_langevin::actions::Action;
use complex_langevin::borel::{BorelOptions, BorelResult};

fn main() -> complex_langevin::Result<()> {
    let times: Vec<f64> = (1..=10).map(|k| 0.2 * k as f64).collect();
    for theta in [0.0, PI / 2.0] {
        let m2 = BorelResult::compute(2, theta, 1.0, &times, BorelOptions::default())?;
        let m4 = BorelResult::compute(4, theta, 1.0, &times, BorelOptions::default())?;
        println!("theta = {theta:.4}");
        for ((t, a), b) in times.iter().zip(&m2.m_values).zip(&m4.m_values) {
            println!("  t={t:4.1}  M2 = {:.5}{:+.5}i  M4 = {:.5}{:+.5}i", a.re, a.im, b.re, b.im);
        }
        let a = Action::quartic(1.0, theta)?;
        let (e2, e4) = (a.boltzmann_moment(2)?, a.boltzmann_moment(4)?);
        println!("  equilibrium  <x^2> = {:.5}{:+.5}i  <x^4> = {:.5}{:+.5}i", e2.re, e2.im, e4.re, e4.im);
    }
    Ok(())
}
