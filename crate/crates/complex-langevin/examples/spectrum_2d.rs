//! Spectrum and ground state of the two-variable Fokker-Planck operator.
//!
//! cargo run --release --example spectrum_2d -- [ai] [N]

use std::f64::consts::PI;

use complex_langevin::actions::Action;
use complex_langevin::spectral2d::{build_fp_matrix, ground_state_function, ground_state_moments, ground_state_vector, spectrum_2d_real, Grid2D, DEFAULT_SHIFT};

fn main() -> complex_langevin::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let ai: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let theta = PI / 2.0;
    let op = build_fp_matrix(1.0, theta, ai, n)?;
    for (k, e) in spectrum_2d_real(&op, 6)?.iter().enumerate() {
        println!("E_{k} = {:.5}{:+.5}i", e.re, e.im);
    }
    let gs = ground_state_vector(&op, DEFAULT_SHIFT)?;
    let field = ground_state_function(&gs, Grid2D::default_for(1.0))?;
    let m2 = ground_state_moments(&gs, &field, 2)?;
    let exact = Action::quartic(1.0, theta)?.boltzmann_moment(2)?;
    println!("E_0 (inverse iteration) = {:.2e}, min/max of φ0 = {:.2e}", gs.e0, field.min_over_max);
    println!("<z^2> = {:.4}{:+.4}i, complex measure {:.4}{:+.4}i", m2.value.re, m2.value.im, exact.re, exact.im);
    Ok(())
}
