//! Levels and spectral norms of the sextic Fokker-Planck Hamiltonian.

use std::f64::consts::PI;

use complex_langevin::spectral1d::{decompose_with_reliability, fokker_planck_omega2, ground_state_norm_exact, norm_growth_fit, wkb_energy};

fn main() -> complex_langevin::Result<()> {
    let lambda = 1.0;
    let theta = PI / 2.0;
    let dec = decompose_with_reliability(fokker_planck_omega2(lambda), lambda, theta, 150)?;
    println!("{} reliable levels", dec.reliable_prefix());
    for n in 0..=10 {
        let e = dec.eigenvalues[n];
        let wkb = if n > 0 { wkb_energy(n, lambda)? } else { 0.0 };
        println!("n={n:2}  C_n = {:10.6}  arg E/θ = {:.4}  ln N_n = {:.5}  WKB {:.3}", dec.c[n], e.arg() / theta, dec.norms[n].ln(), wkb);
    }
    println!("N_0 exact {:.8} vs {:.8}", ground_state_norm_exact(theta)?, dec.norms[0]);
    let fit = norm_growth_fit(&dec.norms[..dec.reliable_prefix().min(40)], 10)?;
    println!("ln N_n ≈ {:.3} + {:.3} n", fit.intercept, fit.slope);
    Ok(())
}
