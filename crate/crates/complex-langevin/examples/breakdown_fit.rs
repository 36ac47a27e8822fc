//! Power-law fit t_c = c·(A_I + a)^{−γ} through reference breakdown times.

use complex_langevin::langevin::breakdown_scaling_fit;

fn main() -> complex_langevin::Result<()> {
    let points = [(1.0, 0.16), (0.5, 0.22), (0.2, 0.41), (0.1, 0.67)];
    let fit = breakdown_scaling_fit(&points)?;
    println!("gamma = {:.4}, a = {:.4}, c = {:.4}, rms = {:.2e}", fit.gamma, fit.alpha_shift, fit.amplitude, fit.residual);
    for (ai, tc) in points {
        println!("A_I = {ai:4}: t_c = {tc:.3}, fit {:.3}", fit.predict(ai));
    }
    Ok(())
}
