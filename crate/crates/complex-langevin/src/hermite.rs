//! Normalized Hermite functions ψ_k(x) = (2^k k! √π)^{−1/2} H_k(x) e^{−x²/2}.

/// ψ₀(x)…ψ_{n−1}(x) by the stable three-term recurrence.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    fill_hermite_functions(&mut out, x);
    out
}

pub fn fill_hermite_functions(out: &mut [f64], x: f64) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for k in 2..n {
        let kf = k as f64;
        out[k] = (2.0 / kf).sqrt() * x * out[k - 1] - ((kf - 1.0) / kf).sqrt() * out[k - 2];
    }
}

/// Oscillator eigenfunctions of frequency ω: ω^{1/4} ψ_k(√ω x).
pub fn oscillator_functions(n: usize, omega: f64, x: f64) -> Vec<f64> {
    let s = omega.powf(0.25);
    let mut v = hermite_functions(n, omega.sqrt() * x);
    v.iter_mut().for_each(|p| *p *= s);
    v
}
