//! Exact results for the quadratic action S = ω e^{iθ/2} q².

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::actions::gaussian_moment;
use crate::error::{Error, Result};
use crate::hermite::hermite_functions;
use crate::io::{fmt_f64, write_table, MetaHeader};

fn check_args(omega: f64, theta: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, π), got {theta}")));
    }
    Ok(())
}

/// Moment m_p(t) as a finite sum Σ_q a_q e^{−2qω′t} over even q ≤ p, ω′ = ωe^{iθ/2}.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFlow {
    pub omega_c: Complex64,
    /// `coeffs[k]` multiplies e^{−2(2k)ω′t}
    pub coeffs: Vec<Complex64>,
}

impl MomentFlow {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * (-4.0 * k as f64 * self.omega_c * t).exp())
            .sum()
    }
}

/// Builds the exponential-sum form of m_p(t) by integrating the flow
/// ∂ₜm_p = p(p−1)m_{p−2} − 2ω′p m_p upward from m₀ = 1.
/// Missing initial values default to zero (point mass at the origin).
pub fn moment_flow(p: usize, omega: f64, theta: f64, initial: &BTreeMap<usize, Complex64>) -> Result<MomentFlow> {
    check_args(omega, theta)?;
    if p % 2 == 1 {
        return Err(Error::OddMoment(p));
    }
    let w = omega * Complex64::from_polar(1.0, 0.5 * theta);
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for q in (2..=p).step_by(2) {
        let h = q / 2;
        let mut next = vec![Complex64::new(0.0, 0.0); h + 1];
        let src = (q * (q - 1)) as f64;
        for (k, a) in coeffs.iter().enumerate() {
            // ∫₀ᵗ e^{−4kω′t′} e^{2qω′(t′−t)} dt′
            let c = src * a / (2.0 * (q - 2 * k) as f64 * w);
            next[k] += c;
            next[h] -= c;
        }
        next[h] += initial.get(&q).copied().unwrap_or_default();
        coeffs = next;
    }
    Ok(MomentFlow { omega_c: w, coeffs })
}

/// Closed-form m_p(t); `initial` maps even p′ ≤ p to m_{p′}(0).
pub fn harmonic_moment_flow(p: usize, t: f64, omega: f64, theta: f64, initial: &BTreeMap<usize, Complex64>) -> Result<Complex64> {
    if p == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(moment_flow(p, omega, theta, initial)?.eval(t))
}

/// m_p(∞) = p!/(p/2)! · (4ω′)^{−p/2}.
pub fn harmonic_equilibrium_moment(p: usize, omega: f64, theta: f64) -> Result<Complex64> {
    check_args(omega, theta)?;
    if p % 2 == 1 {
        return Err(Error::OddMoment(p));
    }
    Ok(gaussian_moment(p, omega * Complex64::from_polar(1.0, 0.5 * theta)))
}

/// Real stationary density exp(−A₀x² − 2B₀xy − C₀y²) of the two-variable operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianGroundState {
    pub omega: f64,
    pub theta: f64,
    pub a_i: f64,
    /// noise parameter with A_I = sinh²(α/4)
    pub alpha: f64,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// rotation angle θ/4 of the principal axes
    pub rotation: f64,
}

pub fn harmonic_ground_state(omega: f64, theta: f64, a_i: f64) -> Result<GaussianGroundState> {
    check_args(omega, theta)?;
    if !(a_i >= 0.0 && a_i.is_finite()) {
        return Err(Error::InvalidParameter(format!("A_I must be nonnegative, got {a_i}")));
    }
    let alpha = 4.0 * a_i.sqrt().asinh();
    let den = alpha.cosh() - theta.cos();
    if den < 1e-12 {
        return Err(Error::Degenerate(format!("cosh α − cos θ = {den:e} (θ={theta}, A_I={a_i})")));
    }
    let (ch, c2, c1) = ((0.5 * alpha).cosh(), (0.5 * theta).cos(), theta.cos());
    let a0 = 2.0 * omega * c2 * (2.0 * ch - 1.0 - c1) / den;
    let b0 = omega * ((0.5 * theta).sin() + (1.5 * theta).sin()) / den;
    let c0 = 2.0 * omega * c2 * (2.0 * ch + 1.0 + c1) / den;
    Ok(GaussianGroundState {
        omega,
        theta,
        a_i,
        alpha,
        a0,
        b0,
        c0,
        lambda_plus: 2.0 * omega * c2 / (ch + c2),
        lambda_minus: 2.0 * omega * c2 / (ch - c2),
        rotation: 0.25 * theta,
    })
}

impl GaussianGroundState {
    pub fn a_r(&self) -> f64 {
        1.0 + self.a_i
    }

    pub fn determinant(&self) -> f64 {
        self.a0 * self.c0 - self.b0 * self.b0
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a0 > 0.0 && self.determinant() > 0.0
    }

    /// Unnormalized φ₀(x, y).
    pub fn phi(&self, x: f64, y: f64) -> f64 {
        (-(self.a0 * x * x + 2.0 * self.b0 * x * y + self.c0 * y * y)).exp()
    }

    /// ∫φ₀ = π/√det.
    pub fn norm(&self) -> f64 {
        PI / self.determinant().sqrt()
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        self.phi(x, y) / self.norm()
    }

    /// Covariance (Σxx, Σxy, Σyy) of the normalized density.
    pub fn covariance(&self) -> (f64, f64, f64) {
        let d = 2.0 * self.determinant();
        (self.c0 / d, -self.b0 / d, self.a0 / d)
    }

    /// (A₀ B₀; B₀ C₀) rebuilt from λ± and the θ/4 rotation.
    pub fn rotated_form(&self) -> (f64, f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let (lp, lm) = (self.lambda_plus, self.lambda_minus);
        (c * c * lp + s * s * lm, c * s * (lm - lp), s * s * lp + c * c * lm)
    }

    /// ⟨z^p⟩ with z = x + iy, from Wick's theorem with variance σ² = ⟨z²⟩.
    pub fn moment(&self, p: usize) -> Result<Complex64> {
        if p % 2 == 1 {
            return Err(Error::OddMoment(p));
        }
        let (sxx, sxy, syy) = self.covariance();
        let var = Complex64::new(sxx - syy, 2.0 * sxy);
        let mut v = Complex64::new(1.0, 0.0);
        let mut k = p as i64 - 1;
        while k > 0 {
            v *= k as f64;
            k -= 2;
        }
        Ok(v * var.powi(p as i32 / 2))
    }

    /// ⟨e^{jz}⟩ = exp(j²⟨z²⟩/2).
    pub fn generating_functional(&self, j: f64) -> Complex64 {
        let (sxx, sxy, syy) = self.covariance();
        (0.5 * j * j * Complex64::new(sxx - syy, 2.0 * sxy)).exp()
    }

    /// (𝒫φ₀)/φ₀ at (x, y); zero for a stationary state.
    pub fn stationarity_ratio(&self, x: f64, y: f64) -> f64 {
        let q = [Complex64::new(self.a0, 0.0), Complex64::new(self.b0, 0.0), Complex64::new(self.c0, 0.0)];
        fp_gaussian_ratio(self.omega, self.theta, self.a_r(), self.a_i, q, x, y).re
    }

    /// max |𝒫φ₀| over a square grid of `points`² nodes on [−h, h]², relative to max φ₀.
    pub fn stationarity_residual(&self, half_width: f64, points: usize) -> f64 {
        let mut worst = 0.0f64;
        let step = 2.0 * half_width / (points.max(2) - 1) as f64;
        for i in 0..points {
            for j in 0..points {
                let (x, y) = (-half_width + i as f64 * step, -half_width + j as f64 * step);
                worst = worst.max((self.stationarity_ratio(x, y) * self.phi(x, y)).abs());
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, w: W, meta: &MetaHeader) -> Result<()> {
        let m2 = self.moment(2)?;
        let row = [
            self.omega,
            self.theta,
            self.a_i,
            self.alpha,
            self.a0,
            self.b0,
            self.c0,
            self.lambda_plus,
            self.lambda_minus,
            self.rotation,
            m2.re,
            m2.im,
        ];
        write_table(
            w,
            meta,
            &["omega", "theta", "ai", "alpha", "a0", "b0", "c0", "lambda_plus", "lambda_minus", "rotation", "re_m2", "im_m2"],
            &[row.iter().map(|&v| fmt_f64(v)).collect()],
        )
    }
}

/// (𝒫φ)/φ for φ = exp(−Ax² − 2Bxy − Cy²) with complex (A, B, C).
pub fn fp_gaussian_ratio(omega: f64, theta: f64, a_r: f64, a_i: f64, q: [Complex64; 3], x: f64, y: f64) -> Complex64 {
    let [a, b, c] = q;
    let (s2, c2) = (0.5 * theta).sin_cos();
    let gx = -2.0 * (a * x + b * y);
    let gy = -2.0 * (b * x + c * y);
    a_r * (gx * gx - 2.0 * a) + a_i * (gy * gy - 2.0 * c)
        + 2.0 * omega * (x * c2 - y * s2) * gx
        + 2.0 * omega * (y * c2 + x * s2) * gy
        + 4.0 * omega * c2
}

/// |⟨e^{jz}⟩_{φ₀} − exp(j²/(4ω′))|, ω′ = ωe^{iθ/2}.
pub fn generating_functional_check(j: f64, omega: f64, theta: f64, a_i: f64) -> Result<f64> {
    let gs = harmonic_ground_state(omega, theta, a_i)?;
    let rhs = (j * j / (4.0 * omega * Complex64::from_polar(1.0, 0.5 * theta))).exp();
    Ok((gs.generating_functional(j) - rhs).norm())
}

const NORM_GUARD: f64 = 1e12;

/// N₀…N_{n_max} from the power-series expansion of (c − 2u + cu²)^{−1/2} in u = 1/r, c = cos(θ/2).
pub fn spectral_norm_generating_function(theta: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, π), got {theta}")));
    }
    let c = (0.5 * theta).cos();
    // f = g^e with g = (c, −2, c): n g₀ f_n = Σ_{k=1}^{min(n,2)} (e·k − n + k) g_k f_{n−k}
    let g = [c, -2.0, c];
    let e = -0.5;
    let mut f = Vec::with_capacity(n_max + 1);
    f.push(c.powf(e));
    for n in 1..=n_max {
        let mut acc = 0.0;
        for k in 1..=n.min(2) {
            acc += (e * k as f64 - (n - k) as f64) * g[k] * f[n - k];
        }
        let v = acc / (n as f64 * g[0]);
        if !(v.abs() <= NORM_GUARD) {
            return Err(Error::Overflow(format!("N_{n} = {v:e} at θ = {theta}; series diverging")));
        }
        f.push(v);
    }
    Ok(f)
}

/// N_n = c^{−1/2} P_n(1/c) with the Legendre three-term recurrence.
pub fn spectral_norms_legendre(theta: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, π), got {theta}")));
    }
    let c = (0.5 * theta).cos();
    let x = 1.0 / c;
    let mut h = vec![1.0, x];
    for n in 2..=n_max {
        let v = ((2 * n - 1) as f64 * x * h[n - 1] - (n - 1) as f64 * h[n - 2]) / n as f64;
        h.push(v);
    }
    h.truncate(n_max + 1);
    Ok(h.into_iter().map(|v| v / c.sqrt()).collect())
}

/// N₀, N₁, N₂ in closed form.
pub fn spectral_norms_closed_form(theta: f64) -> [f64; 3] {
    let c = (0.5 * theta).cos();
    [c.powf(-0.5), c.powf(-1.5), (5.0 - theta.cos()) / (4.0 * c.powf(2.5))]
}

pub fn write_norms_csv<W: Write>(w: W, theta: f64, norms: &[f64]) -> Result<()> {
    let meta = MetaHeader::new("harmonic_norms").with("theta", theta);
    let rows: Vec<Vec<String>> = norms
        .iter()
        .enumerate()
        .map(|(n, &v)| vec![n.to_string(), fmt_f64(v), fmt_f64(v.ln())])
        .collect();
    write_table(w, &meta, &["n", "N", "ln_N"], &rows)
}

/// Transfer kernel of the selfadjoint oscillator at ω = 1.
pub fn mehler_kernel(q: f64, qp: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    Ok((-(q * q + qp * qp) / (2.0 * t.tanh()) + q * qp / t.sinh()).exp() / (2.0 * PI * t.sinh()).sqrt())
}

/// Σ_{n<terms} e^{−t(1/2+n)} H_n(q) H_n(q′) with normalized Hermite functions.
pub fn mehler_spectral_sum(q: f64, qp: f64, t: f64, terms: usize) -> f64 {
    let a = hermite_functions(terms, q);
    let b = hermite_functions(terms, qp);
    (0..terms).map(|n| (-t * (0.5 + n as f64)).exp() * a[n] * b[n]).sum()
}

/// Analytic m₂(t) curve on `times`, columns t, re_m2, im_m2.
pub fn write_flow_csv<W: Write>(w: W, omega: f64, theta: f64, times: &[f64]) -> Result<()> {
    let flow = moment_flow(2, omega, theta, &BTreeMap::new())?;
    let meta = MetaHeader::new("harmonic_flow").with("omega", omega).with("theta", theta);
    let rows: Vec<Vec<String>> = times
        .iter()
        .map(|&t| {
            let m = flow.eval(t);
            vec![fmt_f64(t), fmt_f64(m.re), fmt_f64(m.im)]
        })
        .collect();
    write_table(w, &meta, &["t", "re_m2", "im_m2"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flow_examples() {
        let none = BTreeMap::new();
        for &t in &[0.0, 0.1, 1.0, 3.0] {
            let m = harmonic_moment_flow(2, t, 1.0, 0.0, &none).unwrap();
            assert!((m - c((1.0 - (-4.0 * t).exp()) / 2.0, 0.0)).norm() < 1e-15);
        }
        let mut init = BTreeMap::new();
        init.insert(2, c(0.3, -0.1));
        init.insert(4, c(1.2, 0.4));
        assert!((harmonic_moment_flow(4, 0.0, 1.3, 0.7, &init).unwrap() - c(1.2, 0.4)).norm() < 1e-14);
        for p in [2, 4, 6] {
            let late = harmonic_moment_flow(p, 40.0, 0.8, 1.1, &init).unwrap();
            let eq = harmonic_equilibrium_moment(p, 0.8, 1.1).unwrap();
            assert!((late - eq).norm() < 1e-12 * eq.norm(), "p={p}");
        }
    }

    #[test]
    fn flow_satisfies_ode() {
        let mut init = BTreeMap::new();
        init.insert(2, c(0.2, 0.0));
        let (om, th) = (0.9, 2.0);
        let w = om * Complex64::from_polar(1.0, 0.5 * th);
        let h = 1e-5;
        for &t in &[0.05, 0.4, 1.7] {
            for p in [2usize, 4, 6] {
                let f = |t| harmonic_moment_flow(p, t, om, th, &init).unwrap();
                let lower = harmonic_moment_flow(p - 2, t, om, th, &init).unwrap();
                let d = (f(t + h) - f(t - h)) / (2.0 * h);
                let rhs = (p * (p - 1)) as f64 * lower - 2.0 * w * p as f64 * f(t);
                assert!((d - rhs).norm() < 1e-7 * (1.0 + rhs.norm()), "p={p} t={t}");
            }
        }
    }

    #[test]
    fn equilibrium_examples() {
        assert_eq!(harmonic_equilibrium_moment(2, 1.0, 0.0).unwrap(), c(0.5, 0.0));
        assert_eq!(harmonic_equilibrium_moment(0, 1.0, 0.0).unwrap(), c(1.0, 0.0));
        assert_eq!(harmonic_equilibrium_moment(4, 1.0, 0.0).unwrap(), c(0.75, 0.0));
        assert!(matches!(harmonic_equilibrium_moment(3, 1.0, 0.0), Err(Error::OddMoment(3))));
    }

    #[test]
    fn ground_state_examples() {
        let g = harmonic_ground_state(1.0, 0.0, 1.0).unwrap();
        assert!((g.a0 - 0.5).abs() < 1e-14 && g.b0.abs() < 1e-15 && (g.c0 - 1.0).abs() < 1e-14);
        assert!((g.lambda_plus - 0.5).abs() < 1e-14 && (g.lambda_minus - 1.0).abs() < 1e-14);
        assert!((1.0 / g.lambda_plus - 1.0 / g.lambda_minus - 1.0).abs() < 1e-14);
        assert!(matches!(harmonic_ground_state(1.0, 0.0, 0.0), Err(Error::Degenerate(_))));
        for &ai in &[0.1, 0.5, 3.0] {
            assert_eq!(harmonic_ground_state(2.0, 0.0, ai).unwrap().b0, 0.0);
        }
    }

    #[test]
    fn ground_state_structure() {
        for &(om, th, ai) in &[(1.0, PI / 2.0, 1.0), (0.7, 1.0, 0.0), (2.0, 3.0, 0.3), (1.0, 0.2, 5.0)] {
            let g = harmonic_ground_state(om, th, ai).unwrap();
            assert!(g.is_positive_definite());
            assert!((1.0 / g.lambda_plus - 1.0 / g.lambda_minus - 1.0 / om).abs() < 1e-12);
            let (a, b, cc) = g.rotated_form();
            assert!((a - g.a0).abs() < 1e-12 && (b - g.b0).abs() < 1e-12 && (cc - g.c0).abs() < 1e-12);
            assert!(g.stationarity_residual(4.0, 81) < 1e-12);
            // equilibrium moments agree with the complex Gaussian
            let m2 = g.moment(2).unwrap();
            let eq = harmonic_equilibrium_moment(2, om, th).unwrap();
            assert!((m2 - eq).norm() < 1e-12, "{m2} vs {eq}");
        }
    }

    #[test]
    fn other_gaussian_solutions() {
        // exp(−S(x+iy)) with E₀ = 2ωe^{−iθ/2}, any A_R = A_I + 1
        let (om, th) = (1.3, 0.9);
        let w = om * Complex64::from_polar(1.0, 0.5 * th);
        let q = [w, Complex64::i() * w, -w];
        for &ai in &[0.0, 0.7] {
            for &(x, y) in &[(0.3, -0.2), (1.1, 0.9)] {
                let r = fp_gaussian_ratio(om, th, 1.0 + ai, ai, q, x, y);
                assert!((r - 2.0 * om * Complex64::from_polar(1.0, -0.5 * th)).norm() < 1e-12);
            }
        }
        // exp(−S − S*) is stationary only for A_R = 1/2
        let qr = [c(2.0 * w.re, 0.0), c(-2.0 * w.im, 0.0), c(-2.0 * w.re, 0.0)];
        for &(x, y) in &[(0.3, -0.2), (1.1, 0.9)] {
            assert!(fp_gaussian_ratio(om, th, 0.5, -0.5, qr, x, y).norm() < 1e-12);
        }
        assert!(fp_gaussian_ratio(om, th, 1.0, 0.0, qr, 1.0, 1.0).norm() > 0.1);
    }

    #[test]
    fn generating_functional() {
        assert_eq!(generating_functional_check(0.0, 1.0, PI / 2.0, 1.0).unwrap(), 0.0);
        assert!(generating_functional_check(1.0, 1.0, PI / 2.0, 1.0).unwrap() < 1e-10);
        assert!(generating_functional_check(0.5, 1.0, 0.0, 1.0).unwrap() < 1e-12);
        assert!(generating_functional_check(1.7, 0.4, 2.9, 0.05).unwrap() < 1e-10);
    }

    #[test]
    fn norm_generating_function() {
        for &(th, nm) in &[(0.0, 40), (0.4, 40), (PI / 2.0, 30), (2.5, 12)] {
            let s = spectral_norm_generating_function(th, nm).unwrap();
            let l = spectral_norms_legendre(th, nm).unwrap();
            let cf = spectral_norms_closed_form(th);
            for n in 0..3 {
                assert!((s[n] - cf[n]).abs() < 1e-12 * cf[n], "θ={th} n={n}");
            }
            for n in 0..=nm {
                assert!((s[n] - l[n]).abs() < 1e-12 * l[n].abs().max(1.0), "θ={th} n={n}");
            }
        }
        assert!(spectral_norm_generating_function(0.0, 30).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let n0 = spectral_norm_generating_function(PI / 2.0, 0).unwrap()[0];
        assert!((n0 - 2f64.powf(0.25)).abs() < 1e-14 && (n0 - 1.18921).abs() < 1e-5);
        assert!(matches!(spectral_norm_generating_function(PI - 1e-6, 200), Err(Error::Overflow(_))));
    }

    #[test]
    fn norm_growth_rate_trend() {
        let n = spectral_norms_legendre(PI / 2.0, 200).unwrap();
        let rate: Vec<f64> = (1..=200).map(|k| n[k].ln() / k as f64).collect();
        assert!(rate.windows(2).skip(5).all(|w| w[1] > w[0]));
        assert!(rate[199] < 1.0);
    }

    #[test]
    fn mehler() {
        assert_eq!(mehler_kernel(0.3, -1.2, 0.8).unwrap(), mehler_kernel(-1.2, 0.3, 0.8).unwrap());
        let t: f64 = 1.4;
        assert!((mehler_kernel(0.0, 0.0, t).unwrap() - 1.0 / (2.0 * PI * t.sinh()).sqrt()).abs() < 1e-15);
        let k = mehler_kernel(1.0, -1.0, 1.0).unwrap();
        assert!((k - mehler_spectral_sum(1.0, -1.0, 1.0, 30)).abs() < 1e-10);
        assert!(mehler_kernel(0.0, 0.0, 0.0).is_err());
    }
}
