//! Sextic Fokker-Planck Hamiltonian H = p² − e^{iθ/2}ω²q² + λe^{iθ}q⁶ in a
//! truncated oscillator basis, its spectrum and the norms of its spectral projectors.
//!
//! With ω² = 3√λ this is the similarity transform of the one-variable
//! Fokker-Planck operator for S = (√λ/2)e^{iθ/2}q⁴, with zero mode e^{−S/2}.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermite::oscillator_functions;
use crate::io::{fmt_f64, MetaHeader};
use crate::linalg::eigen_sorted;

/// Gap between the two truncations compared for reliability.
pub const RELIABILITY_GAP: usize = 50;
pub const ENERGY_SHIFT_TOL: f64 = 1e-5;
pub const NORM_SHIFT_TOL: f64 = 1e-3;

/// ω² = 3√λ for the quartic Fokker-Planck problem.
pub fn fokker_planck_omega2(lambda: f64) -> f64 {
    3.0 * lambda.sqrt()
}

#[derive(Debug, Clone)]
pub struct TruncatedOperator1D {
    pub n: usize,
    pub omega2: f64,
    pub lambda: f64,
    pub theta: f64,
    pub basis_frequency: f64,
    pub entries: Mat<Complex64>,
}

/// √(m!/n!) for m ≥ n.
fn sqrt_falling(m: usize, n: usize) -> f64 {
    ((n + 1)..=m).map(|k| (k as f64).sqrt()).product()
}

/// ⟨m|(a + a†)⁶|n⟩ for m ≥ n.
fn sextic_element(m: usize, n: usize) -> f64 {
    let mf = m as f64;
    match m - n {
        6 => sqrt_falling(m, n),
        4 => (6.0 * mf - 9.0) * sqrt_falling(m, n),
        2 => 15.0 * (mf * mf - mf + 1.0) * sqrt_falling(m, n),
        0 => 20.0 * mf * mf * mf + 30.0 * mf * mf + 40.0 * mf + 15.0,
        _ => 0.0,
    }
}

/// Matrix of H on oscillator states 0..N of frequency ω (λ^{1/4} when ω² ≤ 0).
pub fn build_hamiltonian_matrix(omega2: f64, lambda: f64, theta: f64, n: usize) -> Result<TruncatedOperator1D> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!("truncation N={n} is below the sextic band width; need N ≥ 8")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let w = if omega2 > 0.0 { omega2.sqrt() } else { lambda.powf(0.25) };
    let half = Complex64::from_polar(1.0, 0.5 * theta);
    let full = Complex64::from_polar(1.0, theta);
    // p² = (w/2)[(2n+1) − off], q² = (1/2w)[(2n+1) + off], off = √(n(n−1)) on the ±2 diagonals
    let p2 = Complex64::new(0.5 * w, 0.0);
    let q2 = -half * omega2 / (2.0 * w);
    let q6 = full * lambda / (8.0 * w * w * w);
    let entries = Mat::from_fn(n, n, |r, c| {
        let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
        let mut v = q6 * sextic_element(hi, lo);
        if hi == lo {
            v += (p2 + q2) * (2 * hi + 1) as f64;
        } else if hi - lo == 2 {
            v += (q2 - p2) * sqrt_falling(hi, lo);
        }
        v
    });
    Ok(TruncatedOperator1D { n, omega2, lambda, theta, basis_frequency: w, entries })
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition1D {
    pub n: usize,
    pub lambda: f64,
    pub theta: f64,
    pub eigenvalues: Vec<Complex64>,
    /// unit 2-norm eigenvectors as columns, in eigenvalue order
    pub eigenvectors: Mat<Complex64>,
    /// |E_n| λ^{−1/4}
    pub c: Vec<f64>,
    pub norms: Vec<f64>,
    /// set by a comparison with a smaller truncation
    pub reliable: Option<Vec<bool>>,
}

pub fn eigen_decompose_1d(op: &TruncatedOperator1D) -> Result<SpectralDecomposition1D> {
    let (eigenvalues, eigenvectors) = eigen_sorted(&op.entries)?;
    let scale = op.lambda.powf(-0.25);
    let c = eigenvalues.iter().map(|e| e.norm() * scale).collect();
    let norms = projector_norms(&eigenvectors);
    Ok(SpectralDecomposition1D { n: op.n, lambda: op.lambda, theta: op.theta, eigenvalues, eigenvectors, c, norms, reliable: None })
}

/// N_n = 1/|Σ_j v_j²| for unit-norm columns.
pub fn projector_norms(v: &Mat<Complex64>) -> Vec<f64> {
    (0..v.ncols())
        .map(|c| {
            let s: Complex64 = (0..v.nrows()).map(|r| v[(r, c)] * v[(r, c)]).sum();
            1.0 / s.norm()
        })
        .collect()
}

pub fn spectral_norms(dec: &SpectralDecomposition1D) -> Vec<f64> {
    dec.norms.clone()
}

/// Decomposition at N, with reliability judged against N − 50.
///
/// A level is reliable when |ΔE| < 1e-5·max(|E|, 1) and |ΔN_n| < 1e-3·N_n.
pub fn decompose_with_reliability(omega2: f64, lambda: f64, theta: f64, n: usize) -> Result<SpectralDecomposition1D> {
    if n < 8 + RELIABILITY_GAP {
        return Err(Error::InvalidParameter(format!("reliability needs N ≥ {}", 8 + RELIABILITY_GAP)));
    }
    let mut big = eigen_decompose_1d(&build_hamiltonian_matrix(omega2, lambda, theta, n)?)?;
    let small = eigen_decompose_1d(&build_hamiltonian_matrix(omega2, lambda, theta, n - RELIABILITY_GAP)?)?;
    let flags = (0..big.eigenvalues.len())
        .map(|k| {
            k < small.eigenvalues.len() && {
                let (e1, e0) = (big.eigenvalues[k], small.eigenvalues[k]);
                let (n1, n0) = (big.norms[k], small.norms[k]);
                (e1 - e0).norm() < ENERGY_SHIFT_TOL * e1.norm().max(1.0) && (n1 - n0).abs() < NORM_SHIFT_TOL * n1
            }
        })
        .collect();
    big.reliable = Some(flags);
    Ok(big)
}

impl SpectralDecomposition1D {
    /// Length of the leading run of reliable levels (all levels when unflagged).
    pub fn reliable_prefix(&self) -> usize {
        match &self.reliable {
            Some(f) => f.iter().take_while(|b| **b).count(),
            None => self.eigenvalues.len(),
        }
    }

    /// Columns n, re_E, im_E, C_n, N_n, reliable_flag, N_truncation.
    pub fn write_csv<W: Write>(&self, mut w: W, levels: usize) -> Result<()> {
        MetaHeader::new("spectrum_1d")
            .with("lambda", self.lambda)
            .with("theta", self.theta)
            .with("truncation", self.n)
            .with("reliability_gap", RELIABILITY_GAP)
            .write(&mut w)?;
        writeln!(w, "n,re_E,im_E,C_n,N_n,reliable_flag,N_truncation")?;
        for k in 0..levels.min(self.eigenvalues.len()) {
            let e = self.eigenvalues[k];
            let flag = self.reliable.as_ref().map(|f| f[k] as u8 as i32).unwrap_or(-1);
            writeln!(w, "{k},{},{},{},{},{flag},{}", fmt_f64(e.re), fmt_f64(e.im), fmt_f64(self.c[k]), fmt_f64(self.norms[k]), self.n)?;
        }
        Ok(())
    }
}

/// N₀ = cos(θ/2)^{−1/4}.
pub fn ground_state_norm_exact(theta: f64) -> Result<f64> {
    if !(0.0..std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, π), got {theta}")));
    }
    Ok((0.5 * theta).cos().powf(-0.25))
}

/// C = (√π Γ(5/3)/Γ(7/6))^{1/4}.
pub fn wkb_constant() -> f64 {
    (std::f64::consts::PI.sqrt() * libm::tgamma(5.0 / 3.0) / libm::tgamma(7.0 / 6.0)).powf(0.25)
}

/// ε_n = C⁶ n^{3/2} λ^{1/4}.
pub fn wkb_energy(n: usize, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("semiclassical levels start at n = 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(wkb_constant().powi(6) * (n as f64).powf(1.5) * lambda.powf(0.25))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormGrowthFit {
    pub intercept: f64,
    pub slope: f64,
    /// root-mean-square residual in ln N_n
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through (n, ln N_n) for n_min ≤ n < norms.len().
pub fn norm_growth_fit(norms: &[f64], n_min: usize) -> Result<NormGrowthFit> {
    let pts: Vec<(f64, f64)> = norms.iter().enumerate().skip(n_min).map(|(n, v)| (n as f64, v.ln())).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!("{} norms beyond n_min = {n_min}; need 10", pts.len())));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(NormGrowthFit { intercept, slope, residual: (ss / m).sqrt(), points: pts.len() })
}

/// Oscillator-basis coefficients of e^{−√λ q⁴/4}, unit-normalized, by quadrature on a fine grid.
pub fn zero_mode_coefficients(lambda: f64, basis_frequency: f64, n: usize) -> Vec<f64> {
    let h = 2e-3;
    let x_max = 12.0 / basis_frequency.sqrt().min(1.0);
    let steps = (2.0 * x_max / h) as usize;
    let mut c = vec![0.0; n];
    for i in 0..=steps {
        let x = -x_max + i as f64 * h;
        let f = (-0.25 * lambda.sqrt() * x.powi(4)).exp();
        if f < 1e-300 {
            continue;
        }
        for (ck, psi) in c.iter_mut().zip(oscillator_functions(n, basis_frequency, x)) {
            *ck += h * f * psi;
        }
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= norm);
    c
}
