//! The real two-variable Fokker-Planck operator 𝒫 of the quartic complex
//! Langevin process in a product oscillator basis |k⟩_x|l⟩_y of frequency
//! ω = √6 λ^{1/4}, its low spectrum, and its zero-mode ground state.
//!
//! Stored matrices are −(2/ω)𝒫 on indices i = kN + l; physical eigenvalues
//! are (ω/2) times the stored ones.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::actions::{Action, ActionKind, NoiseConfig};
use crate::error::{Error, Result};
use crate::hermite::hermite_functions;
use crate::io::{fmt_f64, MetaHeader};
use crate::linalg::eigenvalues_sorted;

pub const DEFAULT_SHIFT: f64 = 1e-3;
pub const DEFAULT_GRID_POINTS: usize = 281;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_INVERSE_ITERATIONS: usize = 500;
/// Largest relative mismatch between the analytic and grid total integrals of φ₀.
pub const BOUNDARY_MASS_TOL: f64 = 1e-4;

/// ω = √6 λ^{1/4}.
pub fn basis_frequency(lambda: f64) -> f64 {
    6f64.sqrt() * lambda.powf(0.25)
}

/// Row-compressed real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r].iter().find(|e| e.0 == c).map(|e| e.1).unwrap_or(0.0)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(c, a)| a * v[c]).sum()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, a) in row {
                m[(r, c)] = a;
            }
        }
        m
    }

    fn to_faer(&self, shift: f64) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz() + self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            let mut diag = false;
            for &(c, a) in row {
                let v = if c == r {
                    diag = true;
                    a - shift
                } else {
                    a
                };
                trip.push(Triplet::new(r, c, v));
            }
            if !diag {
                trip.push(Triplet::new(r, r, -shift));
            }
        }
        SparseColMat::try_new_from_triplets(self.dim, self.dim, &trip)
            .map_err(|e| Error::Eigensolver { rows: self.dim, detail: format!("{e:?}") })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator2D {
    pub n: usize,
    pub lambda: f64,
    pub theta: f64,
    pub a_i: f64,
    pub omega: f64,
    pub transpose: bool,
    pub entries: SparseRows,
}

impl TruncatedOperator2D {
    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.n + l
    }

    pub fn element(&self, k: usize, l: usize, m: usize, n: usize) -> f64 {
        self.entries.get(self.index(k, l), self.index(m, n))
    }
}

fn d(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Kronecker delta against a possibly negative index.
fn di(a: usize, b: i64) -> f64 {
    if b >= 0 && a as i64 == b {
        1.0
    } else {
        0.0
    }
}

fn sq(x: i64) -> f64 {
    if x > 0 {
        (x as f64).sqrt()
    } else {
        0.0
    }
}

/// √(a!/b!) for a ≥ b.
fn sqrt_ratio(a: usize, b: usize) -> f64 {
    ((b + 1)..=a).map(|k| (k as f64).sqrt()).product()
}

fn x_part(k: usize, l: usize, m: usize, n: usize) -> f64 {
    let (ki, li, mi, ni) = (k as i64, l as i64, m as i64, n as i64);
    let mut r = 0.0;
    if l == n {
        if k == m + 4 {
            r += sqrt_ratio(k, m);
        }
        if k == m + 2 {
            r += sqrt_ratio(k, m) * 2.0 * (ki - 2) as f64;
        }
        if m == k + 4 {
            r -= sqrt_ratio(m, k);
        }
        if m == k + 2 {
            r -= sqrt_ratio(m, k) * 2.0 * (mi - 2) as f64;
        }
        r += 6.0 * sq(ki * (ki - 1)) * di(k, mi + 2) + (6 * ki + 3) as f64 * d(k, m);
    }
    let ly = sq((li + 2) * (li + 1)) * di(n, li + 2) + sq(li * (li - 1)) * di(n, li - 2) + (2 * li + 1) as f64 * d(l, n);
    let kx = sq((mi + 2) * (mi + 1)) * di(k, mi + 2) - sq(mi * (mi - 1)) * di(k, mi - 2) + d(k, m);
    let _ = ni;
    r - 3.0 * ly * kx
}

fn y_part(k: usize, l: usize, m: usize, n: usize) -> f64 {
    let (ki, li, mi, ni) = (k as i64, l as i64, m as i64, n as i64);
    let mut r = (sq(li) * di(n, li - 1) - sq(li + 1) * di(n, li + 1))
        * (sq((mi + 3) * (mi + 2) * (mi + 1)) * di(k, mi + 3)
            + 3.0 * sq(mi + 1) * (mi + 1) as f64 * di(k, mi + 1)
            + 3.0 * sq(mi) * mi as f64 * di(k, mi - 1)
            + sq(mi * (mi - 1) * (mi - 2)) * di(k, mi - 3));
    r -= 3.0
        * (sq(ki) * di(m, ki - 1) + sq(ki + 1) * di(m, ki + 1))
        * (sq((ni + 3) * (ni + 2) * (ni + 1)) * di(l, ni + 3) + sq(ni + 1) * (ni + 3) as f64 * di(l, ni + 1)
            - sq(ni) * (ni - 2) as f64 * di(l, ni - 1)
            - sq(ni * (ni - 1) * (ni - 2)) * di(l, ni - 3));
    r
}

/// ⟨kl|−(2/ω)𝒫|mn⟩, or the same for 𝒫ᵀ.
pub fn fp_element(a_r: f64, a_i: f64, theta: f64, k: usize, l: usize, m: usize, n: usize, transpose: bool) -> f64 {
    let (s, c) = (0.5 * theta).sin_cos();
    let (ki, li, mi, ni) = (k as i64, l as i64, m as i64, n as i64);
    let pk = sq(ki * (ki - 1)) * di(m, ki - 2) + sq(mi * (mi - 1)) * di(k, mi - 2);
    let pl = sq(li * (li - 1)) * di(n, li - 2) + sq(ni * (ni - 1)) * di(l, ni - 2);
    let quartic = c / 6.0 * (x_part(k, l, m, n) - x_part(l, k, n, m)) + s / 6.0 * (y_part(k, l, m, n) + y_part(l, k, n, m));
    if !transpose {
        let mut r = ((a_r - 2.0 * c) * (2 * k + 1) as f64 + (a_i + 2.0 * c) * (2 * l + 1) as f64) * d(k, m) * d(l, n);
        r -= (a_r + 2.0 * c) * pk * d(l, n);
        r += (-a_i + 2.0 * c) * pl * d(k, m);
        r += 4.0 * s * (sq(ki) * di(m, ki - 1) + sq(mi) * di(k, mi - 1)) * (sq(li) * di(n, li - 1) + sq(ni) * di(l, ni - 1));
        r + quartic
    } else {
        let mut r = (a_r * (2 * k + 1) as f64 + a_i * (2 * l + 1) as f64) * d(k, m) * d(l, n);
        r -= a_r * pk * d(l, n);
        r -= a_i * pl * d(k, m);
        r - quartic
    }
}

fn build(lambda: f64, theta: f64, a_i: f64, n: usize, transpose: bool) -> Result<TruncatedOperator2D> {
    if n < 6 {
        return Err(Error::InvalidParameter(format!("per-axis truncation N={n}; need N ≥ 6")));
    }
    let action = Action::quartic(lambda, theta)?;
    let noise = NoiseConfig::new(a_i)?;
    let a_r = noise.a_r();
    let rows = (0..n * n)
        .map(|row| {
            let (k, l) = (row / n, row % n);
            let mut out = Vec::new();
            for m in k.saturating_sub(4)..(k + 5).min(n) {
                for nn in l.saturating_sub(4)..(l + 5).min(n) {
                    let v = fp_element(a_r, a_i, action.theta, k, l, m, nn, transpose);
                    if v != 0.0 {
                        out.push((m * n + nn, v));
                    }
                }
            }
            out
        })
        .collect();
    Ok(TruncatedOperator2D {
        n,
        lambda,
        theta,
        a_i,
        omega: basis_frequency(lambda),
        transpose,
        entries: SparseRows { dim: n * n, rows },
    })
}

pub fn build_fp_matrix(lambda: f64, theta: f64, a_i: f64, n: usize) -> Result<TruncatedOperator2D> {
    build(lambda, theta, a_i, n, false)
}

pub fn build_fp_transpose_matrix(lambda: f64, theta: f64, a_i: f64, n: usize) -> Result<TruncatedOperator2D> {
    build(lambda, theta, a_i, n, true)
}

/// −(2/ω)𝒫 assembled from ladder-operator products for any polynomial action.
///
/// 𝒫 = A_R∂ₓ² + A_I∂ᵧ² − F_x∂ₓ − F_y∂ᵧ − ∇·F with F = −S′(z); each one-axis
/// factor is multiplied out on N + 8 states before truncation to N.
pub fn build_fp_matrix_operator_form(action: &Action, noise: NoiseConfig, n: usize, omega: f64) -> Result<Mat<f64>> {
    let (g, deg) = match action.kind {
        ActionKind::Quartic { lambda } => (-2.0 * lambda.sqrt() * action.phase(), 3usize),
        ActionKind::Quadratic { omega } => (-2.0 * omega * action.phase(), 1usize),
    };
    let pad = n + 8;
    let lad = Mat::<f64>::from_fn(pad, pad, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 });
    let q = Mat::<f64>::from_fn(pad, pad, |r, c| (lad[(r, c)] + lad[(c, r)]) / (2.0 * omega).sqrt());
    let dq = Mat::<f64>::from_fn(pad, pad, |r, c| (omega / 2.0).sqrt() * (lad[(r, c)] - lad[(c, r)]));
    let eye = Mat::<f64>::identity(pad, pad);
    let mut pows = vec![eye.clone()];
    for k in 1..=deg {
        pows.push(&pows[k - 1] * &q);
    }
    let cut = |m: &Mat<f64>| Mat::<f64>::from_fn(n, n, |r, c| m[(r, c)]);
    let binom = |a: usize, b: usize| (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64);
    let ipow = |j: usize| Complex64::new(0.0, 1.0).powi(j as i32);

    let mut terms: Vec<(f64, Mat<f64>, Mat<f64>)> = Vec::new();
    terms.push((noise.a_r(), cut(&(&dq * &dq)), cut(&eye)));
    terms.push((noise.a_i(), cut(&eye), cut(&(&dq * &dq))));
    for j in 0..=deg {
        let coef = g * binom(deg, j) * ipow(j);
        // −F_x ∂ₓ and −F_y ∂ᵧ
        terms.push((-coef.re, cut(&(&pows[deg - j] * &dq)), cut(&pows[j])));
        terms.push((-coef.im, cut(&pows[deg - j]), cut(&(&pows[j] * &dq))));
    }
    for j in 0..deg {
        // ∇·F = 2 Re F′(z)
        let coef = 2.0 * (g * deg as f64 * binom(deg - 1, j) * ipow(j)).re;
        terms.push((-coef, cut(&pows[deg - 1 - j]), cut(&pows[j])));
    }
    let dim = n * n;
    let mut p = Mat::<f64>::zeros(dim, dim);
    for (w, ax, ay) in &terms {
        if *w == 0.0 {
            continue;
        }
        for k in 0..n {
            for m in 0..n {
                let a = ax[(k, m)];
                if a == 0.0 {
                    continue;
                }
                for l in 0..n {
                    for nn in 0..n {
                        p[(k * n + l, m * n + nn)] += w * a * ay[(l, nn)];
                    }
                }
            }
        }
    }
    Ok(Mat::<f64>::from_fn(dim, dim, |r, c| -2.0 / omega * p[(r, c)]))
}

/// Lowest `n_low` physical eigenvalues by modulus, from a dense solve.
pub fn spectrum_2d(op: &TruncatedOperator2D, n_low: usize) -> Result<Vec<Complex64>> {
    let ev = eigenvalues_sorted(&op.entries.to_dense().as_ref().to_owned().into_complex())?;
    Ok(ev.into_iter().take(n_low).map(|e| 0.5 * op.omega * e).collect())
}

trait IntoComplex {
    fn into_complex(self) -> Mat<Complex64>;
}

impl IntoComplex for Mat<f64> {
    fn into_complex(self) -> Mat<Complex64> {
        Mat::from_fn(self.nrows(), self.ncols(), |r, c| Complex64::new(self[(r, c)], 0.0))
    }
}

/// Dense eigenvalues of a real matrix, physical units, ascending modulus.
pub fn spectrum_2d_real(op: &TruncatedOperator2D, n_low: usize) -> Result<Vec<Complex64>> {
    let m = op.entries.to_dense();
    let dim = m.nrows();
    let mut ev = m.eigenvalues().map_err(|e| Error::Eigensolver { rows: dim, detail: format!("{e:?}") })?;
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    Ok(ev.into_iter().take(n_low).map(|e| 0.5 * op.omega * e).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState2D {
    pub n: usize,
    pub omega: f64,
    /// unit coordinate norm, (0,0) component positive
    pub v: Vec<f64>,
    /// physical eigenvalue estimate
    pub e0: f64,
    pub residual: f64,
    pub iterations: usize,
    /// converged value far from zero; the shift may have locked onto another level
    pub shift_warning: bool,
}

/// Inverse iteration with a sparse LU of M − σ, σ = 2·shift/ω.
pub fn ground_state_vector(op: &TruncatedOperator2D, shift: f64) -> Result<GroundState2D> {
    use faer::linalg::solvers::Solve;
    let dim = op.entries.dim;
    let sigma = 2.0 * shift / op.omega;
    let lu = op.entries.to_faer(sigma)?.sp_lu().map_err(|e| Error::Eigensolver { rows: dim, detail: format!("{e:?}") })?;
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut residual = f64::INFINITY;
    let mut mu = 0.0;
    for it in 1..=MAX_INVERSE_ITERATIONS {
        let mut rhs = Mat::<f64>::from_fn(dim, 1, |r, _| v[r]);
        lu.solve_in_place(rhs.as_mut());
        let norm = (0..dim).map(|r| rhs[(r, 0)] * rhs[(r, 0)]).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NoConvergence { iterations: it, residual });
        }
        v = (0..dim).map(|r| rhs[(r, 0)] / norm).collect();
        let mv = op.entries.matvec(&v);
        mu = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
        residual = mv.iter().zip(&v).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt();
        if residual < RESIDUAL_TOL {
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let e0 = 0.5 * op.omega * mu;
            return Ok(GroundState2D {
                n: op.n,
                omega: op.omega,
                v,
                e0,
                residual,
                iterations: it,
                shift_warning: (e0 - shift).abs() > 0.1 * op.omega,
            });
        }
    }
    let _ = mu;
    Err(Error::NoConvergence { iterations: MAX_INVERSE_ITERATIONS, residual })
}

/// Uniform square grid [−L, L]², `points` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub half_width: f64,
    pub points: usize,
}

impl Grid2D {
    /// [−7, 7]² with 281 points, scaled by λ^{−1/8}. φ₀ has long tails in
    /// both directions at A_I ~ 1; narrower windows miss ~1e-3 of its mass.
    pub fn default_for(lambda: f64) -> Self {
        Self { half_width: 7.0 * lambda.powf(-0.125), points: DEFAULT_GRID_POINTS }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }
}

/// φ₀ sampled on a grid, φ₀(x, y) = Σ v_{kl} ψ_k(√ω x) ψ_l(√ω y).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateGrid {
    pub grid: Grid2D,
    /// values[i·points + j] at (x_i, y_j)
    pub values: Vec<f64>,
    pub min_over_max: f64,
    /// ∫φ₀² on a resolving grid, against ω⁻¹Σv²
    pub norm_integral: f64,
    pub norm_expected: f64,
    /// |φ₀| on the boundary relative to the peak
    pub boundary_ratio: f64,
    pub grid_too_small: bool,
    /// positions of the two largest local maxima
    pub peaks: Vec<(f64, f64)>,
}

fn basis_on_axis(n: usize, omega: f64, xs: &[f64]) -> Mat<f64> {
    let mut h = Mat::<f64>::zeros(n, xs.len());
    for (j, &x) in xs.iter().enumerate() {
        for (k, v) in hermite_functions(n, omega.sqrt() * x).into_iter().enumerate() {
            h[(k, j)] = v;
        }
    }
    h
}

fn evaluate(gs: &GroundState2D, xs: &[f64]) -> Mat<f64> {
    let n = gs.n;
    let h = basis_on_axis(n, gs.omega, xs);
    let c = Mat::<f64>::from_fn(n, n, |k, l| gs.v[k * n + l]);
    let ht = h.transpose().to_owned();
    &ht * &(&c * &h)
}

pub fn ground_state_function(gs: &GroundState2D, grid: Grid2D) -> Result<GroundStateGrid> {
    if grid.points < 3 {
        return Err(Error::InvalidParameter("grid needs at least 3 points per axis".into()));
    }
    let xs: Vec<f64> = (0..grid.points).map(|i| grid.coord(i)).collect();
    let phi = evaluate(gs, &xs);
    let p = grid.points;
    let values: Vec<f64> = (0..p * p).map(|i| phi[(i / p, i % p)]).collect();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut boundary = 0.0f64;
    for i in 0..p {
        for &(a, b) in &[(i, 0), (i, p - 1), (0, i), (p - 1, i)] {
            boundary = boundary.max(values[a * p + b].abs());
        }
    }
    let boundary_ratio = boundary / max.abs();

    // normalization on a grid that resolves the highest basis function
    let xi_max = (2.0 * gs.n as f64 + 1.0).sqrt() + 6.0;
    let half = xi_max / gs.omega.sqrt();
    let h = 0.25 / xi_max.max(1.0) / gs.omega.sqrt() * std::f64::consts::PI;
    let m = (2.0 * half / h).ceil() as usize + 1;
    let fine: Vec<f64> = (0..m).map(|i| -half + i as f64 * 2.0 * half / (m - 1) as f64).collect();
    let hf = 2.0 * half / (m - 1) as f64;
    let big = evaluate(gs, &fine);
    let mut norm_integral = 0.0;
    for i in 0..m {
        for j in 0..m {
            norm_integral += big[(i, j)] * big[(i, j)];
        }
    }
    norm_integral *= hf * hf;
    let norm_expected = gs.v.iter().map(|x| x * x).sum::<f64>() / gs.omega;

    let mut maxima: Vec<(f64, usize, usize)> = Vec::new();
    for i in 1..p - 1 {
        for j in 1..p - 1 {
            let v = values[i * p + j];
            let neigh = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1), (i - 1, j - 1), (i + 1, j + 1), (i - 1, j + 1), (i + 1, j - 1)];
            if neigh.iter().all(|&(a, b)| values[a * p + b] < v) {
                maxima.push((v, i, j));
            }
        }
    }
    maxima.sort_by(|a, b| b.0.total_cmp(&a.0));
    let peaks = maxima.iter().take(2).map(|&(_, i, j)| (grid.coord(i), grid.coord(j))).collect();
    Ok(GroundStateGrid {
        grid,
        values,
        min_over_max: min / max,
        norm_integral,
        norm_expected,
        boundary_ratio,
        grid_too_small: boundary_ratio > 1e-6,
        peaks,
    })
}

/// ∫ψ_k(ξ)dξ: √2 π^{1/4} for k = 0, zero for odd k, I_k = √((k−1)/k) I_{k−2}.
pub fn hermite_function_integrals(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n > 0 {
        out[0] = std::f64::consts::SQRT_2 * std::f64::consts::PI.powf(0.25);
    }
    for k in (2..n).step_by(2) {
        out[k] = ((k as f64 - 1.0) / k as f64).sqrt() * out[k - 2];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMoment {
    pub p: usize,
    pub value: Complex64,
    /// change when the grid step is doubled
    pub grid_error: f64,
    /// relative gap between the grid and analytic ∫φ₀
    pub boundary_mass: f64,
}

/// ⟨z^p⟩ = ∫(x+iy)^p φ₀ / ∫φ₀ by grid quadrature.
pub fn ground_state_moments(gs: &GroundState2D, field: &GroundStateGrid, p: usize) -> Result<GridMoment> {
    if p % 2 == 1 {
        return Err(Error::OddMoment(p));
    }
    let g = field.grid;
    let pts = g.points;
    let h = g.step();
    let ratio = |stride: usize| -> (Complex64, f64) {
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for i in (0..pts).step_by(stride) {
            for j in (0..pts).step_by(stride) {
                let f = field.values[i * pts + j];
                num += Complex64::new(g.coord(i), g.coord(j)).powi(p as i32) * f;
                den += f;
            }
        }
        (num / den, den * (h * stride as f64).powi(2))
    };
    let (value, total) = ratio(1);
    let (coarse, _) = ratio(2);
    let ints = hermite_function_integrals(gs.n);
    let mut exact = 0.0;
    for k in 0..gs.n {
        for l in 0..gs.n {
            exact += gs.v[k * gs.n + l] * ints[k] * ints[l];
        }
    }
    exact /= gs.omega;
    let boundary_mass = ((total - exact) / exact).abs();
    if boundary_mass > BOUNDARY_MASS_TOL {
        return Err(Error::BoundaryMass(boundary_mass));
    }
    Ok(GridMoment { p, value, grid_error: (value - coarse).norm(), boundary_mass })
}

/// Columns n, re_E, im_E, N_truncation.
pub fn write_spectrum_csv<W: Write>(mut w: W, op: &TruncatedOperator2D, ev: &[Complex64]) -> Result<()> {
    MetaHeader::new("spectrum_2d")
        .with("lambda", op.lambda)
        .with("theta", op.theta)
        .with("a_i", op.a_i)
        .with("omega", op.omega)
        .write(&mut w)?;
    writeln!(w, "n,re_E,im_E,N_truncation")?;
    for (k, e) in ev.iter().enumerate() {
        writeln!(w, "{k},{},{},{}", fmt_f64(e.re), fmt_f64(e.im), op.n)?;
    }
    Ok(())
}

/// Columns x, y, phi0.
pub fn write_grid_csv<W: Write>(mut w: W, field: &GroundStateGrid) -> Result<()> {
    MetaHeader::new("ground_state_grid")
        .with("half_width", field.grid.half_width)
        .with("points", field.grid.points)
        .with("min_over_max", field.min_over_max)
        .with("norm_integral", field.norm_integral)
        .with("norm_expected", field.norm_expected)
        .write(&mut w)?;
    writeln!(w, "x,y,phi0")?;
    let p = field.grid.points;
    for i in 0..p {
        for j in 0..p {
            writeln!(w, "{},{},{}", fmt_f64(field.grid.coord(i)), fmt_f64(field.grid.coord(j)), fmt_f64(field.values[i * p + j]))?;
        }
    }
    Ok(())
}

/// Columns p, re, im, grid_error.
pub fn write_moments_csv<W: Write>(mut w: W, meta: &MetaHeader, moments: &[GridMoment]) -> Result<()> {
    meta.write(&mut w)?;
    writeln!(w, "p,re,im,grid_error")?;
    for m in moments {
        writeln!(w, "{},{},{},{}", m.p, fmt_f64(m.value.re), fmt_f64(m.value.im), fmt_f64(m.grid_error))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_operator_products() {
        let n = 10;
        for &(theta, a_i) in &[(0.0, 0.0), (1.1, 0.3), (PI / 2.0, 1.0)] {
            let op = build_fp_matrix(1.0, theta, a_i, n).unwrap();
            let dense = op.entries.to_dense();
            let act = Action::quartic(1.0, theta).unwrap();
            let oracle = build_fp_matrix_operator_form(&act, NoiseConfig::new(a_i).unwrap(), n, basis_frequency(1.0)).unwrap();
            for r in 0..n * n {
                for c in 0..n * n {
                    assert!((dense[(r, c)] - oracle[(r, c)]).abs() < 1e-10, "θ={theta} A_I={a_i} ({r},{c}): {} vs {}", dense[(r, c)], oracle[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn transpose_identity() {
        let n = 10;
        let p = build_fp_matrix(1.0, 0.9, 0.4, n).unwrap();
        let pt = build_fp_transpose_matrix(1.0, 0.9, 0.4, n).unwrap();
        for r in 0..n * n {
            for c in 0..n * n {
                let (a, b) = (pt.entries.get(r, c), p.entries.get(c, r));
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "({r},{c}) {a} vs {b}");
            }
        }
    }

    #[test]
    fn lambda_free_matrix() {
        let a = build_fp_matrix(1.0, 0.7, 0.5, 8).unwrap();
        let b = build_fp_matrix(16.0, 0.7, 0.5, 8).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(b.omega, 2.0 * a.omega);
    }

    #[test]
    fn parity_blocks() {
        let op = build_fp_matrix(1.0, 1.3, 0.2, 12).unwrap();
        for (r, row) in op.entries.rows.iter().enumerate() {
            let (k, l) = (r / 12, r % 12);
            for &(c, _) in row {
                let (m, n) = (c / 12, c % 12);
                assert_eq!((k + l) % 2, (m + n) % 2);
            }
        }
    }

    #[test]
    fn transpose_annihilates_constants_away_from_the_cut() {
        let n = 16;
        let pt = build_fp_transpose_matrix(1.0, 0.5, 1.0, n).unwrap();
        let ints = hermite_function_integrals(n);
        let c: Vec<f64> = (0..n * n).map(|i| ints[i / n] * ints[i % n]).collect();
        let out = pt.entries.matvec(&c);
        for k in 0..n - 4 {
            for l in 0..n - 4 {
                assert!(out[k * n + l].abs() < 1e-12, "({k},{l}) {}", out[k * n + l]);
            }
        }
        assert!(out.iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn hermite_integrals_by_quadrature() {
        let ints = hermite_function_integrals(12);
        let h = 1e-3;
        let mut q = vec![0.0; 12];
        let mut x = -20.0;
        while x <= 20.0 {
            for (a, v) in q.iter_mut().zip(hermite_functions(12, x)) {
                *a += h * v;
            }
            x += h;
        }
        for k in 0..12 {
            assert!((q[k] - ints[k]).abs() < 1e-9, "k={k}: {} vs {}", q[k], ints[k]);
        }
    }
}
