//! Exact short-time moment series m_p(t) = Σ c_{p,n} (−4α)^{(n−p/2)/2} (2t)ⁿ / n!
//! for a point mass at the origin, by a recursion and by iterating the
//! Langevin operator on polynomials.

use std::collections::BTreeMap;
use std::io::Write;

use dashu_int::ops::{BitTest, UnsignedAbs};
use dashu_int::IBig;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::MetaHeader;

/// Integer coefficients c_{p,n}, stored for n ≥ p/2 with n ≡ p/2 (mod 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesTable {
    p_max: usize,
    n_max: usize,
    // rows[p/2][n]
    rows: Vec<Vec<Option<IBig>>>,
}

impl SeriesTable {
    fn empty(p_max: usize, n_max: usize) -> Self {
        let rows = (0..=p_max / 2).map(|_| vec![None; n_max + 1]).collect();
        Self { p_max, n_max, rows }
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, p: usize, n: usize) -> Option<&IBig> {
        if p % 2 == 1 || p > self.p_max || n > self.n_max {
            return None;
        }
        self.rows[p / 2][n].as_ref()
    }

    /// Stored (n, c_{p,n}) pairs of row p in increasing n.
    pub fn row(&self, p: usize) -> impl Iterator<Item = (usize, &IBig)> {
        let r = if p % 2 == 0 && p <= self.p_max { Some(&self.rows[p / 2]) } else { None };
        r.into_iter()
            .flat_map(|r| r.iter().enumerate())
            .filter_map(|(n, c)| c.as_ref().map(|c| (n, c)))
    }

    /// First `count` nonzero coefficients of row p.
    pub fn nonzero_terms(&self, p: usize, count: usize) -> Result<Vec<(usize, IBig)>> {
        let v: Vec<_> = self.row(p).take(count).map(|(n, c)| (n, c.clone())).collect();
        if v.len() < count {
            let n = p / 2 + 2 * count.saturating_sub(1);
            return Err(Error::MissingCoefficient { p, n });
        }
        Ok(v)
    }

    /// Smallest n_max that yields `count` nonzero coefficients in row p.
    pub fn n_max_for_terms(p: usize, count: usize) -> usize {
        p / 2 + 2 * count.saturating_sub(1)
    }

    fn set(&mut self, p: usize, n: usize, c: IBig) {
        self.rows[p / 2][n] = Some(c);
    }

    /// Fills the table from the flow equations.
    ///
    /// Row 2 comes from the upward flow 2c_{p,n+1} = p(p−1)c_{p−2,n} + p c_{p+2,n};
    /// rows p ≥ 4 then follow from c_{p,p/2} = p(p−1)/2·c_{p−2,p/2−1} and
    /// c_{p,n} = −(p−3)c_{p−4,n} + 2/(p−2)·c_{p−2,n+1}.
    pub fn via_recursion(p_max: usize, n_max: usize) -> Result<Self> {
        if p_max < 2 || p_max % 2 == 1 {
            return Err(Error::InvalidParameter(format!("p_max must be even and ≥ 2, got {p_max}")));
        }
        // row p needs row p−2 one order higher, so row 2 must reach n_max + p_max/2 − 1
        let n2 = n_max + p_max / 2 - 1;
        let row2 = upward_row2(n2)?;
        let mut work = Self::empty(p_max, n2);
        work.set(0, 0, IBig::ONE);
        for (n, c) in row2 {
            work.set(2, n, c);
        }
        for p in (4..=p_max).step_by(2) {
            let top = n2 - (p / 2 - 1);
            let h = p / 2;
            let lead = IBig::from((p * (p - 1) / 2) as u64)
                * work.get(p - 2, h - 1).cloned().ok_or(Error::MissingCoefficient { p: p - 2, n: h - 1 })?;
            work.set(p, h, lead);
            for n in ((h + 2)..=top).step_by(2) {
                let up = work.get(p - 2, n + 1).cloned().ok_or(Error::MissingCoefficient { p: p - 2, n: n + 1 })?;
                let num = IBig::from(2u8) * up;
                let den = IBig::from((p - 2) as u64);
                if &num % &den != IBig::ZERO {
                    return Err(Error::InexactDivision { p, n });
                }
                let mut c = num / den;
                if let Some(low) = work.get(p - 4, n) {
                    c -= IBig::from((p - 3) as u64) * low;
                }
                work.set(p, n, c);
            }
        }
        let mut out = Self::empty(p_max, n_max);
        for p in (0..=p_max).step_by(2) {
            for (n, c) in work.row(p) {
                if n <= n_max {
                    out.set(p, n, c.clone());
                }
            }
        }
        Ok(out)
    }

    /// Fills rows p ≤ p_max by iterating the Langevin operator (oracle route).
    pub fn via_operator(p_max: usize, n_max: usize) -> Result<Self> {
        let mut out = Self::empty(p_max, n_max);
        out.set(0, 0, IBig::ONE);
        for p in (2..=p_max).step_by(2) {
            for (n, c) in series_coefficients_via_operator(p, n_max)? {
                out.set(p, n, c);
            }
        }
        Ok(out)
    }

    /// CSV with columns p, n, c_decimal.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &MetaHeader, ps: &[usize]) -> Result<()> {
        meta.write(&mut w)?;
        writeln!(w, "p,n,c_decimal")?;
        for &p in ps {
            for (n, c) in self.row(p) {
                writeln!(w, "{p},{n},{c}")?;
            }
        }
        Ok(())
    }
}

/// Row 2 for n ≤ n_max by the upward flow, restricted to the p needed.
fn upward_row2(n_max: usize) -> Result<Vec<(usize, IBig)>> {
    // layer[n][p/2]; layer n only needs p ≤ 2 + 2(n_max − n)
    let mut layer: Vec<IBig> = vec![IBig::ONE];
    let mut row = Vec::new();
    for n in 0..n_max {
        let hi = (2 * (n + 1)).min(2 + 2 * (n_max - n - 1));
        let mut next = vec![IBig::ZERO; hi / 2 + 1];
        for (h, slot) in next.iter_mut().enumerate().skip(1) {
            let p = 2 * h;
            if (h + n + 1) % 2 == 1 || h > n + 1 {
                continue;
            }
            let mut num = IBig::ZERO;
            if let Some(c) = layer.get(h - 1) {
                num += IBig::from((p * (p - 1)) as u64) * c;
            }
            if let Some(c) = layer.get(h + 1) {
                num += IBig::from(p as u64) * c;
            }
            if &num % IBig::from(2u8) != IBig::ZERO {
                return Err(Error::InexactDivision { p, n: n + 1 });
            }
            *slot = num / IBig::from(2u8);
        }
        if next.len() > 1 && next[1] != IBig::ZERO {
            row.push((n + 1, next[1].clone()));
        }
        layer = next;
    }
    Ok(row)
}

/// Element of ℤ[α][x]: (degree k, α-power m) → integer coefficient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntegerPolynomial {
    pub terms: BTreeMap<(usize, usize), IBig>,
}

impl IntegerPolynomial {
    pub fn monomial(k: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((k, 0), IBig::ONE);
        Self { terms }
    }

    pub fn coefficient(&self, k: usize, m: usize) -> IBig {
        self.terms.get(&(k, m)).cloned().unwrap_or(IBig::ZERO)
    }

    fn add(&mut self, key: (usize, usize), v: IBig) {
        let e = self.terms.entry(key).or_insert(IBig::ZERO);
        *e += v;
        if *e == IBig::ZERO {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// L = ∂² − S′∂ for S = αx⁴: L(x^k) = k(k−1)x^{k−2} − 4αk x^{k+2}.
pub fn apply_langevin_operator(poly: &IntegerPolynomial) -> IntegerPolynomial {
    let mut out = IntegerPolynomial::default();
    for (&(k, m), c) in &poly.terms {
        if k >= 2 {
            out.add((k - 2, m), IBig::from((k * (k - 1)) as u64) * c);
        }
        if k >= 1 {
            out.add((k + 2, m + 1), IBig::from(-4 * k as i64) * c);
        }
    }
    out
}

/// c_{p,n} for n ≤ n_max from (Lⁿx^p)(0) = c_{p,n}(−4α)^{(n−p/2)/2}2ⁿ.
pub fn series_coefficients_via_operator(p: usize, n_max: usize) -> Result<Vec<(usize, IBig)>> {
    if p % 2 == 1 {
        return Err(Error::OddMoment(p));
    }
    if n_max < p / 2 {
        return Err(Error::InvalidParameter(format!("n_max={n_max} below p/2={}", p / 2)));
    }
    let mut poly = IntegerPolynomial::monomial(p);
    let mut out = Vec::new();
    for n in 1..=n_max {
        poly = apply_langevin_operator(&poly);
        let constants: Vec<_> = poly.terms.iter().filter(|((k, _), _)| *k == 0).collect();
        let expected = n >= p / 2 && (n - p / 2) % 2 == 0;
        if !expected {
            if !constants.is_empty() {
                return Err(Error::StructuralMismatch { p, n, detail: "nonzero constant term at a vanishing order".into() });
            }
            continue;
        }
        let m = (n - p / 2) / 2;
        if constants.len() != 1 || constants[0].0 .1 != m {
            return Err(Error::StructuralMismatch { p, n, detail: format!("constant term not a single α^{m} monomial") });
        }
        let value = constants[0].1.clone();
        let scale = IBig::from(-4).pow(m) * IBig::from(2).pow(n);
        if &value % &scale != IBig::ZERO {
            return Err(Error::StructuralMismatch { p, n, detail: "constant not divisible by (−4)^m 2^n".into() });
        }
        let c = value / scale;
        if c <= IBig::ZERO {
            return Err(Error::StructuralMismatch { p, n, detail: "coefficient not positive".into() });
        }
        out.push((n, c));
    }
    Ok(out)
}

/// ln|x| for an arbitrary-size integer.
pub fn ln_ibig(x: &IBig) -> f64 {
    let u = x.unsigned_abs();
    let bits = u.bit_len();
    if bits <= 1000 {
        return u.to_f64().value().ln();
    }
    let shift = bits - 64;
    let top = (&u >> shift).to_f64().value();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Σ_{n ≤ N} c_{p,n}(−4α)^{(n−p/2)/2}(2t)ⁿ/n! with each term assembled in log form.
pub fn moment_partial_sum(table: &SeriesTable, p: usize, t: Complex64, order: usize, alpha: Complex64) -> Result<Complex64> {
    if p % 2 == 1 {
        return Err(Error::OddMoment(p));
    }
    if p == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if order > table.n_max() || p > table.p_max() {
        return Err(Error::MissingCoefficient { p, n: order });
    }
    if t == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m4 = -4.0 * alpha;
    let (l4, a4) = (m4.norm().ln(), m4.arg());
    let (lt, at) = ((2.0 * t).norm().ln(), (2.0 * t).arg());
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, c) in table.row(p).take_while(|(n, _)| *n <= order) {
        let j = ((n - p / 2) / 2) as f64;
        let lg = ln_ibig(c) + j * l4 + n as f64 * lt - ln_factorial(n);
        if lg > 700.0 {
            return Err(Error::Overflow(format!("term n={n} of m_{p}(t)")));
        }
        sum += Complex64::from_polar(lg.exp(), j * a4 + n as f64 * at);
    }
    Ok(sum)
}

/// Least-squares fit of ln(c_{p,n}/n!) = α_p(k+½)ln k − β_p k, n = p/2 − 2 + 2k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub alpha_p: f64,
    pub beta_p: f64,
    /// root-mean-square residual over the fitted points
    pub residual: f64,
    pub points: usize,
}

pub fn growth_fit(p: usize, table: &SeriesTable) -> Result<GrowthFit> {
    let pts: Vec<(f64, f64)> = table
        .row(p)
        .map(|(n, c)| (((n + 2 - p / 2) / 2) as f64, ln_ibig(c) - ln_factorial(n)))
        .collect();
    growth_fit_points(&pts)
}

/// Fit on explicit (k, ln(c/n!)) pairs; only k ≥ 10 enter.
pub fn growth_fit_points(pts: &[(f64, f64)]) -> Result<GrowthFit> {
    let used: Vec<_> = pts.iter().filter(|(k, _)| *k >= 10.0).collect();
    if used.len() < 10 {
        return Err(Error::InsufficientData(format!("{} points with k ≥ 10", used.len())));
    }
    // columns f1 = (k+½)ln k, f2 = −k
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &&(k, y) in &used {
        let f1 = (k + 0.5) * k.ln();
        let f2 = -k;
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        b1 += f1 * y;
        b2 += f2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    let a = (b1 * s22 - b2 * s12) / det;
    let b = (s11 * b2 - s12 * b1) / det;
    let ss: f64 = used.iter().map(|&&(k, y)| (y - a * (k + 0.5) * k.ln() + b * k).powi(2)).sum();
    Ok(GrowthFit { alpha_p: a, beta_p: b, residual: (ss / used.len() as f64).sqrt(), points: used.len() })
}

/// m_p(∞) from 4α m_p = (p−3) m_{p−4}, seeded by m₀ = 1 and m₂(∞).
pub fn equilibrium_recursion(p: usize, m2_inf: Complex64, alpha: Complex64) -> Result<Complex64> {
    if p % 2 == 1 {
        return Err(Error::OddMoment(p));
    }
    let mut m = if p % 4 == 0 { Complex64::new(1.0, 0.0) } else { m2_inf };
    let mut q = if p % 4 == 0 { 0 } else { 2 };
    while q < p {
        q += 4;
        m = (q as f64 - 3.0) * m / (4.0 * alpha);
    }
    Ok(m)
}

/// Coefficients a₀ = 1, a_n = √(2n(2n+1)(2n+2)) of the supertask chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupertaskMap {
    pub alpha: f64,
    pub a0: f64,
}

impl SupertaskMap {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("supertask scaling needs α > 0, got {alpha}")));
        }
        Ok(Self { alpha, a0: 1.0 })
    }

    pub fn a(&self, n: usize) -> f64 {
        if n == 0 {
            self.a0
        } else {
            let n = n as f64;
            (2.0 * n * (2.0 * n + 1.0) * (2.0 * n + 2.0)).sqrt()
        }
    }

    /// f_{p/2}(√(4α) t) from m_p(t); f₀ = 1.
    pub fn f_from_moment(&self, p: usize, m_p: f64) -> f64 {
        if p == 0 {
            return 1.0;
        }
        let mut dfact = 1.0;
        let mut k = p as i64 - 1;
        while k > 1 {
            dfact *= k as f64;
            k -= 2;
        }
        self.a0 * (4.0 * self.alpha).powf(p as f64 / 4.0) * m_p / (2.0 * p as f64 * dfact).sqrt()
    }

    /// Leading small-argument behaviour a₀a₁…a_{n−1} sⁿ/n!.
    pub fn leading_term(&self, n: usize, s: f64) -> f64 {
        let mut v = 1.0;
        for k in 0..n {
            v *= self.a(k) * s / (k + 1) as f64;
        }
        v
    }
}

/// f_{p/2}(√(4α)t) computed from the series, with the chain relation
/// f_n = (a_{n−2}/a_{n−1}) f_{n−2} − f′_{n−1}/a_{n−1} checked by finite differences.
pub fn supertask_map(p: usize, t: f64, alpha: f64, table: &SeriesTable) -> Result<f64> {
    if p < 2 || p % 2 == 1 {
        return Err(Error::InvalidParameter(format!("supertask map needs even p ≥ 2, got {p}")));
    }
    let map = SupertaskMap::new(alpha)?;
    let a = Complex64::new(alpha, 0.0);
    let order = table.n_max();
    let f_at = |q: usize, tt: f64| -> Result<f64> {
        let m = moment_partial_sum(table, q, Complex64::new(tt, 0.0), order, a)?;
        Ok(map.f_from_moment(q, m.re))
    };
    let f = f_at(p, t)?;
    let n = p / 2;
    if n >= 2 {
        let scale = (4.0 * alpha).sqrt();
        // five-point stencil
        let h = 1e-3 * t.max(0.1);
        let d1 = (8.0 * (f_at(p - 2, t + h)? - f_at(p - 2, t - h)?)
            - (f_at(p - 2, t + 2.0 * h)? - f_at(p - 2, t - 2.0 * h)?))
            / (12.0 * h * scale);
        let f2 = f_at(p - 4, t)?;
        let rhs = map.a(n - 2) / map.a(n - 1) * f2 - d1 / map.a(n - 1);
        let residual = (f - rhs).abs();
        let tol = 1e-6 * (f.abs() + rhs.abs() + (d1 / map.a(n - 1)).abs()) + 1e-14;
        if residual > tol {
            return Err(Error::RecursionViolation { n, residual });
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ib(v: u64) -> IBig {
        IBig::from(v)
    }

    #[test]
    fn table3_row() {
        let t = SeriesTable::via_recursion(4, 11).unwrap();
        let got: Vec<_> = t.row(2).map(|(n, c)| (n, c.clone())).collect();
        let want = [1u64, 6, 216, 22896, 5360256, 2346299136];
        assert_eq!(got.len(), 6);
        for (i, (n, c)) in got.iter().enumerate() {
            assert_eq!(*n, 2 * i + 1);
            assert_eq!(*c, ib(want[i]));
        }
        assert_eq!(t.get(4, 2), Some(&ib(6)));
        assert_eq!(t.get(2, 2), None);
    }

    #[test]
    fn leading_coefficients() {
        let t = SeriesTable::via_recursion(12, 20).unwrap();
        let mut fact = 1u64;
        for p in (2..=12usize).step_by(2) {
            fact = (p as u64 - 1) * p as u64 * fact;
            let lead = fact / 2u64.pow(p as u32 / 2);
            assert_eq!(t.get(p, p / 2), Some(&ib(lead)), "p={p}");
        }
        assert_eq!(t.get(6, 3), Some(&ib(90)));
    }

    #[test]
    fn operator_examples() {
        let x2 = IntegerPolynomial::monomial(2);
        let l = apply_langevin_operator(&x2);
        assert_eq!(l.coefficient(0, 0), ib(2));
        assert_eq!(l.coefficient(4, 1), IBig::from(-8));
        assert_eq!(l.terms.len(), 2);
        let l4 = apply_langevin_operator(&IntegerPolynomial::monomial(4));
        assert_eq!(l4.coefficient(2, 0), ib(12));
        assert_eq!(l4.coefficient(6, 1), IBig::from(-16));
        assert!(apply_langevin_operator(&IntegerPolynomial::monomial(0)).is_zero());
        // (L³x²)(0) = −192α
        let mut q = x2;
        for _ in 0..3 {
            q = apply_langevin_operator(&q);
        }
        assert_eq!(q.coefficient(0, 1), IBig::from(-192));
        let c = series_coefficients_via_operator(2, 3).unwrap();
        assert_eq!(c, vec![(1, ib(1)), (3, ib(6))]);
    }

    #[test]
    fn partial_sum_examples() {
        let t = SeriesTable::via_recursion(4, 40).unwrap();
        let a = Complex64::new(0.5, 0.0);
        let v = moment_partial_sum(&t, 2, Complex64::new(0.05, 0.0), 11, a).unwrap();
        // 2t − 32αt³ + 921.6α²t⁵ − …
        let direct = 0.1 - 32.0 * 0.5 * 0.05f64.powi(3) + 921.6 * 0.25 * 0.05f64.powi(5)
            - 22896.0 * 0.125 * 64.0 * 128.0 * 0.05f64.powi(7) / 5040.0
            + 5360256.0 * 0.0625 * 256.0 * 512.0 * 0.05f64.powi(9) / 362880.0
            - 2346299136.0 * 0.03125 * 1024.0 * 2048.0 * 0.05f64.powi(11) / 39916800.0;
        assert!((v.re - direct).abs() < 1e-15, "{} vs {direct}", v.re);
        assert!((v.re - 0.09807).abs() < 1e-5);
        assert_eq!(moment_partial_sum(&t, 2, Complex64::new(0.0, 0.0), 11, a).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(moment_partial_sum(&t, 0, Complex64::new(0.3, 0.0), 11, a).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn growth_fit_recovers_model() {
        let pts: Vec<_> = (1..300).map(|k| {
            let k = k as f64;
            (k, (k + 0.5) * k.ln() - k)
        }).collect();
        let g = growth_fit_points(&pts).unwrap();
        assert!((g.alpha_p - 1.0).abs() < 1e-10 && (g.beta_p - 1.0).abs() < 1e-9);
        assert!(growth_fit_points(&pts[..15]).is_err());
    }

    #[test]
    fn equilibrium_recursion_examples() {
        let alpha = Complex64::from_polar(0.5, 0.4);
        let m2 = alpha.powf(-0.25) * libm::tgamma(0.75) / libm::tgamma(0.25);
        assert_eq!(equilibrium_recursion(0, m2, alpha).unwrap(), Complex64::new(1.0, 0.0));
        for p in (2..=16).step_by(2) {
            let want = if p % 4 == 0 {
                libm::tgamma((p as f64 + 1.0) / 4.0) / libm::tgamma(0.25) * alpha.powf(-(p as f64) / 4.0)
            } else {
                libm::tgamma((p as f64 + 1.0) / 4.0) / libm::tgamma(0.75) * m2 * alpha.powf((2.0 - p as f64) / 4.0)
            };
            let got = equilibrium_recursion(p, m2, alpha).unwrap();
            assert!((got - want).norm() < 1e-12 * want.norm(), "p={p}");
        }
        // λ = 1, θ = π/2: m₄ = ½ e^{−iπ/4}
        let a = Complex64::from_polar(0.5, std::f64::consts::PI / 4.0);
        let m4 = equilibrium_recursion(4, m2, a).unwrap();
        assert!((m4 - Complex64::from_polar(0.5, -std::f64::consts::PI / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn supertask_leading_order() {
        let t = SeriesTable::via_recursion(8, 30).unwrap();
        let map = SupertaskMap::new(0.5).unwrap();
        assert_eq!(map.a(1), 24f64.sqrt());
        let tt = 1e-3;
        let s = (4.0f64 * 0.5).sqrt() * tt;
        for n in 1..=4 {
            let f = supertask_map(2 * n, tt, 0.5, &t).unwrap();
            let lead = map.leading_term(n, s);
            assert!((f / lead - 1.0).abs() < 1e-4, "n={n}: {f} vs {lead}");
        }
        assert_eq!(supertask_map(4, 0.0, 0.5, &t).unwrap(), 0.0);
    }

    #[test]
    fn ln_of_large_integers() {
        let x = IBig::from(3).pow(2000);
        assert!((ln_ibig(&x) - 2000.0 * 3f64.ln()).abs() < 1e-10);
        assert!((ln_ibig(&ib(1000)) - 1000f64.ln()).abs() < 1e-14);
    }
}
