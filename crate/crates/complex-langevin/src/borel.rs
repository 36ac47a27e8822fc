//! Borel sums b_p(s) = Σ c_{p,n}(−4α)^{(n−p/2)/2}(2s)ⁿ/n!² and the
//! phase-rotated transform M_p(t) = e^{−iθ(1+p/2)/4} t⁻¹ ∫₀^∞ e^{−s e^{−iθ/4}/t} b_p(s) ds.
//!
//! The partial sums cancel catastrophically (terms near 1e76 at s = 11 for
//! α = 1/2), so the coefficients are held as binary floats whose precision is
//! sized from the largest term on the requested interval.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, MetaHeader};
use crate::moments::{ln_factorial, ln_ibig, SeriesTable};

type Big = FBig<HalfEven>;

pub const DEFAULT_TERMS: usize = 500;
pub const DEFAULT_S_MAX: f64 = 11.0;
pub const DEFAULT_STEP: f64 = 1e-3;
/// Relative disagreement between the N and N/2 partial sums that flags instability.
pub const INSTABILITY_TOL: f64 = 1e-8;
/// Tail size, relative to the integral, above which a transform is flagged.
pub const TAIL_TOL: f64 = 1e-8;
const GUARD_BITS: f64 = 96.0;
// terms below e^{-80} past the peak are dropped
const LN_NEGLIGIBLE: f64 = -80.0;

/// Stable s-interval for coupling α; 11 at α = 1/2 and scaling as α^{−1/2}.
pub fn default_s_max(alpha: f64) -> f64 {
    DEFAULT_S_MAX / (2.0 * alpha).sqrt()
}

struct Term {
    n: usize,
    coeff: Big,
    ln_abs: f64,
}

/// Coefficients a_n of b_p(s) = Σ a_n sⁿ, rounded to a common binary precision.
pub struct BorelSeries {
    p: usize,
    alpha: f64,
    precision: usize,
    terms: Vec<Term>,
}

/// b_p(s) with the N/2 comparison value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorelSumValue {
    pub value: f64,
    pub half_value: f64,
    pub unstable: bool,
}

impl BorelSeries {
    /// First `n_terms` nonzero terms of row p, with enough precision for s ≤ s_max.
    pub fn new(table: &SeriesTable, p: usize, n_terms: usize, alpha: f64, s_max: f64) -> Result<Self> {
        if p % 2 == 1 {
            return Err(Error::OddMoment(p));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("Borel sum needs real α > 0, got {alpha}")));
        }
        if !(s_max >= 0.0 && s_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("s_max must be finite and ≥ 0, got {s_max}")));
        }
        let raw = table.nonzero_terms(p, n_terms)?;
        let ln4a = (4.0 * alpha).ln();
        let ln_s = if s_max > 0.0 { s_max.ln() } else { 0.0 };
        let mut ln_abs = Vec::with_capacity(raw.len());
        let mut peak = 0.0f64;
        for (n, c) in &raw {
            let j = ((n - p / 2) / 2) as f64;
            let l = ln_ibig(c) + j * ln4a + *n as f64 * std::f64::consts::LN_2 - 2.0 * ln_factorial(*n);
            peak = peak.max(l + *n as f64 * ln_s);
            ln_abs.push(l);
        }
        let precision = ((peak / std::f64::consts::LN_2).max(0.0) + GUARD_BITS + (raw.len().max(2) as f64).log2()).ceil() as usize;

        // running factor (4α)^j 2ⁿ / n!² updated by 16α/((n+1)(n+2))² between neighbours
        let four_alpha = to_big(4.0 * alpha, precision)?;
        let mut factor = Big::ONE.with_precision(precision).value();
        let h = p / 2;
        for k in 1..=h {
            factor = factor * to_big(2.0, precision)? / Big::from(dashu_int::IBig::from((k * k) as u64)).with_precision(precision).value();
        }
        let mut terms = Vec::with_capacity(raw.len());
        let mut prev_n = h;
        for (idx, (n, c)) in raw.into_iter().enumerate() {
            while prev_n < n {
                let d = ((prev_n + 1) * (prev_n + 2)) as u64;
                let den = Big::from(dashu_int::IBig::from(d) * dashu_int::IBig::from(d)).with_precision(precision).value();
                factor = factor * &four_alpha * to_big(4.0, precision)? / den;
                prev_n += 2;
            }
            let j = (n - h) / 2;
            let mut coeff = Big::from(c).with_precision(precision).value() * &factor;
            if j % 2 == 1 {
                coeff = -coeff;
            }
            terms.push(Term { n, coeff, ln_abs: ln_abs[idx] });
        }
        Ok(Self { p, alpha, precision, terms })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn precision_bits(&self) -> usize {
        self.precision
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Partial sum over the first `count` nonzero terms.
    pub fn eval_terms(&self, s: f64, count: usize) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("Borel variable must be finite and ≥ 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(if self.p == 0 { 1.0 } else { 0.0 });
        }
        let prec = self.precision;
        let sb = to_big(s, prec)?;
        let s2 = &sb * &sb;
        let ln_s = s.ln();
        let first = match self.terms.first() {
            Some(t) => t.n,
            None => return Ok(0.0),
        };
        let mut pw = Big::ONE.with_precision(prec).value();
        for _ in 0..first {
            pw = pw * &sb;
        }
        let mut acc = Big::ZERO.with_precision(prec).value();
        let mut prev = f64::NEG_INFINITY;
        for t in self.terms.iter().take(count) {
            let lt = t.ln_abs + t.n as f64 * ln_s;
            if lt > self.precision as f64 * std::f64::consts::LN_2 {
                return Err(Error::Overflow(format!("b_{}({s}) beyond the precision sized for this series", self.p)));
            }
            if lt < LN_NEGLIGIBLE && lt < prev {
                break;
            }
            prev = lt;
            acc += &t.coeff * &pw;
            pw = pw * &s2;
        }
        Ok(acc.to_f64().value())
    }

    /// b_p(s) with all stored terms, compared against half of them.
    pub fn eval(&self, s: f64) -> Result<BorelSumValue> {
        let value = self.eval_terms(s, self.terms.len())?;
        let half_value = self.eval_terms(s, self.terms.len() / 2)?;
        let unstable = (value - half_value).abs() > INSTABILITY_TOL * value.abs().max(f64::MIN_POSITIVE);
        Ok(BorelSumValue { value, half_value, unstable })
    }
}

fn to_big(x: f64, prec: usize) -> Result<Big> {
    Big::try_from(x)
        .map(|b| b.with_precision(prec).value())
        .map_err(|_| Error::InvalidParameter(format!("cannot represent {x} exactly")))
}

/// b_p(s) from the first N nonzero coefficients, flagged unstable if the N/2 sum disagrees.
pub fn borel_sum(p: usize, s: f64, n_terms: usize, alpha: f64) -> Result<BorelSumValue> {
    let table = SeriesTable::via_recursion(p.max(2), SeriesTable::n_max_for_terms(p, n_terms))?;
    BorelSeries::new(&table, p, n_terms, alpha, s)?.eval(s)
}

/// b_p sampled on the uniform grid s_i = i·step, i = 0..=K with K even.
#[derive(Debug, Clone)]
pub struct BorelTabulation {
    pub p: usize,
    pub alpha: f64,
    pub n_terms: usize,
    pub s_max: f64,
    pub step: f64,
    pub values: Vec<f64>,
    /// N and N/2 partial sums disagree at s_max
    pub unstable: bool,
}

type CacheKey = (usize, u64, usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<BorelTabulation>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<BorelTabulation>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl BorelTabulation {
    pub fn new(p: usize, alpha: f64, n_terms: usize, s_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && s_max > 0.0 && step <= s_max) {
            return Err(Error::InvalidParameter(format!("need 0 < step ≤ s_max, got step={step}, s_max={s_max}")));
        }
        let mut k = (s_max / step).round() as usize;
        if k % 2 == 1 {
            k += 1;
        }
        let step = s_max / k as f64;
        let table = SeriesTable::via_recursion(p.max(2), SeriesTable::n_max_for_terms(p, n_terms))?;
        let series = BorelSeries::new(&table, p, n_terms, alpha, s_max)?;
        let values = (0..=k)
            .into_par_iter()
            .map(|i| series.eval_terms(i as f64 * step, n_terms))
            .collect::<Result<Vec<_>>>()?;
        let unstable = series.eval(s_max)?.unstable;
        Ok(Self { p, alpha, n_terms, s_max, step, values, unstable })
    }

    /// Shared tabulation for repeated use within one process.
    pub fn cached(p: usize, alpha: f64, n_terms: usize, s_max: f64, step: f64) -> Result<Arc<Self>> {
        let key = (p, alpha.to_bits(), n_terms, s_max.to_bits(), step.to_bits());
        if let Some(t) = cache().lock().expect("borel cache poisoned").get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(Self::new(p, alpha, n_terms, s_max, step)?);
        cache().lock().expect("borel cache poisoned").insert(key, t.clone());
        Ok(t)
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// ∫₀^{s_max} e^{−κs} b(s) ds plus the constant-extrapolated tail e^{−κ s_max} b(s_max)/κ.
    fn laplace(&self, kappa: Complex64) -> (Complex64, Complex64) {
        let h = self.step;
        let k = self.values.len() - 1;
        let mut body = Complex64::new(0.0, 0.0);
        if 1.0 / kappa.norm() < 0.05 {
            // product rule: quadratic interpolation of b against the exact exponential per panel
            let mu = panel_moments(kappa, 2.0 * h);
            let decay = (-kappa * 2.0 * h).exp();
            let mut e = Complex64::new(1.0, 0.0);
            for i in (0..k).step_by(2) {
                let (f0, f1, f2) = (self.values[i], self.values[i + 1], self.values[i + 2]);
                let c1 = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
                let c2 = (f0 - 2.0 * f1 + f2) / (2.0 * h * h);
                body += e * (f0 * mu[0] + c1 * mu[1] + c2 * mu[2]);
                e *= decay;
                if e.norm() < 1e-300 {
                    break;
                }
            }
        } else {
            let step_decay = (-kappa * h).exp();
            let mut e = Complex64::new(1.0, 0.0);
            for (i, &b) in self.values.iter().enumerate() {
                let w = if i == 0 || i == k {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                body += w * e * b;
                e *= step_decay;
            }
            body *= h / 3.0;
        }
        let tail = (-kappa * self.s_max).exp() * self.values[k] / kappa;
        (body, tail)
    }

    /// M_p(t) at Wick angle θ through the rotated real-s integral.
    pub fn transform(&self, theta: f64, t: f64) -> Result<TransformValue> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
        }
        if self.p == 0 {
            return Ok(TransformValue { value: Complex64::new(1.0, 0.0), tail_fraction: 0.0, tail_warning: false });
        }
        let kappa = Complex64::from_polar(1.0 / t, -0.25 * theta);
        let (body, tail) = self.laplace(kappa);
        let pref = Complex64::from_polar(1.0 / t, -0.25 * theta * (1.0 + self.p as f64 / 2.0));
        Ok(TransformValue::new(pref, body, tail))
    }

    /// M_p at θ = 0 for complex τ with Re τ > 0: τ⁻¹ ∫ e^{−s/τ} b(s) ds.
    pub fn transform_complex_t(&self, tau: Complex64) -> Result<TransformValue> {
        if !(tau.re > 0.0) {
            return Err(Error::InvalidParameter(format!("need Re τ > 0, got {tau}")));
        }
        if self.p == 0 {
            return Ok(TransformValue { value: Complex64::new(1.0, 0.0), tail_fraction: 0.0, tail_warning: false });
        }
        let kappa = tau.inv();
        let (body, tail) = self.laplace(kappa);
        Ok(TransformValue::new(kappa, body, tail))
    }
}

/// Moments ∫₀^L u^k e^{−κu} du for k = 0, 1, 2.
fn panel_moments(kappa: Complex64, len: f64) -> [Complex64; 3] {
    let z = kappa * len;
    if z.norm() < 0.5 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            for j in 0..30 {
                *o += term / (k + j + 1) as f64;
                term *= -z / (j + 1) as f64;
            }
            *o *= len.powi(k as i32 + 1);
        }
        return out;
    }
    let e = (-z).exp();
    let m0 = (1.0 - e) / kappa;
    let m1 = (m0 - len * e) / kappa;
    let m2 = (2.0 * m1 - len * len * e) / kappa;
    [m0, m1, m2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformValue {
    pub value: Complex64,
    /// |tail| / |integral|
    pub tail_fraction: f64,
    pub tail_warning: bool,
}

impl TransformValue {
    fn new(pref: Complex64, body: Complex64, tail: Complex64) -> Self {
        let total = body + tail;
        let tail_fraction = tail.norm() / total.norm().max(f64::MIN_POSITIVE);
        Self { value: pref * total, tail_fraction, tail_warning: tail_fraction > TAIL_TOL }
    }
}

/// M_p(t) at one t, tabulating b_p with the default number of terms.
pub fn borel_transform(p: usize, t: f64, theta: f64, lambda: f64, s_max: f64, step: f64) -> Result<TransformValue> {
    let alpha = checked_alpha(lambda)?;
    BorelTabulation::cached(p, alpha, DEFAULT_TERMS, s_max, step)?.transform(theta, t)
}

fn checked_alpha(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(0.5 * lambda.sqrt())
}

/// Tabulated b_p and M_p with the settings that produced them.
#[derive(Debug, Clone)]
pub struct BorelResult {
    pub p: usize,
    pub theta: f64,
    pub lambda: f64,
    pub s_grid: Vec<f64>,
    pub b_values: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub m_values: Vec<Complex64>,
    pub n_terms: usize,
    pub s_max: f64,
    pub quadrature_step: f64,
    pub unstable: bool,
    pub tail_warnings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorelOptions {
    pub n_terms: usize,
    pub s_max: Option<f64>,
    pub step: f64,
}

impl Default for BorelOptions {
    fn default() -> Self {
        Self { n_terms: DEFAULT_TERMS, s_max: None, step: DEFAULT_STEP }
    }
}

impl BorelResult {
    pub fn compute(p: usize, theta: f64, lambda: f64, t_grid: &[f64], opts: BorelOptions) -> Result<Self> {
        let alpha = checked_alpha(lambda)?;
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("t grid must be increasing".into()));
        }
        let s_max = opts.s_max.unwrap_or_else(|| default_s_max(alpha));
        let tab = BorelTabulation::cached(p, alpha, opts.n_terms, s_max, opts.step)?;
        let vals = t_grid.par_iter().map(|&t| tab.transform(theta, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            theta,
            lambda,
            s_grid: (0..tab.values.len()).map(|i| tab.s(i)).collect(),
            b_values: tab.values.clone(),
            t_grid: t_grid.to_vec(),
            m_values: vals.iter().map(|v| v.value).collect(),
            n_terms: opts.n_terms,
            s_max: tab.s_max,
            quadrature_step: tab.step,
            unstable: tab.unstable,
            tail_warnings: vals.iter().filter(|v| v.tail_warning).count(),
        })
    }

    fn meta(&self, kind: &str) -> MetaHeader {
        MetaHeader::new(kind)
            .with("p", self.p)
            .with("theta", self.theta)
            .with("lambda", self.lambda)
            .with("n_terms", self.n_terms)
            .with("s_max", self.s_max)
            .with("quadrature_step", self.quadrature_step)
            .with("unstable", self.unstable)
            .with("tail_warnings", self.tail_warnings)
    }

    /// Columns t, re_M, im_M, p, theta, lambda.
    pub fn write_transform_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.meta("borel_transform").write(&mut w)?;
        writeln!(w, "t,re_M,im_M,p,theta,lambda")?;
        for (t, m) in self.t_grid.iter().zip(&self.m_values) {
            writeln!(w, "{},{},{},{},{},{}", fmt_f64(*t), fmt_f64(m.re), fmt_f64(m.im), self.p, fmt_f64(self.theta), fmt_f64(self.lambda))?;
        }
        Ok(())
    }

    /// Columns s, b; every `stride`-th grid point.
    pub fn write_sum_csv<W: Write>(&self, mut w: W, stride: usize) -> Result<()> {
        self.meta("borel_sum").with("stride", stride).write(&mut w)?;
        writeln!(w, "s,b")?;
        for (s, b) in self.s_grid.iter().zip(&self.b_values).step_by(stride.max(1)) {
            writeln!(w, "{},{}", fmt_f64(*s), fmt_f64(*b))?;
        }
        Ok(())
    }
}

/// |M_p(t; α) − α^{−p/4} M_p(α^{1/2} t; 1)| at θ = 0, each side on its own stable interval.
pub fn scaling_check(p: usize, t: f64, lambda: f64) -> Result<f64> {
    if p == 0 {
        return Ok(0.0);
    }
    let alpha = checked_alpha(lambda)?;
    let lhs_tab = scaled_tabulation(p, alpha)?;
    let rhs_tab = scaled_tabulation(p, 1.0)?;
    let lhs = lhs_tab.transform(0.0, t)?.value;
    let rhs = alpha.powf(-(p as f64) / 4.0) * rhs_tab.transform(0.0, alpha.sqrt() * t)?.value;
    Ok((lhs - rhs).norm())
}

fn scaled_tabulation(p: usize, alpha: f64) -> Result<Arc<BorelTabulation>> {
    let s_max = default_s_max(alpha);
    BorelTabulation::cached(p, alpha, DEFAULT_TERMS, s_max, DEFAULT_STEP * s_max / DEFAULT_S_MAX)
}

/// m₄, m₆, m₈ on the interior of a uniform grid, from derivatives of m₂.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMoments {
    pub t: Vec<f64>,
    pub m4: Vec<Complex64>,
    pub m6: Vec<Complex64>,
    pub m8: Vec<Complex64>,
    /// largest step-h versus step-2h disagreement seen
    pub richardson: f64,
}

pub const RICHARDSON_TOL: f64 = 1e-3;

/// Applies ∂_t m_p = p(p−1)m_{p−2} − 4αp m_{p+2} backwards from m₂ samples at t₀ + i·dt.
///
/// Points within two samples of either end are dropped.  The estimates with
/// step dt are compared against step 2dt where both exist; a relative
/// disagreement above `tol` is reported as a too-coarse grid.
pub fn derived_higher_moments(t0: f64, dt: f64, m2: &[Complex64], alpha: Complex64, tol: f64) -> Result<DerivedMoments> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if m2.len() < 5 {
        return Err(Error::InsufficientData(format!("{} samples; need at least 5", m2.len())));
    }
    let a = alpha;
    let build = |i: usize, h: usize| -> [Complex64; 3] {
        let hh = h as f64 * dt;
        let (mm2, mm1, m0, mp1, mp2) = (m2[i - 2 * h], m2[i - h], m2[i], m2[i + h], m2[i + 2 * h]);
        let d1 = (mp1 - mm1) / (2.0 * hh);
        let d2 = (mp1 - 2.0 * m0 + mm1) / (hh * hh);
        let d3 = (mp2 - 2.0 * mp1 + 2.0 * mm1 - mm2) / (2.0 * hh * hh * hh);
        let m4 = (2.0 - d1) / (8.0 * a);
        let m6 = (12.0 * m0 + d2 / (8.0 * a)) / (16.0 * a);
        let dm6 = (12.0 * d1 + d3 / (8.0 * a)) / (16.0 * a);
        let m8 = (30.0 * m4 - dm6) / (24.0 * a);
        [m4, m6, m8]
    };
    let n = m2.len();
    let mut out = DerivedMoments { t: vec![], m4: vec![], m6: vec![], m8: vec![], richardson: 0.0 };
    for i in 2..n - 2 {
        let fine = build(i, 1);
        if i >= 4 && i + 4 < n {
            let coarse = build(i, 2);
            for (f, c) in fine.iter().zip(&coarse) {
                out.richardson = out.richardson.max((f - c).norm() / (1.0 + f.norm()));
            }
        }
        out.t.push(t0 + i as f64 * dt);
        out.m4.push(fine[0]);
        out.m6.push(fine[1]);
        out.m8.push(fine[2]);
    }
    if out.richardson > tol {
        return Err(Error::GridTooCoarse(out.richardson));
    }
    Ok(out)
}
