//! Complex Langevin integration with the adaptive step Δt = δ/(1 + |F_x| + |F_y|),
//! ensemble moments with standard errors, breakdown detection and endpoint histograms.

use std::io::Write;

use num_complex::Complex64;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::actions::{Action, NoiseConfig};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, MetaHeader};

pub const DEFAULT_DELTA: f64 = 1e-5;
/// Largest tolerated fraction of diverged trajectories.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;
// trajectories per reduction block; fixed so sums do not depend on scheduling
const BLOCK: u64 = 256;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for trajectory `index`, independent of how trajectories are scheduled.
pub fn trajectory_rng(master_seed: u64, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(splitmix64(master_seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))))
}

#[derive(Debug, Clone)]
pub struct TrajectoryState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub index: u64,
    rng: Xoshiro256PlusPlus,
}

impl TrajectoryState {
    /// Origin at t = 0.
    pub fn new(master_seed: u64, index: u64) -> Self {
        Self::at(0.0, 0.0, master_seed, index)
    }

    pub fn at(x: f64, y: f64, master_seed: u64, index: u64) -> Self {
        Self { x, y, t: 0.0, index, rng: trajectory_rng(master_seed, index) }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// One Euler step with explicit noise variances 2A_R Δt and 2A_I Δt; returns Δt.
#[inline]
pub fn step_with(state: &mut TrajectoryState, action: &Action, a_r: f64, a_i: f64, delta: f64) -> Result<f64> {
    let (fx, fy) = action.force_components(state.x, state.y);
    let dt = delta / (1.0 + fx.abs() + fy.abs());
    let mut x = state.x + fx * dt;
    let mut y = state.y + fy * dt;
    if a_r > 0.0 {
        let g: f64 = StandardNormal.sample(&mut state.rng);
        x += (2.0 * a_r * dt).sqrt() * g;
    }
    if a_i > 0.0 {
        let g: f64 = StandardNormal.sample(&mut state.rng);
        y += (2.0 * a_i * dt).sqrt() * g;
    }
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::NonFiniteState { index: state.index, t: state.t });
    }
    state.x = x;
    state.y = y;
    state.t += dt;
    Ok(dt)
}

#[inline]
pub fn step(state: &mut TrajectoryState, action: &Action, noise: NoiseConfig, delta: f64) -> Result<f64> {
    step_with(state, action, noise.a_r(), noise.a_i(), delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub action: Action,
    pub noise: NoiseConfig,
    pub delta: f64,
    pub checkpoints: Vec<f64>,
    pub n_trajectories: u64,
    pub master_seed: u64,
}

impl SimulationConfig {
    pub fn new(action: Action, noise: NoiseConfig, checkpoints: Vec<f64>, n_trajectories: u64, master_seed: u64) -> Result<Self> {
        let cfg = Self { action, noise, delta: DEFAULT_DELTA, checkpoints, n_trajectories, master_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidParameter("no checkpoints".into()));
        }
        if self.checkpoints[0] < 0.0 || self.checkpoints.windows(2).any(|w| w[1] <= w[0]) || !self.checkpoints.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("checkpoints must be finite, nonnegative and increasing".into()));
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

/// (x, y) at the first step reaching or passing each checkpoint.
pub fn run_trajectory(config: &SimulationConfig, index: u64) -> Result<Vec<(f64, f64)>> {
    let mut state = TrajectoryState::new(config.master_seed, index);
    let (a_r, a_i) = (config.noise.a_r(), config.noise.a_i());
    let mut out = Vec::with_capacity(config.checkpoints.len());
    for &c in &config.checkpoints {
        while state.t < c {
            step_with(&mut state, &config.action, a_r, a_i, config.delta)?;
        }
        out.push((state.x, state.y));
    }
    Ok(out)
}

// lanes advanced together; independent dependency chains overlap in the pipeline
const LANES: usize = 4;

struct Lane {
    state: TrajectoryState,
    next: usize,
    out: Vec<(f64, f64)>,
    failed: Option<Error>,
}

/// Same results as calling [`run_trajectory`] on each index in turn.
pub fn run_trajectories(config: &SimulationConfig, indices: std::ops::Range<u64>) -> Vec<Result<Vec<(f64, f64)>>> {
    let (a_r, a_i) = (config.noise.a_r(), config.noise.a_i());
    let cps = &config.checkpoints;
    let mut results = Vec::with_capacity((indices.end - indices.start) as usize);
    let ids: Vec<u64> = indices.collect();
    for chunk in ids.chunks(LANES) {
        let mut lanes: Vec<Lane> = chunk
            .iter()
            .map(|&i| Lane { state: TrajectoryState::new(config.master_seed, i), next: 0, out: Vec::with_capacity(cps.len()), failed: None })
            .collect();
        loop {
            let mut active = false;
            for lane in lanes.iter_mut() {
                if lane.next == cps.len() || lane.failed.is_some() {
                    continue;
                }
                while lane.next < cps.len() && lane.state.t >= cps[lane.next] {
                    lane.out.push((lane.state.x, lane.state.y));
                    lane.next += 1;
                }
                if lane.next == cps.len() {
                    continue;
                }
                active = true;
                if let Err(e) = step_with(&mut lane.state, &config.action, a_r, a_i, config.delta) {
                    lane.failed = Some(e);
                }
            }
            if !active {
                break;
            }
        }
        for lane in lanes {
            results.push(match lane.failed {
                Some(e) => Err(e),
                None => Ok(lane.out),
            });
        }
    }
    results
}

/// Running mean and squared deviations, merged pairwise in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    n: f64,
    mean: [f64; 4],
    m2: [f64; 4],
}

impl Accum {
    fn push(&mut self, v: [f64; 4]) {
        self.n += 1.0;
        for k in 0..4 {
            let d = v[k] - self.mean[k];
            self.mean[k] += d / self.n;
            self.m2[k] += d * (v[k] - self.mean[k]);
        }
    }

    fn merge(&mut self, o: &Accum) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        for k in 0..4 {
            let d = o.mean[k] - self.mean[k];
            self.mean[k] += d * o.n / n;
            self.m2[k] += o.m2[k] + d * d * self.n * o.n / n;
        }
        self.n = n;
    }

    fn se(&self, k: usize) -> f64 {
        if self.n < 2.0 {
            f64::NAN
        } else {
            (self.m2[k] / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMoments {
    pub t: f64,
    pub m2: Complex64,
    /// standard errors of the real and imaginary parts
    pub se_m2: Complex64,
    pub m4: Complex64,
    pub se_m4: Complex64,
    pub n_kept: u64,
}

impl CheckpointMoments {
    /// false when fewer than two samples were kept
    pub fn se_defined(&self) -> bool {
        self.n_kept >= 2
    }

    /// √(se_re² + se_im²) for m₂.
    pub fn se_m2_abs(&self) -> f64 {
        self.se_m2.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMoments {
    pub checkpoints: Vec<CheckpointMoments>,
    pub n_excluded: u64,
    pub n_total: u64,
}

fn simulate_blocks<T: Send, F>(config: &SimulationConfig, per_block: F) -> Result<(Vec<T>, u64)>
where
    F: Fn(u64, u64) -> (T, u64) + Sync,
{
    config.validate()?;
    let n = config.n_trajectories;
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<(T, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| per_block(b * BLOCK, ((b + 1) * BLOCK).min(n)))
        .collect();
    let excluded: u64 = parts.iter().map(|p| p.1).sum();
    if excluded == n {
        return Err(Error::TooManyDiverged { excluded, total: n });
    }
    if excluded as f64 > MAX_EXCLUDED_FRACTION * n as f64 {
        return Err(Error::TooManyDiverged { excluded, total: n });
    }
    Ok((parts.into_iter().map(|p| p.0).collect(), excluded))
}

/// Means and standard errors of z² and z⁴ at each checkpoint.
pub fn ensemble_moments(config: &SimulationConfig) -> Result<EnsembleMoments> {
    let nc = config.checkpoints.len();
    let (parts, n_excluded) = simulate_blocks(config, |lo, hi| {
        let mut acc = vec![Accum::default(); nc];
        let mut excluded = 0;
        for res in run_trajectories(config, lo..hi) {
            match res {
                Ok(pts) => {
                    for (a, (x, y)) in acc.iter_mut().zip(pts) {
                        let z2 = Complex64::new(x, y).powi(2);
                        let z4 = z2 * z2;
                        a.push([z2.re, z2.im, z4.re, z4.im]);
                    }
                }
                Err(_) => excluded += 1,
            }
        }
        (acc, excluded)
    })?;
    let mut total = vec![Accum::default(); nc];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let checkpoints = config
        .checkpoints
        .iter()
        .zip(&total)
        .map(|(&t, a)| CheckpointMoments {
            t,
            m2: Complex64::new(a.mean[0], a.mean[1]),
            se_m2: Complex64::new(a.se(0), a.se(1)),
            m4: Complex64::new(a.mean[2], a.mean[3]),
            se_m4: Complex64::new(a.se(2), a.se(3)),
            n_kept: a.n as u64,
        })
        .collect();
    Ok(EnsembleMoments { checkpoints, n_excluded, n_total: config.n_trajectories })
}

impl EnsembleMoments {
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &MetaHeader) -> Result<()> {
        meta.write(&mut w)?;
        writeln!(w, "t,re_m2,im_m2,se_re_m2,se_im_m2,re_m4,im_m4,se_re_m4,se_im_m4,n_kept,n_excluded")?;
        for c in &self.checkpoints {
            let cells = [c.t, c.m2.re, c.m2.im, c.se_m2.re, c.se_m2.im, c.m4.re, c.m4.im, c.se_m4.re, c.se_m4.im];
            let s: Vec<String> = cells.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{},{},{}", s.join(","), c.n_kept, self.n_excluded)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakdownParams {
    pub k_sigma: f64,
    pub window: usize,
    pub floor: f64,
}

impl Default for BreakdownParams {
    fn default() -> Self {
        Self { k_sigma: 4.0, window: 3, floor: 0.005 }
    }
}

/// First checkpoint opening a run of `window` consecutive points with
/// |m₂ − reference| > k_sigma·se + floor, where se = √(se_re² + se_im²).
pub fn detect_breakdown(langevin: &EnsembleMoments, reference: impl Fn(f64) -> Complex64, params: BreakdownParams) -> Option<f64> {
    let refs: Vec<Complex64> = langevin.checkpoints.iter().map(|c| reference(c.t)).collect();
    detect_breakdown_values(&langevin.checkpoints, &refs, params)
}

pub fn detect_breakdown_values(points: &[CheckpointMoments], reference: &[Complex64], params: BreakdownParams) -> Option<f64> {
    let window = params.window.max(1);
    let bad: Vec<bool> = points
        .iter()
        .zip(reference)
        .map(|(c, r)| {
            let se = if c.se_defined() { c.se_m2_abs() } else { 0.0 };
            (c.m2 - r).norm() > params.k_sigma * se + params.floor
        })
        .collect();
    (0..bad.len()).find(|&i| i + window <= bad.len() && bad[i..i + window].iter().all(|b| *b)).map(|i| points[i].t)
}

/// t_c = c·(A_I + α)^{−γ} fitted by least squares in t_c.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownFit {
    pub points: Vec<(f64, f64)>,
    pub alpha_shift: f64,
    pub gamma: f64,
    pub amplitude: f64,
    pub residual: f64,
}

impl BreakdownFit {
    pub fn predict(&self, a_i: f64) -> f64 {
        self.amplitude * (a_i + self.alpha_shift).powf(-self.gamma)
    }
}

pub fn breakdown_scaling_fit(points: &[(f64, f64)]) -> Result<BreakdownFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} breakdown points; need at least 3", points.len())));
    }
    if points.iter().any(|&(a, t)| !(a >= 0.0 && t > 0.0)) {
        return Err(Error::InvalidParameter("breakdown points need A_I ≥ 0 and t_c > 0".into()));
    }
    let a_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    // α is kept above −min A_I; the amplitude is eliminated in closed form
    let lower = -a_min;
    let profile = |alpha: f64, gamma: f64| -> (f64, f64) {
        if alpha <= lower || !gamma.is_finite() {
            return (f64::INFINITY, 0.0);
        }
        let u: Vec<f64> = points.iter().map(|&(a, _)| (a + alpha).powf(-gamma)).collect();
        let uu: f64 = u.iter().map(|v| v * v).sum();
        let ut: f64 = u.iter().zip(points).map(|(v, p)| v * p.1).sum();
        let c = ut / uu;
        let ss: f64 = u.iter().zip(points).map(|(v, p)| (c * v - p.1).powi(2)).sum();
        if ss.is_finite() {
            (ss, c)
        } else {
            (f64::INFINITY, c)
        }
    };
    let start = [if a_min > 0.0 { 0.0 } else { 0.05 }, 0.5];
    let best = nelder_mead(|v| profile(v[0], v[1]).0, start, 0.1, 4000, 1e-15)?;
    let (ss, c) = profile(best[0], best[1]);
    Ok(BreakdownFit {
        points: points.to_vec(),
        alpha_shift: best[0],
        gamma: best[1],
        amplitude: c,
        residual: (ss / points.len() as f64).sqrt(),
    })
}

fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], scale: f64, max_iter: usize, ftol: f64) -> Result<[f64; 2]> {
    let mut s = [x0, [x0[0] + scale, x0[1]], [x0[0], x0[1] + scale]];
    let mut fs = s.map(&f);
    for _ in 0..max_iter {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        s = idx.map(|i| s[i]);
        fs = idx.map(|i| fs[i]);
        let size = ((s[1][0] - s[0][0]).abs() + (s[1][1] - s[0][1]).abs()).max((s[2][0] - s[0][0]).abs() + (s[2][1] - s[0][1]).abs());
        if (fs[2] - fs[0]).abs() <= ftol * (1.0 + fs[0].abs()) && size < 1e-9 {
            return Ok(s[0]);
        }
        let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let at = |k: f64| [c[0] + k * (s[2][0] - c[0]), c[1] + k * (s[2][1] - c[1])];
        let xr = at(-1.0);
        let fr = f(xr);
        if fr < fs[0] {
            let xe = at(-2.0);
            let fe = f(xe);
            if fe < fr {
                s[2] = xe;
                fs[2] = fe;
            } else {
                s[2] = xr;
                fs[2] = fr;
            }
        } else if fr < fs[1] {
            s[2] = xr;
            fs[2] = fr;
        } else {
            let xc = if fr < fs[2] { at(-0.5) } else { at(0.5) };
            let fc = f(xc);
            if fc < fs[2].min(fr) {
                s[2] = xc;
                fs[2] = fc;
            } else {
                for k in 1..3 {
                    s[k] = [(s[0][0] + s[k][0]) / 2.0, (s[0][1] + s[k][1]) / 2.0];
                    fs[k] = f(s[k]);
                }
            }
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: fs[0] })
}

/// Uniform binning of [x_min, x_max] × [y_min, y_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl HistogramGrid {
    pub fn square(half_width: f64, bins: usize) -> Self {
        Self { x_min: -half_width, x_max: half_width, nx: bins, y_min: -half_width, y_max: half_width, ny: bins }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy()
    }

    fn bin(&self, x: f64, y: f64) -> Option<usize> {
        let i = ((x - self.x_min) / self.dx()).floor();
        let j = ((y - self.y_min) / self.dy()).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny {
            Some(i as usize * self.ny + j as usize)
        } else {
            None
        }
    }
}

/// Endpoint masses per bin, normalized over the bins; index i·ny + j.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub grid: HistogramGrid,
    pub mass: Vec<f64>,
    /// fraction of kept endpoints outside the grid
    pub outside_fraction: f64,
    pub n_excluded: u64,
}

pub fn density_histogram_2d(config: &SimulationConfig, t_final: f64, grid: HistogramGrid) -> Result<Histogram2D> {
    if !(t_final >= 0.0) || grid.nx == 0 || grid.ny == 0 || !(grid.x_max > grid.x_min && grid.y_max > grid.y_min) {
        return Err(Error::InvalidParameter("bad histogram grid or final time".into()));
    }
    let cfg = SimulationConfig { checkpoints: vec![t_final], ..config.clone() };
    let (parts, n_excluded) = simulate_blocks(&cfg, |lo, hi| {
        let mut counts = vec![0u64; grid.nx * grid.ny];
        let (mut outside, mut excluded) = (0u64, 0u64);
        for res in run_trajectories(&cfg, lo..hi) {
            match res {
                Ok(p) => match grid.bin(p[0].0, p[0].1) {
                    Some(b) => counts[b] += 1,
                    None => outside += 1,
                },
                Err(_) => excluded += 1,
            }
        }
        ((counts, outside), excluded)
    })?;
    let mut counts = vec![0u64; grid.nx * grid.ny];
    let mut outside = 0;
    for (c, o) in &parts {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        outside += o;
    }
    let inside: u64 = counts.iter().sum();
    let kept = inside + outside;
    let mass = counts.iter().map(|&c| if inside > 0 { c as f64 / inside as f64 } else { 0.0 }).collect();
    Ok(Histogram2D { grid, mass, outside_fraction: outside as f64 / kept.max(1) as f64, n_excluded })
}

impl Histogram2D {
    /// Σ|mass − ρ·area| with ρ renormalized to unit mass over the same bins.
    pub fn l1_distance(&self, density: impl Fn(f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let mut expect = Vec::with_capacity(self.mass.len());
        for i in 0..g.nx {
            for j in 0..g.ny {
                expect.push(density(g.x_center(i), g.y_center(j)) * g.dx() * g.dy());
            }
        }
        let total: f64 = expect.iter().sum();
        self.mass.iter().zip(&expect).map(|(m, e)| (m - e / total).abs()).sum()
    }

    /// Principal-axis angle of the binned distribution, in (−π/2, π/2].
    pub fn principal_angle(&self) -> f64 {
        let g = &self.grid;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..g.nx {
            for j in 0..g.ny {
                let m = self.mass[i * g.ny + j];
                let (x, y) = (g.x_center(i), g.y_center(j));
                sxx += m * x * x;
                syy += m * y * y;
                sxy += m * x * y;
            }
        }
        0.5 * (2.0 * sxy).atan2(sxx - syy)
    }

    /// Columns x_center, y_center, mass.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &MetaHeader) -> Result<()> {
        meta.clone().with("outside_fraction", self.outside_fraction).with("n_excluded", self.n_excluded).write(&mut w)?;
        writeln!(w, "x_center,y_center,mass")?;
        let g = &self.grid;
        for i in 0..g.nx {
            for j in 0..g.ny {
                writeln!(w, "{},{},{}", fmt_f64(g.x_center(i)), fmt_f64(g.y_center(j)), fmt_f64(self.mass[i * g.ny + j]))?;
            }
        }
        Ok(())
    }
}
