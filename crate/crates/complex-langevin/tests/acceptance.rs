//! End-to-end acceptance run. One PASS/FAIL line per criterion; exits nonzero if
//! any criterion fails. Takes tens of minutes on one core.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use complex_langevin::actions::{Action, NoiseConfig};
use complex_langevin::borel::BorelTabulation;
use complex_langevin::harmonic::{
    generating_functional_check, harmonic_ground_state, harmonic_moment_flow, spectral_norm_generating_function, spectral_norms_closed_form,
    spectral_norms_legendre,
};
use complex_langevin::langevin::{
    breakdown_scaling_fit, density_histogram_2d, detect_breakdown, ensemble_moments, BreakdownParams, EnsembleMoments, HistogramGrid, SimulationConfig,
};
use complex_langevin::moments::SeriesTable;
use complex_langevin::spectral1d::{decompose_with_reliability, fokker_planck_omega2, ground_state_norm_exact, norm_growth_fit};
use complex_langevin::spectral2d::{
    build_fp_matrix, build_fp_transpose_matrix, ground_state_function, ground_state_moments, ground_state_vector, spectrum_2d_real, Grid2D, DEFAULT_SHIFT,
};
use num_complex::Complex64;

type Outcome = Result<String, String>;

// Borel reference shared by criteria 2, 3, 4 and 9
const BOREL_TERMS: usize = 500;
const BOREL_SMAX: f64 = 11.0;
const BOREL_STEP: f64 = 1e-3;

const BREAKDOWN_TRAJ: u64 = 1_000_000;
const BREAKDOWN_DELTA: f64 = 1e-3;
const BREAKDOWN_SPACING: f64 = 0.02;

fn borel(p: usize) -> Arc<BorelTabulation> {
    BorelTabulation::cached(p, 0.5, BOREL_TERMS, BOREL_SMAX, BOREL_STEP).expect("borel tabulation")
}

fn borel_m(p: usize, theta: f64, t: f64) -> Complex64 {
    borel(p).transform(theta, t).expect("borel transform").value
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_series() -> Outcome {
    let start = Instant::now();
    let rec = SeriesTable::via_recursion(12, 40).map_err(|e| e.to_string())?;
    let op = SeriesTable::via_operator(12, 40).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let want = ["1", "6", "216", "22896", "5360256", "2346299136"];
    let got: Vec<String> = [1, 3, 5, 7, 9, 11].iter().map(|&n| rec.get(2, n).map(|c| c.to_string()).unwrap_or_default()).collect();
    let exact = got.iter().zip(want).all(|(g, w)| g == w);
    check(exact && rec == op && secs < 10.0, format!("c_2 = {got:?}; recursion == operator: {}; {secs:.2}s", rec == op))
}

fn c2_borel_equilibrium() -> Outcome {
    let start = Instant::now();
    let m2 = borel_m(2, 0.0, 2.0);
    let m4 = borel_m(4, 0.0, 2.0);
    let secs = start.elapsed().as_secs_f64();
    let ok = (m2 - 0.47798).norm() < 1e-3 && (m4 - 0.5).norm() < 1e-3 && secs < 60.0;
    check(ok, format!("M2(2) = {:.5}, M4(2) = {:.5}; {secs:.1}s", m2.re, m4.re))
}

fn run(cfg: &SimulationConfig) -> Result<EnsembleMoments, String> {
    ensemble_moments(cfg).map_err(|e| e.to_string())
}

fn quartic_config(theta: f64, ai: f64, checkpoints: Vec<f64>, ntraj: u64, seed: u64, delta: f64) -> Result<SimulationConfig, String> {
    let f = || -> complex_langevin::Result<SimulationConfig> {
        SimulationConfig::new(Action::quartic(1.0, theta)?, NoiseConfig::new(ai)?, checkpoints, ntraj, seed)?.with_delta(delta)
    };
    f().map_err(|e| e.to_string())
}

/// Largest |m₂ − M₂| / se over the checkpoints with t < t_max.
fn worst_sigma(ens: &EnsembleMoments, theta: f64, t_max: f64) -> (f64, f64) {
    let mut worst = (0.0, 0.0);
    for c in ens.checkpoints.iter().filter(|c| c.t < t_max) {
        let z = (c.m2 - borel_m(2, theta, c.t)).norm() / c.se_m2_abs();
        if z > worst.0 {
            worst = (z, c.t);
        }
    }
    worst
}

fn c3_langevin_theta_zero() -> Outcome {
    let start = Instant::now();
    let checkpoints: Vec<f64> = (0..10).map(|k| 0.05 + 1.95 * k as f64 / 9.0).collect();
    let ens = run(&quartic_config(0.0, 0.0, checkpoints, 100_000, 31, 1e-5)?)?;
    let (z, t) = worst_sigma(&ens, 0.0, f64::INFINITY);
    check(z <= 3.0, format!("max deviation {z:.2} sigma at t = {t:.3}; {} excluded; {:.0}s", ens.n_excluded, start.elapsed().as_secs_f64()))
}

/// Detected t_c for one A_I at θ = π/2, and the largest |m₂ − M₂| at t ≤ t_late.
fn breakdown_run(ai: f64, t_max: f64, t_late: f64, seed: u64) -> Result<(Option<f64>, f64), String> {
    let n = (t_max / BREAKDOWN_SPACING).round() as usize;
    let checkpoints: Vec<f64> = (1..=n).map(|k| k as f64 * BREAKDOWN_SPACING).collect();
    let ens = run(&quartic_config(PI / 2.0, ai, checkpoints, BREAKDOWN_TRAJ, seed, BREAKDOWN_DELTA)?)?;
    let gap = ens.checkpoints.iter().filter(|c| c.t <= t_late + 1e-9).map(|c| (c.m2 - borel_m(2, PI / 2.0, c.t)).norm()).fold(0.0, f64::max);
    Ok((detect_breakdown(&ens, |t| borel_m(2, PI / 2.0, t), BreakdownParams::default()), gap))
}

fn c4_breakdown() -> Outcome {
    let start = Instant::now();
    let targets = [(1.0, 0.16), (0.5, 0.22), (0.2, 0.41), (0.1, 0.67)];
    let mut found = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, &(ai, want)) in targets.iter().enumerate() {
        // the deviation must clear the detector's absolute floor by want + 0.05 at the latest
        match breakdown_run(ai, want + 0.25, want + 0.05, 100 + i as u64) {
            Ok((tc, gap)) => {
                let shown = tc.map_or("none".to_string(), |t| format!("{t:.2}"));
                ok &= tc.is_some_and(|t| (t - want).abs() <= 0.05 + 1e-9);
                if let Some(t) = tc {
                    found.push((ai, t));
                }
                lines.push(format!("A_I={ai}: {shown} (want {want}, max |dm2| by {:.2} = {gap:.4})", want + 0.05));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("A_I={ai}: {e}"));
            }
        }
    }
    let fit = if found.len() >= 3 { breakdown_scaling_fit(&found).ok() } else { None };
    let gamma = fit.as_ref().map(|f| f.gamma);
    ok &= gamma.is_some_and(|g| (g - 0.6).abs() <= 0.15);
    let gamma = gamma.map_or("n/a".to_string(), |g| format!("{g:.3}"));
    let floor = BreakdownParams::default().floor;
    let detail = format!("{}; gamma = {gamma}; detector floor {floor}; {:.0}s", lines.join(", "), start.elapsed().as_secs_f64());
    check(ok, detail)
}

fn c9_cross_route() -> Outcome {
    let start = Instant::now();
    let checkpoints: Vec<f64> = (1..=24).map(|k| 0.02 * k as f64).collect();
    let ens = run(&quartic_config(PI / 2.0, 0.1, checkpoints, 100_000, 41, 1e-4)?)?;
    let (z, t) = worst_sigma(&ens, PI / 2.0, 0.5);
    check(z <= 3.0, format!("A_I = 0.1, t < 0.5: max deviation {z:.2} sigma at t = {t:.2}; {:.0}s", start.elapsed().as_secs_f64()))
}

const REFERENCE_C: [f64; 10] = [1.935482, 6.298496, 11.680971, 18.042635, 25.254605, 33.226111, 41.891010, 51.197908, 61.105360, 71.579037];
const REFERENCE_LN_NORMS: [f64; 11] = [0.08664, 0.21303, 0.40745, 0.69222, 1.02414, 1.3901, 1.7800, 2.1869, 2.6063, 3.0351, 3.4711];

fn c5_and_c6() -> (Outcome, Outcome) {
    let theta = PI / 2.0;
    let decs: Result<Vec<_>, _> = [1.0, 0.1, 10.0].iter().map(|&l| decompose_with_reliability(fokker_planck_omega2(l), l, theta, 150)).collect();
    let hermitian = decompose_with_reliability(3.0, 1.0, 0.0, 150);
    // the linear growth only sets in past n ≈ 10, so the fit needs a larger basis
    let wide = decompose_with_reliability(3.0, 1.0, theta, 600);
    let (decs, hermitian, wide) = match (decs, hermitian, wide) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let d = &decs[0];

    // |E_n| does not depend on θ; C_n is read off the θ = 0 spectrum
    let dc = (1..=10).map(|n| (hermitian.c[n] - REFERENCE_C[n - 1]).abs()).fold(0.0, f64::max);
    let dc_rot = (1..=10).map(|n| (d.c[n] - REFERENCE_C[n - 1]).abs()).fold(0.0, f64::max);
    let e0 = d.eigenvalues[0].norm();
    let darg = (1..=10).map(|n| (d.eigenvalues[n].arg() - theta / 4.0).abs()).fold(0.0, f64::max);
    let c5 = check(
        dc <= 1e-4 && e0 <= 1e-6 && darg <= 1e-3,
        format!("max |C_n - reference| = {dc:.1e} (theta = pi/2: {dc_rot:.1e}), |E_0| = {e0:.1e}, max |arg E_n - theta/4| = {darg:.1e}"),
    );

    let dn = (0..=10).map(|n| (d.norms[n].ln() - REFERENCE_LN_NORMS[n]).abs()).fold(0.0, f64::max);
    let n0 = ground_state_norm_exact(theta).map(|x| (x - d.norms[0]).abs()).unwrap_or(f64::INFINITY);
    let lam = decs[1..].iter().flat_map(|o| (0..=10).map(move |n| (o.norms[n] / d.norms[n]).ln().abs())).fold(0.0, f64::max);
    let c6 = match norm_growth_fit(&wide.norms[..wide.reliable_prefix()], 10) {
        Ok(f) => check(
            dn <= 1e-3 && n0 <= 1e-6 && (f.slope - 0.47).abs() <= 0.03 && (f.intercept + 1.34).abs() <= 0.1 && lam <= 1e-5,
            format!(
                "max |ln N_n - reference| = {dn:.1e}, N_0 error {n0:.1e}, fit {:.3} + {:.3} n over {} levels (N=600), lambda spread {lam:.1e}",
                f.intercept, f.slope, f.points
            ),
        ),
        Err(e) => Err(e.to_string()),
    };
    (c5, c6)
}

fn c7_spectrum_2d() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for (theta, want) in [(0.0, 2.07), (PI / 2.0, 1.92)] {
        let op = build_fp_matrix(1.0, theta, 1.0, 50).map_err(|e| e.to_string())?;
        let ev = spectrum_2d_real(&op, 12).map_err(|e| e.to_string())?;
        let e1 = ev.iter().skip(1).find(|e| e.im.abs() < 1e-8).copied().unwrap_or_default();
        // every complex eigenvalue comes with its conjugate
        let conj = ev[..ev.len() - 1].iter().all(|e| ev.iter().any(|f| (f - e.conj()).norm() <= 1e-8 * e.norm().max(1.0)));
        let gs = ground_state_vector(&build_fp_matrix(1.0, theta, 1.0, 100).map_err(|e| e.to_string())?, DEFAULT_SHIFT).map_err(|e| e.to_string())?;
        ok &= gs.e0.abs() < 0.02 && (e1.re - want).abs() <= 0.05 && conj;
        notes.push(format!("theta={theta:.3}: |E_0| = {:.4} (N=100), E_1 = {:.4} (N=50), conjugate pairs {conj}", gs.e0.abs(), e1.re));
    }
    let n = 50;
    let p = build_fp_matrix(1.0, PI / 2.0, 1.0, n).map_err(|e| e.to_string())?;
    let pt = build_fp_transpose_matrix(1.0, PI / 2.0, 1.0, n).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for r in 0..n * n {
        for &(c, a) in &pt.entries.rows[r] {
            worst = worst.max((a - p.entries.get(c, r)).abs() / a.abs().max(1.0));
        }
        for &(c, a) in &p.entries.rows[r] {
            worst = worst.max((a - pt.entries.get(c, r)).abs() / a.abs().max(1.0));
        }
    }
    ok &= worst <= 1e-12;
    notes.push(format!("transpose mismatch {worst:.1e}"));
    check(ok, format!("{}; {:.0}s", notes.join("; "), start.elapsed().as_secs_f64()))
}

fn c8_ground_state_moments() -> Outcome {
    let start = Instant::now();
    let theta = PI / 2.0;
    let exact = Complex64::new(0.441596, -0.182915);
    let rows = [(1.0, Complex64::new(0.54, -0.41)), (0.5, Complex64::new(0.48, -0.30)), (0.2, Complex64::new(0.45, -0.23)), (0.1, Complex64::new(0.44, -0.20))];
    let mut ok = true;
    let mut notes = Vec::new();
    for (ai, want) in rows {
        let op = build_fp_matrix(1.0, theta, ai, 150).map_err(|e| e.to_string())?;
        let gs = ground_state_vector(&op, DEFAULT_SHIFT).map_err(|e| e.to_string())?;
        let field = ground_state_function(&gs, Grid2D::default_for(1.0)).map_err(|e| e.to_string())?;
        let m = ground_state_moments(&gs, &field, 2).map_err(|e| e.to_string())?.value;
        ok &= (m - want).norm() <= 0.05;
        if ai >= 0.5 {
            ok &= (m - exact).norm() > 0.05;
        }
        notes.push(format!("A_I={ai}: {:.3}{:+.3}i", m.re, m.im));
    }
    check(ok, format!("{} (N=150); {:.0}s", notes.join(", "), start.elapsed().as_secs_f64()))
}

fn c10_harmonic() -> Outcome {
    let start = Instant::now();
    let theta = PI / 2.0;
    let mut ok = true;
    let mut notes = Vec::new();
    let checkpoints: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    for ai in [0.0, 1.0] {
        let f = || -> complex_langevin::Result<SimulationConfig> {
            SimulationConfig::new(Action::quadratic(1.0, theta)?, NoiseConfig::new(ai)?, checkpoints.clone(), 100_000, 71)?.with_delta(1e-4)
        };
        let cfg = f().map_err(|e| e.to_string())?;
        let ens = run(&cfg)?;
        let mut worst: f64 = 0.0;
        for c in &ens.checkpoints {
            let exact = harmonic_moment_flow(2, c.t, 1.0, theta, &BTreeMap::new()).map_err(|e| e.to_string())?;
            worst = worst.max((c.m2 - exact).norm() / c.se_m2_abs());
        }
        let gs = harmonic_ground_state(1.0, theta, ai).map_err(|e| e.to_string())?;
        let coarse = cfg.clone().with_delta(1e-3).map_err(|e| e.to_string())?;
        let hist = density_histogram_2d(&coarse, 5.0, HistogramGrid::square(4.0, 24)).map_err(|e| e.to_string())?;
        let l1 = hist.l1_distance(|x, y| gs.density(x, y));
        ok &= worst <= 3.0 && l1 < 0.05;
        notes.push(format!("A_I={ai}: max {worst:.2} sigma, L1 {l1:.4}"));
    }
    let mut gf: f64 = 0.0;
    for ai in [0.0, 0.5, 1.0, 2.0] {
        for j in [-1.5, -0.5, 0.3, 1.0, 2.0] {
            gf = gf.max(generating_functional_check(j, 1.0, theta, ai).map_err(|e| e.to_string())?);
        }
    }
    let mut norm_err: f64 = 0.0;
    for (th, n_max) in [(PI / 2.0, 30), (1.0, 40), (2.5, 12)] {
        let series = spectral_norm_generating_function(th, n_max).map_err(|e| e.to_string())?;
        let legendre = spectral_norms_legendre(th, n_max).map_err(|e| e.to_string())?;
        for (a, b) in series.iter().zip(&legendre) {
            norm_err = norm_err.max((a - b).abs() / b.abs());
        }
        for (a, b) in spectral_norms_closed_form(th).iter().zip(&series) {
            norm_err = norm_err.max((a - b).abs() / b.abs());
        }
    }
    ok &= gf < 1e-10 && norm_err <= 1e-12;
    notes.push(format!("generating functional {gf:.1e}, norms {norm_err:.1e}"));
    check(ok, format!("{}; {:.0}s", notes.join("; "), start.elapsed().as_secs_f64()))
}

fn main() -> ExitCode {
    // ACCEPTANCE_ONLY=1,5,7 restricts the run; default is every criterion
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let want = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |n: u32, r: Outcome| {
        match &r {
            Ok(d) => println!("PASS criterion {n}: {d}"),
            Err(d) => println!("FAIL criterion {n}: {d}"),
        }
        results.push((n, r));
    };
    if want(1) {
        report(1, c1_series());
    }
    if want(2) {
        report(2, c2_borel_equilibrium());
    }
    if want(5) || want(6) {
        let (c5, c6) = c5_and_c6();
        if want(5) {
            report(5, c5);
        }
        if want(6) {
            report(6, c6);
        }
    }
    if want(7) {
        report(7, c7_spectrum_2d());
    }
    if want(8) {
        report(8, c8_ground_state_moments());
    }
    if want(10) {
        report(10, c10_harmonic());
    }
    if want(3) {
        report(3, c3_langevin_theta_zero());
    }
    if want(9) {
        report(9, c9_cross_route());
    }
    if want(4) {
        report(4, c4_breakdown());
    }
    let failed: Vec<u32> = results.iter().filter(|(_, r)| r.is_err()).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
