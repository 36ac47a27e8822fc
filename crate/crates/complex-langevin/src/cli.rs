//! Command-line front end. Every file written is a `#`-prefixed JSON metadata
//! line, a CSV header, then data rows.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::actions::{Action, NoiseConfig};
use crate::borel::{default_s_max, BorelOptions, BorelResult, BorelTabulation, DEFAULT_STEP, DEFAULT_TERMS};
use crate::error::{Error, Result};
use crate::harmonic;
use crate::io::{fmt_f64, write_table, MetaHeader};
use crate::langevin::{self, BreakdownParams, EnsembleMoments, HistogramGrid, SimulationConfig};
use crate::moments::{growth_fit, SeriesTable};
use crate::spectral1d;
use crate::spectral2d;

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "COMPLEX_LANGEVIN_OUT";

#[derive(Debug, Parser)]
#[command(name = "complex-langevin", version, about = "Complex Langevin, Borel resummation and Fokker-Planck spectra")]
#[command(arg_required_else_help = true, args_override_self = true)]
pub struct Cli {
    /// `key = value` file; `[name]` sections apply to that subcommand only
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory (default: $COMPLEX_LANGEVIN_OUT or .)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// cap on worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// exact series coefficients c_{p,n} and their growth fit
    Series(SeriesArgs),
    /// Borel sum b_p(s) and transform M_p(t)
    Borel(BorelArgs),
    /// Langevin ensemble moments, with breakdown detection against the Borel transform
    Simulate(SimulateArgs),
    /// t_c ∝ (A_I + a)^{−γ} fit on (A_I, t_c) pairs
    BreakdownFit(BreakdownFitArgs),
    /// sextic Fokker-Planck Hamiltonian: levels, C_n, spectral norms
    #[command(name = "spectrum-1d")]
    Spectrum1d(Spectrum1dArgs),
    /// two-variable Fokker-Planck operator: spectrum, ground state, moments
    #[command(name = "spectrum-2d")]
    Spectrum2d(Spectrum2dArgs),
    /// exact quadratic-action results and a Langevin histogram
    Harmonic(HarmonicArgs),
    /// Langevin, Borel and spectral m₂(t) on a shared grid
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AngleArgs {
    /// Wick angle in radians
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// sets θ = qπ, overriding --theta
    #[arg(long)]
    pub theta_frac: Option<f64>,
}

impl AngleArgs {
    pub fn value(&self) -> f64 {
        self.theta_frac.map(|q| q * std::f64::consts::PI).unwrap_or(self.theta)
    }
}

#[derive(Debug, Clone, Args)]
pub struct LangevinArgs {
    #[arg(long, default_value_t = 1.0)]
    pub ai: f64,
    #[arg(long, default_value_t = langevin::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 100_000)]
    pub ntraj: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// number of equally spaced checkpoints on (0, tfinal]
    #[arg(long, default_value_t = 20)]
    pub checkpoints: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tfinal: f64,
}

impl LangevinArgs {
    fn grid(&self) -> Vec<f64> {
        let n = self.checkpoints.max(1);
        (1..=n).map(|k| self.tfinal * k as f64 / n as f64).collect()
    }

    fn echo(&self, meta: MetaHeader) -> MetaHeader {
        meta.with("ai", self.ai)
            .with("delta", self.delta)
            .with("ntraj", self.ntraj)
            .with("seed", self.seed)
            .with("checkpoints", self.checkpoints)
            .with("tfinal", self.tfinal)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// largest order n kept
    #[arg(long, default_value_t = 12)]
    pub nterms: usize,
    /// build the table by iterating the Langevin operator instead of the recursion
    #[arg(long)]
    pub operator: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BorelArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[arg(long, default_value_t = DEFAULT_TERMS)]
    pub nterms: usize,
    #[arg(long)]
    pub smax: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tfinal: f64,
    #[arg(long, default_value_t = 40)]
    pub nt: usize,
    /// keep every k-th point of b_p(s)
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[command(flatten)]
    pub run: LangevinArgs,
    /// skip the Borel reference and breakdown detection
    #[arg(long)]
    pub no_reference: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BreakdownFitArgs {
    /// pairs `ai:tc` separated by commas
    #[arg(long, default_value = "1:0.16,0.5:0.22,0.2:0.41,0.1:0.67")]
    pub points: String,
}

#[derive(Debug, Clone, Args)]
pub struct Spectrum1dArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// ω² of the sextic Hamiltonian (default 3√λ)
    #[arg(long)]
    pub omega2: Option<f64>,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[arg(long = "n", default_value_t = 150)]
    pub n_trunc: usize,
    #[arg(long, default_value_t = 30)]
    pub levels: usize,
}

#[derive(Debug, Clone, Args)]
pub struct Spectrum2dArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[arg(long, default_value_t = 1.0)]
    pub ai: f64,
    #[arg(long = "n", default_value_t = 50)]
    pub n_trunc: usize,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    /// also sample φ₀ on a grid and compute ⟨z²⟩, ⟨z⁴⟩
    #[arg(long)]
    pub ground_state: bool,
    /// points per axis of the φ₀ grid
    #[arg(long, default_value_t = spectral2d::DEFAULT_GRID_POINTS)]
    pub grid: usize,
    /// skip the dense eigensolve
    #[arg(long)]
    pub no_spectrum: bool,
}

#[derive(Debug, Clone, Args)]
pub struct HarmonicArgs {
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[arg(long, default_value_t = 1.0)]
    pub ai: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tfinal: f64,
    #[arg(long, default_value_t = 40)]
    pub nt: usize,
    /// highest spectral norm N_n
    #[arg(long, default_value_t = 30)]
    pub nmax: usize,
    /// Langevin endpoints for a histogram of φ₀ (0 skips)
    #[arg(long, default_value_t = 0)]
    pub ntraj: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[command(flatten)]
    pub run: LangevinArgs,
    /// truncation for the two-variable ground state (0 skips)
    #[arg(long, default_value_t = 0)]
    pub n_spectral: usize,
}

/// Parses `args` (program name first), runs, and returns the exit code:
/// 0 success, 1 usage error, 2 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse_with_config(&argv) {
        Ok(c) => c,
        Err(Usage::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            // bare invocation prints help but is still a usage error
            return if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { code };
        }
        Err(Usage::Config(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: thread pool already initialized: {e}");
        }
    }
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(Error::InvalidParameter(m)) | Err(Error::Config(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            2
        }
    }
}

enum Usage {
    Clap(clap::Error),
    Config(String),
}

/// Flags win over the file: file entries are placed before the user's own flags
/// and later occurrences override earlier ones.
fn parse_with_config(argv: &[OsString]) -> std::result::Result<Cli, Usage> {
    let cli = Cli::try_parse_from(argv).map_err(Usage::Clap)?;
    let Some(path) = cli.config.clone() else {
        return Ok(cli);
    };
    let text = fs::read_to_string(&path).map_err(|e| Usage::Config(format!("{}: {e}", path.display())))?;
    let sections = parse_config(&text).map_err(Usage::Config)?;
    let name = subcommand_name(&cli.command);
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(name).expect("known subcommand");
    let accepted: Vec<String> = sub.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let global: Vec<String> = cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let mut injected: Vec<OsString> = Vec::new();
    for section in ["", name] {
        let Some(entries) = sections.get(section) else { continue };
        for (k, v) in entries {
            let key = k.replace('_', "-");
            if key == "config" {
                continue;
            }
            if !accepted.contains(&key) && !global.contains(&key) {
                if section.is_empty() {
                    continue;
                }
                return Err(Usage::Config(format!("unknown key `{k}` in [{name}]")));
            }
            match v.as_str() {
                "true" => injected.push(format!("--{key}").into()),
                "false" => {}
                _ => {
                    injected.push(format!("--{key}").into());
                    injected.push(v.into());
                }
            }
        }
    }
    let pos = argv.iter().position(|a| a.to_str() == Some(name)).expect("subcommand present");
    let mut merged: Vec<OsString> = argv[..=pos].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&argv[pos + 1..]);
    Cli::try_parse_from(&merged).map_err(Usage::Clap)
}

/// `key = value` lines grouped under `[section]`; `#` starts a comment.
pub fn parse_config(text: &str) -> std::result::Result<BTreeMap<String, Vec<(String, String)>>, String> {
    let mut out: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| format!("line {}: unterminated section", i + 1))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let v = v.trim().trim_matches('"');
        out.entry(section.clone()).or_default().push((k.trim().to_string(), v.to_string()));
    }
    Ok(out)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Series(_) => "series",
        Command::Borel(_) => "borel",
        Command::Simulate(_) => "simulate",
        Command::BreakdownFit(_) => "breakdown-fit",
        Command::Spectrum1d(_) => "spectrum-1d",
        Command::Spectrum2d(_) => "spectrum-2d",
        Command::Harmonic(_) => "harmonic",
        Command::Compare(_) => "compare",
    }
}

struct Output {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cli: &Cli) -> Result<Self> {
        let dir = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, format: cli.format, written: Vec::new() })
    }

    /// Renders with `f` into memory, then writes CSV or its JSON mirror.
    fn emit(&mut self, stem: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let text = String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))?;
        let (path, body) = match self.format {
            Format::Csv => (self.dir.join(format!("{stem}.csv")), text),
            Format::Json => {
                let v = csv_to_json(&text)?;
                let s = serde_json::to_string_pretty(&v).map_err(|e| Error::Config(e.to_string()))?;
                (self.dir.join(format!("{stem}.json")), s + "\n")
            }
        };
        write_file(&path, body.as_bytes())?;
        self.written.push(path);
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// `{"meta": …, "columns": […], "rows": [[…]]}` from the self-describing CSV form.
pub fn csv_to_json(text: &str) -> Result<Value> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Config("empty output".into()))?;
    let meta: Value = first
        .strip_prefix("# ")
        .and_then(|s| serde_json::from_str(s).ok())
        .ok_or_else(|| Error::Config("missing metadata line".into()))?;
    let columns: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Value> = lines
        .map(|l| {
            Value::Array(
                l.split(',')
                    .map(|c| match c.parse::<f64>() {
                        Ok(v) if v.is_finite() => json!(v),
                        _ => json!(c),
                    })
                    .collect(),
            )
        })
        .collect();
    let mut m = Map::new();
    m.insert("meta".into(), meta);
    m.insert("columns".into(), json!(columns));
    m.insert("rows".into(), Value::Array(rows));
    Ok(Value::Object(m))
}

/// Runs the parsed command and returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(cli)?;
    match &cli.command {
        Command::Series(a) => series(a, &mut out)?,
        Command::Borel(a) => borel(a, &mut out)?,
        Command::Simulate(a) => simulate(a, &mut out)?,
        Command::BreakdownFit(a) => breakdown_fit(a, &mut out)?,
        Command::Spectrum1d(a) => spectrum_1d(a, &mut out)?,
        Command::Spectrum2d(a) => spectrum_2d(a, &mut out)?,
        Command::Harmonic(a) => harmonic_cmd(a, &mut out)?,
        Command::Compare(a) => compare(a, &mut out)?,
    }
    Ok(out.written)
}

fn series(a: &SeriesArgs, out: &mut Output) -> Result<()> {
    let p_max = a.p.max(2);
    let table = if a.operator {
        SeriesTable::via_operator(p_max, a.nterms)?
    } else {
        SeriesTable::via_recursion(p_max, a.nterms)?
    };
    let meta = MetaHeader::new("series")
        .with("p", a.p)
        .with("nterms", a.nterms)
        .with("method", if a.operator { "operator" } else { "recursion" });
    out.emit(&format!("series_p{}", a.p), |w| table.write_csv(w, &meta, &[a.p]))?;
    for (n, c) in table.row(a.p) {
        println!("c[{},{n}] = {c}", a.p);
    }
    match growth_fit(a.p, &table) {
        Ok(fit) => {
            let meta = MetaHeader::new("series_growth_fit").with("p", a.p).with("nterms", a.nterms);
            let row = vec![a.p.to_string(), fmt_f64(fit.alpha_p), fmt_f64(fit.beta_p), fmt_f64(fit.residual), fit.points.to_string()];
            out.emit(&format!("series_fit_p{}", a.p), |w| write_table(w, &meta, &["p", "alpha_p", "beta_p", "rms_residual", "points"], &[row]))?;
            println!("growth fit: alpha_p = {:.5}, beta_p = {:.5}", fit.alpha_p, fit.beta_p);
        }
        Err(Error::InsufficientData(m)) => println!("growth fit skipped: {m}"),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn t_grid(tfinal: f64, nt: usize) -> Result<Vec<f64>> {
    if !(tfinal > 0.0) || nt == 0 {
        return Err(Error::InvalidParameter("need tfinal > 0 and at least one time".into()));
    }
    Ok((1..=nt).map(|k| tfinal * k as f64 / nt as f64).collect())
}

fn borel(a: &BorelArgs, out: &mut Output) -> Result<()> {
    let theta = a.angle.value();
    let grid = t_grid(a.tfinal, a.nt)?;
    let opts = BorelOptions { n_terms: a.nterms, s_max: a.smax, step: a.step };
    let res = BorelResult::compute(a.p, theta, a.lambda, &grid, opts)?;
    out.emit(&format!("borel_transform_p{}", a.p), |w| res.write_transform_csv(w))?;
    out.emit(&format!("borel_sum_p{}", a.p), |w| res.write_sum_csv(w, a.stride))?;
    if let (Some(t), Some(m)) = (res.t_grid.last(), res.m_values.last()) {
        println!("M_{}({t}) = {:.6} {:+.6}i", a.p, m.re, m.im);
    }
    if res.unstable {
        eprintln!("warning: Borel sum unstable under term halving on part of [0, s_max]");
    }
    Ok(())
}

fn borel_reference(lambda: f64, theta: f64) -> Result<impl Fn(f64) -> Result<Complex64>> {
    let alpha = 0.5 * lambda.sqrt();
    let tab = BorelTabulation::cached(2, alpha, DEFAULT_TERMS, default_s_max(alpha), DEFAULT_STEP)?;
    Ok(move |t: f64| tab.transform(theta, t).map(|v| v.value))
}

fn run_ensemble(action: Action, r: &LangevinArgs) -> Result<EnsembleMoments> {
    let cfg = SimulationConfig::new(action, NoiseConfig::new(r.ai)?, r.grid(), r.ntraj, r.seed)?.with_delta(r.delta)?;
    langevin::ensemble_moments(&cfg)
}

fn simulate(a: &SimulateArgs, out: &mut Output) -> Result<()> {
    let theta = a.angle.value();
    let action = Action::quartic(a.lambda, theta)?;
    let ens = run_ensemble(action, &a.run)?;
    let base = a.run.echo(MetaHeader::new("langevin_moments").with("lambda", a.lambda).with("theta", theta));
    let mut meta = base.with("n_excluded", ens.n_excluded);
    if !a.no_reference {
        let reference = borel_reference(a.lambda, theta)?;
        let refs = ens.checkpoints.iter().map(|c| reference(c.t)).collect::<Result<Vec<_>>>()?;
        let tc = langevin::detect_breakdown_values(&ens.checkpoints, &refs, BreakdownParams::default());
        meta = meta.with("t_c", tc);
        match tc {
            Some(t) => println!("breakdown detected at t_c = {t}"),
            None => println!("no breakdown on the checkpoint grid"),
        }
    }
    out.emit("simulate", |w| ens.write_csv(w, &meta))
}

/// `ai:tc` pairs.
pub fn parse_points(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (x, y) = p
                .split_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("expected ai:tc, got `{p}`")))?;
            let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("`{v}`: {e}")));
            Ok((parse(x)?, parse(y)?))
        })
        .collect()
}

fn breakdown_fit(a: &BreakdownFitArgs, out: &mut Output) -> Result<()> {
    let pts = parse_points(&a.points)?;
    let fit = langevin::breakdown_scaling_fit(&pts)?;
    println!("gamma = {:.4}, alpha = {:.4}, c = {:.4}", fit.gamma, fit.alpha_shift, fit.amplitude);
    let meta = MetaHeader::new("breakdown_fit")
        .with("points", &pts)
        .with("gamma", fit.gamma)
        .with("alpha_shift", fit.alpha_shift)
        .with("amplitude", fit.amplitude)
        .with("residual", fit.residual);
    let rows: Vec<Vec<String>> = pts.iter().map(|&(ai, tc)| vec![fmt_f64(ai), fmt_f64(tc), fmt_f64(fit.predict(ai))]).collect();
    out.emit("breakdown_fit", |w| write_table(w, &meta, &["ai", "t_c", "t_c_fit"], &rows))
}

fn spectrum_1d(a: &Spectrum1dArgs, out: &mut Output) -> Result<()> {
    let theta = a.angle.value();
    let omega2 = a.omega2.unwrap_or_else(|| spectral1d::fokker_planck_omega2(a.lambda));
    let dec = spectral1d::decompose_with_reliability(omega2, a.lambda, theta, a.n_trunc)?;
    out.emit("spectrum_1d", |w| dec.write_csv(w, a.levels))?;
    println!("{} reliable levels; E_0 = {:.3e}", dec.reliable_prefix(), dec.eigenvalues[0].norm());
    Ok(())
}

fn spectrum_2d(a: &Spectrum2dArgs, out: &mut Output) -> Result<()> {
    let theta = a.angle.value();
    let op = spectral2d::build_fp_matrix(a.lambda, theta, a.ai, a.n_trunc)?;
    if !a.no_spectrum {
        let ev = spectral2d::spectrum_2d_real(&op, a.levels)?;
        out.emit("spectrum_2d", |w| spectral2d::write_spectrum_csv(w, &op, &ev))?;
        for (k, e) in ev.iter().take(4).enumerate() {
            println!("E_{k} = {:.5} {:+.5}i", e.re, e.im);
        }
    }
    if a.ground_state {
        let gs = spectral2d::ground_state_vector(&op, spectral2d::DEFAULT_SHIFT)?;
        let mut grid = spectral2d::Grid2D::default_for(a.lambda);
        grid.points = a.grid;
        let field = spectral2d::ground_state_function(&gs, grid)?;
        out.emit("ground_state_grid", |w| spectral2d::write_grid_csv(w, &field))?;
        let moms = [2, 4].iter().map(|&p| spectral2d::ground_state_moments(&gs, &field, p)).collect::<Result<Vec<_>>>()?;
        let meta = MetaHeader::new("ground_state_moments")
            .with("lambda", a.lambda)
            .with("theta", theta)
            .with("ai", a.ai)
            .with("n", a.n_trunc)
            .with("e0", gs.e0)
            .with("residual", gs.residual);
        out.emit("ground_state_moments", |w| spectral2d::write_moments_csv(w, &meta, &moms))?;
        println!("<z^2> = {:.4} {:+.4}i (E_0 = {:.2e})", moms[0].value.re, moms[0].value.im, gs.e0);
    }
    Ok(())
}

fn harmonic_cmd(a: &HarmonicArgs, out: &mut Output) -> Result<()> {
    let theta = a.angle.value();
    let grid = t_grid(a.tfinal, a.nt)?;
    out.emit("harmonic_flow", |w| harmonic::write_flow_csv(w, a.omega, theta, &grid))?;
    out.emit("harmonic_norms", |w| {
        let norms = harmonic::spectral_norms_legendre(theta, a.nmax)?;
        harmonic::write_norms_csv(w, theta, &norms)
    })?;
    let gs = harmonic::harmonic_ground_state(a.omega, theta, a.ai)?;
    let meta = MetaHeader::new("harmonic_ground_state");
    out.emit("harmonic_ground_state", |w| gs.write_csv(w, &meta))?;
    let m2 = gs.moment(2)?;
    println!("ground state: A0 = {:.6}, B0 = {:.6}, C0 = {:.6}; <z^2> = {:.6} {:+.6}i", gs.a0, gs.b0, gs.c0, m2.re, m2.im);
    if a.ntraj > 0 {
        let action = Action::quadratic(a.omega, theta)?;
        let cfg = SimulationConfig::new(action, NoiseConfig::new(a.ai)?, vec![a.tfinal], a.ntraj, a.seed)?.with_delta(a.delta)?;
        let half = 4.0 * (gs.covariance().0.max(gs.covariance().2)).sqrt();
        let hist = langevin::density_histogram_2d(&cfg, a.tfinal, HistogramGrid::square(half, 24))?;
        let l1 = hist.l1_distance(|x, y| gs.density(x, y));
        let meta = MetaHeader::new("harmonic_histogram")
            .with("omega", a.omega)
            .with("theta", theta)
            .with("ai", a.ai)
            .with("ntraj", a.ntraj)
            .with("delta", a.delta)
            .with("seed", a.seed)
            .with("l1_to_ground_state", l1);
        out.emit("harmonic_histogram", |w| hist.write_csv(w, &meta))?;
        println!("histogram L1 distance to φ0: {l1:.4}");
    }
    Ok(())
}

fn compare(a: &CompareArgs, out: &mut Output) -> Result<()> {
    let theta = a.angle.value();
    let action = Action::quartic(a.lambda, theta)?;
    let ens = run_ensemble(action, &a.run)?;
    let reference = borel_reference(a.lambda, theta)?;
    let refs = ens.checkpoints.iter().map(|c| reference(c.t)).collect::<Result<Vec<_>>>()?;
    let tc = langevin::detect_breakdown_values(&ens.checkpoints, &refs, BreakdownParams::default());
    let spectral = if a.n_spectral > 0 {
        let op = spectral2d::build_fp_matrix(a.lambda, theta, a.run.ai, a.n_spectral)?;
        let gs = spectral2d::ground_state_vector(&op, spectral2d::DEFAULT_SHIFT)?;
        let field = spectral2d::ground_state_function(&gs, spectral2d::Grid2D::default_for(a.lambda))?;
        Some(spectral2d::ground_state_moments(&gs, &field, 2)?.value)
    } else {
        None
    };
    let exact = action.boltzmann_moment(2)?;
    let meta = a
        .run
        .echo(MetaHeader::new("compare").with("lambda", a.lambda).with("theta", theta))
        .with("n_spectral", a.n_spectral)
        .with("t_c", tc)
        .with("n_excluded", ens.n_excluded);
    let rows: Vec<Vec<String>> = ens
        .checkpoints
        .iter()
        .zip(&refs)
        .map(|(c, m)| {
            let s = spectral.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            vec![
                fmt_f64(c.t),
                fmt_f64(c.m2.re),
                fmt_f64(c.m2.im),
                fmt_f64(c.se_m2.re),
                fmt_f64(c.se_m2.im),
                fmt_f64(m.re),
                fmt_f64(m.im),
                fmt_f64(s.re),
                fmt_f64(s.im),
                fmt_f64(exact.re),
                fmt_f64(exact.im),
            ]
        })
        .collect();
    let header = [
        "t",
        "re_m2_langevin",
        "im_m2_langevin",
        "se_re",
        "se_im",
        "re_m2_borel",
        "im_m2_borel",
        "re_m2_spectral_eq",
        "im_m2_spectral_eq",
        "re_m2_exact_eq",
        "im_m2_exact_eq",
    ];
    out.emit("compare", |w| write_table(w, &meta, &header, &rows))?;
    match tc {
        Some(t) => println!("breakdown flagged at t = {t}"),
        None => println!("no breakdown on the checkpoint grid"),
    }
    Ok(())
}
