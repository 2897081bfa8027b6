//! Command-line front end: `evolve`, `spectrum`, `matrix` and `validate`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen::EigenOptions;
use crate::error::Error;
use crate::floquet::{
    floquet_spectrum, low_level_shift, scan_vs_gamma, scan_vs_k, truncation_floor, ScanOptions,
    ScanResult, ScanStrength,
};
use crate::kick::{build_kick_matrix, kick_matrix_fourier_with, kick_matrix_quadrature, KickOptions, Route};
use crate::model::{make_initial_state, InitialState, SystemParams};
use crate::propagator::{evolve, kinetic_energy};

pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_EIGENSOLVER: i32 = 5;

const VALIDATE_UNITARITY_TOL: f64 = 1e-8;
const VALIDATE_CONVERGENCE_TOL: f64 = 1e-6;
const VALIDATE_LOW_LEVELS: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "ptkick", version, about = "Delta-kicked particle in a box with a PT-symmetric kick")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the one-period map and write the observables as CSV.
    Evolve(EvolveArgs),
    /// Floquet spectrum at one point or along a k- or γ-grid.
    Spectrum(SpectrumArgs),
    /// Dump the kick matrix as CSV.
    Matrix(CommonArgs),
    /// Route cross-check, unitarity and basis-convergence checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Box length.
    #[arg(long = "L")]
    pub length: Option<f64>,
    /// Wavelength of the kick potential.
    #[arg(long = "mu")]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kick period.
    #[arg(long = "T")]
    pub period: Option<f64>,
    #[arg(long)]
    pub n_basis: Option<usize>,
    #[arg(long)]
    pub dispersion_coeff: Option<f64>,
    /// Sets ε = K/T.
    #[arg(long = "K")]
    pub kick_strength: Option<f64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// quadrature, fourier or both.
    #[arg(long)]
    pub route: Option<String>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_kicks: Option<u64>,
    #[arg(long)]
    pub record_every: Option<u64>,
    #[arg(long)]
    pub initial_mode: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// a:b:step over k = 2π/μ.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// a:b:step over γ.
    #[arg(long)]
    pub gamma_grid: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Kicks for the kinetic-energy convergence check.
    #[arg(long)]
    pub n_kicks: Option<u64>,
    #[arg(long)]
    pub initial_mode: Option<usize>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID_CONFIG, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Domain(_) | Error::InvalidInput(_) => EXIT_INVALID_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Eigensolver { .. } => EXIT_EIGENSOLVER,
        _ => EXIT_NUMERICAL,
    }
}

const CONFIG_KEYS: &[&str] = &[
    "L",
    "mu",
    "epsilon",
    "gamma",
    "T",
    "n-basis",
    "dispersion-coeff",
    "K",
    "out",
    "route",
    "jobs",
    "n-kicks",
    "record-every",
    "initial-mode",
    "k-grid",
    "gamma-grid",
];

/// Flat `key = value` file. `#` starts a comment; underscores in keys are
/// read as dashes.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("config line {}: unknown key {key:?}", lineno + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::config(format!("config key {key}: cannot parse {v:?}"))))
            .transpose()
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

/// Inclusive `a:b:step` grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::config(format!("grid {spec:?}: expected a:b:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 || b < a {
        return Err(CliError::config(format!("grid {spec:?}: need finite a <= b and step > 0")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    if count > 1_000_000 {
        return Err(CliError::config(format!("grid {spec:?}: too many points")));
    }
    // Rounded to 12 decimals so 0.1-type steps print cleanly.
    Ok((0..=count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Everything shared by the subcommands after merging flags and config.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SystemParams,
    pub route: Route,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    file: ConfigFile,
}

impl RunConfig {
    /// `spectrum_defaults` makes T default to 1 when K is given without T.
    pub fn resolve(args: &CommonArgs, spectrum_defaults: bool) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let d = SystemParams::default();
        let kick_strength: Option<f64> = file.pick(args.kick_strength, "K")?;
        let epsilon: Option<f64> = file.pick(args.epsilon, "epsilon")?;
        let period_given: Option<f64> = file.pick(args.period, "T")?;
        let period = match (period_given, kick_strength) {
            (Some(t), _) => t,
            (None, Some(_)) if spectrum_defaults => 1.0,
            _ => d.period,
        };
        let epsilon = match (kick_strength, epsilon) {
            (Some(_), Some(_)) => return Err(CliError::config("give either --K or --epsilon, not both")),
            (Some(k), None) => k / period,
            (None, e) => e.unwrap_or(d.epsilon),
        };
        let params = SystemParams {
            length: file.pick(args.length, "L")?.unwrap_or(d.length),
            wavelength: file.pick(args.wavelength, "mu")?.unwrap_or(d.wavelength),
            epsilon,
            gamma: file.pick(args.gamma, "gamma")?.unwrap_or(d.gamma),
            period,
            n_basis: file.pick(args.n_basis, "n-basis")?.unwrap_or(d.n_basis),
            dispersion_coeff: file.pick(args.dispersion_coeff, "dispersion-coeff")?.unwrap_or(d.dispersion_coeff),
        };
        params.validate().map_err(|e| CliError::config(e.to_string()))?;
        let route = match file.pick(args.route.clone(), "route")? {
            Some(r) => r.parse::<Route>().map_err(|e| CliError::config(e.to_string()))?,
            None => Route::default(),
        };
        let jobs: Option<usize> = file.pick(args.jobs, "jobs")?;
        if jobs == Some(0) {
            return Err(CliError::config("--jobs must be >= 1"));
        }
        let out = file.pick(args.out.clone(), "out")?;
        Ok(Self { params, route, jobs, out, file })
    }

    fn kick_options(&self) -> KickOptions {
        KickOptions::default()
    }

    fn scan_options(&self) -> ScanOptions {
        ScanOptions { route: self.route, kick: self.kick_options(), jobs: self.jobs, ..ScanOptions::default() }
    }
}

/// CSV sink plus the stream for the human summary: stdout when the CSV goes
/// to a file, stderr when the CSV itself goes to stdout.
struct Sinks {
    csv: Box<dyn Write>,
    summary: Box<dyn Write>,
}

fn open_sinks(out: &Option<PathBuf>) -> Result<Sinks, CliError> {
    Ok(match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError {
                code: EXIT_IO,
                message: format!("cannot create {}: {e}", path.display()),
            })?;
            Sinks { csv: Box::new(BufWriter::new(f)), summary: Box::new(io::stdout()) }
        }
        None => Sinks { csv: Box::new(BufWriter::new(io::stdout())), summary: Box::new(io::stderr()) },
    })
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Evolve(a) => cmd_evolve(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::Matrix(a) => cmd_matrix(&a),
        Command::Validate(a) => cmd_validate(&a),
    }
}

fn install_jobs(jobs: Option<usize>) {
    if let Some(j) = jobs {
        // Only the first call per process takes effect, which is all a CLI run needs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
}

pub fn cmd_evolve(args: &EvolveArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(&args.common, false)?;
    install_jobs(cfg.jobs);
    let n_kicks = cfg.file.pick(args.n_kicks, "n-kicks")?.unwrap_or(1000);
    let record_every = cfg.file.pick(args.record_every, "record-every")?.unwrap_or(1);
    let mode = cfg.file.pick(args.initial_mode, "initial-mode")?.unwrap_or(1);
    if record_every == 0 {
        return Err(CliError::config("--record-every must be >= 1"));
    }
    let state = make_initial_state(&InitialState::SingleMode(mode), &cfg.params)
        .map_err(|e| CliError::config(e.to_string()))?;
    let kick = build_kick_matrix(&cfg.params, cfg.route, &cfg.kick_options())?;
    let (series, end) = evolve(&state, n_kicks, &kick, &cfg.params, record_every)?;
    let mut sinks = open_sinks(&cfg.out)?;
    series.write_csv(&mut sinks.csv)?;
    let final_norm = crate::propagator::norm(&end);
    writeln!(
        sinks.summary,
        "kicks={} records={} final_norm={:.12e} max_e_kin={:.12e} final_e_kin={:.12e}",
        n_kicks,
        series.len(),
        final_norm,
        series.max_kinetic(),
        kinetic_energy(&end, &cfg.params)
    )?;
    Ok(0)
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(&args.common, true)?;
    install_jobs(cfg.jobs);
    let k_grid: Option<String> = cfg.file.pick(args.k_grid.clone(), "k-grid")?;
    let gamma_grid: Option<String> = cfg.file.pick(args.gamma_grid.clone(), "gamma-grid")?;
    let opts = cfg.scan_options();
    let p = cfg.params;
    let (scan, floor_axis): (ScanResult, Option<Vec<SystemParams>>) = match (k_grid, gamma_grid) {
        (Some(_), Some(_)) => return Err(CliError::config("give at most one of --k-grid and --gamma-grid")),
        (Some(g), None) => {
            let grid = parse_grid(&g)?;
            let scan = scan_vs_k(&p, &grid, ScanStrength::Epsilon, &opts)?;
            let floors = grid.iter().map(|k| SystemParams { wavelength: 2.0 * std::f64::consts::PI / k, ..p }).collect();
            (scan, Some(floors))
        }
        (None, Some(g)) => (scan_vs_gamma(&p, &parse_grid(&g)?, &opts)?, None),
        (None, None) => (scan_vs_gamma(&p, &[p.gamma], &opts)?, Some(vec![p])),
    };
    let mut sinks = open_sinks(&cfg.out)?;
    scan.write_csv(&mut sinks.csv)?;
    let max_im = scan
        .points
        .iter()
        .flat_map(|pt| pt.spectrum.quasienergies().iter().map(|z| z.im.abs()))
        .fold(0.0, f64::max);
    let max_berr = scan.points.iter().filter_map(|pt| pt.spectrum.max_backward_error()).fold(0.0, f64::max);
    writeln!(
        sinks.summary,
        "points={} levels={} max_abs_im_phi={:.6e} max_backward_error={:.3e}",
        scan.points.len(),
        p.n_basis,
        max_im,
        max_berr
    )?;
    if let Some(axis) = floor_axis {
        let kick = cfg.kick_options();
        let floors: Vec<f64> = axis.par_iter().map(|q| truncation_floor(q, &kick)).collect::<Result<_, _>>()?;
        writeln!(sinks.summary, "truncation_floor={:.6e}", floors.into_iter().fold(0.0, f64::max))?;
    }
    if args.gamma_grid.is_some() || cfg.file.values.contains_key("gamma-grid") {
        match scan.breaking_onset {
            Some(g) => writeln!(sinks.summary, "breaking_onset={g}")?,
            None => writeln!(sinks.summary, "breaking_onset=none")?,
        }
    }
    Ok(0)
}

pub fn cmd_matrix(args: &CommonArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(args, false)?;
    install_jobs(cfg.jobs);
    let v = build_kick_matrix(&cfg.params, cfg.route, &cfg.kick_options())?;
    let mut sinks = open_sinks(&cfg.out)?;
    v.write_csv(&mut sinks.csv)?;
    let mut line = format!("route={} n={}", cfg.route, v.dim());
    if let Some(t) = v.achieved_tolerance() {
        line += &format!(" quadrature_delta={t:.3e}");
    }
    if let Some(d) = v.route_discrepancy() {
        line += &format!(" route_discrepancy={d:.3e}");
    }
    writeln!(sinks.summary, "{line}")?;
    Ok(0)
}

struct Check {
    name: &'static str,
    value: Result<f64, String>,
    limit: f64,
}

impl Check {
    fn passed(&self) -> bool {
        matches!(self.value, Ok(v) if v < self.limit)
    }
}

fn gram_block_defect(v: &ndarray::Array2<Complex64>, k: usize) -> f64 {
    let n = v.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let s: Complex64 = (0..n).map(|r| v[(r, i)].conj() * v[(r, j)]).sum();
            worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).norm());
        }
    }
    worst
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(&args.common, false)?;
    install_jobs(cfg.jobs);
    let n_kicks = cfg.file.pick(args.n_kicks, "n-kicks")?.unwrap_or(1000);
    let mode = cfg.file.pick(args.initial_mode, "initial-mode")?.unwrap_or(1);
    let p = cfg.params;
    let opts = cfg.kick_options();
    let fine = p.with_n_basis(2 * p.n_basis);
    let msg = |e: Error| e.to_string();

    let route = (|| {
        let q = kick_matrix_quadrature(&p, &opts.quadrature)?;
        let f = kick_matrix_fourier_with(&p, opts.coeff_cutoff, crate::kick::DEFAULT_MAX_HARMONIC)?;
        Ok::<_, Error>(q.max_abs_diff(&f))
    })()
    .map_err(msg);

    let unitarity = (|| {
        let v = kick_matrix_fourier_with(&p.with_gamma(0.0), opts.coeff_cutoff, crate::kick::DEFAULT_MAX_HARMONIC)?;
        Ok::<_, Error>(gram_block_defect(v.entries(), (p.n_basis / 2).max(1)))
    })()
    .map_err(msg);

    let kinetic = (|| {
        let run = |q: &SystemParams| -> Result<f64, Error> {
            let s = make_initial_state(&InitialState::SingleMode(mode), q)?;
            let v = build_kick_matrix(q, Route::Fourier, &opts)?;
            let (_, end) = evolve(&s, n_kicks, &v, q, n_kicks.max(1))?;
            Ok(kinetic_energy(&end, q))
        };
        let (a, b) = (run(&p)?, run(&fine)?);
        Ok::<_, Error>((a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
    })()
    .map_err(msg);

    let levels = (|| {
        let eig = EigenOptions::default();
        let spec = |q: &SystemParams| -> Result<_, Error> {
            floquet_spectrum(q, &build_kick_matrix(q, Route::Fourier, &opts)?, &eig)
        };
        let (a, b) = (spec(&p)?, spec(&fine)?);
        low_level_shift(&a, &b, VALIDATE_LOW_LEVELS.min(p.n_basis))
    })()
    .map_err(msg);

    let checks = [
        Check { name: "route cross-check (max |V_quad - V_fourier|)", value: route, limit: opts.route_tolerance },
        Check { name: "kick unitarity at gamma=0 (leading N/2 block)", value: unitarity, limit: VALIDATE_UNITARITY_TOL },
        Check { name: "e_kin basis convergence N -> 2N (relative)", value: kinetic, limit: VALIDATE_CONVERGENCE_TOL },
        Check { name: "low quasienergy convergence N -> 2N", value: levels, limit: VALIDATE_CONVERGENCE_TOL },
    ];
    let mut out = io::stdout().lock();
    writeln!(out, "{:<48} {:>12} {:>10}  result", "check", "value", "limit")?;
    for c in &checks {
        let value = match &c.value {
            Ok(v) => format!("{v:.3e}"),
            Err(_) => "error".to_string(),
        };
        writeln!(out, "{:<48} {:>12} {:>10.0e}  {}", c.name, value, c.limit, if c.passed() { "PASS" } else { "FAIL" })?;
        if let Err(e) = &c.value {
            writeln!(out, "    {e}")?;
        }
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len())?;
    Ok(if failed == 0 { 0 } else { EXIT_FAILED_CHECK })
}
