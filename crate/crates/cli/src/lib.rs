//! Command-line driver: configuration files, experiment orchestration and CSV
//! output with a run manifest.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use homodyne_squeeze::analysis::{fit_power_law, FitResult};
use homodyne_squeeze::dynamics::DriveFlags;
use homodyne_squeeze::integrator::{reference_dt, TrajectorySeed};
use homodyne_squeeze::model::{ParamsHz, PhysicalParams};
use homodyne_squeeze::observables::{
    collective_spin, dressed_frequencies, spin_variances, steady_scan_frequency, steady_scan_jz,
};
use homodyne_squeeze::oracle::{joint_trajectory, TruncatedSystem};
use homodyne_squeeze::protocol::{
    ensemble_correlation, run_squeezing, verification_ensemble, SqueezingOptions, SqueezingTrace,
    VerificationTiming,
};
use homodyne_squeeze::model::two_level_pure_state;
use log::info;
use num_complex::Complex64;

const TAU: f64 = std::f64::consts::TAU;
pub const MANIFEST_NAME: &str = "manifest.txt";
/// Agreement required by `oracle-check`.
pub const ORACLE_TOLERANCE: f64 = 1e-4;

/// Run options that may appear in a configuration file; flags override them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub dt_ns: Option<f64>,
    pub duration_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub hz: ParamsHz,
    pub params: PhysicalParams,
    pub options: RunOptions,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("line {line}: cannot parse `{value}` for `{key}`"))
}

/// Parses `key = value` lines; `#` starts a comment. Missing keys keep the
/// default parameters.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut hz = ParamsHz::default();
    let mut options = RunOptions::default();
    let mut seen = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line}: expected `key = value`, got `{content}`"))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(first) = seen.insert(key.to_string(), line) {
            bail!("line {line}: `{key}` already set on line {first}");
        }
        match key {
            "n_atoms" => hz.n_atoms = parse_value(key, value, line)?,
            "omega_c_hz" => hz.omega_c = parse_value(key, value, line)?,
            "omega32_hz" => hz.omega_32 = parse_value(key, value, line)?,
            "omega21_hz" => hz.omega_21 = parse_value(key, value, line)?,
            "kappa_hz" => hz.kappa = parse_value(key, value, line)?,
            "g_hz" => hz.g = parse_value(key, value, line)?,
            "gamma_hz" => hz.gamma = parse_value(key, value, line)?,
            "chi_hz" => hz.chi = parse_value(key, value, line)?,
            "omega_p_offset_hz" => hz.omega_p_offset = Some(parse_value(key, value, line)?),
            "omega_prob_amp_sqrthz" => hz.omega_prob_amp = parse_value(key, value, line)?,
            "omega_m_offset_hz" => hz.omega_m_offset = parse_value(key, value, line)?,
            "omega_mw_amp_hz" => hz.omega_mw_amp = parse_value(key, value, line)?,
            "eta" => hz.eta = parse_value(key, value, line)?,
            "seed" => options.seed = Some(parse_value(key, value, line)?),
            "trajectories" => options.trajectories = Some(parse_value(key, value, line)?),
            "dt_ns" => options.dt_ns = Some(parse_value(key, value, line)?),
            "duration_us" => options.duration_us = Some(parse_value(key, value, line)?),
            _ => bail!("line {line}: unknown key `{key}`"),
        }
    }
    let params = hz.to_angular()?;
    Ok(Config { hz, params, options })
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

/// Configuration text that reproduces `hz` exactly.
pub fn config_text(hz: &ParamsHz, params: &PhysicalParams) -> String {
    let offset = hz
        .omega_p_offset
        .unwrap_or_else(|| (params.omega_p - params.omega_c) / TAU);
    let rows: [(&str, String); 13] = [
        ("n_atoms", hz.n_atoms.to_string()),
        ("omega_c_hz", format!("{:?}", hz.omega_c)),
        ("omega32_hz", format!("{:?}", hz.omega_32)),
        ("omega21_hz", format!("{:?}", hz.omega_21)),
        ("kappa_hz", format!("{:?}", hz.kappa)),
        ("g_hz", format!("{:?}", hz.g)),
        ("gamma_hz", format!("{:?}", hz.gamma)),
        ("chi_hz", format!("{:?}", hz.chi)),
        ("omega_p_offset_hz", format!("{offset:?}")),
        ("omega_prob_amp_sqrthz", format!("{:?}", hz.omega_prob_amp)),
        ("omega_m_offset_hz", format!("{:?}", hz.omega_m_offset)),
        ("omega_mw_amp_hz", format!("{:?}", hz.omega_mw_amp)),
        ("eta", format!("{:?}", hz.eta)),
    ];
    rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[derive(Debug, Parser)]
#[command(name = "hsq", version, about = "Conditional spin squeezing in a probed atom-cavity system")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value parameter file (Hz units)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// Integration step in ns (default: a quarter of the resolution bound)
    #[arg(long = "dt-ns", global = true)]
    dt_ns: Option<f64>,
    #[arg(long = "duration-us", global = true)]
    duration_us: Option<f64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    N,
    Gamma,
    Chi,
    Eta,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady cavity amplitude against probe frequency
    ScanFrequency {
        /// Half-width of the scan around the optical transition
        #[arg(long, default_value_t = 30.0)]
        span_mhz: f64,
        #[arg(long, default_value_t = 0.2)]
        step_mhz: f64,
    },
    /// Steady cavity amplitude against the population imbalance
    ScanJz {
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Continuous probing of a coherent state: spin time series and fits
    Squeeze {
        /// Probe offset from the upper dressed state
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        probe_detuning_mhz: f64,
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Minimal squeezing against N, γ, χ or η
    Scaling {
        #[arg(long, value_enum, default_value_t = Sweep::N)]
        sweep: Sweep,
        /// Comma-separated values (N, Hz, Hz or η)
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Switch off atomic decay and dephasing
        #[arg(long)]
        ideal: bool,
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Generation and verification sequence over an ensemble
    Verify {
        #[arg(long, default_value_t = 5.0)]
        probe_us: f64,
    },
    /// Joint oracle and moment-equation run at N ≤ 3
    OracleCheck {
        #[arg(long, default_value_t = 2)]
        atoms: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Probe amplitude relative to the configured one
        #[arg(long, default_value_t = 0.03)]
        probe_scale: f64,
    },
    /// Repeat the run recorded in a manifest
    Rerun { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ScanFrequency { .. } => "scan-frequency",
            Command::ScanJz { .. } => "scan-jz",
            Command::Squeeze { .. } => "squeeze",
            Command::Scaling { .. } => "scaling",
            Command::Verify { .. } => "verify",
            Command::OracleCheck { .. } => "oracle-check",
            Command::Rerun { .. } => "rerun",
        }
    }
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

struct Resolved {
    config: Config,
    seed: u64,
    trajectories: Option<usize>,
    dt: Option<f64>,
    duration: Option<f64>,
    out: PathBuf,
    /// Run options after flags were applied, as recorded in the manifest.
    options: RunOptions,
}

fn execute(cli: Cli, argv: &[OsString]) -> Result<()> {
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest, &cli.common.out);
    }
    let config = match &cli.common.config {
        Some(path) => load_config(path)?,
        None => parse_config("")?,
    };
    execute_with(cli, config, argv)
}

fn execute_with(cli: Cli, config: Config, argv: &[OsString]) -> Result<()> {
    let c = &cli.common;
    let dt_ns = c.dt_ns.or(config.options.dt_ns);
    if let Some(dt) = dt_ns {
        if !(dt > 0.0 && dt.is_finite()) {
            bail!("--dt-ns must be positive, got {dt}");
        }
    }
    let duration_us = c.duration_us.or(config.options.duration_us);
    if let Some(d) = duration_us {
        if !(d > 0.0 && d.is_finite()) {
            bail!("--duration-us must be positive, got {d}");
        }
    }
    let r = Resolved {
        seed: c.seed.or(config.options.seed).unwrap_or(0),
        trajectories: c.trajectories.or(config.options.trajectories),
        dt: dt_ns.map(|v| v * 1e-9),
        duration: duration_us.map(|v| v * 1e-6),
        out: c.out.clone(),
        options: RunOptions {
            seed: Some(c.seed.or(config.options.seed).unwrap_or(0)),
            trajectories: c.trajectories.or(config.options.trajectories),
            dt_ns,
            duration_us,
        },
        config,
    };
    fs::create_dir_all(&r.out).with_context(|| format!("cannot create {}", r.out.display()))?;
    info!("{} → {}", cli.command.name(), r.out.display());
    let dt_used = match &cli.command {
        Command::ScanFrequency { span_mhz, step_mhz } => scan_frequency(&r, *span_mhz, *step_mhz)?,
        Command::ScanJz { points } => scan_jz(&r, *points)?,
        Command::Squeeze { probe_detuning_mhz, stride } => squeeze(&r, *probe_detuning_mhz, *stride)?,
        Command::Scaling { sweep, values, ideal, stride } => scaling(&r, *sweep, values, *ideal, *stride)?,
        Command::Verify { probe_us } => verify(&r, *probe_us)?,
        Command::OracleCheck { atoms, steps, probe_scale } => oracle_check(&r, *atoms, *steps, *probe_scale)?,
        Command::Rerun { .. } => unreachable!("handled before configuration"),
    };
    write_manifest(&r, cli.command.name(), dt_used, argv)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn trajectory_count(r: &Resolved, default: usize) -> Result<usize> {
    let n = r.trajectories.unwrap_or(default);
    if n == 0 {
        bail!("--trajectories must be at least 1");
    }
    Ok(n)
}

fn scan_frequency(r: &Resolved, span_mhz: f64, step_mhz: f64) -> Result<Option<f64>> {
    if !(step_mhz > 0.0 && span_mhz > 0.0) {
        bail!("scan span and step must be positive");
    }
    let p = r.config.params;
    let half = (span_mhz / step_mhz).round() as i64;
    let offsets: Vec<f64> = (-half..=half).map(|k| k as f64 * step_mhz).collect();
    let grid: Vec<f64> = offsets.iter().map(|o| p.omega_32 + TAU * o * 1e6).collect();
    let a = steady_scan_frequency(&p, &grid)?;
    let rows: Vec<Vec<f64>> = offsets.iter().zip(&a).map(|(o, v)| vec![*o, v.re, v.im]).collect();
    write_csv(&r.out.join("scan_frequency.csv"), &["detuning_mhz", "re_a", "im_a"], &rows)?;
    let (up, down) = dressed_frequencies(&p);
    println!(
        "dressed states at {:+.4} / {:+.4} MHz from the optical transition",
        (up - p.omega_32) / TAU / 1e6,
        (down - p.omega_32) / TAU / 1e6
    );
    Ok(None)
}

fn scan_jz(r: &Resolved, points: usize) -> Result<Option<f64>> {
    if points < 2 {
        bail!("--points must be at least 2");
    }
    let grid: Vec<f64> = (0..points).map(|k| -0.5 + k as f64 / (points - 1) as f64).collect();
    let a = steady_scan_jz(&r.config.params, &grid)?;
    let rows: Vec<Vec<f64>> = grid.iter().zip(&a).map(|(j, v)| vec![*j, v.re, v.im]).collect();
    write_csv(&r.out.join("scan_jz.csv"), &["jz_over_n", "re_a", "im_a"], &rows)?;
    Ok(None)
}

const SQUEEZE_HEADER: [&str; 11] = [
    "time_us", "jx", "jy", "jz", "djx", "djy", "djz", "xi2", "re_a", "im_a", "photocurrent",
];

/// Snapshot rows; the photocurrent column is the mean current over the steps
/// since the previous snapshot (NaN at t = 0).
fn squeeze_rows(trace: &SqueezingTrace) -> Vec<Vec<f64>> {
    let rec = &trace.record;
    let n = rec.params.n_atoms;
    let dt = rec.segments.first().map(|s| s.dt).unwrap_or(f64::NAN);
    let mut last_step = 0usize;
    rec.times
        .iter()
        .zip(&rec.states)
        .zip(&trace.xi2)
        .map(|((&t, s), &xi2)| {
            let spin = collective_spin(s, n);
            let var = spin_variances(s, n).map(|v| v.raw).unwrap_or([f64::NAN; 3]);
            let step = (t / dt).round() as usize;
            let current = if step > last_step {
                let window = &rec.photocurrent[last_step..step.min(rec.photocurrent.len())];
                window.iter().sum::<f64>() / window.len() as f64
            } else {
                f64::NAN
            };
            last_step = step;
            let a = s[homodyne_squeeze::Slot::A];
            vec![
                t * 1e6,
                spin.jx,
                spin.jy,
                spin.jz,
                var[0].max(0.0).sqrt(),
                var[1].max(0.0).sqrt(),
                var[2].max(0.0).sqrt(),
                xi2,
                a.re,
                a.im,
                current,
            ]
        })
        .collect()
}

fn fit_row(fit: &Result<FitResult, homodyne_squeeze::Error>) -> Vec<f64> {
    match fit {
        Ok(f) => vec![
            f.a,
            f.k1,
            f.k2,
            f.residual_norm,
            f.xi_min.unwrap_or(f64::NAN),
            f.tau.map_or(f64::NAN, |t| t * 1e6),
        ],
        Err(_) => vec![f64::NAN; 6],
    }
}

const FIT_HEADER: [&str; 6] = ["a", "k1", "k2", "residual", "xi2_min_fit", "tau_us"];

fn squeeze(r: &Resolved, probe_detuning_mhz: f64, stride: usize) -> Result<Option<f64>> {
    let count = trajectory_count(r, 1)?;
    let options = SqueezingOptions {
        probe_detuning: TAU * probe_detuning_mhz * 1e6,
        duration: r.duration.unwrap_or(20e-6),
        dt: r.dt,
        stride: stride.max(1),
    };
    let seeds: Vec<_> = (0..count as u64).map(|k| TrajectorySeed::member(r.seed, k)).collect();
    let traces = run_squeezing(&r.config.params, &options, &seeds)?;
    let mut fits = Vec::new();
    for (k, trace) in traces.iter().enumerate() {
        write_csv(&r.out.join(format!("squeeze_{k:03}.csv")), &SQUEEZE_HEADER, &squeeze_rows(trace))?;
        let fit = trace.fit();
        let sampled = trace.minimum().map_or(f64::NAN, |m| m.1);
        let mut row = vec![k as f64];
        row.extend(fit_row(&fit));
        row.push(sampled);
        fits.push(row);
    }
    let mut header = vec!["trajectory"];
    header.extend(FIT_HEADER);
    header.push("xi2_min_sampled");
    write_csv(&r.out.join("squeeze_fits.csv"), &header, &fits)?;
    Ok(Some(traces[0].record.segments[0].dt))
}

fn scaling(r: &Resolved, sweep: Sweep, values: &[f64], ideal: bool, stride: usize) -> Result<Option<f64>> {
    let count = trajectory_count(r, 1)?;
    let duration = r.duration.unwrap_or(20e-6);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let mut p = r.config.params;
        match sweep {
            Sweep::N => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    bail!("N values must be positive integers, got {v}");
                }
                p = p.with_n_atoms(v as u64);
            }
            Sweep::Gamma => p.gamma = TAU * v,
            Sweep::Chi => p.chi = TAU * v,
            Sweep::Eta => p.eta = v,
        }
        if ideal {
            p = p.ideal();
        }
        p.validate()?;
        let options = SqueezingOptions { duration, dt: r.dt, stride: stride.max(1), ..Default::default() };
        let seeds: Vec<_> = (0..count as u64)
            .map(|k| TrajectorySeed::member(r.seed.wrapping_add(i as u64), k))
            .collect();
        let traces = run_squeezing(&p, &options, &seeds)?;
        let mut minima = Vec::new();
        for (k, trace) in traces.iter().enumerate() {
            let sampled = trace.minimum().map_or(f64::NAN, |m| m.1);
            minima.push(sampled);
            let mut row = vec![v, k as f64];
            row.extend(fit_row(&trace.fit()));
            row.push(sampled);
            rows.push(row);
        }
        let mean = minima.iter().sum::<f64>() / minima.len() as f64;
        summary.push(vec![v, mean, mean / p.n()]);
    }
    let mut header = vec!["value", "trajectory"];
    header.extend(FIT_HEADER);
    header.push("xi2_min_sampled");
    write_csv(&r.out.join("scaling.csv"), &header, &rows)?;
    write_csv(&r.out.join("scaling_summary.csv"), &["value", "xi2_min", "xi2_min_over_n"], &summary)?;
    if sweep == Sweep::N && values.len() >= 3 {
        let xs: Vec<f64> = summary.iter().map(|s| s[0]).collect();
        let ys: Vec<f64> = summary.iter().map(|s| s[2]).collect();
        match fit_power_law(&xs, &ys) {
            Ok(e) => println!("xi2_min/N ~ N^{e:.3}"),
            Err(e) => println!("no power-law fit: {e}"),
        }
    }
    Ok(None)
}

fn verify(r: &Resolved, probe_us: f64) -> Result<Option<f64>> {
    let count = trajectory_count(r, 100)?;
    if count < 2 {
        bail!("verify needs at least two trajectories");
    }
    let p = r.config.params;
    let timing = VerificationTiming { probe: probe_us * 1e-6, ..Default::default() };
    let dt = r.dt.unwrap_or_else(|| reference_dt(&p));
    let results = verification_ensemble(&p, &timing, r.seed, count, dt, 1000)?;
    let rows: Vec<Vec<f64>> = results
        .iter()
        .enumerate()
        .map(|(k, v)| vec![k as f64, v.n[0], v.n[1], v.n[2], v.n[3], v.jz1, v.jz2])
        .collect();
    write_csv(&r.out.join("verify.csv"), &["trajectory", "n1", "n2", "n3", "n4", "jz1", "jz2"], &rows)?;
    let pairs: Vec<_> = results.iter().map(|v| (v.jz1, v.jz2)).collect();
    let corr = ensemble_correlation(&pairs)?;
    write_csv(&r.out.join("verify_summary.csv"), &["trajectories", "correlation"], &[vec![count as f64, corr]])?;
    println!("corr(Jz1, Jz2) = {corr:.4} over {count} trajectories");
    Ok(Some(dt))
}

fn oracle_check(r: &Resolved, atoms: usize, steps: usize, probe_scale: f64) -> Result<Option<f64>> {
    let p = r
        .config
        .params
        .with_n_atoms(atoms as u64)
        .with_probe_amplitude(r.config.params.omega_prob_amp * probe_scale);
    let dt = r.dt.unwrap_or(1e-10);
    let rho1 = two_level_pure_state(0.5, -std::f64::consts::FRAC_PI_2);
    let sys = TruncatedSystem::product(atoms, 4, &rho1, Complex64::new(0.0, 0.0))?;
    let flags = DriveFlags { probe_on: true, microwave_on: true, measurement_on: true };
    let samples = joint_trajectory(sys, &p, flags, dt, steps, TrajectorySeed::from(r.seed))?;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| vec![s.time * 1e9, s.moment_diff, s.current_diff, s.top_fock, s.trace_error])
        .collect();
    write_csv(
        &r.out.join("oracle_check.csv"),
        &["time_ns", "max_moment_diff", "photocurrent_diff", "top_fock_population", "trace_error"],
        &rows,
    )?;
    let worst = samples.iter().map(|s| s.moment_diff).fold(0.0, f64::max);
    let fock = samples.iter().map(|s| s.top_fock).fold(0.0, f64::max);
    println!("max moment difference {worst:e} over {steps} steps (top Fock population {fock:e})");
    if worst > ORACLE_TOLERANCE {
        bail!("oracle and moment equations differ by {worst:e} (> {ORACLE_TOLERANCE:e})");
    }
    if fock > 1e-6 {
        bail!("photon truncation not negligible: top Fock population {fock:e}");
    }
    Ok(Some(dt))
}

fn write_manifest(r: &Resolved, command: &str, dt: Option<f64>, argv: &[OsString]) -> Result<()> {
    let mut text = String::from("# hsq run manifest\n");
    let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "command = {command}");
    let _ = writeln!(text, "seed = {}", r.seed);
    if let Some(dt) = dt {
        let _ = writeln!(text, "dt_s = {dt:?}");
    }
    for arg in replayable(argv) {
        let _ = writeln!(text, "arg = {arg}");
    }
    for line in config_text(&r.config.hz, &r.config.params).lines() {
        let _ = writeln!(text, "config.{line}");
    }
    let o = &r.options;
    let _ = writeln!(text, "config.seed = {}", r.seed);
    if let Some(v) = o.trajectories {
        let _ = writeln!(text, "config.trajectories = {v}");
    }
    if let Some(v) = o.dt_ns {
        let _ = writeln!(text, "config.dt_ns = {v:?}");
    }
    if let Some(v) = o.duration_us {
        let _ = writeln!(text, "config.duration_us = {v:?}");
    }
    let path = r.out.join(MANIFEST_NAME);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Flags consumed by the manifest itself rather than replayed.
const NOT_REPLAYED: [&str; 2] = ["--config", "--out"];

fn replayable(argv: &[OsString]) -> Vec<String> {
    let mut kept = Vec::new();
    let mut skip_next = false;
    for arg in argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()) {
        if skip_next {
            skip_next = false;
        } else if NOT_REPLAYED.contains(&arg.as_str()) {
            skip_next = true;
        } else if !NOT_REPLAYED.iter().any(|f| arg.starts_with(&format!("{f}="))) {
            kept.push(arg);
        }
    }
    kept
}

fn rerun(manifest: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(manifest).with_context(|| format!("cannot read manifest {}", manifest.display()))?;
    let mut args = vec![OsString::from("hsq")];
    let mut config = String::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once(" = ").ok_or_else(|| anyhow!("malformed manifest line `{line}`"))?;
        if key == "arg" {
            args.push(value.into());
        } else if let Some(k) = key.strip_prefix("config.") {
            let _ = writeln!(config, "{k} = {value}");
        }
    }
    args.push("--out".into());
    args.push(out.as_os_str().to_owned());
    let cli = Cli::try_parse_from(&args).map_err(|e| anyhow!("manifest arguments do not parse: {e}"))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        bail!("a manifest cannot replay another rerun");
    }
    let config = parse_config(&config).context("manifest configuration")?;
    execute_with(cli, config, &args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use homodyne_squeeze::model::default_params;

    #[test]
    fn empty_config_is_default() {
        let c = parse_config("").unwrap();
        assert_eq!(c.params, default_params());
        assert_eq!(c.options, RunOptions::default());
    }

    #[test]
    fn config_errors_name_line_and_key() {
        let e = parse_config("eta = 1.5").unwrap_err();
        assert!(format!("{e:#}").contains("eta"), "{e:#}");
        let e = parse_config("# comment\n\nkappa_hz = fast").unwrap_err();
        assert!(format!("{e:#}").contains("line 3"), "{e:#}");
        let e = parse_config("bogus = 1").unwrap_err();
        assert!(format!("{e:#}").contains("bogus"), "{e:#}");
        assert!(parse_config("eta 0.5").is_err());
        assert!(parse_config("eta = 0.5\neta = 0.6").is_err());
    }

    #[test]
    fn n_atoms_overrides_only_n() {
        let c = parse_config("n_atoms = 100000").unwrap();
        assert_eq!(c.hz, ParamsHz { n_atoms: 100_000, ..Default::default() });
        let d = default_params();
        assert_eq!((c.params.g, c.params.kappa, c.params.eta), (d.g, d.kappa, d.eta));
        // the default probe follows the dressed state of the new ensemble
        assert!(c.params.omega_p > d.omega_p);
    }

    #[test]
    fn config_text_round_trips() {
        let c = parse_config("n_atoms = 4000\neta = 0.3\nomega_p_offset_hz = 1.5e6\nseed = 4").unwrap();
        let again = parse_config(&config_text(&c.hz, &c.params)).unwrap();
        assert_eq!(again.params, c.params);
        let d = parse_config("").unwrap();
        assert_eq!(parse_config(&config_text(&d.hz, &d.params)).unwrap().params, d.params);
        assert_eq!(c.options.seed, Some(4));
    }
}
