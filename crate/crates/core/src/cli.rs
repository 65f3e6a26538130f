//! Command-line front end: flat key=value configuration, run orchestration,
//! parameter sweeps and deterministic CSV/JSON output.
//!
//! Everything here is callable from library code; the `wgbic` binary only
//! parses arguments and dispatches.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics;
use crate::collision::{CollisionEngine, Detuning, Mode, ModelParams, ObservableRecord};
use crate::error::{Error, Result};
use crate::oracle::{fidelity_against_mps, ExactEngine, ExactState};
use crate::wavepacket::{initial_state, RelaxationStart};

/// Allowed norm and excitation drift on top of the discarded weight.
pub const DRIFT_TOL: f64 = 1e-9;

/// Keys accepted in a config file, in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "gamma",
    "dt",
    "ell",
    "phi",
    "gamma_band",
    "delta_omega",
    "mode",
    "n_bins",
    "steps",
    "trunc_eps",
    "chi_max",
    "record_every",
    "output_dir",
    "emit_snapshots",
    "snapshot_steps",
];

pub const TIMESERIES_HEADER: &str =
    "step,time,norm,excitation,p_e1,p_e2,bell_plus,bell_minus,trapped_n,p_bic_inferred";

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParam { .. } | Error::OffResonance { .. } => 2,
        Error::Numerical(_) => 3,
        _ => 1,
    }
}

/// Formats `x` with `digits` significant digits, in plain notation where
/// that stays readable.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..=9).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", digits.saturating_sub(1), x)
    }
}

/// `x` rounded to six significant digits, for JSON output.
pub fn round6(x: f64) -> f64 {
    fmt_sig(x, 6).parse().unwrap_or(x)
}

fn parse_f64(key: &'static str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParam { key, reason: format!("expected a number, got `{v}`") })
}

fn parse_usize(key: &'static str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::InvalidParam { key, reason: format!("expected a non-negative integer, got `{v}`") })
}

/// Parses a phase: a number, or a multiple of pi written `pi`, `3pi`,
/// `3*pi` or `0.5*pi`.
pub fn parse_phase(v: &str) -> Result<f64> {
    let t = v.trim();
    if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let m = if head.is_empty() { 1.0 } else { parse_f64("phi", head)? };
        return Ok(m * PI);
    }
    parse_f64("phi", t)
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(key: &'static str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::InvalidParam { key, reason: format!("bad list entry `{s}`") })
        })
        .collect()
}

fn static_key(key: &str) -> Result<&'static str> {
    CONFIG_KEYS
        .iter()
        .copied()
        .find(|k| *k == key)
        .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))
}

/// Resolved configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub output_dir: PathBuf,
    pub emit_snapshots: bool,
    pub snapshot_steps: Vec<i64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            output_dir: PathBuf::from("."),
            emit_snapshots: false,
            snapshot_steps: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment; a key may appear only once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("duplicate key `{k}`")));
            }
            cfg.set(k, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = static_key(key)?;
        let p = &mut self.params;
        match key {
            "gamma" => p.gamma = parse_f64(key, value)?,
            "dt" => p.dt = parse_f64(key, value)?,
            "ell" => p.ell = parse_usize(key, value)?,
            "phi" => p.phi = parse_phase(value)?,
            "gamma_band" => p.gamma_band = parse_f64(key, value)?,
            "delta_omega" => p.delta_omega = value.trim().parse::<Detuning>()?,
            "mode" => p.mode = value.trim().parse::<Mode>()?,
            "n_bins" => p.n_bins = parse_usize(key, value)?,
            "steps" => p.steps = parse_usize(key, value)?,
            "trunc_eps" => p.trunc_eps = parse_f64(key, value)?,
            "chi_max" => p.chi_max = parse_usize(key, value)?,
            "record_every" => p.record_every = parse_usize(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "emit_snapshots" => {
                self.emit_snapshots = match value.trim() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(Error::InvalidParam { key, reason: format!("expected true or false, got `{other}`") })
                    }
                }
            }
            "snapshot_steps" => self.snapshot_steps = parse_list(key, value)?,
            _ => unreachable!("every config key is handled"),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a, I>(&mut self, overrides: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let first = self.params.first_step();
        let last = first + self.params.steps as i64;
        if let Some(k) = self.snapshot_steps.iter().find(|k| **k < first || **k > last) {
            return Err(Error::InvalidParam {
                key: "snapshot_steps",
                reason: format!("step {k} is outside {first}..={last}"),
            });
        }
        Ok(())
    }

    pub fn echo(&self) -> ConfigEcho {
        let p = &self.params;
        ConfigEcho {
            gamma: p.gamma,
            dt: p.dt,
            ell: p.ell,
            phi: p.phi,
            gamma_band: p.gamma_band,
            delta_omega: p.delta_omega.to_string(),
            mode: p.mode,
            n_bins: p.n_bins,
            steps: p.steps,
            trunc_eps: p.trunc_eps,
            chi_max: p.chi_max,
            record_every: p.record_every,
            output_dir: self.output_dir.display().to_string(),
            emit_snapshots: self.emit_snapshots,
            snapshot_steps: self.snapshot_steps.clone(),
        }
    }

    /// The config as `key = value` text that [`RunConfig::parse`] reads back.
    pub fn to_kv_string(&self) -> String {
        let e = self.echo();
        let steps: Vec<String> = e.snapshot_steps.iter().map(|k| k.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "gamma = {}", e.gamma);
        let _ = writeln!(s, "dt = {}", e.dt);
        let _ = writeln!(s, "ell = {}", e.ell);
        let _ = writeln!(s, "phi = {}", e.phi);
        let _ = writeln!(s, "gamma_band = {}", e.gamma_band);
        let _ = writeln!(s, "delta_omega = {}", e.delta_omega);
        let _ = writeln!(s, "mode = {}", e.mode.as_str());
        let _ = writeln!(s, "n_bins = {}", e.n_bins);
        let _ = writeln!(s, "steps = {}", e.steps);
        let _ = writeln!(s, "trunc_eps = {}", e.trunc_eps);
        let _ = writeln!(s, "chi_max = {}", e.chi_max);
        let _ = writeln!(s, "record_every = {}", e.record_every);
        let _ = writeln!(s, "output_dir = {}", e.output_dir);
        let _ = writeln!(s, "emit_snapshots = {}", e.emit_snapshots);
        let _ = writeln!(s, "snapshot_steps = {}", steps.join(","));
        s
    }
}

/// Echo of the resolved configuration embedded in every JSON output.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub gamma: f64,
    pub dt: f64,
    pub ell: usize,
    pub phi: f64,
    pub gamma_band: f64,
    pub delta_omega: String,
    pub mode: Mode,
    pub n_bins: usize,
    pub steps: usize,
    pub trunc_eps: f64,
    pub chi_max: usize,
    pub record_every: usize,
    pub output_dir: String,
    pub emit_snapshots: bool,
    pub snapshot_steps: Vec<i64>,
}

fn params_echo(p: &ModelParams) -> ConfigEcho {
    RunConfig { params: p.clone(), ..RunConfig::default() }.echo()
}

/// Which evolution computes the trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Mps,
    Oracle,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mps" => Ok(Backend::Mps),
            "oracle" => Ok(Backend::Oracle),
            other => Err(Error::Config(format!("unknown backend `{other}` (mps or oracle)"))),
        }
    }
}

/// Per-bin occupations `(bin, n_R, n_L)` at one time index.
pub type Snapshot = (i64, Vec<(i64, f64, f64)>);

/// Records and bookkeeping of one simulated run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: ModelParams,
    pub backend: Backend,
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<Snapshot>,
    pub cumulative_discarded: f64,
    /// Largest MPS bond reached; `None` for the oracle.
    pub max_bond: Option<usize>,
    /// Overlap of the final state with the discretized bound state; `None`
    /// off resonance.
    pub p_bic_direct: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &ObservableRecord {
        self.records.last().expect("a run records at least its initial state")
    }

    /// Fails when norm or excitation drift exceed `DRIFT_TOL` plus the
    /// discarded weight.
    pub fn check_conservation(&self) -> Result<()> {
        let budget = DRIFT_TOL + self.cumulative_discarded;
        let e0 = self.records[0].excitation;
        for r in &self.records {
            if (r.norm - 1.0).abs() > budget {
                return Err(Error::Numerical(format!(
                    "norm drift {:.3e} at step {} exceeds {budget:.3e}",
                    r.norm - 1.0,
                    r.step
                )));
            }
            if (r.excitation - e0).abs() > budget {
                return Err(Error::Numerical(format!(
                    "excitation drift {:.3e} at step {} exceeds {budget:.3e}",
                    r.excitation - e0,
                    r.step
                )));
            }
        }
        Ok(())
    }
}

/// Runs the schedule of `p` with either backend, collecting occupation
/// snapshots at the listed time indices.
pub fn simulate(p: &ModelParams, backend: Backend, snapshot_steps: &[i64]) -> Result<Trajectory> {
    let wanted: BTreeSet<i64> = snapshot_steps.iter().copied().collect();
    let mut snapshots = Vec::new();
    let resonant = analytics_resonant(p);
    match backend {
        Backend::Mps => {
            let engine = CollisionEngine::new(p)?;
            let out = engine.run_observed(initial_state(p)?, |k, s| {
                if wanted.contains(&k) {
                    snapshots.push((k, s.local_occupations().bins));
                }
                Ok(())
            })?;
            let k = out.last().step;
            let p_bic_direct = if resonant {
                let bic = analytics::discretized_bic_state(p, k)?;
                Some(bic.inner_product(&out.final_state)?.norm_sqr())
            } else {
                None
            };
            Ok(Trajectory {
                params: p.clone(),
                backend,
                cumulative_discarded: out.final_state.cumulative_discarded(),
                max_bond: Some(out.max_bond),
                records: out.records,
                snapshots,
                p_bic_direct,
            })
        }
        Backend::Oracle => {
            let engine = ExactEngine::new(p)?;
            let run = engine.run_observed(ExactState::initial(p, RelaxationStart::Qubit1)?, |k, s| {
                if wanted.contains(&k) {
                    let bins = (0..s.r.len() as i64)
                        .map(|i| {
                            let m = s.lo + i;
                            let (r, l) = s.occupation(m);
                            (m, r, l)
                        })
                        .collect();
                    snapshots.push((k, bins));
                }
            })?;
            let k = run.last().step;
            let p_bic_direct = if resonant {
                let bic = analytics::discretized_bic_state(p, k)?;
                Some(fidelity_against_mps(&run.final_state, &bic)?)
            } else {
                None
            };
            Ok(Trajectory {
                params: p.clone(),
                backend,
                records: run.records,
                snapshots,
                cumulative_discarded: 0.0,
                max_bond: None,
                p_bic_direct,
            })
        }
    }
}

fn analytics_resonant(p: &ModelParams) -> bool {
    let n = (p.phi / PI).round();
    (p.phi - n * PI).abs() <= 1e-9
}

/// First time index `k ≥ 0` at which `p_bic_inferred` reaches `fraction`
/// of its asymptote, the mean over the final tenth of the records.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeToFraction {
    pub asymptote: f64,
    pub step: i64,
}

pub fn time_to_fraction(records: &[ObservableRecord], fraction: f64) -> Option<TimeToFraction> {
    if records.is_empty() {
        return None;
    }
    let tail = (records.len() / 10).max(1);
    let asymptote =
        records[records.len() - tail..].iter().map(|r| r.p_bic_inferred).sum::<f64>() / tail as f64;
    if asymptote <= 0.0 {
        return None;
    }
    records
        .iter()
        .find(|r| r.step >= 0 && r.p_bic_inferred >= fraction * asymptote)
        .map(|r| TimeToFraction { asymptote, step: r.step })
}

/// Final-state summary written next to the time series.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRecord {
    pub config: ConfigEcho,
    pub backend: Backend,
    pub final_step: i64,
    pub final_time: f64,
    pub p_bic_inferred: f64,
    pub p_bic_direct: Option<f64>,
    pub p_bell: f64,
    pub trapped_n: f64,
    pub norm: f64,
    pub cumulative_discarded: f64,
    pub max_bond: Option<usize>,
    pub t90_step: Option<i64>,
    pub t90_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl SummaryRecord {
    pub fn new(cfg: &RunConfig, traj: &Trajectory, wall_time_s: Option<f64>) -> Self {
        let p = &traj.params;
        let last = traj.last();
        // relaxation starts above its asymptote, so a rise time is meaningless
        let t90 = p.mode.is_scattering().then(|| time_to_fraction(&traj.records, 0.9)).flatten();
        Self {
            config: cfg.echo(),
            backend: traj.backend,
            final_step: last.step,
            final_time: last.time,
            p_bic_inferred: round6(last.p_bic_inferred),
            p_bic_direct: traj.p_bic_direct.map(round6),
            p_bell: round6(last.bell_bic(p)),
            trapped_n: round6(last.trapped_n),
            norm: last.norm,
            cumulative_discarded: traj.cumulative_discarded,
            max_bond: traj.max_bond,
            t90_step: t90.map(|t| t.step),
            t90_time: t90.map(|t| round6(t.step as f64 * p.dt * p.gamma)),
            wall_time_s,
        }
    }
}

pub fn timeseries_csv(records: &[ObservableRecord]) -> String {
    let mut s = String::with_capacity(96 * (records.len() + 1));
    s.push_str(TIMESERIES_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_sig(r.time, 6),
            fmt_sig(r.norm, 12),
            fmt_sig(r.excitation, 12),
            fmt_sig(r.p_e1, 6),
            fmt_sig(r.p_e2, 6),
            fmt_sig(r.bell_plus, 6),
            fmt_sig(r.bell_minus, 6),
            fmt_sig(r.trapped_n, 6),
            fmt_sig(r.p_bic_inferred, 6),
        );
    }
    s
}

pub fn snapshot_csv(bins: &[(i64, f64, f64)]) -> String {
    let mut s = String::from("bin_index,n_R,n_L\n");
    for (m, r, l) in bins {
        let _ = writeln!(s, "{m},{},{}", fmt_sig(*r, 6), fmt_sig(*l, 6));
    }
    s
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Files written by `cmd_run` and the summary they contain.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: SummaryRecord,
    pub files: Vec<PathBuf>,
    pub trajectory: Trajectory,
}

/// Runs one configuration and writes `timeseries.csv`, `summary.json` and
/// `snapshot_<k>.csv` files into the output directory.
///
/// Wall time enters the summary only with `timing`, so that repeated runs
/// produce identical files. A conservation failure is reported after the
/// files are written.
pub fn cmd_run(cfg: &RunConfig, backend: Backend, timing: bool) -> Result<RunReport> {
    cfg.validate()?;
    let p = &cfg.params;
    let mut snaps = cfg.snapshot_steps.clone();
    if cfg.emit_snapshots && snaps.is_empty() {
        snaps.push(p.first_step() + p.steps as i64);
    }
    if !cfg.emit_snapshots {
        snaps.clear();
    }
    log::info!("run: mode {} ell {} steps {} backend {:?}", p.mode.as_str(), p.ell, p.steps, backend);
    let start = Instant::now();
    let traj = simulate(p, backend, &snaps)?;
    let wall = timing.then(|| start.elapsed().as_secs_f64());
    let summary = SummaryRecord::new(cfg, &traj, wall);

    let dir = &cfg.output_dir;
    let mut files = vec![write_file(dir, "timeseries.csv", &timeseries_csv(&traj.records))?];
    for (k, bins) in &traj.snapshots {
        files.push(write_file(dir, &format!("snapshot_{k}.csv"), &snapshot_csv(bins))?);
    }
    files.push(write_file(dir, "summary.json", &to_json(&summary)?)?);
    traj.check_conservation()?;
    Ok(RunReport { summary, files, trajectory: traj })
}

/// Parameters of one resonant cell: `phi = ell·π`, the input symmetry
/// matched to the bound-state parity (or the opposite one), and a lattice
/// long enough for `max(base.steps, 10·ell)` steps after the switch.
pub fn resonant_cell(base: &ModelParams, ell: usize, gamma_band: f64, wrong_parity: bool) -> ModelParams {
    let matched_sym = ell % 2 == 1;
    let sym = matched_sym != wrong_parity;
    let after = base.steps.max(10 * ell);
    let before = match base.delta_omega {
        Detuning::IdealSwitch => 0,
        Detuning::Finite(_) => ell,
    };
    let steps = after + before;
    ModelParams {
        ell,
        phi: ell as f64 * PI,
        gamma_band,
        mode: if sym { Mode::ScatterSym } else { Mode::ScatterAntisym },
        steps,
        n_bins: steps + ell,
        ..base.clone()
    }
}

/// Number of delay bins closest to `gamma_tau` at the base step size.
pub fn ell_for_gamma_tau(base: &ModelParams, gamma_tau: f64) -> Result<usize> {
    let ell = (gamma_tau / (base.gamma * base.dt)).round();
    if !(ell >= 1.0) {
        return Err(Error::InvalidParam { key: "ell", reason: format!("γτ = {gamma_tau} gives no delay bins") });
    }
    Ok(ell as usize)
}

fn run_cells<T, F>(cells: &[ModelParams], jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ModelParams) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| cells.par_iter().map(&f).collect())
}

fn final_record(p: &ModelParams, backend: Backend) -> Result<ObservableRecord> {
    let traj = simulate(p, backend, &[])?;
    traj.check_conservation()?;
    Ok(traj.last().clone())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub gamma_band_tau: f64,
    pub gamma_tau: f64,
    pub p_bic_sim: f64,
    pub p_bic_analytic: f64,
    pub abs_err: f64,
}

/// Final inferred `P_BIC` over a grid of bandwidths `Γτ` and delays `ell`
/// at resonance, next to the closed-form value.
pub fn sweep_grid(
    base: &ModelParams,
    gamma_band_taus: &[f64],
    ells: &[usize],
    wrong_parity: bool,
    backend: Backend,
    jobs: usize,
) -> Result<Vec<GridRow>> {
    let mut cells = Vec::new();
    for &gbt in gamma_band_taus {
        for &ell in ells {
            let tau = ell as f64 * base.dt;
            cells.push(resonant_cell(base, ell, gbt / tau, wrong_parity));
        }
    }
    run_cells(&cells, jobs, |p| {
        log::info!("grid cell: Γτ {} γτ {}", p.gamma_band * p.tau(), p.gamma_tau());
        let sim = final_record(p, backend)?.p_bic_inferred;
        let exact = analytics::p_bic_analytic(p.gamma_band, p.gamma, p.tau())?;
        Ok(GridRow {
            gamma_band_tau: p.gamma_band * p.tau(),
            gamma_tau: p.gamma_tau(),
            p_bic_sim: sim,
            p_bic_analytic: exact,
            abs_err: (sim - exact).abs(),
        })
    })
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut s = String::from("gamma_band_tau,gamma_tau,p_bic_sim,p_bic_analytic,abs_err\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_sig(r.gamma_band_tau, 6),
            fmt_sig(r.gamma_tau, 6),
            fmt_sig(r.p_bic_sim, 6),
            fmt_sig(r.p_bic_analytic, 6),
            fmt_sig(r.abs_err, 6)
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetuningRow {
    pub delta_omega: Detuning,
    pub p_bell_final: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DetuningScan {
    pub config: ConfigEcho,
    pub rows: Vec<DetuningRow>,
    pub ideal_switch: f64,
    /// Best finite detuning and its final Bell population.
    pub best_delta_omega: Option<f64>,
    pub best_p_bell: Option<f64>,
}

/// Final Bell population for each detuning `Δω/γ` before the switch, plus
/// the ideal-switch reference as the first row.
pub fn sweep_detuning(
    base: &ModelParams,
    gamma_tau: f64,
    gamma_band_tau: f64,
    deltas: &[f64],
    backend: Backend,
    jobs: usize,
) -> Result<DetuningScan> {
    let ell = ell_for_gamma_tau(base, gamma_tau)?;
    let tau = ell as f64 * base.dt;
    let mut cells = Vec::with_capacity(deltas.len() + 1);
    let ideal = ModelParams { delta_omega: Detuning::IdealSwitch, ..base.clone() };
    cells.push(resonant_cell(&ideal, ell, gamma_band_tau / tau, false));
    for &d in deltas {
        let b = ModelParams { delta_omega: Detuning::Finite(d * base.gamma), ..base.clone() };
        cells.push(resonant_cell(&b, ell, gamma_band_tau / tau, false));
    }
    let rows: Vec<DetuningRow> = run_cells(&cells, jobs, |p| {
        log::info!("detuning cell: {}", p.delta_omega);
        let r = final_record(p, backend)?;
        Ok(DetuningRow {
            delta_omega: match p.delta_omega {
                Detuning::Finite(x) => Detuning::Finite(x / p.gamma.max(f64::MIN_POSITIVE)),
                d => d,
            },
            p_bell_final: r.bell_bic(p),
        })
    })?;
    let ideal_switch = rows[0].p_bell_final;
    let best = rows[1..]
        .iter()
        .filter_map(|r| match r.delta_omega {
            Detuning::Finite(x) => Some((x, r.p_bell_final)),
            Detuning::IdealSwitch => None,
        })
        .fold(None, |acc: Option<(f64, f64)>, (x, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((x, v)),
        });
    Ok(DetuningScan {
        config: params_echo(&cells[0]),
        rows,
        ideal_switch,
        best_delta_omega: best.map(|b| b.0),
        best_p_bell: best.map(|b| b.1),
    })
}

pub fn detuning_csv(rows: &[DetuningRow]) -> String {
    let mut s = String::from("delta_omega,p_bell_final\n");
    for r in rows {
        let d = match r.delta_omega {
            Detuning::IdealSwitch => "ideal-switch".to_string(),
            Detuning::Finite(x) => fmt_sig(x, 6),
        };
        let _ = writeln!(s, "{d},{}", fmt_sig(r.p_bell_final, 6));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct T90Row {
    pub gamma_tau: f64,
    /// Time to reach 90% of the asymptote, in units of `1/γ`.
    pub t90: f64,
    pub asymptote: f64,
}

/// Least-squares line `y = slope·x + intercept` with its coefficient of
/// determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r2 })
}

#[derive(Clone, Debug, Serialize)]
pub struct T90Report {
    pub config: ConfigEcho,
    pub rows: Vec<T90Row>,
    /// Fit of `t90` against `γτ`; needs two or more rows.
    pub fit: Option<LinearFit>,
}

/// Time to 90% of the asymptotic bound-state probability for each delay,
/// with the bandwidth set to the optimum for that delay.
pub fn t90_scan(base: &ModelParams, ells: &[usize], backend: Backend, jobs: usize) -> Result<T90Report> {
    let base = ModelParams { delta_omega: Detuning::IdealSwitch, ..base.clone() };
    let cells: Vec<ModelParams> = ells
        .iter()
        .map(|&ell| {
            let tau = ell as f64 * base.dt;
            Ok(resonant_cell(&base, ell, analytics::optimal_bandwidth(tau)?, false))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<T90Row> = run_cells(&cells, jobs, |p| {
        log::info!("t90 cell: ell {}", p.ell);
        let traj = simulate(p, backend, &[])?;
        traj.check_conservation()?;
        let t = time_to_fraction(&traj.records, 0.9)
            .ok_or_else(|| Error::Numerical(format!("no bound-state population for ell = {}", p.ell)))?;
        Ok(T90Row { gamma_tau: p.gamma_tau(), t90: t.step as f64 * p.dt * p.gamma, asymptote: t.asymptote })
    })?;
    let xs: Vec<f64> = rows.iter().map(|r| r.gamma_tau).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.t90).collect();
    Ok(T90Report { config: params_echo(&base), fit: linear_fit(&xs, &ys), rows })
}

pub fn t90_csv(rows: &[T90Row]) -> String {
    let mut s = String::from("gamma_tau,t90\n");
    for r in rows {
        let _ = writeln!(s, "{},{}", fmt_sig(r.gamma_tau, 6), fmt_sig(r.t90, 6));
    }
    s
}

/// Every closed-form quantity for one parameter point, rounded to six
/// significant digits.
pub fn analytic_json(gamma_band: f64, gamma: f64, tau: f64) -> Result<String> {
    let s = analytics::summary(gamma_band, gamma, tau)?;
    let mut v = serde_json::to_value(&s).map_err(|e| Error::Numerical(e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut v {
        for x in map.values_mut() {
            if let Some(f) = x.as_f64() {
                *x = serde_json::json!(round6(f));
            }
        }
    }
    to_json(&v)
}

/// MPS and oracle run side by side.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub config: ConfigEcho,
    pub fidelity: f64,
    /// Largest deviation of any recorded observable.
    pub max_observable_deviation: f64,
    pub cumulative_discarded: f64,
    pub max_bond: usize,
}

pub fn oracle_check(p: &ModelParams) -> Result<OracleCheck> {
    let engine = CollisionEngine::new(p)?;
    let mps = engine.run(initial_state(p)?)?;
    let exact = ExactEngine::new(p)?.run(ExactState::initial(p, RelaxationStart::Qubit1)?)?;
    let fidelity = fidelity_against_mps(&exact.final_state, &mps.final_state)?;
    let max_observable_deviation = max_record_deviation(&mps.records, &exact.records)?;
    Ok(OracleCheck {
        config: params_echo(p),
        fidelity,
        max_observable_deviation,
        cumulative_discarded: mps.final_state.cumulative_discarded(),
        max_bond: mps.max_bond,
    })
}

/// Largest absolute difference between matching fields of two record lists.
pub fn max_record_deviation(a: &[ObservableRecord], b: &[ObservableRecord]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} and {} records", a.len(), b.len())));
    }
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        if x.step != y.step {
            return Err(Error::ShapeMismatch(format!("steps {} and {}", x.step, y.step)));
        }
        for (u, v) in [
            (x.norm, y.norm),
            (x.excitation, y.excitation),
            (x.p_e1, y.p_e1),
            (x.p_e2, y.p_e2),
            (x.bell_plus, y.bell_plus),
            (x.bell_minus, y.bell_minus),
            (x.trapped_n, y.trapped_n),
            (x.p_bic_inferred, y.p_bic_inferred),
        ] {
            worst = worst.max((u - v).abs());
        }
    }
    Ok(worst)
}

/// Writes `contents` to `dir/name` and returns the path.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    write_file(dir, name, contents)
}

/// Pretty JSON with a trailing newline.
pub fn json_string<T: Serialize>(v: &T) -> Result<String> {
    to_json(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.543011, 6), "0.543011");
        assert_eq!(fmt_sig(0.5430114, 6), "0.543011");
        assert_eq!(fmt_sig(12.3456789, 6), "12.3457");
        assert_eq!(fmt_sig(1.0, 6), "1.00000");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(3.2e-9, 6), "3.20000e-9");
        assert_eq!(round6(0.40726843), 0.407268);
    }

    #[test]
    fn parses_config_text() {
        let cfg = RunConfig::parse(
            "# flagship\nell = 50\nphi = 2pi\nmode = scatter-antisym\ndelta_omega = ideal-switch\nsnapshot_steps = 0, 10\n",
        )
        .unwrap();
        assert_eq!(cfg.params.ell, 50);
        assert!((cfg.params.phi - 2.0 * PI).abs() < 1e-15);
        assert_eq!(cfg.params.mode, Mode::ScatterAntisym);
        assert_eq!(cfg.snapshot_steps, vec![0, 10]);
        let back = RunConfig::parse(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = RunConfig::parse("ell = 3\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        assert_eq!(exit_code(&e), 2);
        let e = RunConfig::parse("ell = 3\nell = 4\n").unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let e = RunConfig::parse("steps = x\n").unwrap_err();
        assert!(e.to_string().contains("steps"));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::parse("ell = 3\n").unwrap();
        cfg.apply_overrides([("ell", "7")]).unwrap();
        assert_eq!(cfg.params.ell, 7);
    }

    #[test]
    fn phase_forms() {
        assert_eq!(parse_phase("pi").unwrap(), PI);
        assert_eq!(parse_phase("3*pi").unwrap(), 3.0 * PI);
        assert_eq!(parse_phase("0.5 pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_phase("1.25").unwrap(), 1.25);
    }

    #[test]
    fn fit_of_a_line_is_exact() {
        let f = linear_fit(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_cell_matches_parity() {
        let base = ModelParams::default();
        let odd = resonant_cell(&base, 25, 0.1, false);
        assert_eq!(odd.mode, Mode::ScatterSym);
        let even = resonant_cell(&base, 50, 0.1, false);
        assert_eq!(even.mode, Mode::ScatterAntisym);
        assert_eq!(resonant_cell(&base, 50, 0.1, true).mode, Mode::ScatterSym);
        assert!(odd.validate().is_ok() && even.validate().is_ok());
    }
}
