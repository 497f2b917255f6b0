//! Configuration-driven front end: `simulate`, `check-criteria`, `verify`
//! and `sweep`.
//!
//! Configs are TOML documents with dotted keys (`grid.points = 1024`).
//! Every validation failure is reported as [`Error::Config`] naming the
//! offending key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{
    comparison_check, comparison_constant, comparison_trajectory, verify_conditions, ComparisonCheck,
    CriteriaReport, COMPARISON_TOL,
};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, RadialGrid};
use crate::solver::{
    integrate, min_slope, LagrangianState, MomentumData, SolverConfig, SolverRun, SummationPath, Termination,
};
use crate::verify::{run_suite, CheckOutcome, Suite};

/// Samples used for the Ψ conditions attached to each simulation.
pub const RUN_CRITERIA_SAMPLES: usize = 1000;

/// Automatic dt: this fraction of the initial collapse timescale 1/|min slope|.
pub const AUTO_DT_FRACTION: f64 = 0.01;

/// Automatic t_max in units of the initial collapse timescale.
pub const AUTO_T_MAX_FACTOR: f64 = 5.0;

const RUN_KEYS: &[&str] = &[
    "n",
    "k",
    "grid.points",
    "grid.r_max",
    "time.dt",
    "time.t_max",
    "time.dt_min",
    "blowup.rho_threshold",
    "momentum.profile",
    "momentum.amplitude",
    "momentum.table",
    "output.dir",
    "output.plots",
    "solver.path",
    "solver.record_stride",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MomentumProfile {
    /// ω₀ = -amplitude·r·e^{-r²}.
    GaussianOdd,
    /// Two-column CSV (r, omega0), linearly interpolated, times amplitude.
    CustomTable(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: u32,
    pub k: u32,
    pub points: usize,
    pub r_max: f64,
    /// `None`: derived from the initial min slope.
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub dt_min: f64,
    pub rho_threshold: f64,
    pub profile: MomentumProfile,
    pub amplitude: f64,
    pub output_dir: PathBuf,
    pub plots: bool,
    pub path: SummationPath,
    pub record_stride: usize,
}

impl RunConfig {
    /// Defaults for everything except the pair.
    pub fn with_pair(n: u32, k: u32) -> Self {
        Self {
            n,
            k,
            points: 1024,
            r_max: 8.0,
            dt: None,
            t_max: None,
            dt_min: 1e-12,
            rho_threshold: 1e-2,
            profile: MomentumProfile::GaussianOdd,
            amplitude: 1.0,
            output_dir: PathBuf::from("out"),
            plots: false,
            path: SummationPath::Fast,
            record_stride: 1,
        }
    }

    /// Parses a run config; relative table paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut keys = flatten(text)?;
        let cfg = parse_run(&mut keys, base, true)?;
        reject_leftovers(&keys)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_config(path)?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(cfg_err("n", "must be a positive integer"));
        }
        if self.k == 0 {
            return Err(cfg_err("k", "must be a positive integer"));
        }
        if 2 * self.k >= self.n + 2 {
            return Err(cfg_err(
                "k",
                format!("k = {} violates k < n/2 + 1 = {} for n = {}", self.k, f64::from(self.n) / 2.0 + 1.0, self.n),
            ));
        }
        if self.points < 64 {
            return Err(cfg_err("grid.points", format!("need at least 64 points, got {}", self.points)));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(cfg_err("grid.r_max", format!("must be positive and finite, got {}", self.r_max)));
        }
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return Err(cfg_err("time.dt_min", format!("must be positive, got {}", self.dt_min)));
        }
        if let Some(dt) = self.dt {
            if !(dt > self.dt_min && dt.is_finite()) {
                return Err(cfg_err("time.dt", format!("need dt > dt_min = {:e}, got {dt}", self.dt_min)));
            }
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(cfg_err("time.t_max", format!("must be positive, got {t}")));
            }
        }
        if !(self.rho_threshold > 0.0 && self.rho_threshold < 1.0) {
            return Err(cfg_err("blowup.rho_threshold", format!("must lie in (0, 1), got {}", self.rho_threshold)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(cfg_err("momentum.amplitude", format!("must be finite and >= 0, got {}", self.amplitude)));
        }
        if self.record_stride == 0 {
            return Err(cfg_err("solver.record_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Builds kernel, momentum and solver settings, resolving automatic
    /// time parameters.
    pub fn prepare(&self) -> Result<(KernelSpec, MomentumData, SolverConfig)> {
        self.validate()?;
        let spec = KernelSpec::new(self.k, self.n).map_err(|e| cfg_err("k", e.to_string()))?;
        let grid = RadialGrid::uniform(self.points, self.r_max).map_err(|e| cfg_err("grid.points", e.to_string()))?;
        let data = match &self.profile {
            MomentumProfile::GaussianOdd => MomentumData::gaussian_odd(grid, self.n, self.amplitude)
                .map_err(|e| cfg_err("momentum.profile", e.to_string()))?,
            MomentumProfile::CustomTable(path) => {
                let table = read_table(path)?;
                let omega0 = grid.nodes().iter().map(|&r| self.amplitude * interpolate(&table, r)).collect();
                MomentumData::new(grid, self.n, omega0).map_err(|e| cfg_err("momentum.table", e.to_string()))?
            }
        };
        let slope0 = min_slope(&LagrangianState::identity(data.grid()), &data, &spec)?;
        let timescale = if slope0 < 0.0 { 1.0 / slope0.abs() } else { 1.0 };
        let solver = SolverConfig {
            dt: self.dt.unwrap_or(AUTO_DT_FRACTION * timescale),
            t_max: self.t_max.unwrap_or(AUTO_T_MAX_FACTOR * timescale),
            dt_min: self.dt_min,
            rho_threshold: self.rho_threshold,
            path: self.path,
            record_stride: self.record_stride,
            ..SolverConfig::default()
        };
        if !(solver.dt > solver.dt_min) {
            return Err(cfg_err("time.dt_min", format!("exceeds the automatic dt {:e}", solver.dt)));
        }
        Ok((spec, data, solver))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// (n, k), deduplicated in order of first appearance.
    pub pairs: Vec<(u32, u32)>,
    /// Runs in flight at once; 1 keeps the sweep sequential.
    pub workers: usize,
    /// Shared settings; `n` and `k` are overwritten per pair.
    pub template: RunConfig,
}

impl SweepConfig {
    /// `pairs = [[n, k], ...]`, optional `sweep.workers`, plus any run keys
    /// other than `n` and `k`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut keys = flatten(text)?;
        let raw_pairs = keys.remove("pairs").ok_or_else(|| cfg_err("pairs", "missing list of [n, k] pairs"))?;
        let workers = match keys.remove("sweep.workers") {
            Some(v) => {
                let w = as_int(&v, "sweep.workers")?;
                if w < 1 {
                    return Err(cfg_err("sweep.workers", "must be at least 1"));
                }
                w as usize
            }
            None => 1,
        };
        for key in ["n", "k"] {
            if keys.contains_key(key) {
                return Err(cfg_err(key, "set per pair through `pairs`, not in a sweep template"));
            }
        }
        let template = parse_run(&mut keys, base, false)?;
        reject_leftovers(&keys)?;

        let toml::Value::Array(items) = raw_pairs else {
            return Err(cfg_err("pairs", "expected an array of [n, k] pairs"));
        };
        let mut pairs = Vec::new();
        for item in items {
            let pair = match &item {
                toml::Value::Array(p) if p.len() == 2 => (as_u32(&p[0], "pairs")?, as_u32(&p[1], "pairs")?),
                _ => return Err(cfg_err("pairs", format!("expected [n, k], got {item}"))),
            };
            let (n, k) = pair;
            RunConfig { n, k, ..template.clone() }.validate().map_err(|e| match e {
                Error::Config { message, .. } => cfg_err("pairs", format!("({n}, {k}): {message}")),
                other => other,
            })?;
            if pairs.contains(&pair) {
                log::warn!("duplicate sweep pair (n, k) = ({n}, {k}) ignored");
            } else {
                pairs.push(pair);
            }
        }
        Ok(Self { pairs, workers, template })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_config(path)?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn flatten(text: &str) -> Result<BTreeMap<String, toml::Value>> {
    let table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| cfg_err("<document>", e.message().to_string()))?;
    let mut out = BTreeMap::new();
    fn walk(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, toml::Value>) {
        for (k, v) in table {
            let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
            match v {
                toml::Value::Table(t) => walk(&key, t, out),
                other => {
                    out.insert(key, other);
                }
            }
        }
    }
    walk("", table, &mut out);
    Ok(out)
}

fn reject_leftovers(keys: &BTreeMap<String, toml::Value>) -> Result<()> {
    match keys.keys().next() {
        Some(key) => Err(cfg_err(key, "unknown key")),
        None => Ok(()),
    }
}

fn as_int(v: &toml::Value, key: &str) -> Result<i64> {
    v.as_integer().ok_or_else(|| cfg_err(key, format!("expected an integer, got {v}")))
}

fn as_u32(v: &toml::Value, key: &str) -> Result<u32> {
    u32::try_from(as_int(v, key)?).map_err(|_| cfg_err(key, format!("out of range: {v}")))
}

fn as_float(v: &toml::Value, key: &str) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(cfg_err(key, format!("expected a number, got {other}"))),
    }
}

fn as_str<'a>(v: &'a toml::Value, key: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| cfg_err(key, format!("expected a string, got {v}")))
}

fn parse_run(keys: &mut BTreeMap<String, toml::Value>, base: &Path, need_pair: bool) -> Result<RunConfig> {
    let mut take = |key: &str| {
        debug_assert!(RUN_KEYS.contains(&key));
        keys.remove(key)
    };
    let (n, k) = if need_pair {
        let n = take("n").ok_or_else(|| cfg_err("n", "missing"))?;
        let k = take("k").ok_or_else(|| cfg_err("k", "missing"))?;
        (as_u32(&n, "n")?, as_u32(&k, "k")?)
    } else {
        // placeholders, replaced per pair
        (3, 1)
    };
    let mut cfg = RunConfig::with_pair(n, k);
    if let Some(v) = take("grid.points") {
        cfg.points = usize::try_from(as_int(&v, "grid.points")?)
            .map_err(|_| cfg_err("grid.points", format!("must be non-negative, got {v}")))?;
    }
    if let Some(v) = take("grid.r_max") {
        cfg.r_max = as_float(&v, "grid.r_max")?;
    }
    if let Some(v) = take("time.dt") {
        cfg.dt = Some(as_float(&v, "time.dt")?);
    }
    if let Some(v) = take("time.t_max") {
        cfg.t_max = Some(as_float(&v, "time.t_max")?);
    }
    if let Some(v) = take("time.dt_min") {
        cfg.dt_min = as_float(&v, "time.dt_min")?;
    }
    if let Some(v) = take("blowup.rho_threshold") {
        cfg.rho_threshold = as_float(&v, "blowup.rho_threshold")?;
    }
    if let Some(v) = take("momentum.amplitude") {
        cfg.amplitude = as_float(&v, "momentum.amplitude")?;
    }
    let table = take("momentum.table");
    let profile = take("momentum.profile");
    cfg.profile = match profile.as_ref().map(|v| as_str(v, "momentum.profile")).transpose()? {
        None | Some("gaussian_odd") => {
            if table.is_some() {
                return Err(cfg_err("momentum.table", "only used with momentum.profile = \"custom_table\""));
            }
            MomentumProfile::GaussianOdd
        }
        Some("custom_table") => {
            let t = table.ok_or_else(|| cfg_err("momentum.table", "required for custom_table"))?;
            MomentumProfile::CustomTable(base.join(as_str(&t, "momentum.table")?))
        }
        Some(other) => {
            return Err(cfg_err("momentum.profile", format!("unknown profile `{other}` (gaussian_odd, custom_table)")))
        }
    };
    if let Some(v) = take("output.dir") {
        cfg.output_dir = PathBuf::from(as_str(&v, "output.dir")?);
    }
    if let Some(v) = take("output.plots") {
        cfg.plots = v.as_bool().ok_or_else(|| cfg_err("output.plots", format!("expected true/false, got {v}")))?;
    }
    if let Some(v) = take("solver.path") {
        cfg.path = match as_str(&v, "solver.path")? {
            "naive" => SummationPath::Naive,
            "fast" => SummationPath::Fast,
            "both" => SummationPath::Both,
            other => return Err(cfg_err("solver.path", format!("unknown path `{other}` (naive, fast, both)"))),
        };
    }
    if let Some(v) = take("solver.record_stride") {
        cfg.record_stride = usize::try_from(as_int(&v, "solver.record_stride")?)
            .map_err(|_| cfg_err("solver.record_stride", format!("must be positive, got {v}")))?;
    }
    if need_pair {
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Reads (r, omega0) rows, sorted by r with r ≥ 0 and omega0 ≤ 0.
fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    const KEY: &str = "momentum.table";
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| cfg_err(KEY, format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| cfg_err(KEY, e.to_string()))?;
        if rec.len() != 2 {
            return Err(cfg_err(KEY, format!("row {}: expected 2 columns (r, omega0)", line + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| cfg_err(KEY, format!("row {}: {e}", line + 1)));
        let (r, w) = (parse(&rec[0])?, parse(&rec[1])?);
        if !(r >= 0.0 && r.is_finite()) {
            return Err(cfg_err(KEY, format!("row {}: r = {r} must be finite and >= 0", line + 1)));
        }
        if !(w <= 0.0) {
            return Err(cfg_err(KEY, format!("row {}: omega0 = {w} must be <= 0", line + 1)));
        }
        if rows.last().is_some_and(|&(prev, _)| r <= prev) {
            return Err(cfg_err(KEY, format!("row {}: r must increase strictly", line + 1)));
        }
        rows.push((r, w));
    }
    if rows.is_empty() {
        return Err(cfg_err(KEY, "table has no rows"));
    }
    Ok(rows)
}

/// Piecewise linear through (0, 0) and the table; zero beyond the last row.
fn interpolate(table: &[(f64, f64)], r: f64) -> f64 {
    let (r_last, _) = table[table.len() - 1];
    if r > r_last {
        return 0.0;
    }
    let idx = table.partition_point(|&(x, _)| x < r);
    if idx < table.len() && table[idx].0 == r {
        return table[idx].1;
    }
    let (x0, y0) = if idx == 0 { (0.0, 0.0) } else { table[idx - 1] };
    let (x1, y1) = table[idx];
    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
}

/// report.json.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub n: u32,
    pub k: u32,
    pub points: usize,
    pub dt: f64,
    pub t_max: f64,
    pub blew_up: bool,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub r_star: f64,
    /// Ψ conditions, comparison inequality and monotone q_min together.
    pub criteria_passed: bool,
    #[serde(rename = "C_est")]
    pub c_est: f64,
    pub conditions: CriteriaReport,
    pub comparison: ComparisonCheck,
    pub comparison_zero_time: Option<f64>,
    /// max over steps of |E(t) - E(0)|/|E(0)|.
    pub energy_drift: f64,
    pub termination: Termination,
    pub steps: usize,
    pub rejected_steps: usize,
    pub t_final: f64,
}

impl RunSummary {
    /// 0 clean, 2 step underflow, 3 criteria violated.
    pub fn exit_code(&self) -> i32 {
        if matches!(self.termination, Termination::StepUnderflow { .. }) {
            2
        } else if !self.criteria_passed {
            3
        } else {
            0
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub run: SolverRun,
    pub q_comp_min: Vec<f64>,
    pub summary: RunSummary,
}

/// Runs the solver and the comparison diagnostics without touching disk.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    let (spec, data, solver) = config.prepare()?;
    let run = integrate(&data, &spec, &solver)?;
    let conditions = verify_conditions(&spec, RUN_CRITERIA_SAMPLES)?;
    let comparison = comparison_trajectory(&data, &spec, &run.report.step_times())?;
    let check = comparison_check(&run.trajectory, &run.report, &comparison, &data, &spec, COMPARISON_TOL)?;
    let q_comp_min = (0..run.report.history.len()).map(|i| comparison.min_at(i)).collect();
    let e0 = run.report.history[0].energy;
    let energy_drift = if e0 == 0.0 {
        0.0
    } else {
        run.report.history.iter().map(|h| ((h.energy - e0) / e0).abs()).fold(0.0, f64::max)
    };
    let report = &run.report;
    let summary = RunSummary {
        n: config.n,
        k: config.k,
        points: config.points,
        dt: solver.dt,
        t_max: solver.t_max,
        blew_up: report.blew_up,
        t_est: report.t_est,
        r_star: report.r_star,
        criteria_passed: conditions.passed && check.passed && check.q_min_decreasing,
        c_est: comparison_constant(&spec)?,
        conditions,
        comparison: check,
        comparison_zero_time: comparison.zero_time,
        energy_drift,
        termination: report.termination.clone(),
        steps: report.history.len() - 1,
        rejected_steps: report.rejected_steps,
        t_final: report.history[report.history.len() - 1].t,
    };
    Ok(Simulation { run, q_comp_min, summary })
}

/// Floats in CSV output: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_row<I, S>(w: &mut csv::Writer<fs::File>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::Io(e.to_string()))
}

fn finish(mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(Error::from)
}

/// Writes timeseries.csv, snapshots.csv, report.json and, if enabled, the
/// SVG plots into `dir`.
pub fn write_outputs(sim: &Simulation, grid_nodes: &[f64], dir: &Path, plots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut ts = csv_writer(&dir.join("timeseries.csv"))?;
    csv_row(&mut ts, ["t", "min_rho", "argmin_r", "energy", "min_slope", "q_min", "q_comp_min"])?;
    for (h, qc) in sim.run.report.history.iter().zip(&sim.q_comp_min) {
        csv_row(&mut ts, [h.t, h.min_rho, h.argmin_r, h.energy, h.min_slope, h.q_min, *qc].map(fmt_float))?;
    }
    finish(ts)?;

    let mut snap = csv_writer(&dir.join("snapshots.csv"))?;
    csv_row(&mut snap, ["t", "r", "gamma", "rho"])?;
    for state in &sim.run.trajectory.states {
        for ((&r, &g), &p) in grid_nodes.iter().zip(&state.gamma).zip(&state.rho) {
            csv_row(&mut snap, [state.time, r, g, p].map(fmt_float))?;
        }
    }
    finish(snap)?;

    let json = serde_json::to_string_pretty(&sim.summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("report.json"), json + "\n")?;

    if plots {
        let hist = &sim.run.report.history;
        let rho: Vec<(f64, f64)> = hist.iter().map(|h| (h.t, h.min_rho)).collect();
        let slope: Vec<(f64, f64)> = hist.iter().map(|h| (h.t, h.min_slope)).collect();
        fs::write(dir.join("min_rho.svg"), svg_polyline("min ρ(t)", &rho))?;
        fs::write(dir.join("min_slope.svg"), svg_polyline("min slope(t)", &slope))?;
    }
    Ok(())
}

/// A bare polyline plot with the data range printed on the axes.
pub fn svg_polyline(title: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = finite.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = finite.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{title}</text>"#, W / 2.0);
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, v: f64| {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.4e}</text>"#);
    };
    label(&mut s, M, H - M + 16.0, "start", x0);
    label(&mut s, W - M, H - M + 16.0, "end", x1);
    label(&mut s, M - 4.0, H - M, "end", y0);
    label(&mut s, M - 4.0, M + 10.0, "end", y1);
    let coords: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

/// `simulate`: run, write artifacts into `config.output_dir`.
pub fn cmd_simulate(config: &RunConfig) -> Result<RunSummary> {
    let sim = simulate(config)?;
    let nodes = RadialGrid::uniform(config.points, config.r_max)?;
    write_outputs(&sim, nodes.nodes(), &config.output_dir, config.plots)?;
    Ok(sim.summary)
}

/// `check-criteria`.
pub fn cmd_check_criteria(n: u32, k: u32, samples: usize) -> Result<CriteriaReport> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 samples, got {samples}")));
    }
    let spec = KernelSpec::new(k, n)?;
    verify_conditions(&spec, samples)
}

/// `verify`.
pub fn cmd_verify(suite: Suite) -> Result<Vec<CheckOutcome>> {
    run_suite(suite, &|s| s)
}

/// Plain-text table of verification rows.
pub fn format_verify_table(rows: &[CheckOutcome]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<10} {:<width$} {:>6} {:>12} {:>10}  status\n", "suite", "check", "cases", "max_error", "tol");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:<width$} {:>6} {:>12.3e} {:>10.1e}  {}",
            r.suite,
            r.name,
            r.cases,
            r.max_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let passed = rows.iter().filter(|r| r.passed).count();
    let _ = writeln!(s, "{passed}/{} checks passed", rows.len());
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub k: u32,
    pub blew_up: Option<bool>,
    pub t_est: Option<f64>,
    pub c_est: Option<f64>,
    /// 0 on success, otherwise the run's exit code.
    pub exit_code: i32,
    pub status: String,
}

/// `sweep`: one `n{n}_k{k}` directory per pair under the template's output
/// dir, plus sweep.csv there. Returns the rows in pair order.
pub fn cmd_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let root = &config.template.output_dir;
    fs::create_dir_all(root)?;
    let run_one = |&(n, k): &(u32, u32)| -> SweepRow {
        let run_cfg =
            RunConfig { n, k, output_dir: root.join(format!("n{n}_k{k}")), ..config.template.clone() };
        match cmd_simulate(&run_cfg) {
            Ok(summary) => {
                let code = summary.exit_code();
                let status = match code {
                    0 => "ok".to_string(),
                    2 => "step underflow".to_string(),
                    _ => "criteria violated".to_string(),
                };
                SweepRow {
                    n,
                    k,
                    blew_up: Some(summary.blew_up),
                    t_est: summary.t_est,
                    c_est: Some(summary.c_est),
                    exit_code: code,
                    status,
                }
            }
            Err(e) => SweepRow {
                n,
                k,
                blew_up: None,
                t_est: None,
                c_est: None,
                exit_code: e.exit_code(),
                status: format!("error: {e}"),
            },
        }
    };
    let rows: Vec<SweepRow> = if config.workers <= 1 {
        config.pairs.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        pool.install(|| config.pairs.par_iter().map(run_one).collect())
    };

    let mut w = csv_writer(&root.join("sweep.csv"))?;
    csv_row(&mut w, ["n", "k", "blew_up", "T_est", "C_est", "status"])?;
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    for r in &rows {
        csv_row(
            &mut w,
            [
                r.n.to_string(),
                r.k.to_string(),
                r.blew_up.map(|b| b.to_string()).unwrap_or_default(),
                opt(r.t_est),
                opt(r.c_est),
                r.status.clone(),
            ],
        )?;
    }
    finish(w)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_toml_str(text, Path::new("."))
    }

    #[test]
    fn defaults_and_dotted_keys() {
        let cfg = parse("n = 5\nk = 2\n[grid]\npoints = 128\n").unwrap();
        assert_eq!(cfg.points, 128);
        assert_eq!(cfg.r_max, 8.0);
        let cfg = parse("n = 5\nk = 2\ngrid.r_max = 6\nsolver.path = \"both\"").unwrap();
        assert_eq!(cfg.r_max, 6.0);
        assert_eq!(cfg.path, SummationPath::Both);
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str| match parse(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(key_of("n = 4\nk = 3"), "k");
        assert_eq!(key_of("n = 5\nk = 2\ngrid.points = 32"), "grid.points");
        assert_eq!(key_of("n = 5\nk = 2\ngrid.pionts = 100"), "grid.pionts");
        assert_eq!(key_of("n = 5\nk = 2\ntime.dt = 1e-13"), "time.dt");
        assert_eq!(key_of("n = 5\nk = 2\nsolver.path = \"slow\""), "solver.path");
        assert_eq!(key_of("n = 5\nk = 2\nmomentum.profile = \"custom_table\""), "momentum.table");
        assert_eq!(key_of("n = 5"), "k");
        assert_eq!(key_of("n = \"five\"\nk = 1"), "n");
    }

    #[test]
    fn interpolation_passes_through_origin() {
        let table = [(0.5, -1.0), (1.0, -2.0)];
        assert_eq!(interpolate(&table, 0.25), -0.5);
        assert_eq!(interpolate(&table, 0.75), -1.5);
        assert_eq!(interpolate(&table, 1.0), -2.0);
        assert_eq!(interpolate(&table, 1.5), 0.0);
    }

    #[test]
    fn sweep_dedupes_and_validates() {
        let s = SweepConfig::from_toml_str("pairs = [[3, 1], [5, 2], [3, 1]]\ngrid.points = 64", Path::new("."))
            .unwrap();
        assert_eq!(s.pairs, vec![(3, 1), (5, 2)]);
        assert_eq!(s.template.points, 64);
        let err = SweepConfig::from_toml_str("pairs = [[4, 3]]", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "pairs"));
        let err = SweepConfig::from_toml_str("pairs = []\nn = 3", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "n"));
    }

    #[test]
    fn svg_has_polyline() {
        let s = svg_polyline("x", &[(0.0, 1.0), (1.0, 0.5), (2.0, f64::NAN)]);
        assert!(s.starts_with("<svg") && s.contains("<polyline") && s.trim_end().ends_with("</svg>"));
    }
}
