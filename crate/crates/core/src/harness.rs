//! Experiment runner behind the `ris-bsum` binary.
//!
//! A single JSON document describes the sweep. For every sweep point
//! `(M, N, P_max)` and trial `t`, channels are drawn with seed
//! `base_seed + t`, the solver runs on them and one [`ResultRow`] is
//! recorded. Only the solve is timed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channels, FadingConfig, Geometry, NoisePowers};
use crate::error::{Error, Result};
use crate::objective::PowerBudget;
use crate::solver::{bsum_solve, SolverConfig};
use crate::dbm_to_watts;

/// Exact CSV header of the per-trial table.
pub const CSV_HEADER: [&str; 10] = [
    "trial",
    "M",
    "N",
    "K",
    "p_max_dbm",
    "sum_rate_bits",
    "iterations",
    "runtime_ms",
    "converged",
    "residual_max",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSplit {
    pub fraction_ris: f64,
    pub fraction_bs: f64,
}

impl Default for PowerSplit {
    fn default() -> Self {
        Self { fraction_ris: 0.01, fraction_bs: 0.99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `(M, N)` pairs to sweep.
    pub dims: Vec<[usize; 2]>,
    /// Number of users `K`.
    pub users: usize,
    pub p_max_dbm: Vec<f64>,
    pub power_split: PowerSplit,
    /// Amplitude cap of every RIS element.
    pub eta: f64,
    pub noise_user_dbm: f64,
    pub noise_ris_dbm: f64,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads for trials. Timings are only comparable at 1.
    pub threads: usize,
    /// Run one untimed solve per sweep point before the measured trials.
    pub warmup: bool,
    pub per_antenna: bool,
    pub solver: SolverConfig,
    pub geometry: Geometry,
    pub fading: FadingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: vec![[64, 32]],
            users: 8,
            p_max_dbm: vec![30.0],
            power_split: PowerSplit::default(),
            eta: 8.0,
            noise_user_dbm: -80.0,
            noise_ris_dbm: -80.0,
            trials: 20,
            base_seed: 0,
            threads: 1,
            warmup: true,
            per_antenna: false,
            solver: SolverConfig::default(),
            geometry: Geometry::default(),
            fading: FadingConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dims.is_empty() {
            return bad("dims must list at least one (M, N) pair".into());
        }
        if let Some(d) = self.dims.iter().find(|d| d[0] == 0 || d[1] == 0) {
            return bad(format!("dims entry {d:?} has a zero size"));
        }
        if self.users == 0 {
            return bad("users must be at least 1".into());
        }
        if self.p_max_dbm.is_empty() || self.p_max_dbm.iter().any(|p| !p.is_finite()) {
            return bad("p_max_dbm must list finite budgets".into());
        }
        let PowerSplit { fraction_ris, fraction_bs } = self.power_split;
        if !(fraction_ris > 0.0 && fraction_bs > 0.0) || (fraction_ris + fraction_bs - 1.0).abs() > 1e-12 {
            return bad(format!("power split ({fraction_ris}, {fraction_bs}) must be positive and sum to 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.noise_user_dbm.is_finite() && self.noise_ris_dbm.is_finite()) {
            return bad("noise powers must be finite".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.geometry().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fading.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Geometry with the configured user count.
    pub fn geometry(&self) -> Geometry {
        Geometry { num_users: self.users, ..self.geometry.clone() }
    }

    pub fn noise(&self) -> NoisePowers {
        NoisePowers { user_w: dbm_to_watts(self.noise_user_dbm), ris_w: dbm_to_watts(self.noise_ris_dbm) }
    }

    /// BS and RIS budgets in watts for a total budget in dBm.
    pub fn budget(&self, p_max_dbm: f64, n: usize) -> Result<PowerBudget> {
        let total = dbm_to_watts(p_max_dbm);
        PowerBudget::uniform(
            self.power_split.fraction_bs * total,
            self.power_split.fraction_ris * total,
            self.eta,
            n,
            self.per_antenna,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p_max_dbm: f64,
    pub sum_rate_bits: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    pub converged: bool,
    pub residual_max: f64,
}

/// Aggregate over the trials of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p_max_dbm: f64,
    pub trials: usize,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    /// Mean sum rate of the solver's starting points.
    pub mean_initial_sum_rate: f64,
    pub mean_runtime_ms: f64,
    pub std_runtime_ms: f64,
    pub mean_iterations: f64,
    /// Mean of `runtime_ms / iterations`.
    pub mean_iteration_ms: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    m: usize,
    n: usize,
    p_max_dbm: f64,
}

struct TrialOutcome {
    point: usize,
    row: ResultRow,
    initial_sum_rate: f64,
}

fn solve_trial(cfg: &ExperimentConfig, point: SweepPoint, trial: usize) -> Result<(ResultRow, f64)> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let fading = FadingConfig { seed, ..cfg.fading.clone() };
    let ch = generate_channels(&cfg.geometry(), &fading, (point.m, point.n), cfg.noise())?;
    let budget = cfg.budget(point.p_max_dbm, point.n)?;
    let solver = SolverConfig { init_seed: cfg.solver.init_seed.wrapping_add(seed), ..cfg.solver.clone() };

    let start = Instant::now();
    let sol = bsum_solve(&ch, &budget, &solver, None)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let row = ResultRow {
        trial,
        m: point.m,
        n: point.n,
        k: cfg.users,
        p_max_dbm: point.p_max_dbm,
        sum_rate_bits: sol.sum_rate,
        iterations: sol.iterations,
        runtime_ms,
        converged: sol.converged,
        residual_max: sol.residuals.max_relative(),
    };
    Ok((row, sol.initial_sum_rate))
}

/// Runs every `(dims × p_max) × trials` solve and aggregates per point.
/// Rows come back ordered by sweep point, then trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let points: Vec<SweepPoint> = cfg
        .dims
        .iter()
        .flat_map(|&[m, n]| cfg.p_max_dbm.iter().map(move |&p| SweepPoint { m, n, p_max_dbm: p }))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;

    let mut outcomes: Vec<TrialOutcome> = Vec::with_capacity(points.len() * cfg.trials);
    for (idx, &point) in points.iter().enumerate() {
        if cfg.warmup {
            solve_trial(cfg, point, 0)?;
        }
        let batch: Result<Vec<TrialOutcome>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    solve_trial(cfg, point, t).map(|(row, initial_sum_rate)| TrialOutcome { point: idx, row, initial_sum_rate })
                })
                .collect()
        });
        let batch = batch?;
        log::info!(
            "M={} N={} P_max={} dBm: {} trials done",
            point.m,
            point.n,
            point.p_max_dbm,
            batch.len()
        );
        outcomes.extend(batch);
    }
    outcomes.sort_by_key(|o| (o.point, o.row.trial));

    let summary = points
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let group: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.point == idx).collect();
            summarize(p, cfg.users, &group)
        })
        .collect();
    Ok(ExperimentResult { rows: outcomes.into_iter().map(|o| o.row).collect(), summary })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 { values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn summarize(p: &SweepPoint, k: usize, group: &[&TrialOutcome]) -> SummaryRow {
    let n = group.len() as f64;
    let (mean_sum_rate, std_sum_rate) = mean_std(group.iter().map(|o| o.row.sum_rate_bits));
    let (mean_runtime_ms, std_runtime_ms) = mean_std(group.iter().map(|o| o.row.runtime_ms));
    SummaryRow {
        m: p.m,
        n: p.n,
        k,
        p_max_dbm: p.p_max_dbm,
        trials: group.len(),
        mean_sum_rate,
        std_sum_rate,
        mean_initial_sum_rate: group.iter().map(|o| o.initial_sum_rate).sum::<f64>() / n,
        mean_runtime_ms,
        std_runtime_ms,
        mean_iterations: group.iter().map(|o| o.row.iterations as f64).sum::<f64>() / n,
        mean_iteration_ms: group.iter().map(|o| o.row.runtime_ms / o.row.iterations.max(1) as f64).sum::<f64>() / n,
        converged_fraction: group.iter().filter(|o| o.row.converged).count() as f64 / n,
    }
}

/// Which dimension a size sweep varies.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeSweep {
    /// Fix `N`, sweep `M` over the list.
    Antennas { n: usize, m_values: Vec<usize> },
    /// Fix `M`, sweep `N` over the list.
    Elements { m: usize, n_values: Vec<usize> },
}

/// Runtime-versus-size table: one summary row per swept size, at the first
/// configured `P_max`.
pub fn sweep_sizes(cfg: &ExperimentConfig, sweep: &SizeSweep) -> Result<Vec<SummaryRow>> {
    let dims: Vec<[usize; 2]> = match sweep {
        SizeSweep::Antennas { n, m_values } => m_values.iter().map(|&m| [m, *n]).collect(),
        SizeSweep::Elements { m, n_values } => n_values.iter().map(|&n| [*m, n]).collect(),
    };
    if dims.is_empty() {
        return Err(Error::Config("size sweep list is empty".into()));
    }
    let p_max = *cfg.p_max_dbm.first().ok_or_else(|| Error::Config("p_max_dbm is empty".into()))?;
    let sized = ExperimentConfig { dims, p_max_dbm: vec![p_max], ..cfg.clone() };
    Ok(run_experiment(&sized)?.summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    config: ExperimentConfig,
    rows: Vec<ResultRow>,
    summary: Vec<SummaryRow>,
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(CSV_HEADER)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// JSON report with the fully resolved config, the rows and the summary.
pub fn write_json<W: Write>(cfg: &ExperimentConfig, result: &ExperimentResult, out: W) -> Result<()> {
    let report = JsonReport { config: cfg.clone(), rows: result.rows.clone(), summary: result.summary.clone() };
    serde_json::to_writer_pretty(out, &report)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<(ExperimentConfig, ExperimentResult)> {
    let report: JsonReport = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    Ok((report.config, ExperimentResult { rows: report.rows, summary: report.summary }))
}

/// Writes `result` to `path` in the requested format.
pub fn emit(cfg: &ExperimentConfig, result: &ExperimentResult, format: OutputFormat, path: &Path) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(&result.rows, &mut file)?,
        OutputFormat::Json => write_json(cfg, result, &mut file)?,
    }
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            dims: vec![[4, 4]],
            users: 2,
            trials: 1,
            warmup: false,
            solver: SolverConfig { max_iters: 30, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn one_trial_one_row() {
        let res = run_experiment(&tiny()).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.summary.len(), 1);
        assert_eq!(res.rows[0].k, 2);
    }

    #[test]
    fn header_only_csv_for_no_rows() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_json(r#"{"trials": 2, "bogus": 1}"#);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"trials": 3, "solver": {"tol": 1e-3}}"#).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.solver.tol, 1e-3);
        assert_eq!(cfg.solver.max_iters, 500);
        assert_eq!(cfg.dims, vec![[64, 32]]);
    }

    #[test]
    fn split_must_sum_to_one() {
        let err = ExperimentConfig::from_json(r#"{"power_split": {"fraction_ris": 0.5, "fraction_bs": 0.6}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(ExperimentConfig { trials: 0, ..tiny() }.validate().is_err());
    }

    #[test]
    fn budget_split() {
        let b = ExperimentConfig::default().budget(30.0, 4).unwrap();
        assert!((b.p_bs - 0.99).abs() < 1e-15);
        assert!((b.p_ris - 0.01).abs() < 1e-15);
        assert_eq!(b.eta, vec![8.0; 4]);
    }

    #[test]
    fn empty_size_sweep_is_an_error() {
        let sweep = SizeSweep::Elements { m: 4, n_values: vec![] };
        assert!(sweep_sizes(&tiny(), &sweep).is_err());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("CSV".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
