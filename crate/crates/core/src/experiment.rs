//! Experiment driver behind the `uwsec` binary: solving and exporting the
//! policy table, evaluating schemes, and parameter sweeps written as CSV.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;
use thiserror::Error;

use crate::config::{ConfigError, EvalMode, Scenario, SystemConfig};
use crate::mdp::{policy_iteration, ModelError, PolicyIterationOutcome, PolicyTable, RelayMdp, SolverError, TableError};
use crate::policies::{Scheme, SchemeError, SchemeKind};
use crate::sim::{EvalResult, Simulator};

pub const DISCOUNT_SWEEP: &str = include_str!("../configs/discount.toml");
pub const HARVEST_SWEEP: &str = include_str!("../configs/harvest.toml");
pub const CAPACITY_SWEEP: &str = include_str!("../configs/capacity.toml");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("policy table: {0}")]
    Table(#[from] TableError),
    #[error("scheme: {0}")]
    Scheme(#[from] SchemeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{failed} of {total} sweep points failed")]
    SweepFailures { failed: usize, total: usize },
}

impl ExperimentError {
    /// Process exit code: 1 for configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            _ => 2,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// One sweep axis: a dotted parameter path and its values.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Primary swept parameter plus secondary variant axes; the grid is the
/// cross product, variants varying slowest.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub variants: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let spec: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if spec.values.is_empty() || spec.variants.iter().any(|v| v.values.is_empty()) {
            return Err(ConfigError::Invalid { path: "values".into(), message: "sweep axes must be non-empty".into() });
        }
        Ok(spec)
    }

    pub fn preset(name: &str) -> Option<Self> {
        let text = match name {
            "discount" => DISCOUNT_SWEEP,
            "harvest" => HARVEST_SWEEP,
            "capacity" => CAPACITY_SWEEP,
            _ => return None,
        };
        Some(Self::from_toml_str(text).expect("bundled sweep is valid"))
    }

    /// Column names in CSV order: primary parameter, then variants.
    pub fn columns(&self) -> Vec<&str> {
        std::iter::once(self.parameter.as_str())
            .chain(self.variants.iter().map(|v| v.parameter.as_str()))
            .collect()
    }

    /// Grid points as `[primary, variant_1, ...]` value vectors.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.variants {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    axis.values.iter().map(move |&v| {
                        let mut next = c.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .flat_map(|variant| {
                self.values.iter().map(move |&p| {
                    let mut point = vec![p];
                    point.extend(&variant);
                    point
                })
            })
            .collect()
    }
}

/// Evaluation settings shared by `eval` and `sweep`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub episodes: u64,
    pub seed: u64,
    pub mode: EvalMode,
    pub exact: bool,
    pub threads: Option<usize>,
}

impl EvalOptions {
    pub fn from_config(config: &SystemConfig) -> Self {
        Self {
            episodes: config.evaluation.episodes,
            seed: config.evaluation.master_seed,
            mode: config.evaluation.mode,
            exact: config.evaluation.exact,
            threads: None,
        }
    }
}

/// One CSV row of a sweep or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: SchemeKind,
    pub params: Vec<f64>,
    pub result: EvalResult,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(Vec<f64>, String)>,
}

/// Solves the planning problem for `scenario`.
pub fn solve(scenario: &Scenario) -> Result<(RelayMdp, PolicyIterationOutcome), ExperimentError> {
    let mdp = RelayMdp::build(scenario)?;
    let outcome = policy_iteration(&mdp.model, scenario.epsilon)?;
    Ok((mdp, outcome))
}

/// Evaluates `schemes` on one configuration. `opa_table`, when given,
/// replaces the in-process policy-iteration solve.
pub fn evaluate_schemes(
    config: &SystemConfig,
    schemes: &[SchemeKind],
    options: &EvalOptions,
    opa_table: Option<&PolicyTable>,
) -> Result<Vec<(SchemeKind, EvalResult)>, ExperimentError> {
    let scenario = config.scenario()?;
    let mdp = RelayMdp::build(&scenario)?;
    let sim = Simulator::new(&mdp, &scenario, options.mode).exact(options.exact);
    let mut out = Vec::with_capacity(schemes.len());
    for &kind in schemes {
        let scheme = build_scheme(kind, &mdp, scenario.epsilon, opa_table)?;
        out.push((kind, sim.evaluate(&scheme, options.episodes, options.seed, options.threads)));
    }
    Ok(out)
}

/// Builds a scheme for `mdp`, solving or loading the OPA table as needed.
pub fn build_scheme(
    kind: SchemeKind,
    mdp: &RelayMdp,
    epsilon: f64,
    opa_table: Option<&PolicyTable>,
) -> Result<Scheme, ExperimentError> {
    Ok(match kind {
        SchemeKind::Opa => {
            let policy = match opa_table {
                Some(table) => table.to_policy(mdp)?,
                None => policy_iteration(&mdp.model, epsilon)?.policy,
            };
            Scheme::opa(policy, mdp)?
        }
        SchemeKind::Ga => Scheme::greedy(),
        SchemeKind::Na => Scheme::naive(),
    })
}

/// Runs every grid point of `spec`: rebuild, re-solve, evaluate each scheme.
/// Per-point failures are logged and collected; the run continues.
pub fn run_sweep(
    config: &SystemConfig,
    spec: &SweepSpec,
    schemes: &[SchemeKind],
    options: &EvalOptions,
) -> SweepOutcome {
    let columns: Vec<String> = spec.columns().into_iter().map(String::from).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for point in spec.points() {
        let result = columns
            .iter()
            .zip(&point)
            .try_fold(config.clone(), |c, (path, &v)| c.with_param(path, v))
            .map_err(ExperimentError::from)
            .and_then(|c| evaluate_schemes(&c, schemes, options, None));
        match result {
            Ok(results) => {
                for (scheme, result) in results {
                    log::info!("{columns:?}={point:?} {scheme}: {:.6} ± {:.6}", result.mean_reward, result.ci_halfwidth_95);
                    rows.push(ResultRow { scheme, params: point.clone(), result, seed: options.seed });
                }
            }
            Err(e) => {
                log::error!("sweep point {columns:?}={point:?} failed: {e}");
                failures.push((point, e.to_string()));
            }
        }
    }
    SweepOutcome { columns, rows, failures }
}

/// Writes result rows as CSV: `scheme, <params...>, mean, ci95, episodes, seed, mode`.
pub fn write_csv<W: Write>(writer: W, columns: &[String], rows: &[ResultRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["scheme".to_string()];
    header.extend(columns.iter().cloned());
    header.extend(["mean", "ci95", "episodes", "seed", "mode"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.scheme.to_string()];
        record.extend(row.params.iter().map(|v| v.to_string()));
        record.push(row.result.mean_reward.to_string());
        record.push(row.result.ci_halfwidth_95.to_string());
        record.push(row.result.episodes.to_string());
        record.push(row.seed.to_string());
        record.push(row.result.mode.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Result of [`solve_and_export`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub table: PolicyTable,
    pub wall_time_seconds: f64,
}

/// Solves the planning phase and writes the policy table to `out_path`.
///
/// The table carries only deterministic solver metadata so that re-running
/// reproduces it byte for byte; the wall time goes to `<out_path>.timing`.
pub fn solve_and_export(config: &SystemConfig, out_path: &Path) -> Result<SolveReport, ExperimentError> {
    let scenario = config.scenario()?;
    let started = Instant::now();
    let (mdp, outcome) = solve(&scenario)?;
    let wall_time_seconds = started.elapsed().as_secs_f64();
    let table = PolicyTable::from_solution(&mdp, &outcome.policy, &outcome.value, scenario.epsilon, &outcome.stats);
    std::fs::write(out_path, table.to_text()).map_err(|e| ExperimentError::io(out_path, e))?;
    let timing = timing_path(out_path);
    std::fs::write(&timing, format!("wall_time_seconds {wall_time_seconds}\n"))
        .map_err(|e| ExperimentError::io(&timing, e))?;
    Ok(SolveReport { table, wall_time_seconds })
}

pub fn timing_path(out_path: &Path) -> PathBuf {
    let mut name = out_path.as_os_str().to_owned();
    name.push(".timing");
    PathBuf::from(name)
}

pub fn load_policy_table(path: &Path) -> Result<PolicyTable, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    Ok(PolicyTable::parse(&text)?)
}
