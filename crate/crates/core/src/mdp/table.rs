//! Flat text serialization of a solved policy and its value function.
//!
//! ```text
//! # uwsec policy table
//! # discount 0.9
//! # epsilon 0.000001
//! # improvement_passes 4
//! # evaluation_sweeps 612
//! # bellman_backups 40872
//! # power_levels_w 0 1 2 3
//! gain_rd gain_re battery action power_w value
//! 0 0 0 0 0 1234.5
//! ...
//! ```
//!
//! Gain entries are 0-based level indices. Output is byte-stable for a given
//! solution: floats are written in shortest round-trip form.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Policy, RelayMdp, SolverStats, ValueFunction};
use crate::config::RelayState;

const MAGIC: &str = "# uwsec policy table";
const HEADER: &str = "gain_rd gain_re battery action power_w value";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("table has no row for state {0:?}")]
    MissingState(RelayState),
    #[error("table row for {state:?} uses action {action}, infeasible at that battery level")]
    Infeasible { state: RelayState, action: usize },
    #[error("table power levels {table:?} differ from the model's {model:?}")]
    PowerLevels { table: Vec<f64>, model: Vec<f64> },
    #[error("state {0:?} lies outside the model's state space")]
    OutOfRange(RelayState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverMetadata {
    pub discount: f64,
    pub epsilon: f64,
    pub improvement_passes: usize,
    pub evaluation_sweeps: usize,
    pub bellman_backups: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTableRow {
    pub state: RelayState,
    pub action: usize,
    pub power_w: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub metadata: SolverMetadata,
    pub power_levels_w: Vec<f64>,
    pub rows: Vec<PolicyTableRow>,
}

impl PolicyTable {
    pub fn from_solution(
        mdp: &RelayMdp,
        policy: &Policy,
        value: &ValueFunction,
        epsilon: f64,
        stats: &SolverStats,
    ) -> Self {
        let rows = mdp
            .layout
            .states()
            .enumerate()
            .map(|(i, state)| PolicyTableRow {
                state,
                action: policy.action(i),
                power_w: mdp.power.watts()[policy.action(i)],
                value: value.values[i],
            })
            .collect();
        Self {
            metadata: SolverMetadata {
                discount: mdp.model.discount(),
                epsilon,
                improvement_passes: stats.improvement_passes,
                evaluation_sweeps: stats.evaluation_sweeps,
                bellman_backups: stats.bellman_backups,
            },
            power_levels_w: mdp.power.watts().to_vec(),
            rows,
        }
    }

    pub fn to_text(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "# discount {}", m.discount).unwrap();
        writeln!(out, "# epsilon {}", m.epsilon).unwrap();
        writeln!(out, "# improvement_passes {}", m.improvement_passes).unwrap();
        writeln!(out, "# evaluation_sweeps {}", m.evaluation_sweeps).unwrap();
        writeln!(out, "# bellman_backups {}", m.bellman_backups).unwrap();
        let levels: Vec<String> = self.power_levels_w.iter().map(|p| p.to_string()).collect();
        writeln!(out, "# power_levels_w {}", levels.join(" ")).unwrap();
        writeln!(out, "{HEADER}").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{} {} {} {} {} {}",
                r.state.gain_rd, r.state.gain_re, r.state.battery, r.action, r.power_w, r.value
            )
            .unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let err = |line: usize, message: &str| TableError::Parse { line, message: message.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(err(1, "missing table signature")),
        }
        let mut meta = |key: &str| -> Result<(usize, String), TableError> {
            let (n, line) = lines.next().ok_or_else(|| err(0, "truncated header"))?;
            let rest = line
                .strip_prefix("# ")
                .and_then(|l| l.strip_prefix(key))
                .ok_or_else(|| err(n, &format!("expected `# {key}`")))?;
            Ok((n, rest.trim().to_string()))
        };
        fn num<T: std::str::FromStr>(n: usize, s: &str) -> Result<T, TableError> {
            s.parse().map_err(|_| TableError::Parse { line: n, message: format!("bad number `{s}`") })
        }
        let (n, v) = meta("discount")?;
        let discount = num(n, &v)?;
        let (n, v) = meta("epsilon")?;
        let epsilon = num(n, &v)?;
        let (n, v) = meta("improvement_passes")?;
        let improvement_passes = num(n, &v)?;
        let (n, v) = meta("evaluation_sweeps")?;
        let evaluation_sweeps = num(n, &v)?;
        let (n, v) = meta("bellman_backups")?;
        let bellman_backups = num(n, &v)?;
        let (n, v) = meta("power_levels_w")?;
        let power_levels_w = v.split_whitespace().map(|t| num(n, t)).collect::<Result<Vec<f64>, _>>()?;
        match lines.next() {
            Some((_, HEADER)) => {}
            Some((n, _)) => return Err(err(n, "expected column header")),
            None => return Err(err(0, "missing column header")),
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(err(n, "expected 6 columns"));
            }
            rows.push(PolicyTableRow {
                state: RelayState {
                    gain_rd: num(n, fields[0])?,
                    gain_re: num(n, fields[1])?,
                    battery: num(n, fields[2])?,
                },
                action: num(n, fields[3])?,
                power_w: num(n, fields[4])?,
                value: num(n, fields[5])?,
            });
        }
        Ok(Self {
            metadata: SolverMetadata { discount, epsilon, improvement_passes, evaluation_sweeps, bellman_backups },
            power_levels_w,
            rows,
        })
    }

    /// Converts the table into a policy over `mdp`'s state space, checking
    /// coverage and feasibility.
    pub fn to_policy(&self, mdp: &RelayMdp) -> Result<Policy, TableError> {
        if self.power_levels_w != mdp.power.watts() {
            return Err(TableError::PowerLevels {
                table: self.power_levels_w.clone(),
                model: mdp.power.watts().to_vec(),
            });
        }
        let layout = mdp.layout;
        let mut actions: Vec<Option<usize>> = vec![None; layout.n_states()];
        for row in &self.rows {
            let s = row.state;
            if s.gain_rd >= layout.gain_levels_rd
                || s.gain_re >= layout.gain_levels_re
                || s.battery as usize >= layout.battery_levels
            {
                return Err(TableError::OutOfRange(s));
            }
            let idx = layout.index(s);
            if row.action >= mdp.model.n_actions() || !mdp.model.is_feasible(idx, row.action) {
                return Err(TableError::Infeasible { state: s, action: row.action });
            }
            actions[idx] = Some(row.action);
        }
        let action_index = actions
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.ok_or_else(|| TableError::MissingState(layout.state(i))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Policy { action_index })
    }
}
