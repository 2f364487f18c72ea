//! Action selection for the three transmission schemes.
//!
//! * OPA looks the action up in the table produced by policy iteration.
//! * GA maximizes the immediate reward over the feasible power levels.
//! * NA transmits with the largest affordable power level.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mdp::{Policy, RelayMdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Opa,
    Ga,
    Na,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Opa, SchemeKind::Ga, SchemeKind::Na];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Opa => "opa",
            SchemeKind::Ga => "ga",
            SchemeKind::Na => "na",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "opa" => Ok(SchemeKind::Opa),
            "ga" => Ok(SchemeKind::Ga),
            "na" => Ok(SchemeKind::Na),
            other => Err(SchemeError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("unknown scheme `{0}` (expected opa, ga or na)")]
    UnknownScheme(String),
    #[error("OPA table covers {got} states, model has {expected}")]
    TableSize { got: usize, expected: usize },
    #[error("OPA table assigns infeasible action {action} to state {state}")]
    Infeasible { state: usize, action: usize },
}

/// Decision-time operation counter: one unit per candidate action examined
/// (GA) or per direct lookup/computation (OPA, NA).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub decision_ops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    kind: SchemeKind,
    opa_table: Option<Policy>,
}

impl Scheme {
    /// OPA scheme from a lookup table covering every state of `mdp`.
    pub fn opa(table: Policy, mdp: &RelayMdp) -> Result<Self, SchemeError> {
        let n = mdp.model.n_states();
        if table.action_index.len() != n {
            return Err(SchemeError::TableSize { got: table.action_index.len(), expected: n });
        }
        for (state, &action) in table.action_index.iter().enumerate() {
            if action >= mdp.model.n_actions() || !mdp.model.is_feasible(state, action) {
                return Err(SchemeError::Infeasible { state, action });
            }
        }
        Ok(Self { kind: SchemeKind::Opa, opa_table: Some(table) })
    }

    pub fn greedy() -> Self {
        Self { kind: SchemeKind::Ga, opa_table: None }
    }

    pub fn naive() -> Self {
        Self { kind: SchemeKind::Na, opa_table: None }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn table(&self) -> Option<&Policy> {
        self.opa_table.as_ref()
    }

    /// Power-level index to use in `state`. Always feasible.
    pub fn select_action(&self, state: usize, mdp: &RelayMdp, ops: &mut OpCounter) -> usize {
        match self.kind {
            SchemeKind::Opa => {
                ops.decision_ops += 1;
                self.opa_table.as_ref().expect("OPA scheme carries a table").action(state)
            }
            SchemeKind::Ga => greedy_action(state, mdp, ops),
            SchemeKind::Na => {
                ops.decision_ops += 1;
                let battery = mdp.layout.state(state).battery;
                // levels are sorted, so the affordable ones form a prefix
                mdp.power.units().partition_point(|&u| u <= battery) - 1
            }
        }
    }
}

/// Examines every power level; among feasible ones keeps the first with the
/// strictly largest immediate reward.
fn greedy_action(state: usize, mdp: &RelayMdp, ops: &mut OpCounter) -> usize {
    let mut best = 0;
    let mut best_reward = f64::NEG_INFINITY;
    for a in 0..mdp.model.n_actions() {
        ops.decision_ops += 1;
        if !mdp.model.is_feasible(state, a) {
            continue;
        }
        let r = mdp.model.reward(state, a);
        if r > best_reward {
            best = a;
            best_reward = r;
        }
    }
    best
}
