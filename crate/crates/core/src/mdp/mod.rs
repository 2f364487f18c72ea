//! Finite MDP for relay power allocation, and its solvers.
//!
//! [`MdpModel`] is a generic tabular model (dense rewards, sparse
//! transitions). [`RelayMdp`] builds one from a [`Scenario`]: the state is
//! `(G_RD index, G_RE index, battery level)`, actions are power levels, the
//! reward is the thresholded acoustic secrecy rate and transitions factor into
//! two independent gain chains, the harvest draw and the battery recursion.

mod solve;
mod table;

pub use solve::{
    greedy_policy, policy_evaluation, policy_improvement, policy_iteration, q_value, value_iteration,
    PolicyIterationOutcome, SolverError, SolverStats, ValueIterationOutcome, MAX_IMPROVEMENT_PASSES,
};
pub use table::{PolicyTable, PolicyTableRow, SolverMetadata, TableError};

use thiserror::Error;

use crate::acoustic::{broadband_snr, AcousticError, AcousticLinkParams};
use crate::config::{RelayState, Scenario};
use crate::energy::{battery_update, BatteryState, PowerLevels};

/// Transition-mass tolerance for feasible state-action pairs.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("action {action} is infeasible in state {state}")]
    InfeasibleAction { state: usize, action: usize },
    #[error("state {0} has no feasible action")]
    NoFeasibleAction(usize),
    #[error("transition mass of (s={state}, a={action}) is {mass}")]
    Mass { state: usize, action: usize, mass: f64 },
    #[error("discount must lie in [0, 1), got {0}")]
    Discount(f64),
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("negative or non-finite reward {reward} at (s={state}, a={action})")]
    Reward { state: usize, action: usize, reward: f64 },
    #[error(transparent)]
    Acoustic(#[from] AcousticError),
}

/// Deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub action_index: Vec<usize>,
}

impl Policy {
    pub fn uniform(n_states: usize, action: usize) -> Self {
        Self { action_index: vec![action; n_states] }
    }

    pub fn action(&self, state: usize) -> usize {
        self.action_index[state]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Tabular MDP. A state-action pair is feasible iff it has outgoing transitions.
#[derive(Debug, Clone)]
pub struct MdpModel {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    rewards: Vec<f64>,
    transitions: Vec<Vec<(usize, f64)>>,
}

impl MdpModel {
    /// `rewards` and `transitions` are indexed by `state * n_actions + action`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        discount: f64,
        rewards: Vec<f64>,
        transitions: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&discount) {
            return Err(ModelError::Discount(discount));
        }
        let cells = n_states * n_actions;
        if rewards.len() != cells || transitions.len() != cells {
            return Err(ModelError::Shape(format!(
                "expected {cells} cells, got {} rewards and {} transition rows",
                rewards.len(),
                transitions.len()
            )));
        }
        let model = Self { n_states, n_actions, discount, rewards, transitions };
        for s in 0..n_states {
            if !(0..n_actions).any(|a| model.is_feasible(s, a)) {
                return Err(ModelError::NoFeasibleAction(s));
            }
            for a in 0..n_actions {
                let r = model.rewards[s * n_actions + a];
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(ModelError::Reward { state: s, action: a, reward: r });
                }
                if !model.is_feasible(s, a) {
                    continue;
                }
                let row = model.successors(s, a);
                if row.iter().any(|&(t, p)| t >= n_states || !(0.0..=1.0).contains(&p)) {
                    return Err(ModelError::Shape(format!("bad successor entry at (s={s}, a={a})")));
                }
                let mass: f64 = row.iter().map(|&(_, p)| p).sum();
                if (mass - 1.0).abs() > MASS_TOL {
                    return Err(ModelError::Mass { state: s, action: a, mass });
                }
            }
        }
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.n_actions + action]
    }

    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.transitions[state * self.n_actions + action]
    }

    pub fn is_feasible(&self, state: usize, action: usize) -> bool {
        !self.transitions[state * self.n_actions + action].is_empty()
    }

    pub fn feasible_actions(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_actions).filter(move |&a| self.is_feasible(state, a))
    }

    /// Largest single-slot reward over feasible pairs.
    pub fn max_reward(&self) -> f64 {
        (0..self.n_states)
            .flat_map(|s| self.feasible_actions(s).map(move |a| (s, a)))
            .map(|(s, a)| self.reward(s, a))
            .fold(0.0, f64::max)
    }

    /// Same structure with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&discount) {
            return Err(ModelError::Discount(discount));
        }
        Ok(Self { discount, ..self.clone() })
    }

    /// Same structure with every reward multiplied by `factor ≥ 0`.
    pub fn with_scaled_rewards(&self, factor: f64) -> Self {
        Self { rewards: self.rewards.iter().map(|r| r * factor).collect(), ..self.clone() }
    }
}

/// Maps relay states to flat indices, battery level varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub gain_levels_rd: usize,
    pub gain_levels_re: usize,
    pub battery_levels: usize,
}

impl StateLayout {
    pub fn n_states(&self) -> usize {
        self.gain_levels_rd * self.gain_levels_re * self.battery_levels
    }

    pub fn index(&self, s: RelayState) -> usize {
        (s.gain_rd * self.gain_levels_re + s.gain_re) * self.battery_levels + s.battery as usize
    }

    pub fn state(&self, index: usize) -> RelayState {
        let battery = (index % self.battery_levels) as u32;
        let rest = index / self.battery_levels;
        RelayState { gain_rd: rest / self.gain_levels_re, gain_re: rest % self.gain_levels_re, battery }
    }

    pub fn states(&self) -> impl Iterator<Item = RelayState> + '_ {
        (0..self.n_states()).map(|i| self.state(i))
    }
}

/// Acoustic secrecy rate in bps: `B · max(log2((1+γ_D)/(1+γ_E)), 0)`.
pub fn acoustic_secrecy_rate(
    gain_rd: f64,
    gain_re: f64,
    power_w: f64,
    link_d: &AcousticLinkParams,
    link_e: &AcousticLinkParams,
) -> Result<f64, AcousticError> {
    let snr_d = broadband_snr(power_w, gain_rd, link_d)?;
    let snr_e = broadband_snr(power_w, gain_re, link_e)?;
    Ok(secrecy_rate_from_snr(snr_d, snr_e, crate::acoustic::khz_to_hz(link_d.bandwidth_khz)))
}

/// `B · max(log2((1+γ_D)/(1+γ_E)), 0)`.
pub fn secrecy_rate_from_snr(snr_d: f64, snr_e: f64, bandwidth_hz: f64) -> f64 {
    let bits = (snr_d.ln_1p() - snr_e.ln_1p()) / std::f64::consts::LN_2;
    bandwidth_hz * bits.max(0.0)
}

/// Applies the rate threshold: the rate if it meets `r_th`, otherwise 0.
pub fn thresholded(rate: f64, r_th: f64) -> f64 {
    if rate >= r_th {
        rate
    } else {
        0.0
    }
}

/// The relay MDP together with its physical bookkeeping.
#[derive(Debug, Clone)]
pub struct RelayMdp {
    pub model: MdpModel,
    pub layout: StateLayout,
    pub power: PowerLevels,
    /// Per-unit SNR factors `γ / (P·G)` for the destination and eavesdropper hops.
    pub snr_per_unit_d: f64,
    pub snr_per_unit_e: f64,
    pub bandwidth_hz: f64,
    pub r_th: f64,
}

impl RelayMdp {
    pub fn build(scenario: &Scenario) -> Result<Self, ModelError> {
        let layout = StateLayout {
            gain_levels_rd: scenario.chain_rd.len(),
            gain_levels_re: scenario.chain_re.len(),
            battery_levels: scenario.battery.levels(),
        };
        let n_actions = scenario.power.len();
        let mut rewards = Vec::with_capacity(layout.n_states() * n_actions);
        for state in layout.states() {
            for a in 0..n_actions {
                let r = if scenario.power.is_feasible(a, BatteryState { level: state.battery }) {
                    reward(scenario, state, a)?
                } else {
                    0.0
                };
                rewards.push(r);
            }
        }
        let transitions = build_transitions(scenario, &layout);
        let model = MdpModel::new(layout.n_states(), n_actions, scenario.gamma, rewards, transitions)?;
        Ok(Self {
            model,
            layout,
            power: scenario.power.clone(),
            snr_per_unit_d: crate::acoustic::snr_per_unit_power_gain(&scenario.acoustic_d)?,
            snr_per_unit_e: crate::acoustic::snr_per_unit_power_gain(&scenario.acoustic_e)?,
            bandwidth_hz: crate::acoustic::khz_to_hz(scenario.acoustic_d.bandwidth_khz),
            r_th: scenario.r_th,
        })
    }

    pub fn index(&self, state: RelayState) -> usize {
        self.layout.index(state)
    }
}

/// Immediate reward of transmitting at power level `action` in `state`.
pub fn reward(scenario: &Scenario, state: RelayState, action: usize) -> Result<f64, ModelError> {
    if !scenario.power.is_feasible(action, BatteryState { level: state.battery }) {
        return Err(ModelError::InfeasibleAction {
            state: StateLayout {
                gain_levels_rd: scenario.chain_rd.len(),
                gain_levels_re: scenario.chain_re.len(),
                battery_levels: scenario.battery.levels(),
            }
            .index(state),
            action,
        });
    }
    let rate = acoustic_secrecy_rate(
        scenario.chain_rd.levels[state.gain_rd],
        scenario.chain_re.levels[state.gain_re],
        scenario.power.watts()[action],
        &scenario.acoustic_d,
        &scenario.acoustic_e,
    )?;
    Ok(thresholded(rate, scenario.r_th))
}

/// Sparse transition rows indexed by `state * n_actions + action`; infeasible
/// pairs get an empty row. Successors reached through both harvest branches
/// are merged.
pub fn build_transitions(scenario: &Scenario, layout: &StateLayout) -> Vec<Vec<(usize, f64)>> {
    let n_actions = scenario.power.len();
    let p = scenario.harvest.probability;
    let branches = [(scenario.harvest.quantum_units, p), (0, 1.0 - p)];
    let mut rows = Vec::with_capacity(layout.n_states() * n_actions);
    for state in layout.states() {
        let battery = BatteryState { level: state.battery };
        for a in 0..n_actions {
            let mut row: Vec<(usize, f64)> = Vec::new();
            if scenario.power.is_feasible(a, battery) {
                let spend = scenario.power.units()[a];
                for (next_rd, &p_rd) in scenario.chain_rd.transition[state.gain_rd].iter().enumerate() {
                    if p_rd == 0.0 {
                        continue;
                    }
                    for (next_re, &p_re) in scenario.chain_re.transition[state.gain_re].iter().enumerate() {
                        if p_re == 0.0 {
                            continue;
                        }
                        for &(harvested, p_h) in &branches {
                            if p_h == 0.0 {
                                continue;
                            }
                            let next_battery = battery_update(battery, spend, harvested, &scenario.battery)
                                .expect("feasibility checked");
                            let next = layout.index(RelayState {
                                gain_rd: next_rd,
                                gain_re: next_re,
                                battery: next_battery.level,
                            });
                            let mass = p_rd * p_re * p_h;
                            match row.iter_mut().find(|(t, _)| *t == next) {
                                Some(entry) => entry.1 += mass,
                                None => row.push((next, mass)),
                            }
                        }
                    }
                }
                row.sort_by_key(|&(t, _)| t);
            }
            rows.push(row);
        }
    }
    rows
}
