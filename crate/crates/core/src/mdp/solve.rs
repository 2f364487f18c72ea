//! Policy iteration and value iteration on a tabular [`MdpModel`].
//!
//! Bellman sweeps are Jacobi-style (double buffered), so results do not
//! depend on state ordering. Argmax ties resolve to the lowest action index,
//! which for relay models is the lowest power.

use thiserror::Error;

use super::{MdpModel, Policy, ValueFunction};

/// Upper bound on improvement passes before policy iteration gives up.
pub const MAX_IMPROVEMENT_PASSES: usize = 10_000;
const MAX_SWEEPS: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("policy assigns infeasible action {action} to state {state}")]
    InfeasiblePolicy { state: usize, action: usize },
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("{what} did not converge within {limit} iterations")]
    NotConverged { what: &'static str, limit: usize },
    #[error("policy covers {got} states, model has {expected}")]
    PolicyShape { got: usize, expected: usize },
}

/// Operation counters for the planning phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub improvement_passes: usize,
    pub evaluation_sweeps: usize,
    /// Single-state Bellman backups (one `Q(s, a)` evaluation each).
    pub bellman_backups: u64,
}

#[derive(Debug, Clone)]
pub struct PolicyIterationOutcome {
    pub policy: Policy,
    pub value: ValueFunction,
    pub stats: SolverStats,
}

#[derive(Debug, Clone)]
pub struct ValueIterationOutcome {
    pub value: ValueFunction,
    pub sweeps: usize,
    pub bellman_backups: u64,
}

/// `R(s,a) + Γ Σ P(s'|s,a) V(s')`.
pub fn q_value(model: &MdpModel, state: usize, action: usize, value: &ValueFunction) -> f64 {
    let future: f64 = model
        .successors(state, action)
        .iter()
        .map(|&(next, p)| p * value.values[next])
        .sum();
    model.reward(state, action) + model.discount() * future
}

fn check_policy(model: &MdpModel, policy: &Policy) -> Result<(), SolverError> {
    if policy.action_index.len() != model.n_states() {
        return Err(SolverError::PolicyShape { got: policy.action_index.len(), expected: model.n_states() });
    }
    for (state, &action) in policy.action_index.iter().enumerate() {
        if action >= model.n_actions() || !model.is_feasible(state, action) {
            return Err(SolverError::InfeasiblePolicy { state, action });
        }
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<(), SolverError> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(SolverError::Epsilon(epsilon))
    }
}

/// Iterative evaluation of a fixed policy until the sup-norm change between
/// sweeps drops below `epsilon`, starting from `V = 0`.
pub fn policy_evaluation(model: &MdpModel, policy: &Policy, epsilon: f64) -> Result<ValueFunction, SolverError> {
    let mut stats = SolverStats::default();
    evaluate_from(model, policy, ValueFunction::zeros(model.n_states()), epsilon, &mut stats)
}

fn evaluate_from(
    model: &MdpModel,
    policy: &Policy,
    start: ValueFunction,
    epsilon: f64,
    stats: &mut SolverStats,
) -> Result<ValueFunction, SolverError> {
    check_epsilon(epsilon)?;
    check_policy(model, policy)?;
    let mut current = start;
    let mut next = ValueFunction::zeros(model.n_states());
    for _ in 0..MAX_SWEEPS {
        let mut delta = 0.0f64;
        for s in 0..model.n_states() {
            let v = q_value(model, s, policy.action(s), &current);
            delta = delta.max((v - current.values[s]).abs());
            next.values[s] = v;
        }
        stats.evaluation_sweeps += 1;
        stats.bellman_backups += model.n_states() as u64;
        std::mem::swap(&mut current, &mut next);
        if delta < epsilon {
            return Ok(current);
        }
    }
    Err(SolverError::NotConverged { what: "policy evaluation", limit: MAX_SWEEPS })
}

/// Greedy action for one state: exact argmax of `Q`, lowest index on ties.
fn greedy_action(model: &MdpModel, state: usize, value: &ValueFunction, backups: &mut u64) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for a in model.feasible_actions(state) {
        let q = q_value(model, state, a, value);
        *backups += 1;
        match best {
            Some((_, bq)) if q <= bq => {}
            _ => best = Some((a, q)),
        }
    }
    best.expect("model guarantees a feasible action per state")
}

/// One improvement pass. Returns the greedy policy and whether it equals
/// `current`. A state keeps its current action when that action's `Q`
/// equals the maximum.
pub fn policy_improvement(model: &MdpModel, value: &ValueFunction, current: &Policy) -> (Policy, bool) {
    let mut backups = 0;
    improve(model, value, current, &mut backups)
}

fn improve(model: &MdpModel, value: &ValueFunction, current: &Policy, backups: &mut u64) -> (Policy, bool) {
    let mut stable = true;
    let mut next = current.clone();
    for s in 0..model.n_states() {
        let (best, best_q) = greedy_action(model, s, value, backups);
        let old = current.action(s);
        let keep = old < model.n_actions()
            && model.is_feasible(s, old)
            && q_value(model, s, old, value) >= best_q;
        if !keep {
            next.action_index[s] = best;
            stable = false;
        }
    }
    (next, stable)
}

/// Greedy policy with respect to `value` (lowest index on ties).
pub fn greedy_policy(model: &MdpModel, value: &ValueFunction) -> Policy {
    let mut backups = 0;
    Policy {
        action_index: (0..model.n_states())
            .map(|s| greedy_action(model, s, value, &mut backups).0)
            .collect(),
    }
}

/// Policy iteration from the all-lowest-action policy and `V = 0`.
///
/// Alternates iterative evaluation (tolerance `epsilon`) with greedy
/// improvement until no state changes its action. Each evaluation warm-starts
/// from the previous value function.
pub fn policy_iteration(model: &MdpModel, epsilon: f64) -> Result<PolicyIterationOutcome, SolverError> {
    check_epsilon(epsilon)?;
    let mut stats = SolverStats::default();
    let mut policy = Policy {
        action_index: (0..model.n_states())
            .map(|s| model.feasible_actions(s).next().expect("feasible action exists"))
            .collect(),
    };
    let mut value = ValueFunction::zeros(model.n_states());
    for _ in 0..MAX_IMPROVEMENT_PASSES {
        value = evaluate_from(model, &policy, value, epsilon, &mut stats)?;
        let (next, stable) = improve(model, &value, &policy, &mut stats.bellman_backups);
        stats.improvement_passes += 1;
        if stable {
            return Ok(PolicyIterationOutcome { policy, value, stats });
        }
        policy = next;
    }
    Err(SolverError::NotConverged { what: "policy iteration", limit: MAX_IMPROVEMENT_PASSES })
}

/// Bellman-optimality iteration from `V = 0` until the sup-norm change is
/// below `epsilon`. The returned value is within `ε·Γ/(1-Γ)` of `V*`.
pub fn value_iteration(model: &MdpModel, epsilon: f64) -> Result<ValueIterationOutcome, SolverError> {
    check_epsilon(epsilon)?;
    let mut current = ValueFunction::zeros(model.n_states());
    let mut next = ValueFunction::zeros(model.n_states());
    let mut backups = 0u64;
    for sweep in 1..=MAX_SWEEPS {
        let mut delta = 0.0f64;
        for s in 0..model.n_states() {
            let (_, q) = greedy_action(model, s, &current, &mut backups);
            delta = delta.max((q - current.values[s]).abs());
            next.values[s] = q;
        }
        std::mem::swap(&mut current, &mut next);
        if delta < epsilon {
            return Ok(ValueIterationOutcome { value: current, sweeps: sweep, bellman_backups: backups });
        }
    }
    Err(SolverError::NotConverged { what: "value iteration", limit: MAX_SWEEPS })
}
