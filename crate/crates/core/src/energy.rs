//! Relay battery and Bernoulli energy harvesting.
//!
//! All accounting is in integer energy units. A power level `P` spends
//! `P · T_s` units per slot, which must be integral for the state space to
//! stay finite.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("spending {spend} units exceeds the battery level {level}")]
    Infeasible { spend: u32, level: u32 },
    #[error("battery capacity must be at least 1 unit")]
    ZeroCapacity,
    #[error("harvest probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("harvest quantum must be at least 1 unit")]
    ZeroQuantum,
    #[error("power level {watts} W over a {slot_seconds} s slot is {energy} units, not an integer")]
    FractionalEnergy { watts: f64, slot_seconds: f64, energy: f64 },
    #[error("power levels must be non-negative, strictly increasing and include 0")]
    PowerLevels,
    #[error("slot duration must be positive, got {0}")]
    SlotSeconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    pub capacity_units: u32,
    pub slot_seconds: f64,
}

impl BatteryParams {
    pub fn new(capacity_units: u32, slot_seconds: f64) -> Result<Self, EnergyError> {
        if capacity_units == 0 {
            return Err(EnergyError::ZeroCapacity);
        }
        if !(slot_seconds > 0.0) || !slot_seconds.is_finite() {
            return Err(EnergyError::SlotSeconds(slot_seconds));
        }
        Ok(Self { capacity_units, slot_seconds })
    }

    /// Number of distinct battery levels, `capacity + 1`.
    pub fn levels(&self) -> usize {
        self.capacity_units as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestModel {
    pub probability: f64,
    pub quantum_units: u32,
}

impl HarvestModel {
    pub fn new(probability: f64, quantum_units: u32) -> Result<Self, EnergyError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(EnergyError::Probability(probability));
        }
        if quantum_units == 0 {
            return Err(EnergyError::ZeroQuantum);
        }
        Ok(Self { probability, quantum_units })
    }

    /// Harvest outcome for a given uniform draw `u ∈ [0, 1)`.
    ///
    /// Uses `u < p` so that, for a shared draw, raising `p` never turns a
    /// harvest into a miss.
    pub fn outcome(&self, u: f64) -> u32 {
        if u < self.probability {
            self.quantum_units
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BatteryState {
    pub level: u32,
}

/// Sorted set of transmit power levels with their per-slot energy cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLevels {
    watts: Vec<f64>,
    units: Vec<u32>,
}

impl PowerLevels {
    pub fn new(watts: Vec<f64>, slot_seconds: f64) -> Result<Self, EnergyError> {
        if watts.first() != Some(&0.0)
            || watts.iter().any(|w| !w.is_finite() || *w < 0.0)
            || watts.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(EnergyError::PowerLevels);
        }
        let units = watts
            .iter()
            .map(|&w| energy_units(w * slot_seconds).ok_or(EnergyError::FractionalEnergy {
                watts: w,
                slot_seconds,
                energy: w * slot_seconds,
            }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { watts, units })
    }

    pub fn len(&self) -> usize {
        self.watts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.watts.is_empty()
    }

    pub fn watts(&self) -> &[f64] {
        &self.watts
    }

    pub fn units(&self) -> &[u32] {
        &self.units
    }

    pub fn is_feasible(&self, action: usize, state: BatteryState) -> bool {
        self.units[action] <= state.level
    }
}

/// Converts an energy amount to whole units, or `None` if it is not integral.
pub fn energy_units(energy: f64) -> Option<u32> {
    let rounded = energy.round();
    if energy.is_finite() && energy >= 0.0 && (energy - rounded).abs() < 1e-9 && rounded <= u32::MAX as f64 {
        Some(rounded as u32)
    } else {
        None
    }
}

/// Draws the harvested energy for one slot: `E_R` with probability `p`, else 0.
pub fn harvest_sample<R: Rng + ?Sized>(model: &HarvestModel, rng: &mut R) -> u32 {
    model.outcome(rng.gen())
}

/// Battery recursion: spend, then add the harvest clamped at capacity.
pub fn battery_update(
    state: BatteryState,
    spend_units: u32,
    harvested: u32,
    params: &BatteryParams,
) -> Result<BatteryState, EnergyError> {
    if spend_units > state.level {
        return Err(EnergyError::Infeasible { spend: spend_units, level: state.level });
    }
    let remaining = state.level - spend_units;
    let level = if harvested > 0 {
        (remaining + harvested).min(params.capacity_units)
    } else {
        remaining
    };
    Ok(BatteryState { level })
}

/// Indices of the power levels affordable from `state`. Never empty.
pub fn feasible_actions(state: BatteryState, power: &PowerLevels) -> Vec<usize> {
    (0..power.len()).filter(|&a| power.is_feasible(a, state)).collect()
}
