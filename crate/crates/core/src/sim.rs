//! Monte Carlo evaluation of the transmission phase.
//!
//! Each episode starts from the scenario's initial state and, slot by slot,
//! selects an action with a [`Scheme`], draws the optical blockage, credits
//! the secrecy rate, updates the battery and steps both gain chains.
//!
//! Randomness per episode comes from two ChaCha streams derived from the
//! master seed and the episode index: a dynamics stream that supplies exactly
//! four uniforms per slot (blockage, harvest, RD chain, RE chain) and an
//! auxiliary stream for the lifetime draw and optical fading. A fixed draw
//! count per slot keeps runs with different parameters coupled on the same
//! randomness, and per-episode streams make results independent of how
//! episodes are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EvalMode, RelayState, Scenario};
use crate::energy::{battery_update, BatteryState};
use crate::mdp::{secrecy_rate_from_snr, thresholded, RelayMdp};
use crate::optical::{sample_pointing, sample_turbulence, OpticalSample};
use crate::policies::{OpCounter, Scheme};

/// Discounted episodes stop once `Γ^k · R_max` falls below this.
pub const TRUNCATION_THRESHOLD: f64 = 1e-9;
const Z_95: f64 = 1.959_963_984_540_054;

/// Draws a network lifetime `K ≥ 1` with `Pr[K = k] = Γ^(k-1) (1-Γ)`.
pub fn sample_lifetime<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> u64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    if gamma <= 0.0 {
        return 1;
    }
    1 + (u.ln() / gamma.ln()).floor() as u64
}

/// Derives the random stream `purpose` of episode `episode`.
pub fn episode_rng(master_seed: u64, episode: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(episode.wrapping_mul(2).wrapping_add(purpose));
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub state: RelayState,
    pub action: usize,
    pub power_w: f64,
    pub harvested: u32,
    pub h_b: u8,
    /// Post-blockage secrecy rate C_S in bps.
    pub secrecy_rate: f64,
    /// Amount credited to the episode total for this slot.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub episode: u64,
    pub mode: EvalMode,
    pub slots: u64,
    pub total: f64,
    pub records: Vec<SlotRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub total: f64,
    pub slots: u64,
    pub ops: OpCounter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalResult {
    pub mean_reward: f64,
    pub ci_halfwidth_95: f64,
    pub episodes: u64,
    pub mode: EvalMode,
}

/// Everything an episode needs besides the scheme and the seed.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub mdp: &'a RelayMdp,
    pub scenario: &'a Scenario,
    pub mode: EvalMode,
    /// End-to-end min-form rate with sampled optical SNR instead of the
    /// acoustic-only approximation.
    pub exact: bool,
    /// Overrides the lifetime draw with a fixed horizon (instrumentation).
    pub fixed_horizon: Option<u64>,
}

impl<'a> Simulator<'a> {
    pub fn new(mdp: &'a RelayMdp, scenario: &'a Scenario, mode: EvalMode) -> Self {
        Self { mdp, scenario, mode, exact: false, fixed_horizon: None }
    }

    pub fn exact(mut self, exact: bool) -> Self {
        self.exact = exact;
        self
    }

    pub fn with_fixed_horizon(mut self, slots: u64) -> Self {
        self.fixed_horizon = Some(slots);
        self
    }

    pub fn run_episode(&self, scheme: &Scheme, master_seed: u64, episode: u64) -> EpisodeSummary {
        self.simulate(scheme, master_seed, episode, None)
    }

    pub fn trace_episode(&self, scheme: &Scheme, master_seed: u64, episode: u64) -> EpisodeTrace {
        let mut records = Vec::new();
        let s = self.simulate(scheme, master_seed, episode, Some(&mut records));
        EpisodeTrace { episode, mode: self.mode, slots: s.slots, total: s.total, records }
    }

    fn simulate(
        &self,
        scheme: &Scheme,
        master_seed: u64,
        episode: u64,
        mut trace: Option<&mut Vec<SlotRecord>>,
    ) -> EpisodeSummary {
        let sc = self.scenario;
        let mdp = self.mdp;
        let gamma = sc.gamma;
        let mut dynamics = episode_rng(master_seed, episode, 0);
        let mut aux = episode_rng(master_seed, episode, 1);

        let r_max = mdp.model.max_reward();
        let horizon = match (self.fixed_horizon, self.mode) {
            (Some(k), _) => Some(k),
            (None, EvalMode::Lifetime) => Some(sample_lifetime(gamma, &mut aux)),
            (None, EvalMode::Discounted) => None,
        };
        let unblocked = sc.optical.unblocked_probability();

        let mut state = sc.initial_state;
        let mut ops = OpCounter::default();
        let mut total = 0.0;
        let mut weight = 1.0;
        let mut k = 0u64;
        loop {
            match horizon {
                Some(limit) if k >= limit => break,
                None if k > 0 && weight * r_max < TRUNCATION_THRESHOLD => break,
                _ => {}
            }
            let u_block: f64 = dynamics.gen();
            let u_harvest: f64 = dynamics.gen();
            let u_rd: f64 = dynamics.gen();
            let u_re: f64 = dynamics.gen();

            let index = mdp.index(state);
            let action = scheme.select_action(index, mdp, &mut ops);
            let h_b = u_block < unblocked;
            let secrecy_rate = if self.exact {
                self.exact_rate(state, action, h_b, &mut aux)
            } else if h_b {
                mdp.model.reward(index, action)
            } else {
                0.0
            };
            let credited = thresholded(secrecy_rate, mdp.r_th);
            let contribution = match self.mode {
                EvalMode::Discounted if horizon.is_none() => weight * credited,
                _ => credited,
            };
            total += contribution;

            let harvested = sc.harvest.outcome(u_harvest);
            let next_battery = battery_update(
                BatteryState { level: state.battery },
                sc.power.units()[action],
                harvested,
                &sc.battery,
            )
            .unwrap_or_else(|e| panic!("scheme {} chose an infeasible action: {e}", scheme.kind()));

            if let Some(records) = trace.as_deref_mut() {
                records.push(SlotRecord {
                    slot: k,
                    state,
                    action,
                    power_w: sc.power.watts()[action],
                    harvested,
                    h_b: h_b as u8,
                    secrecy_rate,
                    contribution,
                });
            }

            state = RelayState {
                gain_rd: sc.chain_rd.successor(state.gain_rd, u_rd),
                gain_re: sc.chain_re.successor(state.gain_re, u_re),
                battery: next_battery.level,
            };
            weight *= gamma;
            k += 1;
        }
        EpisodeSummary { total, slots: k, ops }
    }

    /// End-to-end rate: both acoustic SNRs capped by the sampled optical SNR.
    fn exact_rate(&self, state: RelayState, action: usize, h_b: bool, aux: &mut ChaCha8Rng) -> f64 {
        let sc = self.scenario;
        let h_t = sample_turbulence(sc.optical.alpha, sc.optical.beta, aux);
        let h_p = sample_pointing(sc.optical.pointing_rho(), sc.optical.aperture_a0, aux);
        let optical = OpticalSample::new(&sc.optical, sc.optical.path_attenuation(), h_t, h_p, h_b);
        let power = sc.power.watts()[action];
        let snr_d = power * sc.chain_rd.levels[state.gain_rd] * self.mdp.snr_per_unit_d;
        let snr_e = power * sc.chain_re.levels[state.gain_re] * self.mdp.snr_per_unit_e;
        secrecy_rate_from_snr(snr_d.min(optical.snr), snr_e.min(optical.snr), self.mdp.bandwidth_hz)
    }

    /// Runs `episodes` independent episodes and reports the mean total with a
    /// 95% normal-approximation confidence interval.
    ///
    /// With `threads = Some(n)` the work runs on a dedicated pool of `n`
    /// workers; the result is identical for every `n`.
    pub fn evaluate(&self, scheme: &Scheme, episodes: u64, master_seed: u64, threads: Option<usize>) -> EvalResult {
        let totals = self.episode_totals(scheme, episodes, master_seed, threads);
        summarize(&totals, self.mode)
    }

    pub fn episode_totals(&self, scheme: &Scheme, episodes: u64, master_seed: u64, threads: Option<usize>) -> Vec<f64> {
        let run = || -> Vec<f64> {
            (0..episodes)
                .into_par_iter()
                .map(|e| self.run_episode(scheme, master_seed, e).total)
                .collect()
        };
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool")
                .install(run),
            None => run(),
        }
    }
}

/// Mean and 95% CI half-width of per-episode totals.
pub fn summarize(totals: &[f64], mode: EvalMode) -> EvalResult {
    let n = totals.len() as u64;
    assert!(n > 0, "at least one episode is required");
    let mean = pairwise_sum(totals) / n as f64;
    let ci = if n > 1 {
        let deviations: Vec<f64> = totals.iter().map(|t| (t - mean).powi(2)).collect();
        let var = pairwise_sum(&deviations) / (n - 1) as f64;
        Z_95 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    EvalResult { mean_reward: mean, ci_halfwidth_95: ci, episodes: n, mode }
}

/// Order-fixed pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}
