//! Secure power allocation for an energy-harvesting relay that bridges an
//! underwater optical hop and an acoustic hop overheard by an eavesdropper.
//!
//! The crate builds a finite Markov decision process from physical channel
//! and battery models, solves it with policy iteration (value iteration is
//! kept as an independent check), and evaluates the optimal, greedy and naive
//! power-allocation schemes by Monte Carlo rollout.
//!
//! ```
//! use uw_secrecy::config::SystemConfig;
//! use uw_secrecy::mdp::{policy_iteration, RelayMdp};
//!
//! let scenario = SystemConfig::reference().scenario().unwrap();
//! let mdp = RelayMdp::build(&scenario).unwrap();
//! assert_eq!(mdp.model.n_states(), 3 * 3 * 6);
//! let solution = policy_iteration(&mdp.model, scenario.epsilon).unwrap();
//! let start = mdp.index(scenario.initial_state);
//! assert!(solution.value.values[start] > 0.0);
//! ```

pub mod acoustic;
pub mod config;
pub mod energy;
pub mod experiment;
pub mod mdp;
pub mod optical;
pub mod policies;
pub mod sim;
pub mod special;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/battery.md")]
    mod battery {}
    #[doc = include_str!("../../../book/src/mdp.md")]
    mod mdp {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
