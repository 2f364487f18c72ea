//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line, also under
//! a plain `cargo test`; add `-- --test-threads 1` to keep the lines in order.

mod support;

use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{all_policies, exact_policy_value, integrate, report};
use uw_secrecy::acoustic::{broadband_snr, thorp_absorption_db_per_km};
use uw_secrecy::config::{EvalMode, SystemConfig};
use uw_secrecy::experiment::{evaluate_schemes, solve, EvalOptions};
use uw_secrecy::mdp::{greedy_policy, policy_iteration, q_value, value_iteration, MdpModel, RelayMdp};
use uw_secrecy::optical::{sample_pointing, turbulence_pdf};
use uw_secrecy::policies::{Scheme, SchemeKind};
use uw_secrecy::sim::{EvalResult, Simulator};

const EPISODES: u64 = 100_000;

fn reference() -> SystemConfig {
    SystemConfig::reference()
}

fn set(config: &SystemConfig, path: &str, value: f64) -> SystemConfig {
    config.with_param(path, value).unwrap()
}

/// Evaluates all three schemes with common random numbers (the config seed).
fn evaluate(config: &SystemConfig, mode: EvalMode) -> [EvalResult; 3] {
    let options = EvalOptions { episodes: EPISODES, mode, ..EvalOptions::from_config(config) };
    let results = evaluate_schemes(config, &SchemeKind::ALL, &options, None).unwrap();
    [results[0].1, results[1].1, results[2].1]
}

fn means(r: &[EvalResult; 3]) -> [f64; 3] {
    [r[0].mean_reward, r[1].mean_reward, r[2].mean_reward]
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

#[test]
fn criterion_01_scheme_ordering() {
    let config = reference();
    let options = EvalOptions { episodes: EPISODES, threads: Some(1), ..EvalOptions::from_config(&config) };
    let start = Instant::now();
    let r = evaluate_schemes(&config, &SchemeKind::ALL, &options, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let (opa, ga, na) = (r[0].1, r[1].1, r[2].1);
    let gap1 = opa.mean_reward - ga.mean_reward;
    let gap2 = ga.mean_reward - na.mean_reward;
    let pass = gap1 > opa.ci_halfwidth_95 + ga.ci_halfwidth_95
        && gap2 > ga.ci_halfwidth_95 + na.ci_halfwidth_95
        && elapsed < 60.0;
    report(
        "1",
        "OPA > GA > NA beyond summed CIs, single worker < 60 s",
        pass,
        format!(
            "OPA {:.1}±{:.1}, GA {:.1}±{:.1}, NA {:.1}±{:.1}, {elapsed:.1} s",
            opa.mean_reward, opa.ci_halfwidth_95, ga.mean_reward, ga.ci_halfwidth_95, na.mean_reward, na.ci_halfwidth_95
        ),
    );
}

#[test]
fn criterion_02_discount_and_blockage_trends() {
    let base = reference();
    let mut per_gamma = Vec::new();
    let mut blockage_ok = true;
    let mut detail = String::new();
    for gamma in [0.5, 0.7, 0.9] {
        let clear = evaluate(&set(&base, "gamma", gamma), EvalMode::Discounted);
        let murky = evaluate(&set(&set(&base, "gamma", gamma), "optical.obstacle_density", 3e-3), EvalMode::Discounted);
        for i in 0..3 {
            blockage_ok &= clear[i].mean_reward - clear[i].ci_halfwidth_95 > murky[i].mean_reward + murky[i].ci_halfwidth_95;
        }
        detail += &format!("Γ={gamma}: {:?} -> {:?}; ", means(&clear).map(|m| m.round()), means(&murky).map(|m| m.round()));
        per_gamma.push(means(&clear));
    }
    let gamma_ok = (0..3).all(|i| strictly_increasing(&per_gamma.iter().map(|m| m[i]).collect::<Vec<_>>()));
    report("2", "means increase in Γ and drop when T_o rises to 3e-3", gamma_ok && blockage_ok, detail);
}

#[test]
fn criterion_03_harvest_trends() {
    let base = reference();
    let by_p: Vec<[f64; 3]> =
        [0.2, 0.4, 0.6, 0.8].iter().map(|&p| means(&evaluate(&set(&base, "harvest.probability", p), EvalMode::Discounted))).collect();
    let by_e: Vec<[f64; 3]> =
        [2.0, 3.0, 4.0].iter().map(|&e| means(&evaluate(&set(&base, "harvest.energy", e), EvalMode::Discounted))).collect();
    let p_ok = (0..3).all(|i| strictly_increasing(&by_p.iter().map(|m| m[i]).collect::<Vec<_>>()));
    let e_ok = (0..3).all(|i| strictly_increasing(&by_e.iter().map(|m| m[i]).collect::<Vec<_>>()));
    let low = means(&evaluate(&set(&base, "harvest.probability", 0.3), EvalMode::Discounted));
    let high = means(&evaluate(&set(&base, "harvest.probability", 0.9), EvalMode::Discounted));
    let (gap_low, gap_high) = (low[0] - low[2], high[0] - high[2]);
    report(
        "3",
        "means increase in p and E_R; OPA-NA gap shrinks from p=0.3 to p=0.9",
        p_ok && e_ok && gap_high < gap_low,
        format!("p: {by_p:.0?}; E_R: {by_e:.0?}; gap(0.3)={gap_low:.1}, gap(0.9)={gap_high:.1}"),
    );
}

#[test]
fn criterion_04_capacity_and_eavesdropper_distance() {
    let base = reference();
    let by_b: Vec<[f64; 3]> =
        [3.0, 4.0, 5.0, 6.0].iter().map(|&b| means(&evaluate(&set(&base, "battery.capacity", b), EvalMode::Discounted))).collect();
    let b_ok = (0..3).all(|i| by_b.windows(2).all(|w| w[1][i] >= w[0][i]));
    let far = means(&evaluate(&base, EvalMode::Discounted));
    let near = means(&evaluate(&set(&base, "acoustic_e.distance_km", 5.0), EvalMode::Discounted));
    let d_ok = (0..3).all(|i| near[i] < far[i]);
    report(
        "4",
        "means non-decreasing in B^max; closer eavesdropper lowers every mean",
        b_ok && d_ok,
        format!("B^max: {by_b:.0?}; l_RE 6 km {far:.0?} -> 5 km {near:.0?}"),
    );
}

/// Two states, two actions, all actions feasible.
fn tiny_model() -> MdpModel {
    MdpModel::new(
        2,
        2,
        0.8,
        vec![1.0, 0.0, 0.5, 2.0],
        vec![vec![(0, 0.9), (1, 0.1)], vec![(1, 1.0)], vec![(0, 0.5), (1, 0.5)], vec![(0, 0.7), (1, 0.3)]],
    )
    .unwrap()
}

#[test]
fn criterion_05_solver_oracle() {
    let scenario = reference().scenario().unwrap();
    let eps = scenario.epsilon;
    let (mdp, pi) = solve(&scenario).unwrap();
    let vi = value_iteration(&mdp.model, eps).unwrap();
    let bound = 2.0 * eps * scenario.gamma / (1.0 - scenario.gamma);
    let distance = pi.value.sup_distance(&vi.value);

    // Disagreements are only allowed where the VI-greedy Q gap is within the value error.
    let greedy = greedy_policy(&mdp.model, &vi.value);
    let untied_mismatches = (0..mdp.model.n_states())
        .filter(|&s| greedy.action(s) != pi.policy.action(s))
        .filter(|&s| {
            let gap = q_value(&mdp.model, s, greedy.action(s), &vi.value) - q_value(&mdp.model, s, pi.policy.action(s), &vi.value);
            gap > 2.0 * bound
        })
        .count();

    // Brute force on a two-state model with exact linear solves.
    let tiny = tiny_model();
    let candidates: Vec<_> = all_policies(&tiny).into_iter().map(|p| (exact_policy_value(&tiny, &p), p)).collect();
    let (best_value, best_policy) = candidates
        .iter()
        .find(|(v, _)| candidates.iter().all(|(w, _)| v.iter().zip(w).all(|(a, b)| a >= b)))
        .expect("an optimal policy dominates every other");
    let tiny_pi = policy_iteration(&tiny, 1e-12).unwrap();
    let tiny_gap = tiny_pi.value.values.iter().zip(best_value).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let pass = distance <= bound && untied_mismatches == 0 && tiny_pi.policy == *best_policy && tiny_gap < 1e-9;
    report(
        "5",
        "PI matches VI and brute-force enumeration",
        pass,
        format!(
            "‖V_PI − V_VI‖∞ = {distance:.2e} (bound {bound:.2e}), untied mismatches {untied_mismatches}, \
             brute force {:?} vs PI {:?}, value gap {tiny_gap:.1e}",
            best_policy.action_index, tiny_pi.policy.action_index
        ),
    );
}

#[test]
fn criterion_06_monte_carlo_matches_bellman() {
    let config = reference();
    let scenario = config.scenario().unwrap();
    let (mdp, pi) = solve(&scenario).unwrap();
    let s0 = mdp.index(scenario.initial_state);
    let expected = scenario.optical.unblocked_probability() * pi.value.values[s0];
    let sim = Simulator::new(&mdp, &scenario, EvalMode::Discounted);
    let scheme = Scheme::opa(pi.policy.clone(), &mdp).unwrap();
    let r = sim.evaluate(&scheme, EPISODES, config.evaluation.master_seed, None);
    let diff = (r.mean_reward - expected).abs();
    report(
        "6",
        "OPA discounted mean equals e^(-T_o l)·V*(s0) within the 95% CI",
        diff <= r.ci_halfwidth_95,
        format!("MC {:.2} ± {:.2}, Bellman {expected:.2}, |diff| {diff:.2}", r.mean_reward, r.ci_halfwidth_95),
    );
}

#[test]
fn criterion_07_lifetime_identity() {
    let base = reference();
    let mut pass = true;
    let mut detail = String::new();
    for gamma in [0.5, 0.9] {
        let config = set(&base, "gamma", gamma);
        let disc = evaluate(&config, EvalMode::Discounted);
        let life = evaluate(&config, EvalMode::Lifetime);
        for (i, kind) in SchemeKind::ALL.iter().enumerate() {
            let ok = (disc[i].mean_reward - life[i].mean_reward).abs() <= disc[i].ci_halfwidth_95 + life[i].ci_halfwidth_95;
            pass &= ok;
            detail += &format!(
                "Γ={gamma} {kind}: {:.0}±{:.0} vs {:.0}±{:.0}; ",
                disc[i].mean_reward, disc[i].ci_halfwidth_95, life[i].mean_reward, life[i].ci_halfwidth_95
            );
        }
    }
    report("7", "geometric-lifetime and discounted means agree within CIs", pass, detail);
}

#[test]
fn criterion_08_physics() {
    let scenario = reference().scenario().unwrap();
    let opt = &scenario.optical;
    let pdf = |x: f64| if x <= 0.0 { 0.0 } else { turbulence_pdf(x, opt.alpha, opt.beta).unwrap() };
    let mass = integrate(pdf, 0.0, 60.0, 120, 1e-10);
    let mean = integrate(|x| x * pdf(x), 0.0, 60.0, 120, 1e-10);
    let gg_ok = (mass - 1.0).abs() < 1e-6 && (mean - 1.0).abs() < 1e-6;

    let rho = opt.pointing_rho();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 1_000_000;
    let empirical = (0..n).map(|_| sample_pointing(rho, opt.aperture_a0, &mut rng)).sum::<f64>() / n as f64;
    let pointing_target = rho * opt.aperture_a0 / (rho + 1.0);
    let pointing_ok = (empirical - pointing_target).abs() < 1e-4;

    let f: f64 = 10.0;
    let f2 = f * f;
    let thorp_terms = 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003;
    let thorp = thorp_absorption_db_per_km(f).unwrap();
    let thorp_ok = (thorp - thorp_terms).abs() < 1e-3 && (thorp - 1.187).abs() < 1e-3;

    let link = &scenario.acoustic_d;
    let unit = broadband_snr(1.0, 1.0, link).unwrap();
    let linear_ok = [(0.5, 0.106), (2.0, 0.511), (3.0, 1.61), (7.25, 3.3)]
        .iter()
        .all(|&(p, g)| (broadband_snr(p, g, link).unwrap() - p * g * unit).abs() <= 1e-12 * p * g * unit);

    let mdp = RelayMdp::build(&scenario).unwrap();
    let worst_row = (0..mdp.model.n_states())
        .flat_map(|s| mdp.model.feasible_actions(s).map(move |a| (s, a)).collect::<Vec<_>>())
        .map(|(s, a)| (mdp.model.successors(s, a).iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let rows_ok = worst_row <= 1e-12;

    report(
        "8",
        "Gamma-Gamma moments, pointing mean, Thorp, SNR linearity, row sums",
        gg_ok && pointing_ok && thorp_ok && linear_ok && rows_ok,
        format!(
            "mass {mass:.9}, mean {mean:.9}, pointing {empirical:.6} vs {pointing_target:.6}, \
             Thorp {thorp:.5} vs {thorp_terms:.5}, linear {linear_ok}, worst row error {worst_row:.1e}"
        ),
    );
}

#[test]
fn criterion_09_complexity_counters() {
    const K: u64 = 500;
    let run = |levels: Vec<f64>, capacity: f64| {
        let mut config = set(&reference(), "battery.capacity", capacity);
        config.power_levels_w = levels;
        let scenario = config.scenario().unwrap();
        let mdp = RelayMdp::build(&scenario).unwrap();
        let sim = Simulator::new(&mdp, &scenario, EvalMode::Lifetime).with_fixed_horizon(K);
        let ga = sim.run_episode(&Scheme::greedy(), 1, 0);
        let na = sim.run_episode(&Scheme::naive(), 1, 0);
        (mdp.model.n_actions() as u64, ga.slots, ga.ops.decision_ops, na.slots, na.ops.decision_ops)
    };
    let small = run(vec![0.0, 1.0, 2.0, 3.0], 5.0);
    let large = run((0..8).map(f64::from).collect(), 10.0);
    let pass = [small, large].iter().all(|&(n_a, ga_slots, ga_ops, na_slots, na_ops)| {
        ga_slots == K && na_slots == K && ga_ops == K * n_a && na_ops == K
    }) && large.2 == 2 * small.2
        && large.4 == small.4;
    report(
        "9",
        "GA does K·N_A reward evaluations, NA does K",
        pass,
        format!("K={K}: N_A=4 -> GA {} / NA {}; N_A=8 -> GA {} / NA {}", small.2, small.4, large.2, large.4),
    );
}

#[test]
fn criterion_10_sweep_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_uwsec"))
            .args(["sweep", "--preset", "discount", "--episodes", "2000", "--seed", "7", "--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    let c = run("1", "c.csv");
    let rows = String::from_utf8_lossy(&a).lines().count() - 1;
    report(
        "10",
        "sweep CSV is byte-identical across runs and worker counts",
        a == b && a == c && rows == 30,
        format!("{} bytes, {rows} data rows, 1 vs 4 workers identical: {}", a.len(), a == b),
    );
}
