//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver or quadrature code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use uw_secrecy::mdp::{MdpModel, Policy};

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral over `[a, b]` split into `pieces` sub-intervals, each adaptive.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| adaptive_simpson(&f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

/// Exact value of a fixed policy: solves `(I - Γ P_d) V = R_d`.
pub fn exact_policy_value(model: &MdpModel, policy: &Policy) -> Vec<f64> {
    let n = model.n_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        let act = policy.action(s);
        r[s] = model.reward(s, act);
        for &(t, p) in model.successors(s, act) {
            a[(s, t)] -= model.discount() * p;
        }
    }
    a.lu().solve(&r).expect("I - ΓP is nonsingular for Γ < 1").iter().copied().collect()
}

/// Every deterministic feasible policy of a small model.
pub fn all_policies(model: &MdpModel) -> Vec<Policy> {
    let mut out = vec![Vec::new()];
    for s in 0..model.n_states() {
        let feasible: Vec<usize> = (0..model.n_actions()).filter(|&a| model.is_feasible(s, a)).collect();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                feasible.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(|action_index| Policy { action_index }).collect()
}

/// Asymptotic Kolmogorov survival function `Pr[K > λ]`.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS statistic of `samples` against the CDF `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Print-and-assert helper for acceptance criteria. Writes through the raw
/// stdout handle so the line shows up even when the harness captures output.
pub fn report(id: &str, description: &str, pass: bool, detail: String) {
    use std::io::Write;
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stdout().lock(), "[{tag}] criterion {id}: {description} | {detail}");
    assert!(pass, "criterion {id} failed: {detail}");
}
