//! Numerical helpers shared by the channel models: the modified Bessel
//! function of the second kind and composite Simpson quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge after {panels} panels (last relative change {change:e})")]
    NotConverged { panels: usize, change: f64 },
    #[error("integrand returned a non-finite value at {at}")]
    NonFinite { at: f64 },
}

/// Exponentially scaled modified Bessel function of the second kind,
/// `exp(x) * K_nu(x)`, for real order `nu` and `x > 0`.
///
/// Evaluated from the integral representation
/// `K_nu(x) = ∫_0^∞ exp(-x cosh t) cosh(nu t) dt` with the trapezoidal rule,
/// which converges geometrically for this analytic, even integrand.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "bessel_k_scaled requires x > 0, got {x}");
    let nu = nu.abs();
    let h = (0.5 / x.sqrt()).min(0.1);
    let integrand = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();

    let mut sum = 0.5 * integrand(0.0);
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        let term = integrand(t);
        sum += term;
        // the integrand is unimodal past its peak; stop once it is negligible
        // and already decreasing
        if term < 1e-18 * sum && x * (t.cosh() - 1.0) > nu * t {
            break;
        }
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    h * sum
}

/// Modified Bessel function of the second kind `K_nu(x)`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// Natural log of `K_nu(x)`, stable for large `x`.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x).ln() - x
}

/// Composite Simpson rule with a fixed, even number of panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

/// Simpson quadrature starting at `start_panels`, doubling the panel count
/// until the relative change between successive estimates is below `rel_tol`.
pub fn simpson_converged<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    start_panels: usize,
    rel_tol: f64,
) -> Result<f64, QuadratureError> {
    const MAX_PANELS: usize = 1 << 24;
    for &x in &[a, b, 0.5 * (a + b)] {
        if !f(x).is_finite() {
            return Err(QuadratureError::NonFinite { at: x });
        }
    }
    let mut panels = start_panels.max(2);
    let mut prev = simpson(&f, a, b, panels);
    loop {
        panels *= 2;
        let next = simpson(&f, a, b, panels);
        if !next.is_finite() {
            return Err(QuadratureError::NonFinite { at: f64::NAN });
        }
        let change = if next == 0.0 {
            (next - prev).abs()
        } else {
            ((next - prev) / next).abs()
        };
        if change < rel_tol {
            return Ok(next);
        }
        if panels >= MAX_PANELS {
            return Err(QuadratureError::NotConverged { panels, change });
        }
        prev = next;
    }
}
