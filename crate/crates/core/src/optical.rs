//! Source-to-relay underwater optical link.
//!
//! The composite gain is the product of four independent factors: a
//! deterministic Beer–Lambert attenuation, Gamma–Gamma turbulence, a bounded
//! pointing-error coefficient and a binary obstacle blockage. The electrical
//! SNR at the relay is linear in the squared composite gain.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::special::ln_bessel_k;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticalError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
}

/// Parameters of the source-to-relay optical hop.
///
/// `jitter_sigma` is the pointing jitter standard deviation in meters; the
/// pointing exponent is `beam_radius_eq² / jitter_sigma²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalLinkParams {
    pub wavelength_nm: f64,
    /// Attenuation coefficient c(λ), 1/m.
    pub attenuation_coeff: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Equivalent beam radius, m.
    pub beam_radius_eq: f64,
    /// Pointing jitter, m.
    pub jitter_sigma: f64,
    pub aperture_a0: f64,
    /// Photodetector responsivity, A/W.
    pub responsivity: f64,
    /// Receiver noise variance σ_N².
    pub noise_variance: f64,
    pub source_power_w: f64,
    pub link_distance_m: f64,
    /// Obstacle density T_o, 1/m.
    pub obstacle_density: f64,
}

impl OpticalLinkParams {
    pub fn validate(&self) -> Result<(), (&'static str, OpticalError)> {
        let positive = [
            ("wavelength_nm", self.wavelength_nm),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("beam_radius_eq", self.beam_radius_eq),
            ("jitter_sigma", self.jitter_sigma),
            ("aperture_a0", self.aperture_a0),
            ("responsivity", self.responsivity),
            ("noise_variance", self.noise_variance),
            ("source_power_w", self.source_power_w),
            ("link_distance_m", self.link_distance_m),
        ];
        for (name, value) in positive {
            if !value.is_finite() {
                return Err((name, OpticalError::NonFinite { name, value }));
            }
            if value <= 0.0 {
                return Err((name, OpticalError::NotPositive { name, value }));
            }
        }
        for (name, value) in [
            ("attenuation_coeff", self.attenuation_coeff),
            ("obstacle_density", self.obstacle_density),
        ] {
            if !value.is_finite() {
                return Err((name, OpticalError::NonFinite { name, value }));
            }
            if value < 0.0 {
                return Err((name, OpticalError::Negative { name, value }));
            }
        }
        let rho = self.pointing_rho();
        if !(rho.is_finite() && rho > 0.0) {
            return Err((
                "jitter_sigma",
                OpticalError::NotPositive { name: "pointing_rho", value: rho },
            ));
        }
        Ok(())
    }

    /// Pointing exponent ρ = w_eq² / σ_p².
    pub fn pointing_rho(&self) -> f64 {
        (self.beam_radius_eq / self.jitter_sigma).powi(2)
    }

    /// Probability that the link is unobstructed in a slot.
    pub fn unblocked_probability(&self) -> f64 {
        (-self.obstacle_density * self.link_distance_m).exp()
    }

    /// Deterministic attenuation factor h_a for this link.
    pub fn path_attenuation(&self) -> f64 {
        (-self.attenuation_coeff * self.link_distance_m).exp()
    }
}

/// One realization of the four optical gain factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalSample {
    pub h_a: f64,
    pub h_t: f64,
    pub h_p: f64,
    pub h_b: u8,
    pub gain: f64,
    pub snr: f64,
}

impl OpticalSample {
    /// Assembles a sample from its factors; `gain` and `snr` are derived.
    pub fn new(params: &OpticalLinkParams, h_a: f64, h_t: f64, h_p: f64, h_b: bool) -> Self {
        let hb = if h_b { 1.0 } else { 0.0 };
        let gain = (h_a * h_t * h_p * hb).powi(2);
        let mut sample = Self { h_a, h_t, h_p, h_b: h_b as u8, gain, snr: 0.0 };
        sample.snr = optical_snr(params, &sample);
        sample
    }

    /// Draws a full sample: turbulence, pointing and blockage.
    pub fn draw<R: Rng + ?Sized>(params: &OpticalLinkParams, rng: &mut R) -> Self {
        let h_t = sample_turbulence(params.alpha, params.beta, rng);
        let h_p = sample_pointing(params.pointing_rho(), params.aperture_a0, rng);
        let h_b = sample_blockage(params.obstacle_density, params.link_distance_m, rng);
        Self::new(params, params.path_attenuation(), h_t, h_p, h_b)
    }
}

/// Beer–Lambert attenuation `exp(-c·l)`.
pub fn beer_lambert(attenuation_coeff: f64, distance: f64) -> Result<f64, OpticalError> {
    if !attenuation_coeff.is_finite() {
        return Err(OpticalError::NonFinite { name: "attenuation_coeff", value: attenuation_coeff });
    }
    if !distance.is_finite() {
        return Err(OpticalError::NonFinite { name: "distance", value: distance });
    }
    if attenuation_coeff < 0.0 {
        return Err(OpticalError::Negative { name: "attenuation_coeff", value: attenuation_coeff });
    }
    if distance < 0.0 {
        return Err(OpticalError::Negative { name: "distance", value: distance });
    }
    Ok((-attenuation_coeff * distance).exp())
}

/// Gamma–Gamma turbulence density with shape parameters `alpha`, `beta`.
pub fn turbulence_pdf(x: f64, alpha: f64, beta: f64) -> Result<f64, OpticalError> {
    if !(x.is_finite() && alpha.is_finite() && beta.is_finite()) {
        return Err(OpticalError::NonFinite { name: "turbulence argument", value: x });
    }
    if x <= 0.0 {
        return Err(OpticalError::NotPositive { name: "x", value: x });
    }
    if alpha <= 0.0 {
        return Err(OpticalError::NotPositive { name: "alpha", value: alpha });
    }
    if beta <= 0.0 {
        return Err(OpticalError::NotPositive { name: "beta", value: beta });
    }
    let ab = alpha * beta;
    let half = 0.5 * (alpha + beta);
    let ln_pdf = std::f64::consts::LN_2 + half * ab.ln() - ln_gamma(alpha) - ln_gamma(beta)
        + (half - 1.0) * x.ln()
        + ln_bessel_k(alpha - beta, 2.0 * (ab * x).sqrt());
    Ok(ln_pdf.exp())
}

/// Draws unit-mean Gamma–Gamma turbulence as the product of two independent
/// unit-mean Gamma variates.
pub fn sample_turbulence<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let x = Gamma::new(alpha, 1.0 / alpha).expect("alpha validated positive");
    let y = Gamma::new(beta, 1.0 / beta).expect("beta validated positive");
    x.sample(rng) * y.sample(rng)
}

/// Inverse-CDF draw from the pointing-error density `ρ x^(ρ-1) / a0^ρ` on `[0, a0]`.
pub fn sample_pointing<R: Rng + ?Sized>(rho: f64, a0: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    a0 * u.powf(1.0 / rho)
}

/// Returns `true` (h_b = 1) when the optical link is unobstructed.
pub fn sample_blockage<R: Rng + ?Sized>(obstacle_density: f64, distance: f64, rng: &mut R) -> bool {
    let u: f64 = rng.gen();
    u < (-obstacle_density * distance).exp()
}

/// Electrical SNR at the relay, `η² P_S G_SR / σ_N²`.
pub fn optical_snr(params: &OpticalLinkParams, sample: &OpticalSample) -> f64 {
    params.responsivity.powi(2) * params.source_power_w * sample.gain / params.noise_variance
}
