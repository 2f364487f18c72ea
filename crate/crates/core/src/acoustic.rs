//! Relay-to-destination and relay-to-eavesdropper acoustic links.
//!
//! Frequencies are in kHz wherever the empirical formulas (Thorp absorption,
//! ambient noise) are evaluated; the band integrals of the broadband SNR run
//! over Hz. [`khz_to_hz`] is the only place the two meet.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{simpson_converged, QuadratureError};

/// Starting panel count for the band integrals; doubled until converged.
pub const QUADRATURE_PANELS: usize = 1024;
/// Relative tolerance for the band integrals.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;
/// Row-sum tolerance for transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticError {
    #[error("frequency must be positive, got {0} kHz")]
    NonPositiveFrequency(f64),
    #[error("{name} is invalid: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("band integral failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("transition row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("transition entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryRange { row: usize, col: usize, value: f64 },
    #[error("transition matrix is {rows}x{cols} but there are {levels} gain levels")]
    Shape { rows: usize, cols: usize, levels: usize },
    #[error("gain levels must be positive and strictly increasing")]
    Levels,
    #[error("gain chain is reducible; stationary distribution is not unique")]
    Reducible,
}

pub fn khz_to_hz(f_khz: f64) -> f64 {
    f_khz * 1e3
}

/// Parameters of one acoustic hop (relay to destination or eavesdropper).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticLinkParams {
    pub f_min_khz: f64,
    pub bandwidth_khz: f64,
    pub distance_km: f64,
    pub spreading_factor: f64,
    pub shipping_factor: f64,
    /// Wind speed, m/s.
    pub wind_speed: f64,
    /// Water density, kg/m³.
    pub water_density: f64,
    /// Sound speed, m/s.
    pub sound_speed: f64,
    /// Effective receiver aperture, m².
    pub receiver_aperture: f64,
}

impl AcousticLinkParams {
    pub fn validate(&self) -> Result<(), AcousticError> {
        let check = |name: &'static str, ok: bool, value: f64| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(AcousticError::InvalidParam { name, reason: format!("got {value}") })
            }
        };
        check("f_min_khz", self.f_min_khz > 0.0, self.f_min_khz)?;
        check("bandwidth_khz", self.bandwidth_khz > 0.0, self.bandwidth_khz)?;
        check("distance_km", self.distance_km > 0.0, self.distance_km)?;
        check("spreading_factor", self.spreading_factor >= 1.0, self.spreading_factor)?;
        check(
            "shipping_factor",
            (0.0..=1.0).contains(&self.shipping_factor),
            self.shipping_factor,
        )?;
        check("wind_speed", self.wind_speed >= 0.0, self.wind_speed)?;
        check("water_density", self.water_density > 0.0, self.water_density)?;
        check("sound_speed", self.sound_speed > 0.0, self.sound_speed)?;
        check("receiver_aperture", self.receiver_aperture > 0.0, self.receiver_aperture)?;
        Ok(())
    }

    pub fn f_max_khz(&self) -> f64 {
        self.f_min_khz + self.bandwidth_khz
    }
}

/// Thorp absorption in dB/km, frequency in kHz.
pub fn thorp_absorption_db_per_km(f_khz: f64) -> Result<f64, AcousticError> {
    if !(f_khz > 0.0) || !f_khz.is_finite() {
        return Err(AcousticError::NonPositiveFrequency(f_khz));
    }
    let f2 = f_khz * f_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// Linear power attenuation `l^k · a(f)^l` with `l` in km.
pub fn attenuation(distance_km: f64, f_khz: f64, spreading_factor: f64) -> Result<f64, AcousticError> {
    if !(distance_km > 0.0) {
        return Err(AcousticError::InvalidParam {
            name: "distance_km",
            reason: format!("must be positive, got {distance_km}"),
        });
    }
    let a_db = thorp_absorption_db_per_km(f_khz)?;
    // a(f)^l = 10^(a_dB · l / 10)
    Ok(distance_km.powf(spreading_factor) * 10f64.powf(a_db * distance_km / 10.0))
}

/// Ambient noise PSD in dB re µPa/Hz: turbulence, shipping, wind and thermal
/// components summed in the linear domain.
pub fn ambient_noise_db(f_khz: f64, shipping_factor: f64, wind_speed: f64) -> Result<f64, AcousticError> {
    let [t, s, w, th] = noise_components_db(f_khz, shipping_factor, wind_speed)?;
    let linear: f64 = [t, s, w, th].iter().map(|db| 10f64.powf(db / 10.0)).sum();
    Ok(10.0 * linear.log10())
}

/// The four ambient-noise components in dB: `[turbulence, shipping, wind, thermal]`.
pub fn noise_components_db(
    f_khz: f64,
    shipping_factor: f64,
    wind_speed: f64,
) -> Result<[f64; 4], AcousticError> {
    if !(f_khz > 0.0) || !f_khz.is_finite() {
        return Err(AcousticError::NonPositiveFrequency(f_khz));
    }
    let lf = f_khz.log10();
    let turbulence = 17.0 - 30.0 * lf;
    let shipping =
        40.0 + 20.0 * (shipping_factor - 0.5) + 26.0 * lf - 60.0 * (f_khz + 0.03).log10();
    let wind = 50.0 + 7.5 * wind_speed.sqrt() + 20.0 * lf - 40.0 * (f_khz + 0.4).log10();
    let thermal = -15.0 + 20.0 * lf;
    Ok([turbulence, shipping, wind, thermal])
}

/// Electrical noise PSD in W/Hz at frequency `f_khz`.
pub fn electrical_noise_psd_w_per_hz(f_khz: f64, params: &AcousticLinkParams) -> Result<f64, AcousticError> {
    let n_db = ambient_noise_db(f_khz, params.shipping_factor, params.wind_speed)?;
    Ok(noise_db_to_psd(n_db, params))
}

/// Converts an acoustic noise level (dB re µPa/Hz) to electrical PSD.
pub fn noise_db_to_psd(n_db: f64, params: &AcousticLinkParams) -> f64 {
    let rho_c = params.water_density * params.sound_speed;
    10f64.powf((n_db - 120.0 - 10.0 * rho_c.log10()) / 10.0) * params.receiver_aperture
}

/// SNR per unit transmit power and unit small-scale gain:
/// `∫A⁻¹ df / (B ∫N_W df)` over the band, integrals in Hz.
///
/// Results are memoized per parameter set in a process-wide table.
pub fn snr_per_unit_power_gain(params: &AcousticLinkParams) -> Result<f64, AcousticError> {
    static CACHE: OnceLock<RwLock<HashMap<[u64; 9], f64>>> = OnceLock::new();
    let key = cache_key(params);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.read().expect("link cache poisoned").get(&key) {
        return Ok(v);
    }
    let v = compute_snr_per_unit(params)?;
    cache.write().expect("link cache poisoned").insert(key, v);
    Ok(v)
}

fn cache_key(p: &AcousticLinkParams) -> [u64; 9] {
    [
        p.f_min_khz,
        p.bandwidth_khz,
        p.distance_km,
        p.spreading_factor,
        p.shipping_factor,
        p.wind_speed,
        p.water_density,
        p.sound_speed,
        p.receiver_aperture,
    ]
    .map(f64::to_bits)
}

fn compute_snr_per_unit(params: &AcousticLinkParams) -> Result<f64, AcousticError> {
    params.validate()?;
    let (lo, hi) = (params.f_min_khz, params.f_max_khz());
    let inv_atten = simpson_converged(
        |f| attenuation(params.distance_km, f, params.spreading_factor).map_or(f64::NAN, |a| 1.0 / a),
        lo,
        hi,
        QUADRATURE_PANELS,
        QUADRATURE_REL_TOL,
    )?;
    let noise = simpson_converged(
        |f| electrical_noise_psd_w_per_hz(f, params).unwrap_or(f64::NAN),
        lo,
        hi,
        QUADRATURE_PANELS,
        QUADRATURE_REL_TOL,
    )?;
    // integrated over kHz; rescale both integrals and the bandwidth to Hz
    let hz_per_khz = khz_to_hz(1.0);
    let bandwidth_hz = khz_to_hz(params.bandwidth_khz);
    Ok((inv_atten * hz_per_khz) / (bandwidth_hz * noise * hz_per_khz))
}

/// Broadband SNR at the receiver for transmit power `power_w` and
/// small-scale gain `gain`.
pub fn broadband_snr(power_w: f64, gain: f64, params: &AcousticLinkParams) -> Result<f64, AcousticError> {
    if !(power_w >= 0.0) {
        return Err(AcousticError::InvalidParam {
            name: "power_w",
            reason: format!("must be non-negative, got {power_w}"),
        });
    }
    Ok(power_w * gain * snr_per_unit_power_gain(params)?)
}

/// Quantized small-scale gain levels with a first-order Markov transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovGainChain {
    pub levels: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl MarkovGainChain {
    pub fn new(levels: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self, AcousticError> {
        let chain = Self { levels, transition };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<(), AcousticError> {
        let n = self.levels.len();
        if n == 0
            || self.levels.iter().any(|g| !(*g > 0.0) || !g.is_finite())
            || self.levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(AcousticError::Levels);
        }
        if self.transition.len() != n {
            return Err(AcousticError::Shape { rows: self.transition.len(), cols: n, levels: n });
        }
        for (row, r) in self.transition.iter().enumerate() {
            if r.len() != n {
                return Err(AcousticError::Shape { rows: n, cols: r.len(), levels: n });
            }
            for (col, &value) in r.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(AcousticError::EntryRange { row, col, value });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(AcousticError::RowSum { row, sum });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Samples the successor level index. Consumes exactly one uniform draw.
    pub fn step<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.successor(current, u)
    }

    /// Inverse-CDF lookup of the successor for a given uniform `u`.
    pub fn successor(&self, current: usize, u: f64) -> usize {
        let row = &self.transition[current];
        let mut acc = 0.0;
        let mut last_positive = current;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = j;
                if u < acc {
                    return j;
                }
            }
        }
        last_positive
    }

    /// Stationary distribution `π` with `πΠ = π`, `Σπ = 1`.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>, AcousticError> {
        self.validate()?;
        let n = self.len();
        if !self.is_irreducible() {
            return Err(AcousticError::Reducible);
        }
        // (Πᵀ - I) π = 0 with the last equation replaced by normalization
        let mut a = DMatrix::from_fn(n, n, |i, j| {
            self.transition[j][i] - if i == j { 1.0 } else { 0.0 }
        });
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let pi = a.lu().solve(&b).ok_or(AcousticError::Reducible)?;
        Ok(pi.iter().copied().collect())
    }

    fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let p = if forward { self.transition[i][j] } else { self.transition[j][i] };
                    if p > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn link(distance_km: f64) -> AcousticLinkParams {
        AcousticLinkParams {
            f_min_khz: 9.5,
            bandwidth_khz: 5.0,
            distance_km,
            spreading_factor: 2.0,
            shipping_factor: 0.5,
            wind_speed: 0.0,
            water_density: 1000.0,
            sound_speed: 1500.0,
            receiver_aperture: 0.01,
        }
    }

    fn reference_chain() -> MarkovGainChain {
        MarkovGainChain::new(
            vec![0.106, 0.511, 1.61],
            vec![vec![0.82, 0.18, 0.0], vec![0.09, 0.81, 0.10], vec![0.0, 0.09, 0.91]],
        )
        .unwrap()
    }

    #[test]
    fn thorp_matches_term_by_term() {
        let terms = 0.11 * 100.0 / 101.0 + 44.0 * 100.0 / 4200.0 + 2.75e-4 * 100.0 + 0.003;
        let v = thorp_absorption_db_per_km(10.0).unwrap();
        assert!((v - terms).abs() < 1e-12);
        assert!((v - 1.187).abs() < 1e-3);
        assert!(thorp_absorption_db_per_km(20.0).unwrap() > v);
        assert!((thorp_absorption_db_per_km(1e-9).unwrap() - 0.003).abs() < 1e-12);
        assert!(thorp_absorption_db_per_km(0.0).is_err());
        assert!(thorp_absorption_db_per_km(-1.0).is_err());
    }

    #[test]
    fn attenuation_values() {
        let a12 = thorp_absorption_db_per_km(12.0).unwrap();
        assert!((attenuation(1.0, 12.0, 2.0).unwrap() - 10f64.powf(a12 / 10.0)).abs() < 1e-12);
        let expected = 25.0 * 10f64.powf(5.0 * a12 / 10.0);
        let v = attenuation(5.0, 12.0, 2.0).unwrap();
        assert!((v - expected).abs() < 1e-9);
        assert!((v - 166.08).abs() < 0.01);
        for l in [0.5, 1.0, 2.0, 5.0, 6.0] {
            assert!(attenuation(l + 0.1, 12.0, 2.0).unwrap() > attenuation(l, 12.0, 2.0).unwrap());
        }
        let mut f = 9.5;
        while f < 14.5 {
            assert!(attenuation(5.0, f + 0.1, 2.0).unwrap() > attenuation(5.0, f, 2.0).unwrap());
            f += 0.1;
        }
    }

    #[test]
    fn ambient_noise_at_ten_khz() {
        let [t, s, w, th] = noise_components_db(10.0, 0.5, 0.0).unwrap();
        let linear: f64 = [t, s, w, th].iter().map(|d| 10f64.powf(d / 10.0)).sum();
        assert!((linear - 862.0).abs() < 1.0, "{linear}");
        assert!((w - 29.3).abs() < 0.05);
        let total = ambient_noise_db(10.0, 0.5, 0.0).unwrap();
        assert!((total - 29.35).abs() < 0.01, "{total}");
        assert!(ambient_noise_db(10.0, 0.5, 5.0).unwrap() > total);
        let s0 = noise_components_db(10.0, 0.0, 0.0).unwrap()[1];
        let s1 = noise_components_db(10.0, 1.0, 0.0).unwrap()[1];
        assert!((s1 - s0 - 20.0).abs() < 1e-12);
    }

    #[test]
    fn electrical_noise_conversion() {
        let mut p = link(5.0);
        p.water_density = 1.0;
        p.sound_speed = 1.0;
        p.receiver_aperture = 1.0;
        assert!((noise_db_to_psd(120.0, &p) - 1.0).abs() < 1e-15);
        let base = electrical_noise_psd_w_per_hz(10.0, &link(5.0)).unwrap();
        let mut doubled = link(5.0);
        doubled.receiver_aperture = 0.02;
        let v = electrical_noise_psd_w_per_hz(10.0, &doubled).unwrap();
        assert!((v / base - 2.0).abs() < 1e-14);
        // 10^((29.355 - 120 - 61.761)/10) · 0.01
        assert!((base - 5.746e-18).abs() < 1e-20, "{base}");
    }

    #[test]
    fn khz_conversion() {
        assert_eq!(khz_to_hz(9.5), 9500.0);
    }

    #[test]
    fn broadband_snr_is_linear() {
        let p = link(5.0);
        assert_eq!(broadband_snr(0.0, 1.61, &p).unwrap(), 0.0);
        let base = broadband_snr(1.5, 0.511, &p).unwrap();
        assert!(base > 0.0);
        assert_eq!(broadband_snr(3.0, 0.511, &p).unwrap(), 2.0 * base);
        assert_eq!(broadband_snr(1.5, 1.022, &p).unwrap(), 2.0 * base);
        assert!(broadband_snr(-1.0, 1.0, &p).is_err());
    }

    #[test]
    fn destination_beats_eavesdropper_at_shorter_range() {
        let d = broadband_snr(2.0, 1.0, &link(5.0)).unwrap();
        let e = broadband_snr(2.0, 1.0, &link(6.0)).unwrap();
        assert!(d > e);
    }

    #[test]
    fn chain_rejects_bad_rows() {
        let err = MarkovGainChain::new(
            vec![0.106, 0.511, 1.61],
            vec![vec![0.82, 0.17, 0.0], vec![0.09, 0.81, 0.10], vec![0.0, 0.09, 0.91]],
        )
        .unwrap_err();
        assert!(matches!(err, AcousticError::RowSum { row: 0, .. }));
        let err = MarkovGainChain::new(vec![1.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert_eq!(err, AcousticError::Levels);
    }

    #[test]
    fn step_respects_zero_entries() {
        let chain = reference_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut to_g2 = 0usize;
        for _ in 0..n {
            match chain.step(0, &mut rng) {
                1 => to_g2 += 1,
                2 => panic!("G1 -> G3 has zero probability"),
                _ => {}
            }
        }
        let freq = to_g2 as f64 / n as f64;
        assert!((freq - 0.18).abs() < 0.004, "{freq}");
    }

    #[test]
    fn identity_chain_never_moves() {
        let chain = MarkovGainChain::new(
            vec![1.0, 2.0, 3.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in 0..3 {
            assert!((0..1000).all(|_| chain.step(s, &mut rng) == s));
        }
        assert_eq!(chain.stationary_distribution().unwrap_err(), AcousticError::Reducible);
    }

    #[test]
    fn stationary_distributions() {
        let uniform = MarkovGainChain::new(vec![1.0, 2.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let pi = uniform.stationary_distribution().unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14 && (pi[1] - 0.5).abs() < 1e-14);
        // solved offline: (9, 18, 20) / 47
        let pi = reference_chain().stationary_distribution().unwrap();
        for (got, want) in pi.iter().zip([9.0 / 47.0, 18.0 / 47.0, 20.0 / 47.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn long_run_occupancy_matches_stationary() {
        let chain = reference_chain();
        let pi = chain.stationary_distribution().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 3];
        let mut s = 2;
        let n = 1_000_000;
        for _ in 0..n {
            s = chain.step(s, &mut rng);
            counts[s] += 1;
        }
        for i in 0..3 {
            let freq = counts[i] as f64 / n as f64;
            assert!((freq - pi[i]).abs() < 0.005, "level {i}: {freq} vs {}", pi[i]);
        }
    }
}
