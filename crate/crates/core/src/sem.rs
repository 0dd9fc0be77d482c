//! Analytic signal and noise model of a modulated stimulated-emission gain.
//!
//! The probe is amplified by a phase-insensitive gain that the excitation
//! beam modulates at `Ω₀`:
//!
//! ```text
//! G_SE(t) = (1 + Δ) + Δ cos(Ω₀ t),   Δ = (G₀ − 1) / 2
//! ```
//!
//! so the gain swings between 1 and `G₀`. Some texts write the same process
//! as `G₀ + (G₀ − 1) cos(Ω₀ t)`, which doubles the modulation depth; every
//! formula here (signal weight, noise floor, SNR) follows the `Δ` form above,
//! and the up-converted technical noise carries the matching `(G₀ − 1)²/16`
//! prefactor rather than `/4`.
//!
//! Spectral quantities are two-sided: the sideband signal is a delta of weight
//! `(G₀ − 1)² P₀² / 16` at `+Ω₀` (and its mirror at `−Ω₀`). Multiply by 2 to
//! compare with a one-sided estimate such as [`crate::spectral::estimate_psd`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::PhotonMoments;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemError {
    #[error("{name} must be {bound}, got {value}")]
    OutOfRange {
        name: &'static str,
        bound: &'static str,
        value: f64,
    },
}

fn check(name: &'static str, value: f64, ok: bool, bound: &'static str) -> Result<(), SemError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(SemError::OutOfRange { name, bound, value })
    }
}

/// Parameters of the modulated SEM measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemMeasurementConfig {
    /// Peak gain `G₀ ≥ 1`.
    pub g0: f64,
    /// Modulation angular frequency `Ω₀` in rad/s.
    pub omega0: f64,
    /// Mean photon flux `P₀` before the sample.
    pub p0: f64,
    /// Shot-noise scale `κ` (PSD units per unit flux).
    pub kappa: f64,
    /// Fano factor of the probe.
    pub fano: f64,
    /// Technical-to-shot noise ratio `ρ_t` at DC.
    pub rho_t: f64,
}

impl SemMeasurementConfig {
    pub fn new(
        g0: f64,
        omega0: f64,
        p0: f64,
        kappa: f64,
        fano: f64,
        rho_t: f64,
    ) -> Result<Self, SemError> {
        let cfg = Self {
            g0,
            omega0,
            p0,
            kappa,
            fano,
            rho_t,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SemError> {
        check("g0", self.g0, self.g0 >= 1.0, ">= 1")?;
        check("omega0", self.omega0, self.omega0 > 0.0, "> 0")?;
        check("p0", self.p0, self.p0 > 0.0, "> 0")?;
        check("kappa", self.kappa, self.kappa > 0.0, "> 0")?;
        check("fano", self.fano, self.fano > 0.0, "> 0")?;
        check("rho_t", self.rho_t, self.rho_t >= 0.0, ">= 0")
    }

    /// Modulation depth `Δ = (G₀ − 1)/2`.
    pub fn delta(&self) -> f64 {
        0.5 * (self.g0 - 1.0)
    }

    /// Modulation frequency in Hz.
    pub fn modulation_hz(&self) -> f64 {
        self.omega0 / (2.0 * PI)
    }

    /// Default technical-noise corner, `Ω₀/8` (rad/s).
    pub fn default_technical_corner(&self) -> f64 {
        self.omega0 / 8.0
    }
}

/// Sample and beam parameters entering the stimulated-emission gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub sigma_a: f64,
    pub sigma_s: f64,
    pub n0: f64,
    pub i_e: f64,
    pub i_s: f64,
    pub area: f64,
    /// Proportionality constant in `N₂ = c N₀ I_E σ_a` (1 in normalised units).
    pub excitation_coeff: f64,
}

impl SampleParams {
    pub fn validate(&self) -> Result<(), SemError> {
        for (name, v) in [
            ("sigma_a", self.sigma_a),
            ("sigma_s", self.sigma_s),
            ("n0", self.n0),
            ("i_e", self.i_e),
            ("i_s", self.i_s),
            ("excitation_coeff", self.excitation_coeff),
        ] {
            check(name, v, v >= 0.0, ">= 0")?;
        }
        check("area", self.area, self.area > 0.0, "> 0")
    }

    /// Excited-state population `N₂` in the non-saturating regime.
    pub fn excited_population(&self) -> f64 {
        self.excitation_coeff * self.n0 * self.i_e * self.sigma_a
    }
}

/// `G_SE = 1 + N₂ σ_s / A`.
pub fn physical_gain(sp: &SampleParams) -> Result<f64, SemError> {
    sp.validate()?;
    Ok(1.0 + sp.excited_population() * sp.sigma_s / sp.area)
}

/// The three variance contributions of a phase-insensitive amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierNoiseTerms {
    /// `G² var(n_in)`.
    pub amplified_input: f64,
    /// `G(G − 1)⟨n_in⟩`: signal–spontaneous beat.
    pub spontaneous_signal: f64,
    /// `G(G − 1)`: amplified vacuum.
    pub spontaneous_vacuum: f64,
}

impl AmplifierNoiseTerms {
    pub fn total(&self) -> f64 {
        self.amplified_input + self.spontaneous_signal + self.spontaneous_vacuum
    }
}

pub fn amplifier_noise_terms(
    mean_in: f64,
    var_in: f64,
    g: f64,
) -> Result<AmplifierNoiseTerms, SemError> {
    check("g", g, g >= 1.0, ">= 1")?;
    check("mean_in", mean_in, mean_in >= 0.0, ">= 0")?;
    check("var_in", var_in, var_in >= 0.0, ">= 0")?;
    Ok(AmplifierNoiseTerms {
        amplified_input: g * g * var_in,
        spontaneous_signal: g * (g - 1.0) * mean_in,
        spontaneous_vacuum: g * (g - 1.0),
    })
}

/// Output moments of the amplifier with the ancilla mode in vacuum:
/// `⟨n_out⟩ = G⟨n_in⟩ + (G − 1)`, variance with all three terms retained.
pub fn amplifier_output_moments(
    mean_in: f64,
    var_in: f64,
    g: f64,
) -> Result<PhotonMoments, SemError> {
    let terms = amplifier_noise_terms(mean_in, var_in, g)?;
    Ok(PhotonMoments::from_mean_variance(
        g * mean_in + (g - 1.0),
        terms.total(),
    ))
}

/// `G_SE(t) = (1 + Δ) + Δ cos(Ω₀ t)`.
pub fn modulated_gain(cfg: &SemMeasurementConfig, t: f64) -> f64 {
    let d = cfg.delta();
    (1.0 + d) + d * (cfg.omega0 * t).cos()
}

/// Delta weight of the sideband signal at `Ω₀`: `(G₀ − 1)² P₀² / 16`.
pub fn signal_psd_peak(cfg: &SemMeasurementConfig) -> f64 {
    (cfg.g0 - 1.0).powi(2) * cfg.p0.powi(2) / 16.0
}

/// Input technical noise, single-pole low-pass with DC value `ρ_t κ P₀`.
///
/// `corner` is an angular frequency.
pub fn technical_noise_in(cfg: &SemMeasurementConfig, omega: f64, corner: f64) -> f64 {
    cfg.rho_t * cfg.kappa * cfg.p0 / (1.0 + (omega / corner).powi(2))
}

/// Signal weight and noise densities at the sideband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdComponents {
    /// Delta weight of the sideband signal.
    pub signal_peak: f64,
    /// White quantum-noise density `κ F P₀ G₀`.
    pub quantum_floor: f64,
    /// Up-converted technical noise density at the sideband centre.
    pub technical_band: f64,
}

impl PsdComponents {
    pub fn noise(&self) -> f64 {
        self.quantum_floor + self.technical_band
    }

    /// Height of the signal peak as seen with resolution bandwidth `rbw`
    /// (same frequency unit as the densities).
    pub fn peak_height(&self, rbw: f64) -> f64 {
        self.signal_peak / rbw + self.noise()
    }

    /// The same components in a one-sided convention.
    pub fn one_sided(&self) -> Self {
        Self {
            signal_peak: 2.0 * self.signal_peak,
            quantum_floor: 2.0 * self.quantum_floor,
            technical_band: 2.0 * self.technical_band,
        }
    }
}

/// Noise at `Ω₀`: `𝒩_out^q = κ F P₀ G₀` and `𝒩_out^t = (G₀ − 1)² 𝒩_in^t(0) / 16`.
pub fn noise_psd_at_sideband(cfg: &SemMeasurementConfig) -> PsdComponents {
    let shot_in = cfg.kappa * cfg.fano * cfg.p0;
    PsdComponents {
        signal_peak: signal_psd_peak(cfg),
        quantum_floor: shot_in * cfg.g0,
        technical_band: (cfg.g0 - 1.0).powi(2) * cfg.kappa * cfg.p0 * cfg.rho_t / 16.0,
    }
}

/// Output noise density near the sideband for a single-pole technical spectrum.
pub fn output_noise_psd(cfg: &SemMeasurementConfig, omega: f64, corner: f64) -> f64 {
    cfg.kappa * cfg.fano * cfg.p0 * cfg.g0
        + (cfg.g0 - 1.0).powi(2) * technical_noise_in(cfg, omega - cfg.omega0, corner) / 16.0
}

/// `SNR = (G₀ − 1)² P₀/κ / (16 F G₀ + (G₀ − 1)² ρ_t)`.
pub fn snr(cfg: &SemMeasurementConfig) -> f64 {
    let dg2 = (cfg.g0 - 1.0).powi(2);
    dg2 * cfg.p0 / cfg.kappa / (16.0 * cfg.fano * cfg.g0 + dg2 * cfg.rho_t)
}

/// SNR gain of the probe over a coherent probe of equal power:
/// `(1 + x) / (F + x)` with `x = (G₀ − 1)² ρ_t / (16 G₀)`.
pub fn snr_improvement(cfg: &SemMeasurementConfig) -> f64 {
    let x = (cfg.g0 - 1.0).powi(2) * cfg.rho_t / (16.0 * cfg.g0);
    (1.0 + x) / (cfg.fano + x)
}

/// Two-sided shot-noise scale for a per-pulse photon-count trace sampled at
/// `sample_rate`, with `P₀` expressed in photons per pulse.
pub fn per_sample_kappa(sample_rate: f64) -> f64 {
    1.0 / sample_rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(g0: f64, p0: f64, kappa: f64, fano: f64, rho_t: f64) -> SemMeasurementConfig {
        SemMeasurementConfig::new(g0, 2.0 * PI * 4.0e6, p0, kappa, fano, rho_t).unwrap()
    }

    fn sample(n0: f64, i_e: f64) -> SampleParams {
        SampleParams {
            sigma_a: 1.0,
            sigma_s: 1.0,
            n0,
            i_e,
            i_s: 1.0,
            area: 1.0,
            excitation_coeff: 1.0,
        }
    }

    #[test]
    fn physical_gain_examples() {
        assert_eq!(physical_gain(&sample(0.0, 1.0)).unwrap(), 1.0);
        let g1 = physical_gain(&sample(1e-2, 1.0)).unwrap();
        assert!((g1 - 1.01).abs() < 1e-15);
        let g2 = physical_gain(&sample(1e-2, 2.0)).unwrap();
        assert!(((g2 - 1.0) / (g1 - 1.0) - 2.0).abs() < 1e-12);
        let mut bad = sample(1.0, 1.0);
        bad.area = 0.0;
        assert!(physical_gain(&bad).is_err());
    }

    #[test]
    fn amplifier_identity_and_vacuum() {
        let m = amplifier_output_moments(7.0, 3.0, 1.0).unwrap();
        assert_eq!((m.mean, m.variance), (7.0, 3.0));
        let v = amplifier_output_moments(0.0, 0.0, 2.0).unwrap();
        assert_eq!((v.mean, v.variance), (1.0, 2.0));
        assert!(amplifier_output_moments(1.0, 1.0, 0.99).is_err());
    }

    #[test]
    fn amplifier_spontaneous_term_is_small() {
        let t = amplifier_noise_terms(1e8, 1e8, 1.01).unwrap();
        assert!((t.spontaneous_signal - 1.01e6).abs() < 1e-3);
        let ratio = t.spontaneous_signal / t.amplified_input;
        assert!(ratio <= 1e-2 && ratio > 0.009);
    }

    #[test]
    fn gain_modulation_range() {
        let c = cfg(1.01, 1.0, 1.0, 1.0, 0.0);
        let t_pi = PI / c.omega0;
        assert!((modulated_gain(&c, 0.0) - 1.01).abs() < 1e-15);
        assert!((modulated_gain(&c, t_pi) - 1.0).abs() < 1e-15);
        let flat = cfg(1.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(modulated_gain(&flat, 0.123), 1.0);
        // Time average over one period is 1 + Δ.
        let n = 1000;
        let avg: f64 = (0..n)
            .map(|k| modulated_gain(&c, k as f64 / n as f64 * 2.0 * PI / c.omega0))
            .sum::<f64>()
            / n as f64;
        assert!((avg - 1.005).abs() < 1e-12);
    }

    #[test]
    fn signal_peak_examples() {
        assert_eq!(signal_psd_peak(&cfg(1.0, 1.0, 1.0, 1.0, 0.0)), 0.0);
        assert!((signal_psd_peak(&cfg(1.01, 1.0, 1.0, 1.0, 0.0)) - 6.25e-6).abs() < 1e-18);
        let a = signal_psd_peak(&cfg(1.01, 3.0, 1.0, 1.0, 0.0));
        let b = signal_psd_peak(&cfg(1.04, 3.0, 1.0, 1.0, 0.0));
        assert!((b / a - 16.0).abs() < 1e-9);
    }

    #[test]
    fn noise_examples() {
        let coh = noise_psd_at_sideband(&cfg(1.0, 5.0, 2.0, 1.0, 0.0));
        assert_eq!(coh.quantum_floor, 10.0);
        assert_eq!(coh.technical_band, 0.0);
        let sq = noise_psd_at_sideband(&cfg(1.0, 5.0, 2.0, 0.912, 0.0));
        let db = 10.0 * (sq.quantum_floor / coh.quantum_floor).log10();
        assert!((db + 0.4).abs() < 0.005, "{db}");
        let tech = noise_psd_at_sideband(&cfg(1.01, 1.0, 1.0, 1.0, 1.0));
        let ratio = tech.technical_band / tech.quantum_floor;
        assert!((ratio - 6.188e-6).abs() < 1e-8, "{ratio}");
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr(&cfg(1.0, 1e8, 1.0, 1.0, 1.0)), 0.0);
        let v = snr(&cfg(1.01, 1e8, 1.0, 1.0, 1.0));
        assert!((v - 618.808).abs() < 1e-3, "{v}");
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(snr_improvement(&cfg(1.01, 1.0, 1.0, 1.0, 1.0)), 1.0);
        assert!((snr_improvement(&cfg(1.01, 1.0, 1.0, 0.8, 0.0)) - 1.25).abs() < 1e-15);
        let d = snr_improvement(&cfg(1.01, 1.0, 1.0, 10f64.powf(-0.03), 1.0));
        assert!((d - 1.071_52).abs() < 1e-5);
        assert!((10.0 * d.log10() - 0.30).abs() < 0.01);
    }

    #[test]
    fn improvement_is_snr_ratio() {
        let sq = cfg(1.02, 1e6, 0.5, 0.85, 3.0);
        let coh = SemMeasurementConfig { fano: 1.0, ..sq };
        assert!((snr_improvement(&sq) - snr(&sq) / snr(&coh)).abs() < 1e-12);
    }

    #[test]
    fn unit_gain_floor_is_input_floor() {
        let c = cfg(1.0, 3.0, 0.7, 0.9, 2.0);
        assert_eq!(
            noise_psd_at_sideband(&c).quantum_floor,
            c.kappa * c.fano * c.p0
        );
    }

    #[test]
    fn output_noise_spectrum_peaks_at_sideband() {
        let c = cfg(1.05, 1.0, 1.0, 1.0, 1.0);
        let corner = c.default_technical_corner();
        let at = output_noise_psd(&c, c.omega0, corner);
        let comps = noise_psd_at_sideband(&c);
        assert!((at - comps.noise()).abs() < 1e-15);
        assert!(output_noise_psd(&c, c.omega0 + 3.0 * corner, corner) < at);
    }

    #[test]
    fn config_validation() {
        assert!(SemMeasurementConfig::new(0.99, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(SemMeasurementConfig::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(SemMeasurementConfig::new(1.0, 1.0, 1.0, 1.0, 1.0, -1.0).is_err());
        assert!(SemMeasurementConfig::new(1.0, 1.0, 1.0, 1.0, f64::NAN, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn improvement_exceeds_one_when_squeezed(f in 0.001f64..0.999, g0 in 1.0f64..1.05, rho in 0.0f64..10.0) {
            prop_assert!(snr_improvement(&cfg(g0, 1.0, 1.0, f, rho)) > 1.0);
        }

        #[test]
        fn improvement_monotone(f in 0.05f64..0.95, g0 in 1.001f64..1.5, rho in 0.0f64..10.0, d in 0.01f64..1.0) {
            let base = snr_improvement(&cfg(g0, 1.0, 1.0, f, rho));
            prop_assert!(snr_improvement(&cfg(g0, 1.0, 1.0, f, rho + d)) < base);
            prop_assert!(snr_improvement(&cfg(g0, 1.0, 1.0, (f + 0.04).min(0.999), rho)) < base);
        }

        #[test]
        fn snr_linear_in_power_without_technical_noise(p0 in 1.0f64..1e9, lambda in 0.1f64..100.0, g0 in 1.001f64..1.1) {
            let a = snr(&cfg(g0, p0, 1.0, 0.9, 0.0));
            let b = snr(&cfg(g0, lambda * p0, 1.0, 0.9, 0.0));
            prop_assert!((b / a - lambda).abs() < 1e-9 * lambda);
        }

        #[test]
        fn snr_increasing_in_power(p0 in 1.0f64..1e9, g0 in 1.001f64..1.1, rho in 0.0f64..5.0) {
            prop_assert!(snr(&cfg(g0, 1.5 * p0, 1.0, 0.9, rho)) > snr(&cfg(g0, p0, 1.0, 0.9, rho)));
        }

        #[test]
        fn amplifier_keeps_poisson_to_first_order(mean in 1e3f64..1e9, eps in 0.0f64..1e-2) {
            let m = amplifier_output_moments(mean, mean, 1.0 + eps).unwrap();
            // F_out = 1 + O(G - 1).
            prop_assert!((m.fano - 1.0).abs() <= 3.0 * eps + 1e-12);
        }
    }
}
