//! Experiment configuration for the `sqsem` command line.
//!
//! A TOML document with one table per stage of the measurement chain. Unknown
//! keys are rejected and every physical bound is re-checked by the module
//! types. Defaults describe the desk-scale operating point: an 80 MHz,
//! 820 nm, 2 mW probe with 4 MHz SEM modulation and an 85% efficient
//! detector.
//!
//! All Fano factors in the file refer to the *detected* probe, the quantity
//! a power-matched shot-noise comparison measures.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{FanoAxis, FitInit, FixedShape};
use crate::quantum::OpaConfig;
use crate::sem::{per_sample_kappa, SemMeasurementConfig};
use crate::sim::{photons_per_pulse, DetectorConfig, PulseTrainConfig, TechnicalNoiseConfig};
use crate::spectral::Window;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(msg.to_string())
}

/// Increment used to derive per-trace seeds from the run seed.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of the `k`-th stream derived from `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(SEED_STRIDE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(with = "crate::seed_serde")]
    pub seed: u64,
    pub opa: OpaSection,
    pub pulse_train: PulseTrainSection,
    pub sem: SemSection,
    pub technical_noise: TechnicalNoiseSection,
    pub detector: DetectorSection,
    pub spectral: SpectralSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            opa: OpaSection::default(),
            pulse_train: PulseTrainSection::default(),
            sem: SemSection::default(),
            technical_noise: TechnicalNoiseSection::default(),
            detector: DetectorSection::default(),
            spectral: SpectralSection::default(),
            fit: FitSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpaSection {
    /// Effective nonlinearity, per square root of the pump-power unit.
    pub beta: f64,
    pub chi: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    /// Operating pump power (same unit as `beta`).
    pub pump_power: f64,
}

impl Default for OpaSection {
    fn default() -> Self {
        Self {
            beta: 1.0,
            chi: 0.58,
            eta_p: 0.85,
            eta_d: 0.85,
            pump_power: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseTrainSection {
    pub rep_rate_hz: f64,
    pub wavelength_nm: f64,
    pub average_power_mw: f64,
    pub duration_s: f64,
}

impl Default for PulseTrainSection {
    fn default() -> Self {
        Self {
            rep_rate_hz: 80.0e6,
            wavelength_nm: 820.0,
            average_power_mw: 2.0,
            duration_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemSection {
    /// Peak SEM gain `G₀`.
    pub g0: f64,
    pub modulation_hz: f64,
    /// Detected Fano factor of the squeezed probe.
    pub fano: f64,
}

impl Default for SemSection {
    fn default() -> Self {
        Self {
            g0: 1.01,
            modulation_hz: 4.0e6,
            fano: 10f64.powf(-0.03),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TechnicalNoiseSection {
    /// Technical-to-shot noise ratio at DC.
    pub rho_t: f64,
    pub corner_hz: f64,
}

impl Default for TechnicalNoiseSection {
    fn default() -> Self {
        Self {
            rho_t: 1.0,
            corner_hz: 100.0e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub efficiency: f64,
    /// Electronic noise PSD relative to the detected coherent shot noise.
    pub electronic_noise_ratio: f64,
    pub bandwidth_hz: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            efficiency: 0.85,
            electronic_noise_ratio: 0.125,
            bandwidth_hz: 100.0e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    pub rbw_hz: f64,
    pub averages: usize,
    pub window: String,
    /// `[lo, hi]` band for the floor comparison, Hz.
    pub fano_band_hz: [f64; 2],
    pub peak_half_width: usize,
    pub peak_guard: usize,
    pub peak_flank: usize,
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self {
            rbw_hz: 1.0e3,
            averages: 100,
            window: "hann".into(),
            fano_band_hz: [2.0e6, 10.0e6],
            peak_half_width: 3,
            peak_guard: 8,
            peak_flank: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    #[default]
    Amplification,
    Fano,
}

impl std::str::FromStr for FitMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "amplification" => Ok(FitMode::Amplification),
            "fano" => Ok(FitMode::Fano),
            other => Err(invalid(format!(
                "unknown fit mode {other:?} (expected amplification or fano)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub mode: FitMode,
    pub init: FitInit,
    /// Fit `η` in amplification mode instead of fixing it to `fixed_eta`.
    pub fit_eta: bool,
    pub fixed_eta: f64,
    /// Fano mode: supplying both fixes the curve shape so only `η` is fitted.
    pub fixed_beta: Option<f64>,
    pub fixed_chi: Option<f64>,
    pub fano_axis: FanoAxis,
    pub max_iterations: usize,
    pub curve_points: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            mode: FitMode::Amplification,
            init: FitInit::default(),
            fit_eta: false,
            fixed_eta: 1.0,
            fixed_beta: None,
            fixed_chi: None,
            fano_axis: FanoAxis::PumpPower,
            max_iterations: 500,
            curve_points: 201,
        }
    }
}

impl FitSection {
    pub fn fixed_shape(&self) -> Result<Option<FixedShape>, ConfigError> {
        match (self.fixed_beta, self.fixed_chi) {
            (Some(beta), Some(chi)) => Ok(Some(FixedShape { beta, chi })),
            (None, None) => Ok(None),
            _ => Err(invalid(
                "fit.fixed_beta and fit.fixed_chi must be given together",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write the raw traces (`.bin` + `.toml` sidecar) as well as the PSDs.
    pub write_traces: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            write_traces: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serialisable")
    }

    /// Writes `resolved_config.toml` into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf, ConfigError> {
        let path = dir.join("resolved_config.toml");
        std::fs::write(&path, self.to_toml()).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }

    /// Re-checks every section against the module types.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.opa_config()?;
        let mod_hz = self.sem.modulation_hz;
        self.sem_config(self.sem.g0, self.sem.fano, self.technical_noise.rho_t)?;
        self.pulse_train(1.0, 0).validate().map_err(invalid)?;
        self.detector().validate().map_err(invalid)?;
        self.technical_noise().validate(mod_hz).map_err(invalid)?;
        self.source_fano(self.sem.fano)?;
        if !(self.detector.electronic_noise_ratio.is_finite()
            && self.detector.electronic_noise_ratio >= 0.0)
        {
            return Err(invalid("detector.electronic_noise_ratio must be >= 0"));
        }
        self.window()?;
        let s = &self.spectral;
        if !(s.rbw_hz.is_finite() && s.rbw_hz > 0.0) || s.averages == 0 {
            return Err(invalid(
                "spectral.rbw_hz must be > 0 and spectral.averages >= 1",
            ));
        }
        let [lo, hi] = s.fano_band_hz;
        if !(lo > 0.0 && hi > lo && hi <= self.pulse_train.rep_rate_hz / 2.0) {
            return Err(invalid(format!(
                "spectral.fano_band_hz = [{lo}, {hi}] must be increasing and below Nyquist"
            )));
        }
        if s.peak_guard <= s.peak_half_width || s.peak_flank == 0 {
            return Err(invalid(
                "spectral.peak_guard must exceed peak_half_width and peak_flank must be > 0",
            ));
        }
        self.fit.fixed_shape()?;
        if self.fit.curve_points < 2 || self.fit.max_iterations == 0 {
            return Err(invalid(
                "fit.curve_points must be >= 2 and fit.max_iterations >= 1",
            ));
        }
        Ok(())
    }

    pub fn opa_config(&self) -> Result<OpaConfig, ConfigError> {
        let o = &self.opa;
        if !(o.pump_power.is_finite() && o.pump_power >= 0.0) {
            return Err(invalid(format!(
                "opa.pump_power must be >= 0, got {}",
                o.pump_power
            )));
        }
        OpaConfig::new(o.beta, o.chi, o.eta_p, o.eta_d).map_err(invalid)
    }

    pub fn photons_per_pulse(&self) -> f64 {
        let p = &self.pulse_train;
        photons_per_pulse(
            p.average_power_mw * 1e-3,
            p.rep_rate_hz,
            p.wavelength_nm * 1e-9,
        )
    }

    /// Mean detected photons per pulse without SEM gain.
    pub fn detected_photons(&self) -> f64 {
        self.detector.efficiency * self.photons_per_pulse()
    }

    /// One-sided coherent shot-noise PSD of the detected trace.
    pub fn shot_noise_psd(&self) -> f64 {
        2.0 * self.detected_photons() / self.pulse_train.rep_rate_hz
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            efficiency: self.detector.efficiency,
            electronic_noise_psd: self.detector.electronic_noise_ratio * self.shot_noise_psd(),
            bandwidth: self.detector.bandwidth_hz,
        }
    }

    pub fn technical_noise(&self) -> TechnicalNoiseConfig {
        TechnicalNoiseConfig {
            rho_t: self.technical_noise.rho_t,
            corner_freq: self.technical_noise.corner_hz,
        }
    }

    /// Fano factor before detection that yields `detected` after it.
    pub fn source_fano(&self, detected: f64) -> Result<f64, ConfigError> {
        let eta = self.detector.efficiency;
        let f = (detected - (1.0 - eta)) / eta;
        if !(f.is_finite() && f > 0.0) {
            return Err(invalid(format!(
                "detected Fano factor {detected} is not reachable with detector efficiency {eta}"
            )));
        }
        Ok(f)
    }

    pub fn pulse_train(&self, source_fano: f64, seed: u64) -> PulseTrainConfig {
        PulseTrainConfig {
            rep_rate: self.pulse_train.rep_rate_hz,
            photons_per_pulse: self.photons_per_pulse(),
            fano: source_fano,
            duration: self.pulse_train.duration_s,
            seed,
        }
    }

    /// Analytic SEM model of the detected trace: flux in detected photons
    /// per pulse, `κ` for a per-pulse sampled trace.
    pub fn sem_config(
        &self,
        g0: f64,
        fano: f64,
        rho_t: f64,
    ) -> Result<SemMeasurementConfig, ConfigError> {
        SemMeasurementConfig::new(
            g0,
            2.0 * PI * self.sem.modulation_hz,
            self.detected_photons(),
            per_sample_kappa(self.pulse_train.rep_rate_hz),
            fano,
            rho_t,
        )
        .map_err(invalid)
    }

    pub fn window(&self) -> Result<Window, ConfigError> {
        self.spectral.window.parse().map_err(invalid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert!((cfg.photons_per_pulse() - 1.032e8).abs() < 0.001e8);
        assert!((cfg.source_fano(cfg.sem.fano).unwrap() - 0.9215).abs() < 1e-3);
    }

    #[test]
    fn round_trip_through_toml() {
        let mut cfg = ExperimentConfig {
            seed: u64::MAX,
            ..Default::default()
        };
        cfg.fit.fixed_beta = Some(1.2);
        cfg.fit.fixed_chi = Some(0.6);
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text, "mem").unwrap(), cfg);
    }

    #[test]
    fn partial_documents_use_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 7\n[sem]\ng0 = 1.02\n", "mem").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sem.g0, 1.02);
        assert_eq!(cfg.sem.modulation_hz, 4.0e6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml("[sem]\ngain = 1.02\n", "mem"),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("colour = 1\n", "mem"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn physical_bounds_are_rechecked() {
        let mut cfg = ExperimentConfig::default();
        cfg.opa.chi = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.sem.fano = 0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.technical_noise.corner_hz = 5.0e6;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.spectral.window = "kaiser".into();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.fit.fixed_beta = Some(1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_eq!(derive_seed(5, 0), 5);
        assert_ne!(derive_seed(5, 1), derive_seed(5, 2));
        assert_eq!(derive_seed(u64::MAX, 1), u64::MAX.wrapping_add(SEED_STRIDE));
    }
}
