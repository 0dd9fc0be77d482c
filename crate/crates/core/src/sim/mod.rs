//! Monte Carlo per-pulse photocurrent traces.
//!
//! Each laser pulse is one sample: the femtosecond envelope is never
//! resolved, which is adequate for RF analysis frequencies far below the
//! repetition rate. For pulse `n` at `t_n = n / rep_rate` the generator draws
//!
//! 1. a relative-intensity factor `1 + τ_n` from a first-order autoregressive
//!    process (technical noise, low-pass with the configured corner),
//! 2. a photon number `N(μ_n, F μ_n)` with `μ_n = μ (1 + τ_n)`,
//! 3. the stimulated-emission gain `G_SE(t_n)`,
//! 4. Gaussian binomial thinning by the detector efficiency, and
//! 5. additive white electronic noise.
//!
//! Photon numbers are Gaussian surrogates, so `photons_per_pulse` must be at
//! least [`MIN_PHOTONS_PER_PULSE`]. Negative optical samples are clipped to
//! zero and counted; a run aborts if more than [`MAX_CLIP_FRACTION`] of the
//! samples needed clipping.

pub mod export;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sem::{modulated_gain, SemMeasurementConfig};

pub use export::{read_binary, write_binary, write_csv};

pub const MIN_PHOTONS_PER_PULSE: f64 = 1.0e3;
pub const MAX_CLIP_FRACTION: f64 = 1.0e-6;

const PLANCK: f64 = 6.626_070_15e-34;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("modulation frequency {modulation_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    AboveNyquist { modulation_hz: f64, nyquist_hz: f64 },
    #[error("photons_per_pulse = {0} is below {MIN_PHOTONS_PER_PULSE}; the Gaussian photon-number surrogate is invalid")]
    TooFewPhotons(f64),
    #[error("{clipped} of {total} samples were clipped at zero (limit {MAX_CLIP_FRACTION:e})")]
    ClipFraction { clipped: u64, total: usize },
    #[error("beams are not power matched: {squeezed} vs {reference} photons per pulse")]
    PowerMismatch { squeezed: f64, reference: f64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

/// Mean photons per pulse of a pulse train with the given average power.
pub fn photons_per_pulse(average_power_w: f64, rep_rate: f64, wavelength_m: f64) -> f64 {
    let photon_energy = PLANCK * SPEED_OF_LIGHT / wavelength_m;
    average_power_w / rep_rate / photon_energy
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainConfig {
    /// Pulses per second; also the trace sample rate.
    pub rep_rate: f64,
    pub photons_per_pulse: f64,
    pub fano: f64,
    /// Seconds.
    pub duration: f64,
    #[serde(with = "crate::seed_serde")]
    pub seed: u64,
}

impl PulseTrainConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.rep_rate.is_finite() && self.rep_rate > 0.0) {
            return Err(invalid(format!(
                "rep_rate must be > 0, got {}",
                self.rep_rate
            )));
        }
        if !(self.photons_per_pulse.is_finite() && self.photons_per_pulse > 0.0) {
            return Err(invalid(format!(
                "photons_per_pulse must be > 0, got {}",
                self.photons_per_pulse
            )));
        }
        if !(self.fano.is_finite() && self.fano > 0.0) {
            return Err(invalid(format!("fano must be > 0, got {}", self.fano)));
        }
        if !(self.duration.is_finite() && self.duration * self.rep_rate >= 2.0) {
            return Err(invalid(format!(
                "duration * rep_rate must be >= 2, got {}",
                self.duration * self.rep_rate
            )));
        }
        Ok(())
    }

    pub fn pulse_count(&self) -> usize {
        (self.duration * self.rep_rate).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnicalNoiseConfig {
    /// Technical-to-shot PSD ratio at DC.
    pub rho_t: f64,
    /// Low-pass corner in Hz.
    pub corner_freq: f64,
}

impl TechnicalNoiseConfig {
    pub fn none(corner_freq: f64) -> Self {
        Self {
            rho_t: 0.0,
            corner_freq,
        }
    }

    pub fn validate(&self, modulation_hz: f64) -> Result<(), SimError> {
        if !(self.rho_t.is_finite() && self.rho_t >= 0.0) {
            return Err(invalid(format!("rho_t must be >= 0, got {}", self.rho_t)));
        }
        if !(self.corner_freq > 0.0 && self.corner_freq < modulation_hz) {
            return Err(invalid(format!(
                "corner_freq must lie in (0, {modulation_hz}) Hz, got {}",
                self.corner_freq
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Quantum efficiency in [0, 1].
    pub efficiency: f64,
    /// One-sided electronic noise PSD, (photons per pulse)² / Hz.
    pub electronic_noise_psd: f64,
    /// Hz.
    pub bandwidth: f64,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.efficiency.is_finite() && (0.0..=1.0).contains(&self.efficiency)) {
            return Err(invalid(format!(
                "efficiency must be in [0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.electronic_noise_psd.is_finite() && self.electronic_noise_psd >= 0.0) {
            return Err(invalid(format!(
                "electronic_noise_psd must be >= 0, got {}",
                self.electronic_noise_psd
            )));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(invalid(format!(
                "bandwidth must be > 0, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    /// Per-sample standard deviation of the electronic noise.
    pub fn electronic_sigma(&self, sample_rate: f64) -> f64 {
        (self.electronic_noise_psd * sample_rate / 2.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// Detected probe light, possibly with SEM gain.
    Optical,
    /// Detector output with the beam blocked.
    ElectronicOnly,
}

/// Everything needed to regenerate a trace bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub kind: TraceKind,
    #[serde(with = "crate::seed_serde")]
    pub seed: u64,
    pub pulse_train: Option<PulseTrainConfig>,
    pub gain: Option<SemMeasurementConfig>,
    pub technical_noise: Option<TechnicalNoiseConfig>,
    pub detector: DetectorConfig,
    /// Samples clipped at zero.
    pub clipped_samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Detected photons per pulse.
    pub samples: Vec<f64>,
    /// Samples per second (the repetition rate).
    pub sample_rate: f64,
    pub metadata: TraceMetadata,
}

impl TraceRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (self.samples.len() - 1) as f64
    }

    /// Sample variance over mean.
    pub fn sample_fano(&self) -> f64 {
        self.variance() / self.mean()
    }
}

/// Relative-intensity noise `τ_n`: AR(1) with coefficient `exp(-2π f_c / f_s)`,
/// scaled so that the technical PSD of the photon trace at DC is `ρ_t` times
/// the coherent shot-noise PSD.
struct TechnicalNoise {
    coeff: f64,
    drive: f64,
    state: f64,
}

impl TechnicalNoise {
    fn new(
        tn: &TechnicalNoiseConfig,
        sample_rate: f64,
        mean_photons: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let coeff = (-2.0 * PI * tn.corner_freq / sample_rate).exp();
        let drive = (1.0 - coeff) * (tn.rho_t / mean_photons).sqrt();
        let stationary_sd = drive / (1.0 - coeff * coeff).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        Self {
            coeff,
            drive,
            state: stationary_sd * z,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let current = self.state;
        let z: f64 = rng.sample(StandardNormal);
        self.state = self.coeff * self.state + self.drive * z;
        current
    }
}

fn check_gain(
    gain: &SemMeasurementConfig,
    sample_rate: f64,
    det: &DetectorConfig,
) -> Result<(), SimError> {
    gain.validate().map_err(|e| invalid(e.to_string()))?;
    let modulation_hz = gain.modulation_hz();
    if modulation_hz >= sample_rate / 2.0 {
        return Err(SimError::AboveNyquist {
            modulation_hz,
            nyquist_hz: sample_rate / 2.0,
        });
    }
    if modulation_hz >= det.bandwidth {
        return Err(invalid(format!(
            "modulation frequency {modulation_hz} Hz lies outside the detector bandwidth {} Hz",
            det.bandwidth
        )));
    }
    Ok(())
}

/// Simulates one detected probe trace.
///
/// `gain` supplies `G₀` and `Ω₀`; its flux, `κ`, Fano and `ρ_t` fields are
/// not used (the pulse train and technical-noise configs carry those).
pub fn simulate_trace(
    pt: &PulseTrainConfig,
    gain: &SemMeasurementConfig,
    tn: &TechnicalNoiseConfig,
    det: &DetectorConfig,
) -> Result<TraceRecord, SimError> {
    pt.validate()?;
    det.validate()?;
    check_gain(gain, pt.rep_rate, det)?;
    tn.validate(gain.modulation_hz())?;
    if pt.photons_per_pulse < MIN_PHOTONS_PER_PULSE {
        return Err(SimError::TooFewPhotons(pt.photons_per_pulse));
    }

    let n = pt.pulse_count();
    let fs = pt.rep_rate;
    let mu = pt.photons_per_pulse;
    let eta = det.efficiency;
    let thinning = eta * (1.0 - eta);
    let sigma_e = det.electronic_sigma(fs);

    let mut rng = ChaCha8Rng::seed_from_u64(pt.seed);
    let mut technical = TechnicalNoise::new(tn, fs, mu, &mut rng);
    let mut samples = Vec::with_capacity(n);
    let mut clipped = 0u64;

    for k in 0..n {
        let tau = technical.next(&mut rng);
        let z_photon: f64 = rng.sample(StandardNormal);
        let z_loss: f64 = rng.sample(StandardNormal);
        let z_elec: f64 = rng.sample(StandardNormal);

        let mean_k = (mu * (1.0 + tau)).max(0.0);
        let mut photons = mean_k + (pt.fano * mean_k).sqrt() * z_photon;
        if photons < 0.0 {
            photons = 0.0;
            clipped += 1;
        }
        let amplified = photons * modulated_gain(gain, k as f64 / fs);
        let mut detected =
            eta * amplified + (thinning * amplified).sqrt() * z_loss + sigma_e * z_elec;
        if detected < 0.0 {
            detected = 0.0;
            clipped += 1;
        }
        samples.push(detected);
    }

    if clipped as f64 > MAX_CLIP_FRACTION * n as f64 {
        return Err(SimError::ClipFraction { clipped, total: n });
    }

    Ok(TraceRecord {
        samples,
        sample_rate: fs,
        metadata: TraceMetadata {
            kind: TraceKind::Optical,
            seed: pt.seed,
            pulse_train: Some(*pt),
            gain: Some(*gain),
            technical_noise: Some(*tn),
            detector: *det,
            clipped_samples: clipped,
        },
    })
}

/// Detector output with the beam blocked: white electronic noise only.
///
/// Samples are zero-mean and are not clipped.
pub fn simulate_electronic_trace(
    sample_rate: f64,
    duration: f64,
    det: &DetectorConfig,
    seed: u64,
) -> Result<TraceRecord, SimError> {
    det.validate()?;
    if !(sample_rate.is_finite() && sample_rate > 0.0 && duration * sample_rate >= 2.0) {
        return Err(invalid(
            "electronic trace needs sample_rate > 0 and at least two samples",
        ));
    }
    let n = (duration * sample_rate).floor() as usize;
    let sigma = det.electronic_sigma(sample_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(TraceRecord {
        samples,
        sample_rate,
        metadata: TraceMetadata {
            kind: TraceKind::ElectronicOnly,
            seed,
            pulse_train: None,
            gain: None,
            technical_noise: None,
            detector: *det,
            clipped_samples: 0,
        },
    })
}

/// Power-matched squeezed probe and coherent reference through the same chain.
///
/// The reference must be coherent (`fano = 1`) and match the squeezed beam in
/// repetition rate, duration and photons per pulse. Each trace uses its own seed.
pub fn two_beam_experiment(
    squeezed: &PulseTrainConfig,
    reference: &PulseTrainConfig,
    gain: &SemMeasurementConfig,
    tn: &TechnicalNoiseConfig,
    det: &DetectorConfig,
) -> Result<(TraceRecord, TraceRecord), SimError> {
    if squeezed.photons_per_pulse != reference.photons_per_pulse {
        return Err(SimError::PowerMismatch {
            squeezed: squeezed.photons_per_pulse,
            reference: reference.photons_per_pulse,
        });
    }
    if squeezed.rep_rate != reference.rep_rate || squeezed.duration != reference.duration {
        return Err(invalid(
            "squeezed and reference pulse trains differ in rep_rate or duration",
        ));
    }
    if reference.fano != 1.0 {
        return Err(invalid(format!(
            "reference beam must be coherent (fano = 1), got {}",
            reference.fano
        )));
    }
    let s = simulate_trace(squeezed, gain, tn, det)?;
    let r = simulate_trace(reference, gain, tn, det)?;
    Ok((s, r))
}
