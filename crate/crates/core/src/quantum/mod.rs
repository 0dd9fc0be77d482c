//! Photon statistics of squeezed coherent states.
//!
//! A coherent seed `|α⟩` passed through a degenerate parametric amplifier with
//! squeezing parameter `r = β √P_p` ends up in a displaced squeezed state whose
//! photon-number mean and variance are known in closed form. This module
//! provides those moments, the derived intensity gain and Fano factor, the
//! mode-mismatch model for an imperfect pump/seed overlap `χ`, and the
//! beam-splitter loss map. [`fock`] holds a brute-force truncated number-basis
//! oracle used to validate the closed forms.

pub mod fock;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{weighted_exp_ratio, weighted_exp_sum};

pub use fock::{fock_oracle_moments, number_distribution, thin_distribution, FockDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("{name} must be {bound}, got {value}")]
    OutOfRange {
        name: &'static str,
        bound: &'static str,
        value: f64,
    },
    #[error("intensity gain and Fano factor are undefined for a vacuum seed (|alpha| = 0)")]
    VacuumSeed,
    #[error(
        "Fock truncation at {cutoff} leaves tail mass {tail_mass:e} (tolerance {tolerance:e})"
    )]
    TruncationTail {
        cutoff: usize,
        tail_mass: f64,
        tolerance: f64,
    },
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    bound: &'static str,
) -> Result<f64, QuantumError> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(QuantumError::OutOfRange { name, bound, value })
    }
}

/// Seed amplitude `α = |α| e^{iφ}` and squeezing parameter `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedCoherentParams {
    alpha_mag: f64,
    phase: f64,
    r: f64,
}

impl SqueezedCoherentParams {
    /// The phase is reduced to `[0, 2π)`.
    pub fn new(alpha_mag: f64, phase: f64, r: f64) -> Result<Self, QuantumError> {
        check_range(
            "alpha_mag",
            alpha_mag,
            0.0,
            f64::INFINITY,
            "finite and >= 0",
        )?;
        check_range("phase", phase, f64::NEG_INFINITY, f64::INFINITY, "finite")?;
        check_range("r", r, f64::NEG_INFINITY, f64::INFINITY, "finite")?;
        Ok(Self {
            alpha_mag,
            phase: phase.rem_euclid(TAU),
            r,
        })
    }

    /// Seed amplitude with squeezing `r = β √P_p`.
    pub fn from_pump(
        alpha_mag: f64,
        phase: f64,
        beta: f64,
        p_pump: f64,
    ) -> Result<Self, QuantumError> {
        check_range("p_pump", p_pump, 0.0, f64::INFINITY, "finite and >= 0")?;
        Self::new(alpha_mag, phase, beta * p_pump.sqrt())
    }

    pub fn alpha_mag(&self) -> f64 {
        self.alpha_mag
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn re_alpha(&self) -> f64 {
        self.alpha_mag * self.phase.cos()
    }

    pub fn im_alpha(&self) -> f64 {
        self.alpha_mag * self.phase.sin()
    }

    /// Same phase and squeezing with a different amplitude.
    fn with_amplitude(self, alpha_mag: f64) -> Self {
        Self { alpha_mag, ..self }
    }
}

/// Which extreme of the phase-sensitive gain the seed sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Seed phase `π/2 + mπ`: amplification, anti-squeezing.
    Amplify,
    /// Seed phase `mπ`: deamplification, intensity squeezing.
    Deamplify,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Amplify => 1.0,
            Branch::Deamplify => -1.0,
        }
    }

    /// Seed phase realising this branch.
    pub fn seed_phase(self) -> f64 {
        match self {
            Branch::Amplify => PI / 2.0,
            Branch::Deamplify => 0.0,
        }
    }
}

/// Parametric amplifier with imperfect mode overlap and lossy readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpaConfig {
    beta: f64,
    chi: f64,
    eta_p: f64,
    eta_d: f64,
}

impl OpaConfig {
    pub fn new(beta: f64, chi: f64, eta_p: f64, eta_d: f64) -> Result<Self, QuantumError> {
        check_range("beta", beta, 0.0, f64::INFINITY, "finite and >= 0")?;
        check_range("chi", chi, 0.0, 1.0, "in [0, 1]")?;
        check_range("eta_p", eta_p, 0.0, 1.0, "in [0, 1]")?;
        check_range("eta_d", eta_d, 0.0, 1.0, "in [0, 1]")?;
        Ok(Self {
            beta,
            chi,
            eta_p,
            eta_d,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn eta_p(&self) -> f64 {
        self.eta_p
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    /// Compound propagation and detection efficiency.
    pub fn efficiency(&self) -> f64 {
        self.eta_p * self.eta_d
    }

    /// `β √P_p` for the given pump power.
    pub fn squeezing(&self, p_pump: f64) -> f64 {
        self.beta * p_pump.max(0.0).sqrt()
    }
}

/// Photon-number mean, variance and Fano factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonMoments {
    pub mean: f64,
    pub variance: f64,
    pub fano: f64,
}

impl PhotonMoments {
    /// The Fano factor of an empty mode (`mean == 0`) is reported as 1.
    pub fn from_mean_variance(mean: f64, variance: f64) -> Self {
        let fano = if mean > 0.0 { variance / mean } else { 1.0 };
        Self {
            mean,
            variance,
            fano,
        }
    }

    /// Moments of the sum of two independent photon streams.
    pub fn combine_independent(self, other: Self) -> Self {
        Self::from_mean_variance(self.mean + other.mean, self.variance + other.variance)
    }
}

/// Exact photon-number mean and variance of the squeezed coherent state.
///
/// `⟨n⟩ = Re[α]² e^{-2r} + Im[α]² e^{2r} + sinh²r` and
/// `var(n) = Re[α]² e^{-4r} + Im[α]² e^{4r} + sinh²(2r)/2`.
///
/// The last variance term is the squeezed-vacuum variance `2 sinh²r cosh²r`;
/// it is sometimes quoted with a `1/4` prefactor, which the number-basis
/// oracle in [`fock`] rules out.
pub fn squeezed_moments(s: &SqueezedCoherentParams) -> PhotonMoments {
    let re2 = s.re_alpha().powi(2);
    let im2 = s.im_alpha().powi(2);
    let r = s.r;
    let mean = weighted_exp_sum(&[(re2, -2.0 * r), (im2, 2.0 * r)]) + r.sinh().powi(2);
    let variance =
        weighted_exp_sum(&[(re2, -4.0 * r), (im2, 4.0 * r)]) + 0.5 * (2.0 * r).sinh().powi(2);
    PhotonMoments::from_mean_variance(mean, variance)
}

fn require_seed(s: &SqueezedCoherentParams) -> Result<(), QuantumError> {
    if s.alpha_mag > 0.0 {
        Ok(())
    } else {
        Err(QuantumError::VacuumSeed)
    }
}

/// Classical intensity gain `cos²φ e^{-2r} + sin²φ e^{2r}` (spontaneous term dropped).
pub fn intensity_gain(s: &SqueezedCoherentParams) -> Result<f64, QuantumError> {
    require_seed(s)?;
    let (c2, s2) = (s.phase.cos().powi(2), s.phase.sin().powi(2));
    Ok(weighted_exp_sum(&[(c2, -2.0 * s.r), (s2, 2.0 * s.r)]))
}

/// Large-amplitude single-mode Fano factor
/// `(cos²φ e^{-4r} + sin²φ e^{4r}) / (cos²φ e^{-2r} + sin²φ e^{2r})`.
///
/// The exact value including the spontaneous-emission terms is
/// [`exact_fano`]; [`fano_approximation_gap`] reports the difference.
pub fn single_mode_fano(s: &SqueezedCoherentParams) -> Result<f64, QuantumError> {
    require_seed(s)?;
    let (c2, s2) = (s.phase.cos().powi(2), s.phase.sin().powi(2));
    let r = s.r;
    Ok(weighted_exp_ratio(
        &[(c2, -4.0 * r), (s2, 4.0 * r)],
        &[(c2, -2.0 * r), (s2, 2.0 * r)],
    ))
}

/// Fano factor from the exact moments, spontaneous terms included.
pub fn exact_fano(s: &SqueezedCoherentParams) -> f64 {
    squeezed_moments(s).fano
}

/// `exact_fano - single_mode_fano`: the error of the large-amplitude approximation.
pub fn fano_approximation_gap(s: &SqueezedCoherentParams) -> Result<f64, QuantumError> {
    Ok(exact_fano(s) - single_mode_fano(s)?)
}

/// Exact moments under partial mode overlap.
///
/// A fraction `chi` of the seed intensity (amplitude `√χ |α|`) is squeezed,
/// the remainder (amplitude `√(1-χ) |α|`) passes unchanged; the two parts are
/// treated as independent and their moments add.
pub fn mismatched_moments(
    s: &SqueezedCoherentParams,
    chi: f64,
) -> Result<PhotonMoments, QuantumError> {
    check_range("chi", chi, 0.0, 1.0, "in [0, 1]")?;
    let squeezed = squeezed_moments(&s.with_amplitude(s.alpha_mag * chi.sqrt()));
    let unsqueezed = squeezed_moments(&SqueezedCoherentParams {
        alpha_mag: s.alpha_mag * (1.0 - chi).sqrt(),
        phase: s.phase,
        r: 0.0,
    });
    Ok(squeezed.combine_independent(unsqueezed))
}

/// Seed power after the amplifier and lossy readout:
/// `(1 - χ + χ exp(±β√P_p)) η P_in`.
pub fn opa_output_power(p_in: f64, p_pump: f64, cfg: &OpaConfig, branch: Branch) -> f64 {
    let s = branch.sign() * cfg.squeezing(p_pump);
    let chi = cfg.chi;
    weighted_exp_sum(&[(1.0 - chi, 0.0), (chi, s)]) * cfg.efficiency() * p_in
}

/// Large-amplitude Fano factor at the amplifier output after loss:
/// `1 - η + η (1 - χ + χ e^{±4β√P_p}) / (1 - χ + χ e^{±2β√P_p})`.
///
/// The same branch sign is used in numerator and denominator.
pub fn opa_output_fano(p_pump: f64, cfg: &OpaConfig, branch: Branch) -> f64 {
    let s = branch.sign() * cfg.squeezing(p_pump);
    let chi = cfg.chi;
    let ratio = weighted_exp_ratio(
        &[(1.0 - chi, 0.0), (chi, 4.0 * s)],
        &[(1.0 - chi, 0.0), (chi, 2.0 * s)],
    );
    let eta = cfg.efficiency();
    1.0 - eta + eta * ratio
}

/// Beam-splitter loss with transmittance `eta`: mean scales by `η`, Fano maps to `1 - η + ηF`.
pub fn apply_loss(m: PhotonMoments, eta: f64) -> Result<PhotonMoments, QuantumError> {
    check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
    let mean = eta * m.mean;
    let fano = 1.0 - eta + eta * m.fano;
    let variance = if mean > 0.0 { fano * mean } else { 0.0 };
    Ok(PhotonMoments {
        mean,
        variance,
        fano,
    })
}

/// Propagation loss followed by detection loss.
pub fn apply_opa_losses(m: PhotonMoments, cfg: &OpaConfig) -> PhotonMoments {
    let after_propagation = apply_loss(m, cfg.eta_p).expect("eta_p validated on construction");
    apply_loss(after_propagation, cfg.eta_d).expect("eta_d validated on construction")
}
