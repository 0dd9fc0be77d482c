//! Simulation and analysis toolkit for squeezed-light stimulated emission
//! microscopy (SEM).
//!
//! The crate is organised along the measurement chain:
//!
//! * [`quantum`]: photon statistics of squeezed coherent probes produced by
//!   single-pass parametric (de)amplification, with mode mismatch and loss,
//!   plus a truncated Fock-basis oracle.
//! * [`sem`]: analytic signal/noise model of the modulated SEM gain and the
//!   resulting signal-to-noise ratio.
//! * [`sim`]: Monte Carlo per-pulse photocurrent traces.
//! * [`spectral`]: spectrum-analyzer emulation (Welch PSD, peak and floor
//!   extraction, Fano-factor estimation).
//! * [`fit`]: bounded damped least-squares fits of the amplification and
//!   Fano-factor curves.
//! * [`config`] and [`cli`]: the `sqsem` command-line front end.

pub mod cli;
pub mod config;
pub mod fit;
pub mod quantum;
pub mod sem;
pub mod sim;
pub mod spectral;

mod numeric;
mod seed_serde;

pub use config::ExperimentConfig;
pub use fit::{CurveDataset, FitResult};
pub use quantum::{OpaConfig, PhotonMoments, SqueezedCoherentParams};
pub use sem::{PsdComponents, SemMeasurementConfig};
pub use sim::TraceRecord;
pub use spectral::PsdEstimate;
