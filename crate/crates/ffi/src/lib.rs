//! C ABI for `sqsem`.
//!
//! Conventions:
//!
//! * every fallible function returns an [`SqsemStatus`]; results are written
//!   through out-pointers, which are left untouched on failure;
//! * after a failure, [`sqsem_last_error`] returns a message for the calling
//!   thread;
//! * traces and PSDs are opaque handles created by this library and released
//!   with [`sqsem_trace_free`] / [`sqsem_psd_free`];
//! * panics never cross the boundary; they are reported as
//!   `SQSEM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sqsem::fit::{self, AmplificationFitOptions, FanoFitOptions, FitError, FitInit, FixedShape};
use sqsem::quantum::{self, Branch, QuantumError};
use sqsem::sem;
use sqsem::sim::{self, SimError};
use sqsem::spectral::{self, PeakOptions, SpectralError};

/// Result of a library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqsemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    NonConvergence = 4,
    Io = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(SqsemStatus, String);

impl Failure {
    fn null(name: &str) -> Self {
        Failure(SqsemStatus::NullPointer, format!("{name} is NULL"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(SqsemStatus::InvalidArgument, message.into())
    }
}

impl From<QuantumError> for Failure {
    fn from(e: QuantumError) -> Self {
        Failure(SqsemStatus::OutOfRange, e.to_string())
    }
}

impl From<sem::SemError> for Failure {
    fn from(e: sem::SemError) -> Self {
        Failure(SqsemStatus::OutOfRange, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::Io { .. } | SimError::Sidecar { .. } => SqsemStatus::Io,
            _ => SqsemStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        let status = match e {
            SpectralError::Io { .. } => SqsemStatus::Io,
            SpectralError::OutOfRange(_) => SqsemStatus::OutOfRange,
            _ => SqsemStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        let status = match e {
            FitError::Io { .. } => SqsemStatus::Io,
            FitError::NonConvergence { .. } => SqsemStatus::NonConvergence,
            FitError::Inversion { .. } => SqsemStatus::OutOfRange,
            _ => SqsemStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SqsemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqsemStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            SqsemStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(name))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn branch(amplify: bool) -> Branch {
    if amplify {
        Branch::Amplify
    } else {
        Branch::Deamplify
    }
}

/// Message describing the last failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sqsem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqsem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Photon statistics

/// Photon-number mean, variance and Fano factor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemMoments {
    pub mean: f64,
    pub variance: f64,
    pub fano: f64,
}

impl From<quantum::PhotonMoments> for SqsemMoments {
    fn from(m: quantum::PhotonMoments) -> Self {
        Self {
            mean: m.mean,
            variance: m.variance,
            fano: m.fano,
        }
    }
}

/// Amplifier parameters; the total efficiency is `eta_p * eta_d`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemOpaConfig {
    pub beta: f64,
    pub chi: f64,
    pub eta_p: f64,
    pub eta_d: f64,
}

impl SqsemOpaConfig {
    fn to_core(self) -> Result<quantum::OpaConfig, Failure> {
        Ok(quantum::OpaConfig::new(
            self.beta, self.chi, self.eta_p, self.eta_d,
        )?)
    }
}

/// Exact photon-number moments of the displaced squeezed state `S(r) D(α)|0⟩`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `SqsemMoments`.
#[no_mangle]
pub unsafe extern "C" fn sqsem_squeezed_moments(
    alpha_mag: f64,
    phase: f64,
    r: f64,
    out: *mut SqsemMoments,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = quantum::SqueezedCoherentParams::new(alpha_mag, phase, r)?;
        *out = quantum::squeezed_moments(&s).into();
        Ok(())
    })
}

/// Moments from the truncated number-basis distribution; fails with
/// `SQSEM_STATUS_OUT_OF_RANGE` when the truncation tail is too heavy.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `SqsemMoments`.
#[no_mangle]
pub unsafe extern "C" fn sqsem_fock_oracle_moments(
    alpha_mag: f64,
    phase: f64,
    r: f64,
    cutoff: usize,
    out: *mut SqsemMoments,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = quantum::SqueezedCoherentParams::new(alpha_mag, phase, r)?;
        *out = quantum::fock_oracle_moments(&s, cutoff)?.into();
        Ok(())
    })
}

/// Large-amplitude Fano factor of one squeezing branch.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn sqsem_single_mode_fano(
    alpha_mag: f64,
    phase: f64,
    r: f64,
    out: *mut f64,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = quantum::SqueezedCoherentParams::new(alpha_mag, phase, r)?;
        *out = quantum::single_mode_fano(&s)?;
        Ok(())
    })
}

/// Seed power after the amplifier and lossy readout.
///
/// # Safety
/// `cfg` and `out` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sqsem_opa_output_power(
    cfg: *const SqsemOpaConfig,
    p_in: f64,
    p_pump: f64,
    amplify: bool,
    out: *mut f64,
) -> SqsemStatus {
    guard(|| {
        let cfg = in_ref(cfg, "cfg")?.to_core()?;
        let out = out_ref(out, "out")?;
        if !(p_in >= 0.0 && p_pump >= 0.0) {
            return Err(Failure::invalid("p_in and p_pump must be >= 0"));
        }
        *out = quantum::opa_output_power(p_in, p_pump, &cfg, branch(amplify));
        Ok(())
    })
}

/// Detected Fano factor at the amplifier output.
///
/// # Safety
/// `cfg` and `out` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sqsem_opa_output_fano(
    cfg: *const SqsemOpaConfig,
    p_pump: f64,
    amplify: bool,
    out: *mut f64,
) -> SqsemStatus {
    guard(|| {
        let cfg = in_ref(cfg, "cfg")?.to_core()?;
        let out = out_ref(out, "out")?;
        if p_pump.is_nan() || p_pump < 0.0 {
            return Err(Failure::invalid("p_pump must be >= 0"));
        }
        *out = quantum::opa_output_fano(p_pump, &cfg, branch(amplify));
        Ok(())
    })
}

/// Beam-splitter loss with transmittance `eta`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `SqsemMoments`.
#[no_mangle]
pub unsafe extern "C" fn sqsem_apply_loss(
    m: SqsemMoments,
    eta: f64,
    out: *mut SqsemMoments,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let moments = quantum::PhotonMoments {
            mean: m.mean,
            variance: m.variance,
            fano: m.fano,
        };
        *out = quantum::apply_loss(moments, eta)?.into();
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// SEM noise model

/// Modulated SEM measurement. `omega0` is angular (rad/s).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemSemConfig {
    pub g0: f64,
    pub omega0: f64,
    pub p0: f64,
    pub kappa: f64,
    pub fano: f64,
    pub rho_t: f64,
}

impl SqsemSemConfig {
    fn to_core(self) -> Result<sem::SemMeasurementConfig, Failure> {
        Ok(sem::SemMeasurementConfig::new(
            self.g0,
            self.omega0,
            self.p0,
            self.kappa,
            self.fano,
            self.rho_t,
        )?)
    }
}

/// Two-sided signal weight and noise densities at the modulation sideband.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemPsdComponents {
    pub signal_peak: f64,
    pub quantum_floor: f64,
    pub technical_band: f64,
}

/// SNR of the modulated measurement.
///
/// # Safety
/// `cfg` and `out` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sqsem_snr(cfg: *const SqsemSemConfig, out: *mut f64) -> SqsemStatus {
    guard(|| {
        let cfg = in_ref(cfg, "cfg")?.to_core()?;
        *out_ref(out, "out")? = sem::snr(&cfg);
        Ok(())
    })
}

/// SNR gain over a power-matched coherent probe.
///
/// # Safety
/// `cfg` and `out` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sqsem_snr_improvement(
    cfg: *const SqsemSemConfig,
    out: *mut f64,
) -> SqsemStatus {
    guard(|| {
        let cfg = in_ref(cfg, "cfg")?.to_core()?;
        *out_ref(out, "out")? = sem::snr_improvement(&cfg);
        Ok(())
    })
}

/// Signal and noise components at the sideband.
///
/// # Safety
/// `cfg` and `out` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sqsem_noise_psd_at_sideband(
    cfg: *const SqsemSemConfig,
    out: *mut SqsemPsdComponents,
) -> SqsemStatus {
    guard(|| {
        let cfg = in_ref(cfg, "cfg")?.to_core()?;
        let c = sem::noise_psd_at_sideband(&cfg);
        *out_ref(out, "out")? = SqsemPsdComponents {
            signal_peak: c.signal_peak,
            quantum_floor: c.quantum_floor,
            technical_band: c.technical_band,
        };
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Traces

/// Per-pulse photon-number source.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemPulseTrain {
    pub rep_rate: f64,
    pub photons_per_pulse: f64,
    pub fano: f64,
    pub duration: f64,
    pub seed: u64,
}

/// Low-pass relative-intensity noise.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemTechnicalNoise {
    pub rho_t: f64,
    pub corner_freq: f64,
}

/// Detector; `electronic_noise_psd` is one-sided, in (photons per pulse)²/Hz.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemDetector {
    pub efficiency: f64,
    pub electronic_noise_psd: f64,
    pub bandwidth: f64,
}

impl From<SqsemDetector> for sim::DetectorConfig {
    fn from(d: SqsemDetector) -> Self {
        Self {
            efficiency: d.efficiency,
            electronic_noise_psd: d.electronic_noise_psd,
            bandwidth: d.bandwidth,
        }
    }
}

/// Opaque simulated photocurrent trace.
pub struct SqsemTrace(sim::TraceRecord);

/// Simulates a detected probe trace. On success `*out` receives a handle
/// to release with `sqsem_trace_free`.
///
/// # Safety
/// All pointers must be NULL or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_simulate(
    pulse_train: *const SqsemPulseTrain,
    gain: *const SqsemSemConfig,
    technical_noise: *const SqsemTechnicalNoise,
    detector: *const SqsemDetector,
    out: *mut *mut SqsemTrace,
) -> SqsemStatus {
    guard(|| {
        let pt = in_ref(pulse_train, "pulse_train")?;
        let gain = in_ref(gain, "gain")?.to_core()?;
        let tn = in_ref(technical_noise, "technical_noise")?;
        let det = (*in_ref(detector, "detector")?).into();
        let out = out_ref(out, "out")?;
        let trace = sim::simulate_trace(
            &sim::PulseTrainConfig {
                rep_rate: pt.rep_rate,
                photons_per_pulse: pt.photons_per_pulse,
                fano: pt.fano,
                duration: pt.duration,
                seed: pt.seed,
            },
            &gain,
            &sim::TechnicalNoiseConfig {
                rho_t: tn.rho_t,
                corner_freq: tn.corner_freq,
            },
            &det,
        )?;
        *out = Box::into_raw(Box::new(SqsemTrace(trace)));
        Ok(())
    })
}

/// Electronic-noise-only trace (beam blocked).
///
/// # Safety
/// `detector` must be NULL or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_simulate_electronic(
    sample_rate: f64,
    duration: f64,
    detector: *const SqsemDetector,
    seed: u64,
    out: *mut *mut SqsemTrace,
) -> SqsemStatus {
    guard(|| {
        let det = (*in_ref(detector, "detector")?).into();
        let out = out_ref(out, "out")?;
        let trace = sim::simulate_electronic_trace(sample_rate, duration, &det, seed)?;
        *out = Box::into_raw(Box::new(SqsemTrace(trace)));
        Ok(())
    })
}

/// Number of samples in a trace (0 for NULL).
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_len(trace: *const SqsemTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.samples.len())
}

/// Sample rate in Hz (0 for NULL).
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_sample_rate(trace: *const SqsemTrace) -> f64 {
    trace.as_ref().map_or(0.0, |t| t.0.sample_rate)
}

/// Borrowed pointer to the samples, valid while the handle lives (NULL for NULL).
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_samples(trace: *const SqsemTrace) -> *const f64 {
    trace.as_ref().map_or(ptr::null(), |t| t.0.samples.as_ptr())
}

/// Writes `<base>.bin` and `<base>.toml`.
///
/// # Safety
/// `trace` must be a live handle and `base` a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_write(
    trace: *const SqsemTrace,
    base: *const c_char,
) -> SqsemStatus {
    guard(|| {
        let trace = in_ref(trace, "trace")?;
        let base = c_str(base, "base")?;
        sim::write_binary(&trace.0, std::path::Path::new(base))?;
        Ok(())
    })
}

/// Releases a trace handle; NULL is ignored.
///
/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqsem_trace_free(trace: *mut SqsemTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{name} is not valid UTF-8")))
}

// ---------------------------------------------------------------------------
// Spectra

/// Opaque one-sided PSD estimate.
pub struct SqsemPsd(spectral::PsdEstimate);

/// Welch PSD of a trace. `window` is "hann", "rectangular",
/// "blackman-harris" or "flat-top".
///
/// # Safety
/// `trace` must be a live handle, `window` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_estimate(
    trace: *const SqsemTrace,
    rbw: f64,
    averages: usize,
    window: *const c_char,
    out: *mut *mut SqsemPsd,
) -> SqsemStatus {
    guard(|| {
        let trace = in_ref(trace, "trace")?;
        let window = c_str(window, "window")?;
        let out = out_ref(out, "out")?;
        let psd = spectral::estimate_psd(&trace.0, rbw, averages, window)?;
        *out = Box::into_raw(Box::new(SqsemPsd(psd)));
        Ok(())
    })
}

/// Number of frequency bins (0 for NULL).
///
/// # Safety
/// `psd` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_len(psd: *const SqsemPsd) -> usize {
    psd.as_ref().map_or(0, |p| p.0.len())
}

/// Resolution bandwidth in Hz (0 for NULL).
///
/// # Safety
/// `psd` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_rbw(psd: *const SqsemPsd) -> f64 {
    psd.as_ref().map_or(0.0, |p| p.0.rbw)
}

/// Copies frequencies and values into caller buffers of length `len`,
/// which must equal `sqsem_psd_len`. Either buffer may be NULL to skip it.
///
/// # Safety
/// Non-NULL buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_copy(
    psd: *const SqsemPsd,
    freqs: *mut f64,
    values: *mut f64,
    len: usize,
) -> SqsemStatus {
    guard(|| {
        let psd = &in_ref(psd, "psd")?.0;
        if len != psd.len() {
            return Err(Failure::invalid(format!(
                "buffer length {len} != PSD length {}",
                psd.len()
            )));
        }
        if !freqs.is_null() {
            ptr::copy_nonoverlapping(psd.freqs.as_ptr(), freqs, len);
        }
        if !values.is_null() {
            ptr::copy_nonoverlapping(psd.values.as_ptr(), values, len);
        }
        Ok(())
    })
}

/// Line power above the local floor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemPeak {
    pub frequency: f64,
    pub peak_power: f64,
    pub local_floor: f64,
    pub floor_std_error: f64,
    pub peak_std_error: f64,
}

/// Integrated power at `f0`: `half_width` bins either side, floor from
/// `flank` bins beyond a `guard`-bin exclusion.
///
/// # Safety
/// `psd` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_extract_peak(
    psd: *const SqsemPsd,
    f0: f64,
    half_width: usize,
    guard_bins: usize,
    flank: usize,
    out: *mut SqsemPeak,
) -> SqsemStatus {
    guard(|| {
        let psd = &in_ref(psd, "psd")?.0;
        let out = out_ref(out, "out")?;
        let p = spectral::extract_peak(
            psd,
            f0,
            &PeakOptions {
                half_width,
                guard: guard_bins,
                flank,
            },
        )?;
        *out = SqsemPeak {
            frequency: p.frequency,
            peak_power: p.peak_power,
            local_floor: p.local_floor,
            floor_std_error: p.floor_std_error,
            peak_std_error: p.peak_std_error,
        };
        Ok(())
    })
}

/// Median ratio `(test − electronic)/(reference − electronic)` over `[lo, hi]` Hz.
///
/// # Safety
/// PSD handles must be live; `value` and `std_error` writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_estimate_fano(
    test: *const SqsemPsd,
    reference: *const SqsemPsd,
    electronic: *const SqsemPsd,
    lo: f64,
    hi: f64,
    value: *mut f64,
    std_error: *mut f64,
) -> SqsemStatus {
    guard(|| {
        let t = &in_ref(test, "test")?.0;
        let r = &in_ref(reference, "reference")?.0;
        let e = &in_ref(electronic, "electronic")?.0;
        let value = out_ref(value, "value")?;
        let std_error = out_ref(std_error, "std_error")?;
        let f = spectral::estimate_fano(t, r, e, (lo, hi))?;
        *value = f.value;
        *std_error = f.std_error;
        Ok(())
    })
}

/// Writes the PSD as CSV (`freq_hz,psd,rbw_hz,averages,window`).
///
/// # Safety
/// `psd` must be a live handle and `path` a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_write_csv(
    psd: *const SqsemPsd,
    path: *const c_char,
) -> SqsemStatus {
    guard(|| {
        let psd = &in_ref(psd, "psd")?.0;
        let path = c_str(path, "path")?;
        psd.write_csv(std::path::Path::new(path))?;
        Ok(())
    })
}

/// Releases a PSD handle; NULL is ignored.
///
/// # Safety
/// `psd` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqsem_psd_free(psd: *mut SqsemPsd) {
    if !psd.is_null() {
        drop(Box::from_raw(psd));
    }
}

// ---------------------------------------------------------------------------
// Fits

/// Fitted parameters and diagnostics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqsemFitOutput {
    pub beta: f64,
    pub chi: f64,
    pub eta: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&fit::FitResult> for SqsemFitOutput {
    fn from(r: &fit::FitResult) -> Self {
        Self {
            beta: r.param("beta"),
            chi: r.param("chi"),
            eta: r.param("eta"),
            residual_norm: r.residual_norm,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

unsafe fn dataset(
    x: *const f64,
    y_amp: *const f64,
    y_deamp: *const f64,
    y_err: *const f64,
    n: usize,
) -> Result<fit::CurveDataset, Failure> {
    let x = slice(x, n, "x")?.to_vec();
    let opt = |p: *const f64| (!p.is_null()).then(|| std::slice::from_raw_parts(p, n).to_vec());
    Ok(fit::CurveDataset::from_unsorted(
        x,
        opt(y_amp),
        opt(y_deamp),
        opt(y_err),
    )?)
}

fn finish_fit(result: fit::FitResult, out: &mut SqsemFitOutput) -> Result<(), Failure> {
    *out = (&result).into();
    result.ensure_converged()?;
    Ok(())
}

/// Joint fit of the amplification (`y_amp`) and deamplification (`y_deamp`)
/// gain curves. Either y array and `y_err` may be NULL. Pass NaN as
/// `fixed_eta` to fit the efficiency too. On non-convergence `*out` is still
/// filled and `SQSEM_STATUS_NON_CONVERGENCE` is returned.
///
/// # Safety
/// Non-NULL arrays must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_fit_amplification(
    x: *const f64,
    y_amp: *const f64,
    y_deamp: *const f64,
    y_err: *const f64,
    n: usize,
    init_beta: f64,
    init_chi: f64,
    fixed_eta: f64,
    out: *mut SqsemFitOutput,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let data = dataset(x, y_amp, y_deamp, y_err, n)?;
        let init = FitInit {
            beta: init_beta,
            chi: init_chi,
            ..FitInit::default()
        };
        let opts = AmplificationFitOptions {
            fixed_eta: (!fixed_eta.is_nan()).then_some(fixed_eta),
            ..Default::default()
        };
        finish_fit(fit::fit_amplification(&data, &init, &opts)?, out)
    })
}

/// Fit of the Fano-factor curve against pump power with `(beta, chi)` fixed;
/// only the efficiency is fitted.
///
/// # Safety
/// Non-NULL arrays must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqsem_fit_fano_fixed_shape(
    x: *const f64,
    fano_amp: *const f64,
    fano_deamp: *const f64,
    y_err: *const f64,
    n: usize,
    beta: f64,
    chi: f64,
    out: *mut SqsemFitOutput,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let data = dataset(x, fano_amp, fano_deamp, y_err, n)?;
        let result = fit::fit_fano_curve(
            &data,
            Some(FixedShape { beta, chi }),
            &FanoFitOptions::default(),
        )?;
        finish_fit(result, out)
    })
}

/// Pump power at which the unit-efficiency deamplification equals `g_meas`.
///
/// # Safety
/// `out` must be NULL or a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn sqsem_invert_deamplification(
    g_meas: f64,
    beta: f64,
    chi: f64,
    out: *mut f64,
) -> SqsemStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = fit::invert_deamplification(g_meas, beta, chi)?;
        Ok(())
    })
}
