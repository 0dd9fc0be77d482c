/* C interface to the sqsem squeezed-light SEM toolkit. */

#ifndef SQSEM_H
#define SQSEM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Result of a library call.
typedef enum SqsemStatus {
  SQSEM_STATUS_OK = 0,
  SQSEM_STATUS_NULL_POINTER = 1,
  SQSEM_STATUS_INVALID_ARGUMENT = 2,
  SQSEM_STATUS_OUT_OF_RANGE = 3,
  SQSEM_STATUS_NON_CONVERGENCE = 4,
  SQSEM_STATUS_IO = 5,
  SQSEM_STATUS_PANIC = 6,
} SqsemStatus;

// Opaque one-sided PSD estimate.
typedef struct SqsemPsd SqsemPsd;

// Opaque simulated photocurrent trace.
typedef struct SqsemTrace SqsemTrace;

// Photon-number mean, variance and Fano factor.
typedef struct SqsemMoments {
  double mean;
  double variance;
  double fano;
} SqsemMoments;

// Amplifier parameters; the total efficiency is `eta_p * eta_d`.
typedef struct SqsemOpaConfig {
  double beta;
  double chi;
  double eta_p;
  double eta_d;
} SqsemOpaConfig;

// Modulated SEM measurement. `omega0` is angular (rad/s).
typedef struct SqsemSemConfig {
  double g0;
  double omega0;
  double p0;
  double kappa;
  double fano;
  double rho_t;
} SqsemSemConfig;

// Two-sided signal weight and noise densities at the modulation sideband.
typedef struct SqsemPsdComponents {
  double signal_peak;
  double quantum_floor;
  double technical_band;
} SqsemPsdComponents;

// Per-pulse photon-number source.
typedef struct SqsemPulseTrain {
  double rep_rate;
  double photons_per_pulse;
  double fano;
  double duration;
  uint64_t seed;
} SqsemPulseTrain;

// Low-pass relative-intensity noise.
typedef struct SqsemTechnicalNoise {
  double rho_t;
  double corner_freq;
} SqsemTechnicalNoise;

// Detector; `electronic_noise_psd` is one-sided, in (photons per pulse)²/Hz.
typedef struct SqsemDetector {
  double efficiency;
  double electronic_noise_psd;
  double bandwidth;
} SqsemDetector;

// Line power above the local floor.
typedef struct SqsemPeak {
  double frequency;
  double peak_power;
  double local_floor;
  double floor_std_error;
  double peak_std_error;
} SqsemPeak;

// Fitted parameters and diagnostics.
typedef struct SqsemFitOutput {
  double beta;
  double chi;
  double eta;
  double residual_norm;
  uintptr_t iterations;
  bool converged;
} SqsemFitOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL if none.
// The pointer stays valid until the next failing call on the same thread.
const char *sqsem_last_error(void);

// Library version as a static NUL-terminated string.
const char *sqsem_version(void);

// Exact photon-number moments of the displaced squeezed state `S(r) D(α)|0⟩`.
//
// # Safety
// `out` must be NULL or point to writable memory for one `SqsemMoments`.
enum SqsemStatus sqsem_squeezed_moments(double alpha_mag,
                                        double phase,
                                        double r,
                                        struct SqsemMoments *out);

// Moments from the truncated number-basis distribution; fails with
// `SQSEM_STATUS_OUT_OF_RANGE` when the truncation tail is too heavy.
//
// # Safety
// `out` must be NULL or point to writable memory for one `SqsemMoments`.
enum SqsemStatus sqsem_fock_oracle_moments(double alpha_mag,
                                           double phase,
                                           double r,
                                           uintptr_t cutoff,
                                           struct SqsemMoments *out);

// Large-amplitude Fano factor of one squeezing branch.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum SqsemStatus sqsem_single_mode_fano(double alpha_mag, double phase, double r, double *out);

// Seed power after the amplifier and lossy readout.
//
// # Safety
// `cfg` and `out` must be NULL or valid pointers.
enum SqsemStatus sqsem_opa_output_power(const struct SqsemOpaConfig *cfg,
                                        double p_in,
                                        double p_pump,
                                        bool amplify,
                                        double *out);

// Detected Fano factor at the amplifier output.
//
// # Safety
// `cfg` and `out` must be NULL or valid pointers.
enum SqsemStatus sqsem_opa_output_fano(const struct SqsemOpaConfig *cfg,
                                       double p_pump,
                                       bool amplify,
                                       double *out);

// Beam-splitter loss with transmittance `eta`.
//
// # Safety
// `out` must be NULL or point to writable memory for one `SqsemMoments`.
enum SqsemStatus sqsem_apply_loss(struct SqsemMoments m, double eta, struct SqsemMoments *out);

// SNR of the modulated measurement.
//
// # Safety
// `cfg` and `out` must be NULL or valid pointers.
enum SqsemStatus sqsem_snr(const struct SqsemSemConfig *cfg, double *out);

// SNR gain over a power-matched coherent probe.
//
// # Safety
// `cfg` and `out` must be NULL or valid pointers.
enum SqsemStatus sqsem_snr_improvement(const struct SqsemSemConfig *cfg, double *out);

// Signal and noise components at the sideband.
//
// # Safety
// `cfg` and `out` must be NULL or valid pointers.
enum SqsemStatus sqsem_noise_psd_at_sideband(const struct SqsemSemConfig *cfg,
                                             struct SqsemPsdComponents *out);

// Simulates a detected probe trace. On success `*out` receives a handle
// to release with `sqsem_trace_free`.
//
// # Safety
// All pointers must be NULL or valid; `out` must be writable.
enum SqsemStatus sqsem_trace_simulate(const struct SqsemPulseTrain *pulse_train,
                                      const struct SqsemSemConfig *gain,
                                      const struct SqsemTechnicalNoise *technical_noise,
                                      const struct SqsemDetector *detector,
                                      struct SqsemTrace **out);

// Electronic-noise-only trace (beam blocked).
//
// # Safety
// `detector` must be NULL or valid; `out` must be writable.
enum SqsemStatus sqsem_trace_simulate_electronic(double sample_rate,
                                                 double duration,
                                                 const struct SqsemDetector *detector,
                                                 uint64_t seed,
                                                 struct SqsemTrace **out);

// Number of samples in a trace (0 for NULL).
//
// # Safety
// `trace` must be NULL or a live handle.
uintptr_t sqsem_trace_len(const struct SqsemTrace *trace);

// Sample rate in Hz (0 for NULL).
//
// # Safety
// `trace` must be NULL or a live handle.
double sqsem_trace_sample_rate(const struct SqsemTrace *trace);

// Borrowed pointer to the samples, valid while the handle lives (NULL for NULL).
//
// # Safety
// `trace` must be NULL or a live handle.
const double *sqsem_trace_samples(const struct SqsemTrace *trace);

// Writes `<base>.bin` and `<base>.toml`.
//
// # Safety
// `trace` must be a live handle and `base` a NUL-terminated UTF-8 path.
enum SqsemStatus sqsem_trace_write(const struct SqsemTrace *trace, const char *base);

// Releases a trace handle; NULL is ignored.
//
// # Safety
// `trace` must be NULL or a handle not yet freed.
void sqsem_trace_free(struct SqsemTrace *trace);

// Welch PSD of a trace. `window` is "hann", "rectangular",
// "blackman-harris" or "flat-top".
//
// # Safety
// `trace` must be a live handle, `window` a NUL-terminated string and
// `out` writable.
enum SqsemStatus sqsem_psd_estimate(const struct SqsemTrace *trace,
                                    double rbw,
                                    uintptr_t averages,
                                    const char *window,
                                    struct SqsemPsd **out);

// Number of frequency bins (0 for NULL).
//
// # Safety
// `psd` must be NULL or a live handle.
uintptr_t sqsem_psd_len(const struct SqsemPsd *psd);

// Resolution bandwidth in Hz (0 for NULL).
//
// # Safety
// `psd` must be NULL or a live handle.
double sqsem_psd_rbw(const struct SqsemPsd *psd);

// Copies frequencies and values into caller buffers of length `len`,
// which must equal `sqsem_psd_len`. Either buffer may be NULL to skip it.
//
// # Safety
// Non-NULL buffers must hold `len` writable doubles.
enum SqsemStatus sqsem_psd_copy(const struct SqsemPsd *psd,
                                double *freqs,
                                double *values,
                                uintptr_t len);

// Integrated power at `f0`: `half_width` bins either side, floor from
// `flank` bins beyond a `guard`-bin exclusion.
//
// # Safety
// `psd` must be a live handle and `out` writable.
enum SqsemStatus sqsem_psd_extract_peak(const struct SqsemPsd *psd,
                                        double f0,
                                        uintptr_t half_width,
                                        uintptr_t guard_bins,
                                        uintptr_t flank,
                                        struct SqsemPeak *out);

// Median ratio `(test − electronic)/(reference − electronic)` over `[lo, hi]` Hz.
//
// # Safety
// PSD handles must be live; `value` and `std_error` writable.
enum SqsemStatus sqsem_psd_estimate_fano(const struct SqsemPsd *test,
                                         const struct SqsemPsd *reference,
                                         const struct SqsemPsd *electronic,
                                         double lo,
                                         double hi,
                                         double *value,
                                         double *std_error);

// Writes the PSD as CSV (`freq_hz,psd,rbw_hz,averages,window`).
//
// # Safety
// `psd` must be a live handle and `path` a NUL-terminated UTF-8 path.
enum SqsemStatus sqsem_psd_write_csv(const struct SqsemPsd *psd, const char *path);

// Releases a PSD handle; NULL is ignored.
//
// # Safety
// `psd` must be NULL or a handle not yet freed.
void sqsem_psd_free(struct SqsemPsd *psd);

// Joint fit of the amplification (`y_amp`) and deamplification (`y_deamp`)
// gain curves. Either y array and `y_err` may be NULL. Pass NaN as
// `fixed_eta` to fit the efficiency too. On non-convergence `*out` is still
// filled and `SQSEM_STATUS_NON_CONVERGENCE` is returned.
//
// # Safety
// Non-NULL arrays must hold `n` doubles; `out` must be writable.
enum SqsemStatus sqsem_fit_amplification(const double *x,
                                         const double *y_amp,
                                         const double *y_deamp,
                                         const double *y_err,
                                         uintptr_t n,
                                         double init_beta,
                                         double init_chi,
                                         double fixed_eta,
                                         struct SqsemFitOutput *out);

// Fit of the Fano-factor curve against pump power with `(beta, chi)` fixed;
// only the efficiency is fitted.
//
// # Safety
// Non-NULL arrays must hold `n` doubles; `out` must be writable.
enum SqsemStatus sqsem_fit_fano_fixed_shape(const double *x,
                                            const double *fano_amp,
                                            const double *fano_deamp,
                                            const double *y_err,
                                            uintptr_t n,
                                            double beta,
                                            double chi,
                                            struct SqsemFitOutput *out);

// Pump power at which the unit-efficiency deamplification equals `g_meas`.
//
// # Safety
// `out` must be NULL or a writable `double`.
enum SqsemStatus sqsem_invert_deamplification(double g_meas, double beta, double chi, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQSEM_H */
