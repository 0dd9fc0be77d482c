//! Spectrum-analyzer emulation.
//!
//! PSDs are estimated with Welch's method: mean-removed, windowed segments
//! are Fourier transformed and their periodograms averaged. Conventions:
//!
//! * one-sided, power per Hz, DC bin dropped, so the grid is `k f_s / N` for
//!   `k = 1 ..= N/2`;
//! * normalised by `f_s Σ w²`, so white noise of variance `σ²` reads
//!   `2σ²/f_s` for any window;
//! * the resolution bandwidth is the window's equivalent noise bandwidth,
//!   `RBW = ENBW · f_s / N`, which fixes the segment length `N`;
//! * video bandwidth is emulated by the number of averaged segments,
//!   `≈ RBW / VBW`.
//!
//! Spectral lines are read as band-integrated power (sum of bins × bin
//! width), which is independent of the window normalisation.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::median;
use crate::sim::TraceRecord;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("unknown window {0:?} (expected rectangular, hann, blackman-harris or flat-top)")]
    UnknownWindow(String),
    #[error("trace of {len} samples is too short for {averages} averages of {segment} samples (at most 50% overlap)")]
    TraceTooShort {
        len: usize,
        segment: usize,
        averages: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency {0} Hz is outside the PSD grid")]
    OutOfRange(f64),
    #[error("floor sidebands overlap the peak guard band")]
    GuardOverlap,
    #[error("PSD estimates are on different frequency grids")]
    GridMismatch,
    #[error("reference minus electronic noise is not positive at {freq} Hz")]
    InsufficientClearance { freq: f64 },
    #[error("analysis band [{0}, {1}] Hz contains no bins")]
    EmptyBand(f64, f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    Hann,
    BlackmanHarris,
    FlatTop,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::BlackmanHarris => "blackman-harris",
            Window::FlatTop => "flat-top",
        }
    }

    fn cosine_terms(self) -> &'static [f64] {
        match self {
            Window::Rectangular => &[1.0],
            Window::Hann => &[0.5, 0.5],
            Window::BlackmanHarris => &[0.35875, 0.48829, 0.14128, 0.01168],
            Window::FlatTop => &[
                0.215_578_95,
                0.416_631_58,
                0.277_263_158,
                0.083_578_947,
                0.006_947_368,
            ],
        }
    }

    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let terms = self.cosine_terms();
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / n as f64;
                terms
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (if k % 2 == 0 { *a } else { -*a }) * (k as f64 * x).cos())
                    .sum()
            })
            .collect()
    }

    /// Equivalent noise bandwidth in bins for a segment of `n` samples.
    pub fn enbw_bins(self, n: usize) -> f64 {
        let w = self.coefficients(n);
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        n as f64 * s2 / (s1 * s1)
    }

    /// Large-`n` equivalent noise bandwidth in bins.
    pub fn nominal_enbw_bins(self) -> f64 {
        let t = self.cosine_terms();
        let s2 = t[0] * t[0] + 0.5 * t[1..].iter().map(|a| a * a).sum::<f64>();
        s2 / (t[0] * t[0])
    }
}

impl FromStr for Window {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            "blackman-harris" => Ok(Window::BlackmanHarris),
            "flat-top" | "flattop" => Ok(Window::FlatTop),
            _ => Err(SpectralError::UnknownWindow(s.to_string())),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An averaged one-sided PSD, the analogue of a spectrum-analyzer trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Hz, strictly increasing, DC excluded.
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub values: Vec<f64>,
    /// Resolution bandwidth in Hz (window ENBW / segment duration).
    pub rbw: f64,
    /// Number of averaged segments.
    pub vbw_averages: usize,
    pub window: Window,
    pub sample_rate: f64,
    pub segment_len: usize,
    /// Samples between segment starts.
    pub hop: usize,
}

impl PsdEstimate {
    pub const CONVENTION: &'static str = "one-sided, per Hz, window-ENBW normalised";

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.segment_len as f64
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Index of the bin nearest to `f`.
    pub fn bin_index(&self, f: f64) -> Result<usize, SpectralError> {
        let df = self.bin_width();
        let (lo, hi) = (self.freqs[0], *self.freqs.last().expect("non-empty grid"));
        if !(f >= lo - 0.5 * df && f <= hi + 0.5 * df) {
            return Err(SpectralError::OutOfRange(f));
        }
        let k = (f / df).round() as usize;
        Ok(k.clamp(1, self.freqs.len()) - 1)
    }

    /// Indices of bins whose centre lies in `[lo, hi]`.
    pub fn band_indices(&self, lo: f64, hi: f64) -> Result<std::ops::Range<usize>, SpectralError> {
        let start = self.freqs.partition_point(|f| *f < lo);
        let end = self.freqs.partition_point(|f| *f <= hi);
        if start >= end {
            return Err(SpectralError::EmptyBand(lo, hi));
        }
        Ok(start..end)
    }

    /// Welch's equivalent number of independent averages, accounting for
    /// segment overlap.
    pub fn effective_averages(&self) -> f64 {
        let k = self.vbw_averages;
        if k <= 1 {
            return k as f64;
        }
        let w = self.window.coefficients(self.segment_len);
        let s2: f64 = w.iter().map(|x| x * x).sum();
        let mut corr = 0.0;
        for j in 1..k {
            let shift = j * self.hop;
            if shift >= self.segment_len {
                break;
            }
            let overlap: f64 = w[..self.segment_len - shift]
                .iter()
                .zip(&w[shift..])
                .map(|(a, b)| a * b)
                .sum();
            corr += (1.0 - j as f64 / k as f64) * (overlap / s2).powi(2);
        }
        k as f64 / (1.0 + 2.0 * corr)
    }

    /// Relative standard error of a single bin.
    pub fn relative_bin_error(&self) -> f64 {
        1.0 / self.effective_averages().sqrt()
    }

    /// Power correlation `|c_d|²` between bins `d` apart for white noise.
    pub fn bin_correlation(&self, d: usize) -> f64 {
        if d == 0 {
            return 1.0;
        }
        let n = self.segment_len;
        let w = self.window.coefficients(n);
        let s2: f64 = w.iter().map(|x| x * x).sum();
        let (mut re, mut im) = (0.0, 0.0);
        for (i, x) in w.iter().enumerate() {
            let ph = -2.0 * PI * (d * i % n) as f64 / n as f64;
            re += x * x * ph.cos();
            im += x * x * ph.sin();
        }
        (re * re + im * im) / (s2 * s2)
    }

    /// Smallest bin spacing whose power correlation is below 5%.
    pub fn decorrelation_stride(&self) -> usize {
        (1..16)
            .find(|&d| self.bin_correlation(d) < 0.05)
            .unwrap_or(16)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SpectralError> {
        let io = |source| SpectralError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "freq_hz,psd,rbw_hz,averages,window").map_err(io)?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            writeln!(
                w,
                "{},{},{},{},{}",
                f, v, self.rbw, self.vbw_averages, self.window
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// `10 log10(value / reference)`.
pub fn to_db(value: f64, reference: f64) -> f64 {
    10.0 * (value / reference).log10()
}

/// Segment length realising `rbw` with `window` at `sample_rate`.
pub fn segment_length_for_rbw(rbw: f64, sample_rate: f64, window: Window) -> usize {
    (window.nominal_enbw_bins() * sample_rate / rbw)
        .round()
        .max(2.0) as usize
}

/// Number of averages emulating a video bandwidth `vbw` at resolution `rbw`.
pub fn averages_for_vbw(rbw: f64, vbw: f64) -> usize {
    (rbw / vbw).round().max(1.0) as usize
}

/// Welch PSD of a trace. `window` is parsed by name.
pub fn estimate_psd(
    trace: &TraceRecord,
    rbw: f64,
    averages: usize,
    window: &str,
) -> Result<PsdEstimate, SpectralError> {
    let window: Window = window.parse()?;
    estimate_psd_samples(&trace.samples, trace.sample_rate, rbw, averages, window)
}

/// Welch PSD of raw samples.
///
/// Segments are spaced evenly across the record with at most 50% overlap;
/// when the record is longer than needed they are contiguous and the tail is
/// unused.
pub fn estimate_psd_samples(
    samples: &[f64],
    sample_rate: f64,
    rbw: f64,
    averages: usize,
    window: Window,
) -> Result<PsdEstimate, SpectralError> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "sample_rate = {sample_rate}"
        )));
    }
    if !(rbw.is_finite() && rbw > 0.0) {
        return Err(SpectralError::InvalidParameter(format!("rbw = {rbw}")));
    }
    if averages == 0 {
        return Err(SpectralError::InvalidParameter(
            "averages must be >= 1".into(),
        ));
    }
    let len = samples.len();
    let n = segment_length_for_rbw(rbw, sample_rate, window);
    let too_short = SpectralError::TraceTooShort {
        len,
        segment: n,
        averages,
    };
    if n > len {
        return Err(too_short);
    }
    let hop = if averages == 1 {
        n
    } else {
        ((len - n) / (averages - 1)).min(n)
    };
    if averages > 1 && 2 * hop < n {
        return Err(too_short);
    }

    let w = window.coefficients(n);
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;

    let periodograms: Vec<Vec<f64>> = (0..averages)
        .into_par_iter()
        .map(|s| {
            let seg = &samples[s * hop..s * hop + n];
            let mean = seg.iter().sum::<f64>() / n as f64;
            let mut buf: Vec<Complex64> = seg
                .iter()
                .zip(&w)
                .map(|(x, wi)| Complex64::new((x - mean) * wi, 0.0))
                .collect();
            fft.process(&mut buf);
            (1..=half).map(|k| buf[k].norm_sqr()).collect()
        })
        .collect();

    // Fixed reduction order keeps the result independent of thread scheduling.
    let mut acc = vec![0.0; half];
    for p in &periodograms {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let scale = 2.0 / (sample_rate * s2 * averages as f64);
    let mut values: Vec<f64> = acc.iter().map(|a| a * scale).collect();
    if n.is_multiple_of(2) {
        // The Nyquist bin has no mirror image.
        if let Some(last) = values.last_mut() {
            *last *= 0.5;
        }
    }
    let df = sample_rate / n as f64;
    let freqs = (1..=half).map(|k| k as f64 * df).collect();

    Ok(PsdEstimate {
        freqs,
        values,
        rbw: window.enbw_bins(n) * df,
        vbw_averages: averages,
        window,
        sample_rate,
        segment_len: n,
        hop,
    })
}

/// Bin counts used by [`extract_peak`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Bins integrated on each side of the centre bin.
    pub half_width: usize,
    /// Bins on each side of the centre excluded from the floor estimate;
    /// must exceed `half_width`.
    pub guard: usize,
    /// Bins on each side, beyond the guard, used for the floor.
    pub flank: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            half_width: 3,
            guard: 8,
            flank: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMeasurement {
    /// Centre-bin frequency, Hz.
    pub frequency: f64,
    /// Integrated power above the local floor.
    pub peak_power: f64,
    /// Local floor density.
    pub local_floor: f64,
    /// Standard error of `local_floor`.
    pub floor_std_error: f64,
    /// Standard error of `peak_power` under the noise-only hypothesis.
    pub peak_std_error: f64,
    /// Width of the integration band, Hz.
    pub integration_width: f64,
}

/// Line power at `f0` above the surrounding floor.
///
/// The floor is the median of the flanking bins, rescaled to a mean with the
/// Wilson–Hilferty approximation for the averaged-periodogram distribution.
pub fn extract_peak(
    psd: &PsdEstimate,
    f0: f64,
    opts: &PeakOptions,
) -> Result<PeakMeasurement, SpectralError> {
    if opts.guard <= opts.half_width || opts.flank == 0 {
        return Err(SpectralError::GuardOverlap);
    }
    let k0 = psd.bin_index(f0)?;
    let len = psd.len();
    if k0 < opts.half_width || k0 + opts.half_width >= len {
        return Err(SpectralError::OutOfRange(f0));
    }
    let band = k0 - opts.half_width..=k0 + opts.half_width;
    let band_bins = 2 * opts.half_width + 1;

    let left = k0.saturating_sub(opts.guard + opts.flank)..k0.saturating_sub(opts.guard);
    let right = (k0 + opts.guard + 1).min(len)..(k0 + opts.guard + opts.flank + 1).min(len);
    let flank_values: Vec<f64> = left.chain(right).map(|k| psd.values[k]).collect();
    if flank_values.is_empty() {
        return Err(SpectralError::OutOfRange(f0));
    }

    let nu = 2.0 * psd.effective_averages();
    let median_to_mean = (1.0 - 2.0 / (9.0 * nu)).powi(-3);
    let local_floor = median(&flank_values) * median_to_mean;
    let independent_flank = flank_values.len() as f64 / psd.decorrelation_stride() as f64;
    let per_bin = local_floor * psd.relative_bin_error();
    let floor_std_error = 1.2533 * per_bin / independent_flank.sqrt();

    let df = psd.bin_width();
    let integrated: f64 = psd.values[band].iter().sum::<f64>() * df;
    let width = band_bins as f64 * df;
    let peak_power = integrated - local_floor * width;

    let mut corr_sum = 0.0;
    for i in 0..band_bins {
        for j in 0..band_bins {
            corr_sum += psd.bin_correlation(i.abs_diff(j));
        }
    }
    let noise_var = (per_bin * df).powi(2) * corr_sum + (floor_std_error * width).powi(2);

    Ok(PeakMeasurement {
        frequency: psd.freqs[k0],
        peak_power,
        local_floor,
        floor_std_error,
        peak_std_error: noise_var.sqrt(),
        integration_width: width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Analysis band `[lo, hi]` in Hz.
    pub band: (f64, f64),
    pub bins: usize,
}

fn same_grid(a: &PsdEstimate, b: &PsdEstimate) -> bool {
    a.len() == b.len() && (a.bin_width() - b.bin_width()).abs() <= 1e-12 * a.bin_width()
}

/// Fano factor of `test` relative to a power-matched coherent `reference`:
/// the median over `band` of `(test − electronic) / (reference − electronic)`.
pub fn estimate_fano(
    test: &PsdEstimate,
    reference: &PsdEstimate,
    electronic: &PsdEstimate,
    band: (f64, f64),
) -> Result<FanoEstimate, SpectralError> {
    if !same_grid(test, reference) || !same_grid(test, electronic) {
        return Err(SpectralError::GridMismatch);
    }
    let idx = test.band_indices(band.0, band.1)?;
    let mut ratios = Vec::with_capacity(idx.len());
    for k in idx {
        let den = reference.values[k] - electronic.values[k];
        if den <= 0.0 {
            return Err(SpectralError::InsufficientClearance {
                freq: test.freqs[k],
            });
        }
        ratios.push((test.values[k] - electronic.values[k]) / den);
    }
    let value = median(&ratios);
    if value <= 0.0 {
        return Err(SpectralError::InvalidParameter(format!(
            "non-positive Fano estimate {value} in band {band:?}"
        )));
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let independent = n / test.decorrelation_stride() as f64;
    Ok(FanoEstimate {
        value,
        std_error: 1.2533 * sd / independent.max(1.0).sqrt(),
        band,
        bins: ratios.len(),
    })
}

/// Least-squares line through PSD values over a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorSlope {
    /// PSD units per Hz.
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
}

/// Regression of the PSD against frequency over `[lo, hi]`, using every
/// `decorrelation_stride`-th bin so residuals are close to independent.
pub fn floor_slope(psd: &PsdEstimate, lo: f64, hi: f64) -> Result<FloorSlope, SpectralError> {
    let idx = psd.band_indices(lo, hi)?;
    let stride = psd.decorrelation_stride();
    let pts: Vec<(f64, f64)> = idx
        .step_by(stride)
        .map(|k| (psd.freqs[k], psd.values[k]))
        .collect();
    if pts.len() < 3 {
        return Err(SpectralError::EmptyBand(lo, hi));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(FloorSlope {
        slope,
        slope_std_error: (rss / (n - 2.0) / sxx).sqrt(),
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn window_parsing() {
        assert_eq!("Hann".parse::<Window>().unwrap(), Window::Hann);
        assert_eq!("flat_top".parse::<Window>().unwrap(), Window::FlatTop);
        assert!(matches!(
            "kaiser".parse::<Window>(),
            Err(SpectralError::UnknownWindow(_))
        ));
    }

    #[test]
    fn enbw_values() {
        assert!((Window::Rectangular.enbw_bins(1024) - 1.0).abs() < 1e-12);
        assert!((Window::Hann.enbw_bins(1024) - 1.5).abs() < 1e-12);
        assert!((Window::Hann.nominal_enbw_bins() - 1.5).abs() < 1e-12);
        assert!((Window::BlackmanHarris.nominal_enbw_bins() - 2.0044).abs() < 1e-3);
    }

    #[test]
    fn default_analyser_settings() {
        let n = segment_length_for_rbw(1.0e3, 8.0e7, Window::Hann);
        assert_eq!(n, 120_000);
        assert_eq!(
            segment_length_for_rbw(1.0e3, 8.0e7, Window::Rectangular),
            80_000
        );
        assert_eq!(averages_for_vbw(1.0e3, 10.0), 100);
    }

    #[test]
    fn white_noise_is_flat_at_two_sigma_squared() {
        let sigma = 1.7;
        let x = white(1 << 18, sigma, 3);
        let psd = estimate_psd_samples(&x, 1.0, 1.5 / 1024.0, 200, Window::Hann).unwrap();
        let mean = psd.values.iter().sum::<f64>() / psd.len() as f64;
        let expected = 2.0 * sigma * sigma;
        // Mean over ~512 bins, each with relative error 1/sqrt(K_eff).
        let se = expected * psd.relative_bin_error() / (psd.len() as f64 / 2.0).sqrt();
        assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn parseval_single_rectangular_segment() {
        let x: Vec<f64> = white(4096, 2.0, 5).iter().map(|v| v + 10.0).collect();
        let psd = estimate_psd_samples(&x, 3.0, 3.0 / 4096.0, 1, Window::Rectangular).unwrap();
        let integrated: f64 = psd.values.iter().sum::<f64>() * psd.bin_width();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
        assert!((integrated - var).abs() < 1e-6 * var);
    }

    #[test]
    fn tone_power_is_half_amplitude_squared() {
        let fs = 8.0e7;
        let a = 3.0;
        for f0 in [4.0e6, 4.0e6 + 217.0] {
            let x: Vec<f64> = (0..400_000)
                .map(|i| a * (2.0 * PI * f0 * i as f64 / fs + 0.3).cos())
                .collect();
            let psd = estimate_psd_samples(&x, fs, 1.0e3, 3, Window::Hann).unwrap();
            let peak = extract_peak(&psd, f0, &PeakOptions::default()).unwrap();
            assert!(
                (peak.peak_power / (a * a / 2.0) - 1.0).abs() < 0.01,
                "{}",
                peak.peak_power
            );
        }
    }

    #[test]
    fn no_tone_gives_null_peak() {
        let fs = 1.0e6;
        let x = white(1 << 18, 1.0, 8);
        let psd = estimate_psd_samples(&x, fs, 1.5 * fs / 4096.0, 100, Window::Hann).unwrap();
        let peak = extract_peak(&psd, 1.0e5, &PeakOptions::default()).unwrap();
        assert!(peak.peak_power.abs() < 3.0 * peak.peak_std_error);
    }

    #[test]
    fn peak_errors() {
        let x = white(1 << 14, 1.0, 1);
        let psd = estimate_psd_samples(&x, 1.0, 1.5 / 512.0, 10, Window::Hann).unwrap();
        assert!(matches!(
            extract_peak(&psd, 0.7, &PeakOptions::default()),
            Err(SpectralError::OutOfRange(_))
        ));
        let bad = PeakOptions {
            half_width: 3,
            guard: 2,
            flank: 10,
        };
        assert!(matches!(
            extract_peak(&psd, 0.2, &bad),
            Err(SpectralError::GuardOverlap)
        ));
    }

    #[test]
    fn too_short_traces_are_rejected() {
        let x = white(1000, 1.0, 1);
        assert!(matches!(
            estimate_psd_samples(&x, 1.0, 1.5 / 2000.0, 1, Window::Hann),
            Err(SpectralError::TraceTooShort { .. })
        ));
        assert!(matches!(
            estimate_psd_samples(&x, 1.0, 1.5 / 500.0, 10, Window::Hann),
            Err(SpectralError::TraceTooShort { .. })
        ));
        assert!(estimate_psd_samples(&x, 1.0, 1.5 / 500.0, 3, Window::Hann).is_ok());
    }

    #[test]
    fn fano_of_identical_spectra_is_one() {
        let x = white(1 << 16, 1.0, 2);
        let psd = estimate_psd_samples(&x, 1.0, 1.5 / 1024.0, 50, Window::Hann).unwrap();
        let zero = PsdEstimate {
            values: vec![0.0; psd.len()],
            ..psd.clone()
        };
        let f = estimate_fano(&psd, &psd, &zero, (0.05, 0.45)).unwrap();
        assert_eq!(f.value, 1.0);
        assert_eq!(f.std_error, 0.0);
    }

    #[test]
    fn fano_needs_shot_noise_clearance() {
        let x = white(1 << 14, 1.0, 2);
        let psd = estimate_psd_samples(&x, 1.0, 1.5 / 256.0, 50, Window::Hann).unwrap();
        let loud = PsdEstimate {
            values: psd.values.iter().map(|v| v * 2.0).collect(),
            ..psd.clone()
        };
        assert!(matches!(
            estimate_fano(&psd, &psd, &loud, (0.1, 0.4)),
            Err(SpectralError::InsufficientClearance { .. })
        ));
    }

    #[test]
    fn hann_bin_correlation() {
        let x = white(4096, 1.0, 2);
        let psd = estimate_psd_samples(&x, 1.0, 1.5 / 1024.0, 1, Window::Hann).unwrap();
        assert!((psd.bin_correlation(1) - 4.0 / 9.0).abs() < 1e-9);
        assert!((psd.bin_correlation(2) - 1.0 / 36.0).abs() < 1e-9);
        assert!(psd.bin_correlation(3) < 1e-20);
        assert_eq!(psd.decorrelation_stride(), 2);
    }

    #[test]
    fn overlap_reduces_effective_averages() {
        let x = white(1 << 16, 1.0, 2);
        let contiguous = estimate_psd_samples(&x, 1.0, 1.5 / 1024.0, 64, Window::Hann).unwrap();
        assert_eq!(contiguous.hop, 1024);
        assert!((contiguous.effective_averages() - 64.0).abs() < 1e-9);
        let half = estimate_psd_samples(&x, 1.0, 1.5 / 1024.0, 127, Window::Hann).unwrap();
        assert_eq!(half.hop, 512);
        // Hann at 50% overlap: correlation 1/6 between neighbours.
        let expected = 127.0 / (1.0 + 2.0 * (1.0 - 1.0 / 127.0) / 36.0);
        assert!((half.effective_averages() - expected).abs() < 1e-6);
    }

    #[test]
    fn doubling_averages_shrinks_scatter() {
        let x = white(1 << 20, 1.0, 4);
        let scatter = |k: usize| {
            let psd = estimate_psd_samples(&x, 1.0, 1.5 / 1024.0, k, Window::Hann).unwrap();
            let v: Vec<f64> = psd.values.iter().step_by(2).copied().collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt() / m
        };
        let ratio = scatter(100) / scatter(200);
        assert!((ratio - 2f64.sqrt()).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn psd_csv_header() {
        let x = white(4096, 1.0, 2);
        let psd = estimate_psd_samples(&x, 1.0, 1.5 / 256.0, 4, Window::Hann).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        psd.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("freq_hz,psd,rbw_hz,averages,window\n"));
        assert_eq!(text.lines().count(), psd.len() + 1);
        assert!(text.lines().nth(1).unwrap().ends_with(",4,hann"));
    }

    #[test]
    fn db_helper() {
        assert!((to_db(0.912, 1.0) + 0.4).abs() < 0.001);
        assert_eq!(to_db(10.0, 1.0), 10.0);
    }
}
