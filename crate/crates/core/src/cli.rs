//! The `sqsem` command line: analytic predictions, Monte Carlo spectra and
//! curve fits.
//!
//! Exit codes: 0 success, 1 configuration or parse error, 2 numerical
//! non-convergence, 3 I/O error. Every flag can also be set through an
//! `SQSEM_`-prefixed environment variable (`SQSEM_CONFIG`, `SQSEM_OUT`,
//! `SQSEM_SEED`, `SQSEM_QUIET`, `SQSEM_SWEEP`, `SQSEM_MODE`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{derive_seed, ConfigError, ExperimentConfig, FitMode};
use crate::fit::{
    fit_amplification, fit_fano_curve, invert_deamplification, AmplificationFitOptions,
    CurveDataset, FanoAxis, FanoFitOptions, FitError, LmOptions,
};
use crate::quantum::{opa_output_fano, Branch};
use crate::sem::{snr, snr_improvement, PsdComponents};
use crate::sim::{export, simulate_electronic_trace, simulate_trace, SimError};
use crate::spectral::{
    estimate_fano, estimate_psd_samples, extract_peak, floor_slope, to_db, PeakOptions,
    PsdEstimate, SpectralError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Io { .. } => CliError::Io(e.to_string()),
            FitError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "sqsem",
    version,
    about = "Squeezed-light SEM: predictions, simulated spectra and curve fits"
)]
pub struct Cli {
    /// TOML experiment configuration (defaults are used when omitted).
    #[arg(long, global = true, env = "SQSEM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, env = "SQSEM_OUT")]
    pub out: Option<PathBuf>,
    /// Random seed (overrides seed).
    #[arg(long, global = true, env = "SQSEM_SEED")]
    pub seed: Option<u64>,
    /// Suppress progress and summary output.
    #[arg(long, global = true, env = "SQSEM_QUIET")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic SNR, ΔSNR, Fano factor and PSD components, optionally swept.
    Predict {
        /// Sweep one parameter: KEY=LO:HI:N with KEY one of pump_power, fano, rho_t, g0.
        #[arg(long, env = "SQSEM_SWEEP")]
        sweep: Option<Sweep>,
    },
    /// Monte Carlo traces of the squeezed and coherent probes and their spectra.
    Simulate,
    /// Fit the amplification or Fano-factor curve of a CSV dataset.
    Fit {
        /// CSV with columns x, y_amp, y_deamp[, y_err].
        dataset: PathBuf,
        /// amplification or fano (overrides fit.mode).
        #[arg(long, env = "SQSEM_MODE")]
        mode: Option<FitMode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    PumpPower,
    Fano,
    RhoT,
    G0,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::PumpPower => "pump_power",
            SweepKey::Fano => "fano",
            SweepKey::RhoT => "rho_t",
            SweepKey::G0 => "g0",
        }
    }
}

/// `KEY=LO:HI:N`, `N` evenly spaced values including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub key: SweepKey,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
                }
            })
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, range) = s
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=LO:HI:N, got {s:?}"))?;
        let key = match key.trim() {
            "pump_power" => SweepKey::PumpPower,
            "fano" => SweepKey::Fano,
            "rho_t" => SweepKey::RhoT,
            "g0" => SweepKey::G0,
            other => {
                return Err(format!(
                    "unknown sweep key {other:?} (expected pump_power, fano, rho_t or g0)"
                ))
            }
        };
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected LO:HI:N, got {range:?}"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: {v:?}"))
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| format!("not a count: {n:?}"))?;
        if !(lo.is_finite() && hi.is_finite()) || hi < lo || n == 0 || (n == 1 && hi != lo) {
            return Err(format!(
                "invalid sweep bounds {lo}:{hi}:{n} (need LO <= HI, N >= 1, N = 1 only if LO = HI)"
            ));
        }
        Ok(Sweep { key, lo, hi, n })
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    cfg.write_resolved(&dir)?;
    Ok((cfg, dir))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (mut cfg, dir) = resolve(cli)?;
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match &cli.command {
        Command::Predict { sweep } => cmd_predict(&cfg, sweep.as_ref(), &dir, say),
        Command::Simulate => cmd_simulate(&cfg, &dir, say),
        Command::Fit { dataset, mode } => {
            if let Some(mode) = mode {
                cfg.fit.mode = *mode;
                cfg.write_resolved(&dir)?;
            }
            cmd_fit(&cfg, dataset, &dir, say)
        }
    }
}

// ---------------------------------------------------------------------------
// predict

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionRow {
    pub value: f64,
    pub fano: f64,
    pub g0: f64,
    pub rho_t: f64,
    pub snr: f64,
    pub snr_coherent: f64,
    pub delta_snr: f64,
    pub delta_snr_db: f64,
    /// One-sided components of the detected photocurrent.
    pub components: PsdComponents,
}

/// Analytic predictions at each value of `sweep` (or at the operating point).
pub fn predict(
    cfg: &ExperimentConfig,
    sweep: Option<&Sweep>,
) -> Result<(SweepKey, Vec<PredictionRow>), CliError> {
    let sweep = sweep.copied().unwrap_or(Sweep {
        key: SweepKey::Fano,
        lo: cfg.sem.fano,
        hi: cfg.sem.fano,
        n: 1,
    });
    let opa = cfg.opa_config()?;
    let mut rows = Vec::with_capacity(sweep.n);
    for value in sweep.values() {
        let (mut g0, mut fano, mut rho_t) = (cfg.sem.g0, cfg.sem.fano, cfg.technical_noise.rho_t);
        match sweep.key {
            SweepKey::PumpPower => {
                if value < 0.0 {
                    return Err(CliError::Config(format!(
                        "pump_power must be >= 0, got {value}"
                    )));
                }
                fano = opa_output_fano(value, &opa, Branch::Deamplify);
            }
            SweepKey::Fano => fano = value,
            SweepKey::RhoT => rho_t = value,
            SweepKey::G0 => g0 = value,
        }
        let sem = cfg.sem_config(g0, fano, rho_t)?;
        let coherent = cfg.sem_config(g0, 1.0, rho_t)?;
        let delta = snr_improvement(&sem);
        rows.push(PredictionRow {
            value,
            fano,
            g0,
            rho_t,
            snr: snr(&sem),
            snr_coherent: snr(&coherent),
            delta_snr: delta,
            delta_snr_db: to_db(delta, 1.0),
            components: crate::sem::noise_psd_at_sideband(&sem).one_sided(),
        });
    }
    Ok((sweep.key, rows))
}

fn cmd_predict(
    cfg: &ExperimentConfig,
    sweep: Option<&Sweep>,
    dir: &Path,
    say: impl Fn(String),
) -> Result<(), CliError> {
    let (key, rows) = predict(cfg, sweep)?;
    let path = dir.join("predict.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_error(&path))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(
            w,
            "{},fano,g0,rho_t,snr,snr_coherent,delta_snr,delta_snr_db,signal_peak,quantum_floor,technical_band",
            key.name()
        )?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.value,
                r.fano,
                r.g0,
                r.rho_t,
                r.snr,
                r.snr_coherent,
                r.delta_snr,
                r.delta_snr_db,
                r.components.signal_peak,
                r.components.quantum_floor,
                r.components.technical_band
            )?;
        }
        w.flush()
    };
    write().map_err(io_error(&path))?;
    if let [r] = rows.as_slice() {
        say(format!(
            "F = {:.5}, G0 = {}, rho_t = {}: SNR = {:.6e} (coherent {:.6e}), dSNR = {:.5} ({:.3} dB)",
            r.fano, r.g0, r.rho_t, r.snr, r.snr_coherent, r.delta_snr, r.delta_snr_db
        ));
    } else {
        say(format!("{} rows swept over {}", rows.len(), key.name()));
    }
    say(format!("wrote {}", path.display()));
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

/// Names and per-run seed streams of the simulated traces.
pub const SIMULATED_SPECTRA: [&str; 5] = [
    "squeezed_sem",
    "coherent_sem",
    "squeezed_floor",
    "shot_floor",
    "electronic",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSummary {
    pub analytic_power: f64,
    pub estimated_power: f64,
    pub power_std_error: f64,
    pub relative_error: f64,
    /// Peak power over local floor density, Hz.
    pub analytic_peak_to_floor: f64,
    pub estimated_peak_to_floor: f64,
    pub peak_to_floor_std_error: f64,
    pub peak_to_floor_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub modulation_hz: f64,
    pub rbw_hz: f64,
    pub averages: usize,
    pub effective_averages: f64,
    pub photons_per_pulse: f64,
    pub detected_fano_configured: f64,
    pub detected_fano_estimated: f64,
    pub detected_fano_std_error: f64,
    pub source_fano_estimated: f64,
    pub floor_slope_per_hz: f64,
    pub floor_slope_std_error: f64,
    pub shot_floor_psd: f64,
    pub clipped_samples: u64,
    pub squeezed: PeakSummary,
    pub coherent: PeakSummary,
}

/// Simulates all traces of a run and returns their spectra in
/// [`SIMULATED_SPECTRA`] order. Traces are written to `trace_dir` if given.
pub fn simulate_spectra(
    cfg: &ExperimentConfig,
    trace_dir: Option<&Path>,
) -> Result<(Vec<PsdEstimate>, u64), CliError> {
    let det = cfg.detector();
    let tn = cfg.technical_noise();
    let window = cfg.window()?;
    let source_fano = cfg.source_fano(cfg.sem.fano)?;
    let psd = |samples: &[f64], fs: f64| {
        estimate_psd_samples(
            samples,
            fs,
            cfg.spectral.rbw_hz,
            cfg.spectral.averages,
            window,
        )
    };
    let mut spectra = Vec::with_capacity(SIMULATED_SPECTRA.len());
    let mut clipped = 0;
    let optical = [
        (source_fano, cfg.sem.g0, Some("squeezed")),
        (1.0, cfg.sem.g0, Some("reference")),
        (source_fano, 1.0, None),
        (1.0, 1.0, None),
    ];
    for (k, (fano, g0, trace_name)) in optical.into_iter().enumerate() {
        let pt = cfg.pulse_train(fano, derive_seed(cfg.seed, k as u64));
        let gain = cfg.sem_config(g0, cfg.sem.fano, cfg.technical_noise.rho_t)?;
        let trace = simulate_trace(&pt, &gain, &tn, &det)?;
        clipped += trace.metadata.clipped_samples;
        if let (Some(dir), Some(name)) = (trace_dir, trace_name) {
            export::write_binary(&trace, &dir.join(name))?;
        }
        spectra.push(psd(&trace.samples, trace.sample_rate)?);
    }
    let elec = simulate_electronic_trace(
        cfg.pulse_train.rep_rate_hz,
        cfg.pulse_train.duration_s,
        &det,
        derive_seed(cfg.seed, 4),
    )?;
    if let Some(dir) = trace_dir {
        export::write_binary(&elec, &dir.join("electronic"))?;
    }
    spectra.push(psd(&elec.samples, elec.sample_rate)?);
    Ok((spectra, clipped))
}

fn peak_summary(
    cfg: &ExperimentConfig,
    psd: &PsdEstimate,
    fano: f64,
    opts: &PeakOptions,
) -> Result<PeakSummary, CliError> {
    let sem = cfg.sem_config(cfg.sem.g0, fano, cfg.technical_noise.rho_t)?;
    let model = crate::sem::noise_psd_at_sideband(&sem).one_sided();
    let analytic_floor = model.noise() + cfg.detector().electronic_noise_psd;
    let peak = extract_peak(psd, cfg.sem.modulation_hz, opts)?;
    let analytic_ratio = model.signal_peak / analytic_floor;
    let estimated_ratio = peak.peak_power / peak.local_floor;
    let ratio_se = estimated_ratio
        * ((peak.peak_std_error / peak.peak_power).powi(2)
            + (peak.floor_std_error / peak.local_floor).powi(2))
        .sqrt();
    Ok(PeakSummary {
        analytic_power: model.signal_peak,
        estimated_power: peak.peak_power,
        power_std_error: peak.peak_std_error,
        relative_error: peak.peak_power / model.signal_peak - 1.0,
        analytic_peak_to_floor: analytic_ratio,
        estimated_peak_to_floor: estimated_ratio,
        peak_to_floor_std_error: ratio_se,
        peak_to_floor_z: (estimated_ratio - analytic_ratio) / ratio_se,
    })
}

/// Compares simulated spectra (in [`SIMULATED_SPECTRA`] order) with the
/// analytic model.
pub fn summarize(
    cfg: &ExperimentConfig,
    spectra: &[PsdEstimate],
    clipped: u64,
) -> Result<SimulationSummary, CliError> {
    let [sq_sem, coh_sem, sq_floor, shot_floor, elec] = spectra else {
        return Err(CliError::Config(format!(
            "expected {} spectra",
            SIMULATED_SPECTRA.len()
        )));
    };
    let band = (cfg.spectral.fano_band_hz[0], cfg.spectral.fano_band_hz[1]);
    let opts = PeakOptions {
        half_width: cfg.spectral.peak_half_width,
        guard: cfg.spectral.peak_guard,
        flank: cfg.spectral.peak_flank,
    };
    let fano = estimate_fano(sq_floor, shot_floor, elec, band)?;
    let slope = floor_slope(sq_floor, band.0, band.1)?;
    let eta = cfg.detector.efficiency;
    Ok(SimulationSummary {
        modulation_hz: cfg.sem.modulation_hz,
        rbw_hz: sq_sem.rbw,
        averages: sq_sem.vbw_averages,
        effective_averages: sq_sem.effective_averages(),
        photons_per_pulse: cfg.photons_per_pulse(),
        detected_fano_configured: cfg.sem.fano,
        detected_fano_estimated: fano.value,
        detected_fano_std_error: fano.std_error,
        source_fano_estimated: (fano.value - (1.0 - eta)) / eta,
        floor_slope_per_hz: slope.slope,
        floor_slope_std_error: slope.slope_std_error,
        shot_floor_psd: band_mean(shot_floor, band)?,
        clipped_samples: clipped,
        squeezed: peak_summary(cfg, sq_sem, cfg.sem.fano, &opts)?,
        coherent: peak_summary(cfg, coh_sem, 1.0, &opts)?,
    })
}

fn band_mean(psd: &PsdEstimate, band: (f64, f64)) -> Result<f64, CliError> {
    let idx = psd.band_indices(band.0, band.1)?;
    let n = idx.len() as f64;
    Ok(psd.values[idx].iter().sum::<f64>() / n)
}

/// Four-curve CSV in dB relative to the coherent shot-noise floor.
fn write_fig5(path: &Path, spectra: &[PsdEstimate], reference: f64) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_error(path))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(
            w,
            "freq_hz,squeezed_sem_db,coherent_sem_db,squeezed_floor_db,shot_floor_db"
        )?;
        for k in 0..spectra[0].len() {
            write!(w, "{}", spectra[0].freqs[k])?;
            for s in &spectra[..4] {
                write!(w, ",{}", to_db(s.values[k], reference))?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(io_error(path))
}

fn cmd_simulate(cfg: &ExperimentConfig, dir: &Path, say: impl Fn(String)) -> Result<(), CliError> {
    let trace_dir = if cfg.output.write_traces {
        let d = dir.join("traces");
        std::fs::create_dir_all(&d).map_err(io_error(&d))?;
        Some(d)
    } else {
        None
    };
    say(format!(
        "simulating {} s at {} Hz ({} pulses per trace)",
        cfg.pulse_train.duration_s,
        cfg.pulse_train.rep_rate_hz,
        cfg.pulse_train(1.0, 0).pulse_count()
    ));
    let (spectra, clipped) = simulate_spectra(cfg, trace_dir.as_deref())?;
    for (name, psd) in SIMULATED_SPECTRA.iter().zip(&spectra) {
        psd.write_csv(&dir.join(format!("psd_{name}.csv")))?;
    }
    let summary = summarize(cfg, &spectra, clipped)?;
    write_fig5(&dir.join("fig5.csv"), &spectra, summary.shot_floor_psd)?;
    let path = dir.join("summary.toml");
    let text = toml::to_string(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&path, text).map_err(io_error(&path))?;

    say(format!(
        "peak at {} Hz: squeezed {:.4e} (analytic {:.4e}), coherent {:.4e} (analytic {:.4e})",
        summary.modulation_hz,
        summary.squeezed.estimated_power,
        summary.squeezed.analytic_power,
        summary.coherent.estimated_power,
        summary.coherent.analytic_power
    ));
    say(format!(
        "detected Fano {:.4} ± {:.4} (configured {:.4}); squeezing {:.3} dB",
        summary.detected_fano_estimated,
        summary.detected_fano_std_error,
        summary.detected_fano_configured,
        to_db(summary.detected_fano_estimated, 1.0)
    ));
    say(format!("wrote {}", dir.display()));
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

fn cmd_fit(
    cfg: &ExperimentConfig,
    dataset: &Path,
    dir: &Path,
    say: impl Fn(String),
) -> Result<(), CliError> {
    let data = CurveDataset::read_csv(dataset)?;
    let lm = LmOptions {
        max_iterations: cfg.fit.max_iterations,
        ..LmOptions::default()
    };
    let (result, x_max) = match cfg.fit.mode {
        FitMode::Amplification => {
            let opts = AmplificationFitOptions {
                fixed_eta: if cfg.fit.fit_eta {
                    None
                } else {
                    Some(cfg.fit.fixed_eta)
                },
                lm,
            };
            let x_max = *data.x.last().expect("validated dataset is non-empty");
            (fit_amplification(&data, &cfg.fit.init, &opts)?, x_max)
        }
        FitMode::Fano => {
            let fixed = cfg.fit.fixed_shape()?;
            let opts = FanoFitOptions {
                init: cfg.fit.init,
                axis: cfg.fit.fano_axis,
                lm,
            };
            let result = fit_fano_curve(&data, fixed, &opts)?;
            let x_max = match (cfg.fit.fano_axis, fixed) {
                (FanoAxis::Deamplification, Some(shape)) => {
                    invert_deamplification(data.x[0], shape.beta, shape.chi)?
                }
                _ => *data.x.last().expect("validated dataset is non-empty"),
            };
            (result, x_max)
        }
    };

    let report_path = dir.join("fit_report.toml");
    let header = format!("# dataset: {}\n", dataset.display());
    std::fs::write(&report_path, header + &result.to_report()).map_err(io_error(&report_path))?;
    let curve_path = dir.join("fit_curve.csv");
    result.write_curve(
        x_max.max(f64::MIN_POSITIVE),
        cfg.fit.curve_points,
        &curve_path,
    )?;

    let mut line = format!(
        "{} fit over {} points: ",
        match cfg.fit.mode {
            FitMode::Amplification => "amplification",
            FitMode::Fano => "fano",
        },
        result.points
    );
    for name in &result.free_params {
        let se = result
            .std_error(name)
            .map(|s| format!(" ± {s:.3e}"))
            .unwrap_or_default();
        line.push_str(&format!("{name} = {:.6}{se}  ", result.param(name)));
    }
    say(line.trim_end().to_string());
    say(format!(
        "wrote {} and {}",
        report_path.display(),
        curve_path.display()
    ));
    result.ensure_converged()?;
    Ok(())
}
