//! Trace files: little-endian `f64` samples plus a TOML sidecar, or CSV.
//!
//! `write_binary(trace, "out/squeezed")` produces `out/squeezed.bin` and
//! `out/squeezed.toml`. The sidecar records the sample count and rate and the
//! full [`TraceMetadata`], which is enough to regenerate the samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SimError, TraceMetadata, TraceRecord};

const FORMAT: &str = "f64-le";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format: String,
    sample_count: usize,
    sample_rate: f64,
    data_file: String,
    metadata: TraceMetadata,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut name = base
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".");
    name.push(ext);
    base.with_file_name(name)
}

/// Writes `<base>.bin` and `<base>.toml`; returns both paths.
pub fn write_binary(trace: &TraceRecord, base: &Path) -> Result<(PathBuf, PathBuf), SimError> {
    let data_path = with_ext(base, "bin");
    let sidecar_path = with_ext(base, "toml");

    let file = File::create(&data_path).map_err(io_err(&data_path))?;
    let mut w = BufWriter::new(file);
    for x in &trace.samples {
        w.write_all(&x.to_le_bytes()).map_err(io_err(&data_path))?;
    }
    w.flush().map_err(io_err(&data_path))?;

    let sidecar = Sidecar {
        format: FORMAT.to_string(),
        sample_count: trace.samples.len(),
        sample_rate: trace.sample_rate,
        data_file: data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        metadata: trace.metadata.clone(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| SimError::Sidecar {
        path: sidecar_path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(&sidecar_path, text).map_err(io_err(&sidecar_path))?;
    Ok((data_path, sidecar_path))
}

/// Reads a trace written by [`write_binary`], given the same base path.
pub fn read_binary(base: &Path) -> Result<TraceRecord, SimError> {
    let sidecar_path = with_ext(base, "toml");
    let text = std::fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let malformed = |message: String| SimError::Sidecar {
        path: sidecar_path.display().to_string(),
        message,
    };
    let sidecar: Sidecar = toml::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    if sidecar.format != FORMAT {
        return Err(malformed(format!(
            "unsupported format {:?}",
            sidecar.format
        )));
    }

    let data_path = base.with_file_name(&sidecar.data_file);
    let file = File::open(&data_path).map_err(io_err(&data_path))?;
    let mut bytes = Vec::with_capacity(sidecar.sample_count * 8);
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(io_err(&data_path))?;
    if bytes.len() != sidecar.sample_count * 8 {
        return Err(malformed(format!(
            "expected {} samples, data file holds {} bytes",
            sidecar.sample_count,
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(TraceRecord {
        samples,
        sample_rate: sidecar.sample_rate,
        metadata: sidecar.metadata,
    })
}

/// CSV with columns `index,time_s,photons`; intended for short traces.
pub fn write_csv(trace: &TraceRecord, path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "index,time_s,photons").map_err(io_err(path))?;
    for (i, x) in trace.samples.iter().enumerate() {
        writeln!(w, "{},{:e},{}", i, i as f64 / trace.sample_rate, x).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
