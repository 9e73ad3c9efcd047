//! Reading and writing CPI data cubes.
//!
//! A file holds consecutive snapshots of `M·N` complex samples each, in the crate's
//! space-time order (pulse-major: sample `p·M + e` is pulse `p`, element `e`).
//! Two encodings are accepted, chosen by extension:
//!
//! * `.csv`: one complex sample per row as `re,im`, optional `re,im` header line;
//! * anything else: raw little-endian `f64` pairs `re, im` with no header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, StapError};
use crate::linalg::CVec;
use crate::sim::{ScenarioConfig, SpaceTimeDataset, SpaceTimeSnapshot};

const SAMPLE_BYTES: usize = 16;

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn format_error(path: &Path, message: String) -> StapError {
    StapError::Format {
        path: path.to_path_buf(),
        message,
    }
}

/// Load a CPI file for an array of `num_elements` elements and `num_pulses` pulses.
pub fn load_cpi_file(
    path: &Path,
    num_elements: usize,
    num_pulses: usize,
) -> Result<SpaceTimeDataset> {
    let dim = num_elements * num_pulses;
    if dim == 0 {
        return Err(StapError::InvalidInput(
            "array dimensions must be positive".into(),
        ));
    }
    let samples = if is_csv(path) {
        read_csv(path)?
    } else {
        read_binary(path, dim)?
    };
    if samples.len() % dim != 0 {
        return Err(StapError::Dimension(format!(
            "{}: {} samples is not a multiple of M·N = {dim}",
            path.display(),
            samples.len()
        )));
    }
    if samples.is_empty() {
        return Err(format_error(path, "file holds no samples".into()));
    }
    let snapshots = samples
        .chunks(dim)
        .enumerate()
        .map(|(cell, chunk)| SpaceTimeSnapshot::new(cell, CVec::from_column_slice(chunk)))
        .collect::<Result<Vec<_>>>()?;
    let config = ScenarioConfig {
        num_elements,
        num_pulses,
        num_range_cells: snapshots.len(),
        ..ScenarioConfig::default()
    };
    Ok(SpaceTimeDataset {
        config,
        snapshots,
        targets: Vec::new(),
        ideal_clutter_covariance: None,
    })
}

fn read_binary(path: &Path, dim: usize) -> Result<Vec<Complex64>> {
    let bytes = std::fs::read(path).map_err(|e| StapError::io(path, e))?;
    let snapshot_bytes = dim * SAMPLE_BYTES;
    if bytes.len() % snapshot_bytes != 0 {
        let complete = bytes.len() / snapshot_bytes;
        return Err(StapError::Dimension(format!(
            "{}: truncated snapshot {complete} starting at byte offset {} \
             ({} bytes present, {snapshot_bytes} needed per snapshot)",
            path.display(),
            complete * snapshot_bytes,
            bytes.len() - complete * snapshot_bytes
        )));
    }
    let mut samples = Vec::with_capacity(bytes.len() / SAMPLE_BYTES);
    for (i, chunk) in bytes.chunks_exact(SAMPLE_BYTES).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().expect("8-byte slice"));
        let im = f64::from_le_bytes(chunk[8..].try_into().expect("8-byte slice"));
        if !re.is_finite() || !im.is_finite() {
            return Err(format_error(
                path,
                format!("non-finite sample at byte offset {}", i * SAMPLE_BYTES),
            ));
        }
        samples.push(Complex64::new(re, im));
    }
    Ok(samples)
}

fn read_csv(path: &Path) -> Result<Vec<Complex64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_error(path, e.to_string()))?;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_error(path, e.to_string()))?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if row == 0 && record.iter().eq(["re", "im"]) {
            continue;
        }
        if record.len() != 2 {
            return Err(format_error(
                path,
                format!(
                    "line {line}: expected 2 fields `re,im`, found {}",
                    record.len()
                ),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    format_error(path, format!("line {line}: `{s}` is not a finite number"))
                })
        };
        samples.push(Complex64::new(parse(&record[0])?, parse(&record[1])?));
    }
    Ok(samples)
}

/// Write snapshots in the encoding implied by the extension. Binary output
/// round-trips bit-exactly; CSV uses shortest round-trip decimal formatting.
pub fn write_cpi_file(path: &Path, snapshots: &[SpaceTimeSnapshot]) -> Result<()> {
    let file = File::create(path).map_err(|e| StapError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| StapError::io(path, e);
    if is_csv(path) {
        writeln!(out, "re,im").map_err(io)?;
        for z in snapshots.iter().flat_map(|s| s.data.iter()) {
            writeln!(out, "{:?},{:?}", z.re, z.im).map_err(io)?;
        }
    } else {
        for z in snapshots.iter().flat_map(|s| s.data.iter()) {
            out.write_all(&z.re.to_le_bytes()).map_err(io)?;
            out.write_all(&z.im.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
