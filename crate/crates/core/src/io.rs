//! File formats: photon-count data files, instance manifests, solution files,
//! trace/report exports, and PGM images. Column layouts are documented in the
//! repository's FORMATS.md; floats are written with 17 significant digits.

use crate::campaign::CampaignResult;
use crate::generic::GaussianCell;
use crate::grid::{MagnitudeField, RealGrid};
use crate::instance::{Atom, AtomSet, Grade, PhotonHalfTable, COARSE_GRID};
use crate::projections::{canonical_half, wrap_angle, PhaseSolution, ProjectionError};
use crate::solvers::SolveReport;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Solution(#[from] ProjectionError),
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the data file: 128 lines of 64 space-separated counts.
pub fn write_photon_table(path: &Path, table: &PhotonHalfTable) -> Result<(), IoError> {
    let mut out = String::new();
    for p in 0..COARSE_GRID {
        for q in 0..COARSE_GRID / 2 {
            if q > 0 {
                out.push(' ');
            }
            write!(out, "{}", table.get(p, q)).expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads any whitespace-separated block of 128×64 nonnegative integers.
pub fn read_photon_table(path: &Path) -> Result<PhotonHalfTable, IoError> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(COARSE_GRID * COARSE_GRID / 2);
    for token in text.split_whitespace() {
        let v: u64 = token
            .parse()
            .map_err(|_| IoError::Parse(format!("bad count {token:?}")))?;
        values.push(v);
    }
    let expected = COARSE_GRID * COARSE_GRID / 2;
    if values.len() != expected {
        return Err(IoError::Parse(format!(
            "expected {expected} counts, found {}",
            values.len()
        )));
    }
    let counts = Array2::from_shape_vec((COARSE_GRID, COARSE_GRID / 2), values).expect("shape");
    PhotonHalfTable::new(counts).map_err(|e| IoError::Parse(e.to_string()))
}

/// Instance metadata written next to the data file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub grade: Grade,
    pub seed: u64,
    pub photons_per_atom: f64,
    pub filter_b: f64,
    pub achieved_i2: f64,
    pub mu: f64,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_ground_truth_atoms(path: &Path, atoms: &AtomSet) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(atoms.atoms())?)?;
    Ok(())
}

pub fn read_ground_truth_atoms(path: &Path) -> Result<AtomSet, IoError> {
    let atoms: Vec<Atom> = serde_json::from_str(&fs::read_to_string(path)?)?;
    AtomSet::from_atoms(atoms).map_err(|e| IoError::Parse(e.to_string()))
}

/// Solution file: header `dc <float>` then one `p q phase` line per canonical
/// half-plane entry; phases elsewhere are implied by antisymmetry.
pub fn write_solution(path: &Path, solution: &PhaseSolution) -> Result<(), IoError> {
    let mut out = String::new();
    writeln!(out, "dc {}", fmt_float(solution.dc())).expect("string write");
    for (p, q) in canonical_half(solution.size()) {
        writeln!(out, "{p} {q} {}", fmt_float(solution.phase(p, q))).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a solution file for an M×M instance. Redundant mirrored entries are
/// accepted and checked against antisymmetry to 1e-6.
pub fn read_solution(path: &Path, size: usize) -> Result<PhaseSolution, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| IoError::Parse("empty solution file".into()))?;
    let dc = header
        .strip_prefix("dc")
        .ok_or_else(|| IoError::Parse("missing `dc` header".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|_| IoError::Parse("bad dc value".into()))?;
    let m = size;
    let mut phases: Array2<f64> = Array2::zeros((m, m));
    let mut set: Array2<bool> = Array2::from_elem((m, m), false);
    for line in lines {
        let mut parts = line.split_whitespace();
        let (p, q, phi) = match (parts.next(), parts.next(), parts.next()) {
            (Some(p), Some(q), Some(v)) => {
                let p: usize = p
                    .parse()
                    .map_err(|_| IoError::Parse(format!("bad p in {line:?}")))?;
                let q: usize = q
                    .parse()
                    .map_err(|_| IoError::Parse(format!("bad q in {line:?}")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| IoError::Parse(format!("bad phase in {line:?}")))?;
                (p, q, v)
            }
            _ => return Err(IoError::Parse(format!("malformed line {line:?}"))),
        };
        if p >= m || q >= m {
            return Err(IoError::Parse(format!("frequency ({p},{q}) out of range")));
        }
        let mirror = ((m - p) % m, (m - q) % m);
        if set[mirror] {
            let residual = wrap_angle(phi + phases[mirror]).abs();
            if residual > 1e-6 {
                return Err(ProjectionError::AntisymmetryViolation { p, q, residual }.into());
            }
        }
        phases[(p, q)] = phi;
        set[(p, q)] = true;
        if !set[mirror] {
            phases[mirror] = wrap_angle(-phi);
            set[mirror] = true;
        }
    }
    Ok(PhaseSolution::new(dc, phases)?)
}

/// Two-column CSV used for solver power-ratio traces and error traces.
pub fn write_xy_csv(path: &Path, header: &str, rows: &[(u64, f64)]) -> Result<(), IoError> {
    let mut out = String::from(header);
    out.push('\n');
    for (x, y) in rows {
        writeln!(out, "{x},{}", fmt_float(*y)).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_reports_json(path: &Path, reports: &[SolveReport]) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(reports)?)?;
    Ok(())
}

pub fn write_campaign_json(path: &Path, result: &CampaignResult) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(result)?)?;
    Ok(())
}

/// Per-cell campaign summary CSV; columns documented in FORMATS.md.
pub fn write_campaign_csv(path: &Path, result: &CampaignResult) -> Result<(), IoError> {
    let mut out = String::from(
        "n,grade,mu_paper,trials,successes,success_rate,mean_iterations,log10_mean_iterations,total_wall_seconds,time_per_solution\n",
    );
    for cell in &result.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            cell.n,
            cell.grade,
            fmt_float(cell.mu_paper),
            cell.trials,
            cell.successes,
            fmt_float(cell.success_rate),
            fmt_float(cell.mean_iterations),
            fmt_float(cell.log10_mean_iterations),
            fmt_float(cell.total_wall_seconds),
            cell.time_per_solution.map(fmt_float).unwrap_or_default(),
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// `ratio,success_rate,time_per_success` rows for the Gaussian-model sweep.
pub fn write_gaussian_csv(path: &Path, cells: &[GaussianCell]) -> Result<(), IoError> {
    fs::write(path, gaussian_csv_string(cells))?;
    Ok(())
}

pub fn gaussian_csv_string(cells: &[GaussianCell]) -> String {
    let mut out = String::from("ratio,success_rate,time_per_success\n");
    for c in cells {
        writeln!(
            out,
            "{},{},{}",
            fmt_float(c.ratio),
            fmt_float(c.success_rate),
            c.time_per_success.map(fmt_float).unwrap_or_default(),
        )
        .expect("string write");
    }
    out
}

/// 8-bit binary PGM, linearly normalized from [min, max] to [0, 255];
/// constant input renders black.
pub fn write_pgm(path: &Path, image: &Array2<f64>) -> Result<(), IoError> {
    let (rows, cols) = image.dim();
    let min = image.iter().copied().fold(f64::INFINITY, f64::min);
    let max = image.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for v in image.iter() {
        let level = if span > 0.0 {
            ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        bytes.push(level);
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads P2/P5 PGM into [0,1]-scaled values.
pub fn read_pgm(path: &Path) -> Result<Array2<f64>, IoError> {
    let bytes = fs::read(path)?;
    let mut header_fields = Vec::new();
    let mut pos = 0;
    // Magic, width, height, maxval; comments allowed between fields.
    while header_fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        header_fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| IoError::Parse("non-ascii PGM header".into()))?
                .to_string(),
        );
    }
    if header_fields.len() < 4 {
        return Err(IoError::Parse("truncated PGM header".into()));
    }
    let magic = header_fields[0].as_str();
    let cols: usize = header_fields[1]
        .parse()
        .map_err(|_| IoError::Parse("bad PGM width".into()))?;
    let rows: usize = header_fields[2]
        .parse()
        .map_err(|_| IoError::Parse("bad PGM height".into()))?;
    let maxval: f64 = header_fields[3]
        .parse()
        .map_err(|_| IoError::Parse("bad PGM maxval".into()))?;
    let mut values = Vec::with_capacity(rows * cols);
    match magic {
        "P5" => {
            pos += 1; // single whitespace after maxval
            if maxval <= 255.0 {
                for &b in bytes.get(pos..pos + rows * cols).ok_or_else(|| {
                    IoError::Parse("truncated PGM payload".into())
                })? {
                    values.push(b as f64 / maxval);
                }
            } else {
                let payload = bytes
                    .get(pos..pos + 2 * rows * cols)
                    .ok_or_else(|| IoError::Parse("truncated PGM payload".into()))?;
                for pair in payload.chunks_exact(2) {
                    values.push(u16::from_be_bytes([pair[0], pair[1]]) as f64 / maxval);
                }
            }
        }
        "P2" => {
            let text = std::str::from_utf8(&bytes[pos..])
                .map_err(|_| IoError::Parse("non-ascii P2 payload".into()))?;
            for token in text.split_whitespace().take(rows * cols) {
                let v: f64 = token
                    .parse()
                    .map_err(|_| IoError::Parse(format!("bad pixel {token:?}")))?;
                values.push(v / maxval);
            }
            if values.len() != rows * cols {
                return Err(IoError::Parse("truncated P2 payload".into()));
            }
        }
        other => return Err(IoError::Parse(format!("unsupported PGM magic {other:?}"))),
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("shape"))
}

/// Renders a density grid, optionally zero-padding upsampling it first.
pub fn render_grid(path: &Path, grid: &RealGrid, upsample_factor: usize) -> Result<(), IoError> {
    let rendered = if upsample_factor > 1 {
        crate::grid::upsample(grid, upsample_factor)
            .map_err(|e| IoError::Parse(e.to_string()))?
    } else {
        grid.clone()
    };
    write_pgm(path, rendered.values())
}

/// Renders the full symmetrized count field implied by a data table.
pub fn render_table(path: &Path, table: &PhotonHalfTable) -> Result<(), IoError> {
    let field = MagnitudeField::from_photon_table(table);
    let counts = field.magnitudes().mapv(|m| m * m);
    write_pgm(path, &counts)
}
