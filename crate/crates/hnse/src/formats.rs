//! CSV and JSON artifacts.
//!
//! Floats in CSV files are written as the shortest decimal that round-trips,
//! except field coefficients, which use 17 significant digits. Fields store
//! only lexicographically positive modes; the rest follow from reality.

use std::io::{Read, Write};
use std::path::Path;

use hnse_core::dynamics::ConeRecord;
use hnse_core::lattice::{GapRecord, LatticePoint};
use hnse_core::spectral::FourierField;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const POINTS_HEADER: [&str; 2] = ["j1", "j2"];
pub const FIELD_HEADER: [&str; 6] = ["j1", "j2", "re_u1", "im_u1", "re_u2", "im_u2"];
pub const TRACE_HEADER: [&str; 7] = ["t", "V", "dVdt", "norm_v_sq", "alpha", "rhs_bound", "margin"];

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), FormatError> {
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(FormatError::Header { found, expected: expected.iter().map(|s| s.to_string()).collect() });
    }
    Ok(())
}

pub fn write_points<W: Write>(w: W, points: &[LatticePoint]) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(POINTS_HEADER)?;
    for p in points {
        out.write_record([p.j1.to_string(), p.j2.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_points<R: Read>(r: R) -> Result<Vec<LatticePoint>, FormatError> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(&mut rd, &POINTS_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        let (j1, j2): (i64, i64) = rec?;
        out.push(LatticePoint::new(j1, j2));
    }
    Ok(out)
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field<W: Write>(w: W, u: &FourierField) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FIELD_HEADER)?;
    for (j, md) in u.iter() {
        if !j.is_lex_positive() {
            continue;
        }
        out.write_record([
            j.j1.to_string(),
            j.j2.to_string(),
            sci(md[0].re),
            sci(md[0].im),
            sci(md[1].re),
            sci(md[1].im),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a field at truncation `m`; negative modes are filled by conjugation.
pub fn read_field<R: Read>(r: R, m: i64) -> Result<FourierField, FormatError> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(&mut rd, &FIELD_HEADER)?;
    let mut u = FourierField::zero(m);
    for (i, rec) in rd.deserialize().enumerate() {
        let (j1, j2, a, b, c, d): (i64, i64, f64, f64, f64, f64) = rec?;
        let j = LatticePoint::new(j1, j2);
        if !j.is_lex_positive() {
            return Err(FormatError::Row {
                row: i + 1,
                reason: format!("mode {j:?} is not lexicographically positive"),
            });
        }
        if !u.admits(j) {
            return Err(FormatError::Row { row: i + 1, reason: format!("mode {j:?} lies outside truncation {m}") });
        }
        u.set_real_pair(j, [Complex64::new(a, b), Complex64::new(c, d)]);
    }
    Ok(u)
}

pub fn write_trace<W: Write>(w: W, records: &[ConeRecord]) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    if records.is_empty() {
        out.write_record(TRACE_HEADER)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<ConeRecord>, FormatError> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(&mut rd, &TRACE_HEADER)?;
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_gaps<W: Write>(w: W, gaps: &[GapRecord]) -> Result<(), FormatError> {
    write_rows(w, gaps, &["lower", "upper", "gap"])
}

pub fn read_gaps<R: Read>(r: R) -> Result<Vec<GapRecord>, FormatError> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(&mut rd, &["lower", "upper", "gap"])?;
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// Serializes rows with their derived header; an empty slice still gets `header`.
pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T], header: &[&str]) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(header)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Energy and `H^{3+ε}` norm of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub t: f64,
    pub energy: f64,
    pub norm_w: f64,
}

pub const SIMULATION_HEADER: [&str; 3] = ["t", "energy", "norm_w"];

/// One restricted-operator norm per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingRow {
    #[serde(rename = "lambda_N")]
    pub lambda_n: f64,
    pub id: usize,
    pub u_norm: f64,
    pub norm: f64,
    pub bound: f64,
    pub passes: bool,
    pub tail: f64,
    pub tail_bound: f64,
    pub product_bound: f64,
}

pub const AVERAGING_HEADER: [&str; 9] =
    ["lambda_N", "id", "u_norm", "norm", "bound", "passes", "tail", "tail_bound", "product_bound"];

pub fn averaging_rows(rep: &hnse_core::averaging::AveragingReport) -> Vec<AveragingRow> {
    rep.sampled_norms
        .iter()
        .map(|s| AveragingRow {
            lambda_n: rep.lambda_n,
            id: s.id,
            u_norm: s.u_norm,
            norm: s.norm,
            bound: rep.bound,
            passes: s.passes,
            tail: s.mechanism.tail,
            tail_bound: s.mechanism.tail_bound,
            product_bound: s.mechanism.product_bound,
        })
        .collect()
}

/// JSON envelope shared by every report.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub kind: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
    pub result: T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(kind: &'a str, config: &'a RunConfig, result: T) -> Self {
        Self { kind, version: VERSION, config, result }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn write_file(
    path: &Path,
    write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<(), FormatError>,
) -> Result<(), FormatError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut f)?;
    f.flush()?;
    Ok(())
}
