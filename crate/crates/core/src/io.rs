//! File formats.
//!
//! **Samples.** `<name>.csv` holds one increment per line, `d` comma-separated
//! values, no header. The sidecar `<name>.json` holds `{delta, n, d, seed}`.
//!
//! **Grids (binary).** `<name>.json` is a header describing the grid and
//! `<name>.bin` holds the payload, row-major with the last axis fastest:
//! * density fields: `N` little-endian `f64` values (`NaN` where undefined),
//!   then `N` bytes, 1 where the node is defined;
//! * complex fields: `N` interleaved little-endian `(re, im)` `f64` pairs,
//!   then `N` bytes, 1 where the node is masked (all 0 without a mask).
//!
//! **Grids (CSV slices, `d <= 2`).** Density fields: `x1[,x2],value,defined`.
//! Complex fields: `u1[,u2],re,im,mask`. One header line. Density slices may
//! be restricted to the window `max_j |x_j| <= w`.
//!
//! Floats are printed in shortest round-trip form, so text output is lossless
//! and byte-deterministic.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, DensityField, FreqGrid, Quantity, SpaceGrid};
use crate::sim::IncrementSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub delta: f64,
    pub n: usize,
    pub d: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHeader {
    pub format: String,
    pub quantity: Quantity,
    pub dim: usize,
    pub points: usize,
    pub spacing: f64,
    pub extent: f64,
    pub layout: String,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexHeader {
    pub format: String,
    pub dim: usize,
    pub points: usize,
    pub u_max: f64,
    pub spacing: f64,
    pub layout: String,
    pub data: String,
}

const LAYOUT: &str = "row-major, last axis fastest, node index j maps to (j - points/2) * spacing";

pub fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads JSON, reporting the failing field path on error.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        parse_error(path, format!("at '{at}': {}", e.inner()))
    })
}

/// Writes `<base>.csv` and the sidecar `<base>.json`.
pub fn write_sample(base: &Path, sample: &IncrementSample) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(with_ext(base, "csv"))?);
    for row in sample.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    let sidecar = SampleSidecar {
        delta: sample.delta(),
        n: sample.len(),
        d: sample.dim(),
        seed: sample.seed(),
    };
    write_json(&with_ext(base, "json"), &sidecar)
}

pub fn read_sample(base: &Path) -> Result<IncrementSample> {
    let meta_path = with_ext(base, "json");
    let meta: SampleSidecar = read_json(&meta_path)?;
    let csv_path = with_ext(base, "csv");
    let reader = BufReader::new(fs::File::open(&csv_path)?);
    let mut values = Vec::with_capacity(meta.n * meta.d);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != meta.d {
            return Err(parse_error(
                &csv_path,
                format!("line {}: expected {} columns", i + 1, meta.d),
            ));
        }
        for f in fields {
            values.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_error(&csv_path, format!("line {}: {e}", i + 1)))?,
            );
        }
    }
    if values.len() != meta.n * meta.d {
        return Err(parse_error(&csv_path, format!("expected {} rows", meta.n)));
    }
    IncrementSample::new(meta.delta, meta.d, values, meta.seed)
}

/// Writes `<base>.json` and `<base>.bin`.
pub fn write_density_binary(base: &Path, field: &DensityField) -> Result<()> {
    let bin = with_ext(base, "bin");
    let header = DensityHeader {
        format: "density-f64le".into(),
        quantity: field.quantity,
        dim: field.grid.dim(),
        points: field.grid.points(),
        spacing: field.grid.spacing(),
        extent: field.grid.extent(),
        layout: LAYOUT.into(),
        data: file_name(&bin),
    };
    let mut bytes = Vec::with_capacity(field.values.len() * 9);
    for (v, def) in field.values.iter().zip(&field.defined) {
        let v = if *def { *v } else { f64::NAN };
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend(field.defined.iter().map(|&d| d as u8));
    fs::write(bin, bytes)?;
    write_json(&with_ext(base, "json"), &header)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_density_binary(header_path: &Path) -> Result<DensityField> {
    let header: DensityHeader = read_json(header_path)?;
    if header.format != "density-f64le" {
        return Err(parse_error(
            header_path,
            format!("unsupported format '{}'", header.format),
        ));
    }
    let grid = SpaceGrid::new(header.dim, header.points, header.spacing)?;
    let bin = header_path.with_file_name(&header.data);
    let bytes = fs::read(&bin)?;
    let n = grid.len();
    if bytes.len() != 9 * n {
        return Err(parse_error(
            &bin,
            format!("expected {} bytes, found {}", 9 * n, bytes.len()),
        ));
    }
    let values = bytes[..8 * n]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let defined = bytes[8 * n..].iter().map(|&b| b != 0).collect();
    Ok(DensityField {
        grid,
        quantity: header.quantity,
        values,
        defined,
    })
}

fn check_csv_dim(dim: usize) -> Result<()> {
    if dim > 2 {
        return Err(Error::config(
            "CSV grid output is limited to d <= 2; use the binary format",
        ));
    }
    Ok(())
}

fn coord_header(prefix: &str, dim: usize) -> String {
    (1..=dim)
        .map(|j| format!("{prefix}{j}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn coords(x: &[f64]) -> String {
    x.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_density_csv(path: &Path, field: &DensityField, window: Option<f64>) -> Result<()> {
    check_csv_dim(field.grid.dim())?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{},value,defined", coord_header("x", field.grid.dim()))?;
    let inside = |x: &[f64]| window.is_none_or(|w| x.iter().all(|v| v.abs() <= w));
    for (flat, x) in field.grid.nodes().filter(|(_, x)| inside(x)) {
        writeln!(
            out,
            "{},{},{}",
            coords(&x),
            field.values[flat],
            field.defined[flat] as u8
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_complex_binary(base: &Path, field: &ComplexField) -> Result<()> {
    let bin = with_ext(base, "bin");
    let header = ComplexHeader {
        format: "complex-f64le".into(),
        dim: field.grid.dim(),
        points: field.grid.points(),
        u_max: field.grid.u_max(),
        spacing: field.grid.spacing(),
        layout: LAYOUT.into(),
        data: file_name(&bin),
    };
    let mut bytes = Vec::with_capacity(field.values.len() * 17);
    for v in &field.values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    match &field.mask {
        Some(mask) => bytes.extend(mask.iter().map(|&m| m as u8)),
        None => bytes.extend(std::iter::repeat_n(0u8, field.values.len())),
    }
    fs::write(bin, bytes)?;
    write_json(&with_ext(base, "json"), &header)
}

pub fn read_complex_binary(header_path: &Path) -> Result<ComplexField> {
    let header: ComplexHeader = read_json(header_path)?;
    if header.format != "complex-f64le" {
        return Err(parse_error(
            header_path,
            format!("unsupported format '{}'", header.format),
        ));
    }
    let grid = FreqGrid::new(header.dim, header.points, header.u_max)?;
    let bin = header_path.with_file_name(&header.data);
    let bytes = fs::read(&bin)?;
    let n = grid.len();
    if bytes.len() != 17 * n {
        return Err(parse_error(
            &bin,
            format!("expected {} bytes, found {}", 17 * n, bytes.len()),
        ));
    }
    let values = bytes[..16 * n]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    let mask: Vec<bool> = bytes[16 * n..].iter().map(|&b| b != 0).collect();
    let mut field = ComplexField::new(grid, values)?;
    field.mask = Some(mask);
    Ok(field)
}

pub fn write_complex_csv(path: &Path, field: &ComplexField) -> Result<()> {
    let d = field.grid.dim();
    check_csv_dim(d)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{},re,im,mask", coord_header("u", d))?;
    let mut u = vec![0.0; d];
    for (flat, v) in field.values.iter().enumerate() {
        field.grid.node(flat, &mut u);
        let m = field.mask.as_ref().is_some_and(|m| m[flat]);
        writeln!(out, "{},{},{},{}", coords(&u), v.re, v.im, m as u8)?;
    }
    out.flush()?;
    Ok(())
}
