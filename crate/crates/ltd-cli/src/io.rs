//! File formats: HSC1 cubes, binary PGM masks, 16-bit PGM score maps, and
//! the CSV artifacts written by `detect` and `eval`.
//!
//! Cube layout on disk matches the in-memory layout: little-endian samples,
//! band-sequential (band outermost, then row, then column).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ltd_core::eval::GroundTruth;
use ltd_core::fusion::Map2D;
use ltd_core::solver::Trace;
use ltd_core::tensor::Tensor3;

use crate::error::{CliError, Result};

const CUBE_MAGIC: &[u8; 4] = b"HSC1";

/// Sample width of a cube file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeDtype {
    F32,
    F64,
}

impl CubeDtype {
    fn tag(self) -> u8 {
        match self {
            CubeDtype::F32 => 0,
            CubeDtype::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            CubeDtype::F32 => 4,
            CubeDtype::F64 => 8,
        }
    }
}

/// Read an HSC1 cube: magic, three little-endian `u32` dimensions, a dtype
/// byte (0 = f32, 1 = f64), then the samples.
pub fn read_cube(path: &Path) -> Result<Tensor3> {
    let bytes = fs::read(path)?;
    if bytes.len() < 17 {
        return Err(CliError::Truncated(format!(
            "{}: shorter than the fixed header",
            path.display()
        )));
    }
    if &bytes[0..4] != CUBE_MAGIC {
        return Err(CliError::BadMagic(format!(
            "{}: expected HSC1 magic",
            path.display()
        )));
    }
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (n1, n2, n3) = (dim(4), dim(8), dim(12));
    let dtype = match bytes[16] {
        0 => CubeDtype::F32,
        1 => CubeDtype::F64,
        t => {
            return Err(CliError::Malformed(format!(
                "{}: unknown dtype tag {t}",
                path.display()
            )))
        }
    };
    let count = n1
        .checked_mul(n2)
        .and_then(|v| v.checked_mul(n3))
        .ok_or_else(|| CliError::Malformed(format!("{}: dimensions overflow", path.display())))?;
    let expected = 17 + count * dtype.width();
    if bytes.len() != expected {
        return Err(CliError::Truncated(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected,
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    match dtype {
        CubeDtype::F32 => {
            for chunk in bytes[17..].chunks_exact(4) {
                values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        CubeDtype::F64 => {
            for chunk in bytes[17..].chunks_exact(8) {
                values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::NonFinite(format!(
            "{}: cube contains non-finite samples",
            path.display()
        )));
    }
    Tensor3::from_values(n1, n2, n3, values).map_err(Into::into)
}

/// Write an HSC1 cube; `F64` round-trips bit-exactly.
pub fn write_cube(path: &Path, t: &Tensor3, dtype: CubeDtype) -> Result<()> {
    let (n1, n2, n3) = t.dims();
    let mut out = Vec::with_capacity(17 + t.values().len() * dtype.width());
    out.extend_from_slice(CUBE_MAGIC);
    out.extend_from_slice(&(n1 as u32).to_le_bytes());
    out.extend_from_slice(&(n2 as u32).to_le_bytes());
    out.extend_from_slice(&(n3 as u32).to_le_bytes());
    out.push(dtype.tag());
    match dtype {
        CubeDtype::F32 => {
            for &v in t.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        CubeDtype::F64 => {
            for &v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Global min-max rescale of a cube to `[0, 1]`. A constant cube has no
/// usable dynamic range and is rejected.
pub fn normalize_cube(t: &Tensor3) -> Result<Tensor3> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in t.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(CliError::InvalidInput(
            "cannot normalize a constant cube".into(),
        ));
    }
    Ok(t.map(|v| (v - lo) / (hi - lo)))
}

fn parse_pgm_header(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, usize)> {
    // P5, whitespace-separated width, height, maxval; '#' comments allowed.
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(CliError::Malformed(format!(
            "{}: not a binary PGM (P5) file",
            path.display()
        )));
    }
    let mut fields = Vec::new();
    let mut pos = 2;
    while fields.len() < 3 && pos < bytes.len() {
        match bytes[pos] {
            b'#' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let text = std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| CliError::Malformed(format!("{}: bad header", path.display())))?;
                let value: usize = text.parse().map_err(|_| {
                    CliError::Malformed(format!("{}: bad header field {text:?}", path.display()))
                })?;
                fields.push(value);
            }
        }
    }
    if fields.len() != 3 || pos >= bytes.len() {
        return Err(CliError::Malformed(format!(
            "{}: incomplete PGM header",
            path.display()
        )));
    }
    // Single whitespace byte separates header from payload.
    pos += 1;
    Ok((fields[0], fields[1], fields[2], pos))
}

/// Read a binary PGM mask; samples above 127 mark anomalies.
pub fn read_mask(path: &Path) -> Result<GroundTruth> {
    let bytes = fs::read(path)?;
    let (width, height, maxval, offset) = parse_pgm_header(&bytes, path)?;
    if maxval != 255 {
        return Err(CliError::Malformed(format!(
            "{}: mask maxval must be 255, got {maxval}",
            path.display()
        )));
    }
    let payload = &bytes[offset..];
    if payload.len() != width * height {
        return Err(CliError::Truncated(format!(
            "{}: expected {} mask samples, found {}",
            path.display(),
            width * height,
            payload.len()
        )));
    }
    let labels = payload.iter().map(|&v| v > 127).collect();
    GroundTruth::new(height, width, labels).map_err(Into::into)
}

/// Write a binary mask as 8-bit PGM (anomaly = 255).
pub fn write_mask(path: &Path, gt: &GroundTruth) -> Result<()> {
    let (n1, n2) = gt.dims();
    let mut out = Vec::with_capacity(32 + n1 * n2);
    write!(out, "P5\n{} {}\n255\n", n2, n1)?;
    out.extend(gt.labels().iter().map(|&l| if l { 255u8 } else { 0u8 }));
    fs::write(path, out)?;
    Ok(())
}

/// Write a score map as 16-bit big-endian PGM, min-max scaled to the full
/// sample range. Negative filter ringing is clamped by the scaling.
pub fn write_pgm16(path: &Path, map: &Map2D) -> Result<()> {
    let (n1, n2) = map.dims();
    let (lo, hi) = map.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(32 + 2 * n1 * n2);
    write!(out, "P5\n{} {}\n65535\n", n2, n1)?;
    for &v in map.values() {
        let scaled = ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&scaled.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write raw map values as CSV, one image row per line.
pub fn write_scores_csv(path: &Path, map: &Map2D) -> Result<()> {
    let (n1, n2) = map.dims();
    let mut out = String::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:?}", map.get(i, j)));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a score map written by [`write_scores_csv`].
pub fn read_scores_csv(path: &Path) -> Result<Map2D> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            CliError::Malformed(format!(
                "{}:{}: bad float ({e})",
                path.display(),
                lineno + 1
            ))
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Malformed(format!(
            "{}: empty score table",
            path.display()
        )));
    }
    let n2 = rows[0].len();
    if rows.iter().any(|r| r.len() != n2) {
        return Err(CliError::Malformed(format!(
            "{}: ragged rows",
            path.display()
        )));
    }
    let n1 = rows.len();
    let values = rows.into_iter().flatten().collect();
    Map2D::from_values(n1, n2, values).map_err(Into::into)
}

/// Write the per-iteration trace: `iter,f,step,r,seconds`.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let mut out = String::from("iter,f,step,r,seconds\n");
    for (i, rec) in trace.iter().enumerate() {
        out.push_str(&format!(
            "{},{:?},{:?},{},{:.6}\n",
            i, rec.objective, rec.step_norm, rec.rank, rec.seconds
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write ROC points as `fpr,tpr` rows.
pub fn write_roc_csv(path: &Path, roc: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in roc {
        out.push_str(&format!("{:?},{:?}\n", fpr, tpr));
    }
    fs::write(path, out)?;
    Ok(())
}
