//! Field files: node values as CSV or little-endian `f64` binary, plus a
//! JSON sidecar holding the grid descriptor. Invalid nodes are written as NaN.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{GridDescriptor, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Csv,
    Binary,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    grid: GridDescriptor,
    format: FieldFormat,
    values_file: String,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut name = base.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(ext);
    base.with_file_name(name)
}

/// Writes `<base>.csv|.bin` and `<base>.json`; returns the sidecar path.
pub fn write_field(base: &Path, field: &ScalarField, format: FieldFormat) -> Result<PathBuf> {
    let g = field.grid();
    let values_path = match format {
        FieldFormat::Csv => {
            let path = with_ext(base, "csv");
            let mut out = String::new();
            if g.dim() == 1 {
                out.push_str("x,value\n");
            } else {
                out.push_str("x,y,value\n");
            }
            for idx in 0..g.len() {
                let p = g.position(idx);
                let v = field.get(idx);
                if g.dim() == 1 {
                    out.push_str(&format!("{:?},{:?}\n", p[0], v));
                } else {
                    out.push_str(&format!("{:?},{:?},{:?}\n", p[0], p[1], v));
                }
            }
            fs::write(&path, out)?;
            path
        }
        FieldFormat::Binary => {
            let path = with_ext(base, "bin");
            let mut f = fs::File::create(&path)?;
            let mut buf = Vec::with_capacity(8 * g.len());
            for v in field.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            f.write_all(&buf)?;
            path
        }
    };
    let sidecar = Sidecar {
        grid: g.descriptor(),
        format,
        values_file: values_path.file_name().unwrap().to_string_lossy().into_owned(),
    };
    let side_path = with_ext(base, "json");
    fs::write(&side_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(side_path)
}

/// Reads a field back from its JSON sidecar.
pub fn read_field(sidecar_path: &Path) -> Result<ScalarField> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    let grid = Arc::new(GridSpec::from_descriptor(&sidecar.grid)?);
    let values_path = sidecar_path.with_file_name(&sidecar.values_file);
    let values = match sidecar.format {
        FieldFormat::Binary => {
            let bytes = fs::read(&values_path)?;
            if bytes.len() != 8 * grid.len() {
                return Err(Error::InvalidParameter(format!(
                    "binary field has {} bytes, expected {}",
                    bytes.len(),
                    8 * grid.len()
                )));
            }
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        }
        FieldFormat::Csv => {
            let text = fs::read_to_string(&values_path)?;
            text.lines()
                .skip(1)
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    let last = l.rsplit(',').next().unwrap_or("");
                    last.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidParameter(format!("bad csv value {last:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    ScalarField::new(grid, values)
}
