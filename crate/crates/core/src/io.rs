//! Field file format: a JSON sidecar describing the grid plus a raw binary
//! payload of little-endian f64 samples.  The payload sits next to the
//! sidecar with its extension replaced by ".f64".

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

pub const FIELD_MAGIC: &str = "chess-field";
pub const FIELD_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct FieldMeta {
    pub magic: String,
    pub version: u32,
    pub n: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    pub axis_order: String,
    pub dtype: String,
    pub endian: String,
    pub layout: String,
}

pub fn axis_order_string(n: usize) -> String {
    (1..=n)
        .flat_map(|i| [format!("x{i}"), format!("y{i}")])
        .collect::<Vec<_>>()
        .join(",")
}

pub fn payload_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("f64")
}

pub fn write_field(field: &Field, sidecar: &Path) -> Result<()> {
    let meta = FieldMeta {
        magic: FIELD_MAGIC.into(),
        version: FIELD_VERSION,
        n: field.grid.n,
        samples: field.grid.size,
        axis_order: axis_order_string(field.grid.n),
        dtype: "f64".into(),
        endian: "little".into(),
        layout: "row-major".into(),
    };
    fs::write(sidecar, serde_json::to_string_pretty(&meta)? + "\n")?;
    let mut bytes = Vec::with_capacity(field.data.len() * 8);
    for v in &field.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(payload_path(sidecar), bytes)?;
    Ok(())
}

pub fn read_field(sidecar: &Path) -> Result<Field> {
    let meta: FieldMeta = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    if meta.magic != FIELD_MAGIC {
        return Err(Error::Validation(format!("bad magic {:?}", meta.magic)));
    }
    if meta.version != FIELD_VERSION {
        return Err(Error::Validation(format!("unsupported version {}", meta.version)));
    }
    if meta.dtype != "f64" || meta.endian != "little" || meta.layout != "row-major" {
        return Err(Error::Validation("unsupported dtype/endian/layout".into()));
    }
    if meta.axis_order != axis_order_string(meta.n) {
        return Err(Error::Validation(format!(
            "unexpected axis order {:?}",
            meta.axis_order
        )));
    }
    let grid = TorusGrid::new(meta.n, meta.samples)?;
    let bytes = fs::read(payload_path(sidecar))?;
    if bytes.len() != grid.points() * 8 {
        return Err(Error::Validation(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            grid.points() * 8
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("payload contains non-finite samples".into()));
    }
    Ok(Field { grid, data })
}
