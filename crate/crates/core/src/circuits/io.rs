//! Circuit files: one line of JSON describing the layers, a newline, then a
//! little-endian binary64 blob of projection weights in layer order.
//!
//! `dense` blobs hold each unit's `arity × in_width` projection row-major.
//! `sparse` blobs hold, per projection row, a `u64` term count followed by
//! `(u64 column, f64 weight)` pairs; they keep large solver circuits small.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::types::{Circuit, LayerBuilder, Nonlinearity};
use crate::error::{Error, Result};

const FORMAT: &str = "opstep-circuit";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitStorage {
    Dense,
    Sparse,
}

impl CircuitStorage {
    /// Dense when the blob stays under 64 MiB.
    pub fn auto(c: &Circuit) -> Self {
        let dense: usize = c
            .layers()
            .iter()
            .map(|l| l.units().map(|u| u.arity()).sum::<usize>() * l.in_width())
            .sum();
        if dense * 8 <= 64 << 20 {
            CircuitStorage::Dense
        } else {
            CircuitStorage::Sparse
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    storage: CircuitStorage,
    input_dim: usize,
    widths: Vec<usize>,
    layers: Vec<Vec<Nonlinearity>>,
}

pub fn write_circuit<W: Write>(c: &Circuit, storage: CircuitStorage, mut w: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        storage,
        input_dim: c.input_dim(),
        widths: c.widths(),
        layers: c
            .layers()
            .iter()
            .map(|l| l.units().map(|u| u.nonlinearity().clone()).collect())
            .collect(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::new();
    for layer in c.layers() {
        for unit in layer.units() {
            for r in 0..unit.arity() {
                let row = unit.row(r);
                match storage {
                    CircuitStorage::Dense => {
                        let mut dense = vec![0.0f64; layer.in_width()];
                        for &(col, wt) in row {
                            dense[col as usize] += wt;
                        }
                        for v in dense {
                            buf.extend_from_slice(&v.to_le_bytes());
                        }
                    }
                    CircuitStorage::Sparse => {
                        buf.extend_from_slice(&(row.len() as u64).to_le_bytes());
                        for &(col, wt) in row {
                            buf.extend_from_slice(&(col as u64).to_le_bytes());
                            buf.extend_from_slice(&wt.to_le_bytes());
                        }
                    }
                }
            }
        }
        w.write_all(&buf)?;
        buf.clear();
    }
    w.flush()?;
    Ok(())
}

pub fn read_circuit<R: BufRead>(mut r: R) -> Result<Circuit> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("circuit header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Format(format!(
            "unsupported circuit format {} v{}",
            header.format, header.version
        )));
    }
    if header.widths.len() != header.layers.len() + 1 || header.widths[0] != header.input_dim {
        return Err(Error::Format("layer widths inconsistent with header".into()));
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    for (i, units) in header.layers.into_iter().enumerate() {
        let in_width = header.widths[i];
        if units.len() != header.widths[i + 1] {
            return Err(Error::Format(format!("layer {i} width mismatch")));
        }
        let mut b = LayerBuilder::new(in_width);
        for g in units {
            let mut rows = Vec::with_capacity(g.arity());
            for _ in 0..g.arity() {
                rows.push(match header.storage {
                    CircuitStorage::Dense => {
                        let mut row = Vec::new();
                        for c in 0..in_width {
                            let v = read_f64(&mut r)?;
                            row.push((c, v));
                        }
                        row
                    }
                    CircuitStorage::Sparse => {
                        let n = read_u64(&mut r)? as usize;
                        let mut row = Vec::with_capacity(n);
                        for _ in 0..n {
                            let c = read_u64(&mut r)? as usize;
                            row.push((c, read_f64(&mut r)?));
                        }
                        row
                    }
                });
            }
            b.unit(g, rows)?;
        }
        layers.push(b.finish()?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after circuit blob".into()));
    }
    Circuit::new(header.input_dim, layers)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("circuit blob truncated".into()))?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("circuit blob truncated".into()))?;
    Ok(u64::from_le_bytes(b))
}
