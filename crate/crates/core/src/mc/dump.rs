//! Binary column dump of simulated price increments.
//!
//! Layout (all little-endian): the 8-byte magic `NKPATHS1`, then `u64`
//! `n_paths`, `n_steps`, `dimension` and `seed`, then one column of
//! `n_paths` `f64` values per `(step, component)` pair, steps outermost.

use std::io::{Read, Write};

use super::simulate::PathBundle;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NKPATHS1";
const HEADER_LEN: usize = 8 + 4 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dimension: usize,
    pub seed: u64,
    /// Column-major: `columns[(step * dimension + j) * n_paths + path]`.
    pub columns: Vec<f64>,
}

impl PathDump {
    pub fn from_bundle(bundle: &PathBundle) -> Self {
        let mut columns = Vec::with_capacity(bundle.n_paths * bundle.n_steps * bundle.dimension);
        for m in 0..bundle.n_steps {
            for j in 0..bundle.dimension {
                columns.extend((0..bundle.n_paths).map(|p| bundle.delta_s(p, m)[j]));
            }
        }
        PathDump {
            n_paths: bundle.n_paths,
            n_steps: bundle.n_steps,
            dimension: bundle.dimension,
            seed: bundle.seed,
            columns,
        }
    }

    pub fn delta_s(&self, path: usize, step: usize, component: usize) -> f64 {
        self.columns[(step * self.dimension + component) * self.n_paths + path]
    }
}

pub fn write_path_dump(dump: &PathDump, mut w: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Dump(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    for v in [dump.n_paths as u64, dump.n_steps as u64, dump.dimension as u64, dump.seed] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for x in &dump.columns {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn encode_path_dump(dump: &PathDump) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * dump.columns.len());
    write_path_dump(dump, &mut out).expect("writing to a Vec cannot fail");
    out
}

/// Parses a dump, checking the magic and that the body length matches the header exactly.
pub fn read_path_dump(bytes: &[u8]) -> Result<PathDump> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Dump(format!("truncated header: {} bytes", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes"));
    let (n_paths, n_steps, dimension, seed) = (word(0), word(1), word(2), word(3));
    let values = n_paths
        .checked_mul(n_steps)
        .and_then(|x| x.checked_mul(dimension))
        .ok_or_else(|| Error::Dump("header sizes overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if (body.len() as u64) % 8 != 0 || body.len() as u64 / 8 != values {
        return Err(Error::Dump(format!(
            "body holds {} bytes, header implies {values} values",
            body.len()
        )));
    }
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| Error::Dump("size exceeds address space".into()));
    Ok(PathDump {
        n_paths: to_usize(n_paths)?,
        n_steps: to_usize(n_steps)?,
        dimension: to_usize(dimension)?,
        seed,
        columns: body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    })
}

pub fn read_path_dump_from(mut r: impl Read) -> Result<PathDump> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::Dump(e.to_string()))?;
    read_path_dump(&bytes)
}
