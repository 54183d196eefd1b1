//! WVF1 snapshot files.
//!
//! Layout: magic `WVF1`, `u64` grid size, `u64` component count, `f64` box
//! length, then each component's samples as little-endian `f64` in row-major
//! order. All header integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, WaveError};
use crate::grid::{Grid3, ScalarField};

const MAGIC: &[u8; 4] = b"WVF1";

pub fn write_fields(path: impl AsRef<Path>, fields: &[&ScalarField]) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| WaveError::structural("no components to write"))?;
    let grid = first.grid;
    for f in fields {
        grid.ensure_same(&f.grid)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&(fields.len() as u64).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    for f in fields {
        for v in &f.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_fields(path: impl AsRef<Path>) -> Result<Vec<ScalarField>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(WaveError::Format("bad magic, expected WVF1".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    let grid = Grid3::new(n, length)?;
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0u8; grid.len() * 8];
    for _ in 0..count {
        r.read_exact(&mut buf)
            .map_err(|e| WaveError::Format(format!("truncated WVF1 payload: {e}")))?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push(ScalarField { grid, data });
    }
    Ok(out)
}
