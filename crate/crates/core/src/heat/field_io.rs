//! Binary field snapshots: a fixed 36-byte header followed by little-endian `f64` values.
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `RUFIELD1` |
//! | 4 | component (u32) |
//! | 1 | lattice kind (0 torus, 1 sphere) |
//! | 1 | dimension |
//! | 2 | reserved, zero |
//! | 4 | per-axis count (torus) or subdivision level (sphere) |
//! | 8 | time (f64) |
//! | 8 | value count (u64) |

use std::io::{Read, Write};

use super::grid::{GridField, Lattice};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RUFIELD1";

pub fn write_field<W: Write>(mut w: W, field: &GridField) -> Result<()> {
    let info = field.lattice.info();
    w.write_all(MAGIC)?;
    w.write_all(&(field.component as u32).to_le_bytes())?;
    w.write_all(&[u8::from(matches!(field.lattice, Lattice::Sphere(_))), info.dim as u8])?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&(info.shape as u32).to_le_bytes())?;
    w.write_all(&field.time.to_le_bytes())?;
    w.write_all(&(field.values.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<GridField> {
    let mut head = [0u8; 36];
    r.read_exact(&mut head)?;
    if &head[0..8] != MAGIC {
        return Err(Error::Domain("not a field snapshot (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    let component = u32_at(8) as usize;
    let kind = head[12];
    let dim = head[13] as usize;
    let shape = u32_at(16) as usize;
    let time = f64::from_le_bytes(head[20..28].try_into().unwrap());
    let count = u64::from_le_bytes(head[28..36].try_into().unwrap()) as usize;
    let lattice = match kind {
        0 => Lattice::torus(dim, shape)?,
        1 => Lattice::sphere(shape)?,
        k => return Err(Error::Domain(format!("unknown lattice kind {k}"))),
    };
    if count != lattice.node_count() {
        return Err(Error::Domain(format!("header claims {count} values for {} nodes", lattice.node_count())));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    GridField::new(component, lattice, values, time)
}
