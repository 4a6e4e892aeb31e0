//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! b"DMOE"  u32 version  u32 dim  u32 num_domains  u32 mode_flags
//! f32 × N  every tensor of MoeParams::tensors(), in order
//! ```
//!
//! `mode_flags` bit 0 selects top-1 pooling, bit 1 sum-to-one gate
//! normalization. Tensor shapes follow from `dim` and `num_domains`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::moe::{GateNormalization, MoeMode, MoeParams, Pooling};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"DMOE";
pub const VERSION: u32 = 1;

const FLAG_TOP1: u32 = 1;
const FLAG_SUM_TO_ONE: u32 = 1 << 1;

fn mode_flags(mode: MoeMode) -> u32 {
    let mut flags = 0;
    if mode.pooling == Pooling::Top1 {
        flags |= FLAG_TOP1;
    }
    if mode.normalization == GateNormalization::SumToOne {
        flags |= FLAG_SUM_TO_ONE;
    }
    flags
}

fn mode_from_flags(flags: u32) -> Option<MoeMode> {
    if flags & !(FLAG_TOP1 | FLAG_SUM_TO_ONE) != 0 {
        return None;
    }
    Some(MoeMode {
        pooling: if flags & FLAG_TOP1 != 0 {
            Pooling::Top1
        } else {
            Pooling::Weighted
        },
        normalization: if flags & FLAG_SUM_TO_ONE != 0 {
            GateNormalization::SumToOne
        } else {
            GateNormalization::None
        },
    })
}

/// Serializes parameters. Values are stored as `f32`.
pub fn write_checkpoint<S: Scalar, W: Write>(params: &MoeParams<S>, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.dim() as u32).to_le_bytes())?;
    w.write_all(&(params.num_domains() as u32).to_le_bytes())?;
    w.write_all(&mode_flags(params.mode).to_le_bytes())?;
    for tensor in params.tensors() {
        for v in tensor {
            w.write_all(&v.as_f32().to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R, origin: &str, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(origin, format!("truncated checkpoint header ({what})")))?;
    Ok(u32::from_le_bytes(buf))
}

/// Parses a checkpoint. `origin` names the source in error messages.
pub fn read_checkpoint<S: Scalar, R: Read>(mut r: R, origin: &str) -> Result<MoeParams<S>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(origin, "file too short for checkpoint magic"))?;
    if &magic != MAGIC {
        return Err(Error::format(
            origin,
            format!("bad checkpoint magic {magic:?}, expected \"DMOE\""),
        ));
    }
    let version = read_u32(&mut r, origin, "version")?;
    if version != VERSION {
        return Err(Error::format(
            origin,
            format!("unsupported checkpoint version {version}, expected {VERSION}"),
        ));
    }
    let dim = read_u32(&mut r, origin, "dim")? as usize;
    let num_domains = read_u32(&mut r, origin, "num_domains")? as usize;
    let flags = read_u32(&mut r, origin, "mode flags")?;
    let mode = mode_from_flags(flags)
        .ok_or_else(|| Error::format(origin, format!("unknown mode flags {flags:#x}")))?;
    let mut params = MoeParams::zeros(dim, num_domains, mode)
        .map_err(|e| Error::format(origin, e.to_string()))?;
    let mut buf = [0u8; 4];
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::format(origin, "truncated checkpoint payload"))?;
            let x = f32::from_le_bytes(buf);
            if !x.is_finite() {
                return Err(Error::format(origin, "non-finite value in checkpoint"));
            }
            *v = S::of(x as f64);
        }
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => Ok(params),
        Ok(_) => Err(Error::format(origin, "trailing bytes after checkpoint payload")),
        Err(e) => Err(Error::format(origin, e.to_string())),
    }
}

pub fn save<S: Scalar>(params: &MoeParams<S>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(params, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: &Path) -> Result<MoeParams<S>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file), &path.display().to_string())
}
