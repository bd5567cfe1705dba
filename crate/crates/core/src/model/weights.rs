//! Binary weight container.
//!
//! Layout (little-endian): magic `LTNN`, format version `u32`, tensor count
//! `u32`, then per tensor: name length `u32`, UTF-8 name, rank `u32`,
//! extents `u32 × rank`, values `f64 × product(extents)` in row-major order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LTNN";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_tensors<'a>(mut w: impl Write, tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> std::io::Result<()> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &e in t.shape() {
            w.write_all(&(e as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::format(format!("weight file truncated while reading {what}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensors(mut r: impl Read) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("weight file too short"))?;
    if &magic != MAGIC {
        return Err(Error::format("not a weight file (bad magic)"));
    }
    let version = read_u32(&mut r, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported weight format version {version}")));
    }
    let count = read_u32(&mut r, "tensor count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r, "name length")? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|_| Error::format("weight file truncated in tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| Error::format("tensor name is not UTF-8"))?;
        let rank = read_u32(&mut r, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r, "extent")? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::format(format!("weight file truncated in tensor {name:?}")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}
