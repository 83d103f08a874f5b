//! The `OFW1` container.
//!
//! ```text
//! "OFW1"  u16 version  u32 len + UTF-8 architecture  u32 count
//! count × { u32 len + UTF-8 name, u8 rank, rank × u32 extent, f32 payload }
//! ```
//!
//! All integers and floats are little-endian. Tensors are written in name
//! order, always with rank 4. Readers accept ranks 1 to 4 and pad missing
//! trailing extents with 1.

use std::path::Path;

use super::WeightStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"OFW1";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightFile {
    pub arch: String,
    pub store: WeightStore,
}

pub fn encode(arch: &str, store: &WeightStore) -> Vec<u8> {
    let payload: usize = store.iter().map(|(_, t)| t.len() * 4 + 32).sum();
    let mut out = Vec::with_capacity(16 + arch.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, arch);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        put_str(&mut out, name);
        out.push(4);
        for d in t.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(
                    "truncated weight file",
                    self.pos,
                    format!("need {n} bytes for {what}, {} remain", self.bytes.len() - self.pos),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::format("invalid weight file", at, format!("{what} is not UTF-8")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<WeightFile> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format("invalid weight file", 0, format!("bad magic {magic:?}")));
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(
            "unsupported weight file",
            4,
            format!("version {version}, this build reads {FORMAT_VERSION}"),
        ));
    }
    let arch = r.string("architecture name")?;
    let count = r.u32("tensor count")?;
    let mut store = WeightStore::new();
    for i in 0..count {
        let at = r.pos;
        let name = r.string(&format!("name of tensor {i}"))?;
        let rank_at = r.pos;
        let rank = r.u8("rank")? as usize;
        if !(1..=4).contains(&rank) {
            return Err(Error::format(
                "invalid weight file",
                rank_at,
                format!("`{name}` has rank {rank}"),
            ));
        }
        let mut dims = [1usize; 4];
        for d in dims.iter_mut().take(rank) {
            *d = r.u32("extent")? as usize;
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4));
        let Some(nbytes) = numel else {
            return Err(Error::format(
                "invalid weight file",
                rank_at,
                format!("`{name}` extents overflow"),
            ));
        };
        let raw = r.take(nbytes, &format!("payload of `{name}`"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store
            .insert(name.clone(), Tensor::new(dims, data)?)
            .map_err(|e| match e {
                Error::DuplicateWeight(n) => {
                    Error::format("invalid weight file", at, format!("duplicate tensor `{n}`"))
                }
                other => other,
            })?;
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            "invalid weight file",
            r.pos,
            format!("{} trailing bytes", bytes.len() - r.pos),
        ));
    }
    Ok(WeightFile { arch, store })
}

pub fn save_weights(path: impl AsRef<Path>, arch: &str, store: &WeightStore) -> Result<()> {
    std::fs::write(path, encode(arch, store))?;
    Ok(())
}

/// Reads an `OFW1` file. The returned store is frozen.
pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightFile> {
    let bytes = std::fs::read(path)?;
    let mut f = decode(&bytes)?;
    f.store = f.store.freeze();
    Ok(f)
}
