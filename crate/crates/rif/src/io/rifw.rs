//! The "RIFW" binary tensor container used for network weights and memory
//! banks.
//!
//! Layout, all little-endian:
//!   bytes 0-3   magic `RIFW`
//!   bytes 4-7   version, u32 = 1
//!   bytes 8-11  tensor count, u32
//! then per tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
//! and dim-product f32 values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"RIFW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Self {
        let t = Tensor { name: name.into(), dims, data };
        debug_assert_eq!(t.element_count(), t.data.len());
        t
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

pub fn to_bytes(tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        let name = t.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("tensor name too long: {}", t.name)));
        }
        if t.element_count() != t.data.len() {
            return Err(Error::Shape(format!(
                "tensor {} declares {} elements but stores {}",
                t.name,
                t.element_count(),
                t.data.len()
            )));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(t.dims.len() as u8);
        for &d in &t.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedFormat(format!("rifw version {version}")));
    }
    let count = cur.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let name_len = cur.u16("name length")? as usize;
        let name_bytes = cur.take(name_len, "tensor name")?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| Error::Parse { line: 0, msg: format!("tensor {i} name is not UTF-8") })?
            .to_string();
        let rank = cur.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32("dimension")?);
        }
        let n: usize = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize)).ok_or(
            Error::Parse { line: 0, msg: format!("tensor {name} dimension product overflows") },
        )?;
        let raw = cur.take(n * 4, "tensor values")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor { name, dims, data });
    }
    Ok(tensors)
}

pub fn write(tensors: &[Tensor], path: &Path) -> Result<()> {
    fs::write(path, to_bytes(tensors)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<Tensor>> {
    from_bytes(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated(what.to_string()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let s = self.take(2, what)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let s = self.take(4, what)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_container_golden_bytes() {
        let bytes = to_bytes(&[]).unwrap();
        assert_eq!(bytes, [0x52, 0x49, 0x46, 0x57, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(from_bytes(&bytes).unwrap(), vec![]);
    }

    #[test]
    fn round_trip_preserves_tensors() {
        let tensors = vec![
            Tensor::new("a.w", vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, f32::MIN_POSITIVE, 9.5]),
            Tensor::new("a.b", vec![3], vec![0.1, 0.2, 0.3]),
            Tensor::new("empty", vec![0], vec![]),
        ];
        let bytes = to_bytes(&tensors).unwrap();
        assert_eq!(from_bytes(&bytes).unwrap(), tensors);
    }

    #[test]
    fn bad_magic_is_distinct_error() {
        let mut bytes = to_bytes(&[]).unwrap();
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn unsupported_version_is_distinct_error() {
        let mut bytes = to_bytes(&[]).unwrap();
        bytes[4] = 9;
        assert!(matches!(from_bytes(&bytes), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated_payload_is_distinct_error() {
        let tensors = vec![Tensor::new("t", vec![4], vec![1.0, 2.0, 3.0, 4.0])];
        let bytes = to_bytes(&tensors).unwrap();
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        assert!(matches!(from_bytes(&bytes[..6]), Err(Error::Truncated(_))));
    }

    #[test]
    fn declared_count_beyond_payload_is_truncated() {
        let mut bytes = to_bytes(&[]).unwrap();
        bytes[8] = 2; // claim two tensors, provide none
        assert!(matches!(from_bytes(&bytes), Err(Error::Truncated(_))));
    }
}
