//! Named-tensor archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CLVT" | u32 version (1) | u32 tensor count
//! per tensor, sorted by name:
//!   u32 name length | UTF-8 name | u32 rank | u64 dim * rank | u8 dtype (0 = f32) | f32 payload
//! u32 CRC32 of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PatchError;

const MAGIC: &[u8; 4] = b"CLVT";
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, PatchError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(PatchError::Format(format!("zero dimension in shape {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(PatchError::Format(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Bitwise equality, so that NaN payloads and signed zeros compare exactly.
    pub fn bits_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Tensors keyed by name; iteration is in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    tensors: BTreeMap<String, Tensor>,
}

/// CRC32 and byte length of a file or buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest {
    pub crc32: u32,
    pub len: u64,
}

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest {
            crc32: crc32fast::hash(bytes),
            len: bytes.len() as u64,
        }
    }

    pub fn of_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Digest::of(&std::fs::read(path)?))
    }
}

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "crc32:{:08x}/{}", self.crc32, self.len)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PatchError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            PatchError::Format(format!("truncated archive at byte {} (wanted {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, PatchError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, PatchError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn bits_eq(&self, other: &Checkpoint) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((na, a), (nb, b))| na == nb && a.bits_eq(b))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tensors.values().map(|t| t.data.len() * 4).sum();
        let mut out = Vec::with_capacity(16 + payload + 64 * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.push(DTYPE_F32);
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PatchError> {
        if bytes.len() < 16 {
            return Err(PatchError::Format("file too short for a checkpoint".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        let mut r = Reader { bytes: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(PatchError::Format("bad magic (not a CLVT checkpoint)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(PatchError::Format(format!("unsupported version {version}")));
        }
        if stored != actual {
            return Err(PatchError::Format(format!(
                "CRC mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        let count = r.u32()? as usize;
        let mut ckpt = Checkpoint::new();
        let mut previous: Option<String> = None;
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| PatchError::Format("tensor name is not UTF-8".into()))?
                .to_string();
            if previous.as_ref().is_some_and(|p| *p >= name) {
                return Err(PatchError::Format(format!("tensor {name:?} out of order or duplicated")));
            }
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let dtype = r.take(1)?[0];
            if dtype != DTYPE_F32 {
                return Err(PatchError::Format(format!("tensor {name:?}: unknown dtype {dtype}")));
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| PatchError::Format(format!("tensor {name:?}: shape overflows")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| PatchError::Format("payload overflows".into()))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            ckpt.insert(name.clone(), Tensor::new(shape, data)?);
            previous = Some(name);
        }
        if r.pos != body.len() {
            return Err(PatchError::Format(format!(
                "{} trailing bytes after the last tensor",
                body.len() - r.pos
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<Digest, PatchError> {
        let bytes = self.to_bytes();
        std::fs::write(path.as_ref(), &bytes).map_err(|e| PatchError::io(path.as_ref(), e))?;
        Ok(Digest::of(&bytes))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PatchError> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| PatchError::io(path.as_ref(), e))?;
        Checkpoint::from_bytes(&bytes)
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert("b", Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, -0.0, f32::MIN_POSITIVE]).unwrap());
        c.insert("a", Tensor::new(vec![1], vec![2.5]).unwrap());
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"CLVT");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert!(back.bits_eq(&c));
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.names().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn layout_of_a_single_scalar() {
        let mut c = Checkpoint::new();
        c.insert("t", Tensor::new(vec![1], vec![1.0]).unwrap());
        let bytes = c.to_bytes();
        let mut expected = b"CLVT".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(b"t");
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.push(0);
        expected.extend(1.0f32.to_le_bytes());
        let crc = crc32fast::hash(&expected);
        expected.extend(crc.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn corrupt_and_truncated_files() {
        let bytes = sample().to_bytes();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(PatchError::Format(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[20] ^= 1;
        assert!(Checkpoint::from_bytes(&flipped).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
    }

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }
}
