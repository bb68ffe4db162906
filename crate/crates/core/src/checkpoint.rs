//! Binary container of named float64 arrays.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! b"GAITEVO1"
//! u32 array count
//! per array: u32 name length, UTF-8 name, u32 rank, u64 per dimension
//! the data of every array in index order, f64 each
//! ```
//!
//! Integer state (counters, RNG words) is stored bit-cast into f64 slots so
//! the round trip stays exact.

use std::io::{Read, Write};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"GAITEVO1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("truncated or malformed checkpoint: {0}")]
    Malformed(String),
    #[error("missing array {0:?}")]
    Missing(String),
    #[error("array {name:?} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn arrays(&self) -> &[NamedArray] {
        &self.arrays
    }

    /// Adds or replaces an array. Panics if the shape does not match the data.
    pub fn put(&mut self, name: &str, shape: &[usize], data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape mismatch for {name}");
        let arr = NamedArray {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
        };
        match self.arrays.iter_mut().find(|a| a.name == name) {
            Some(slot) => *slot = arr,
            None => self.arrays.push(arr),
        }
    }

    pub fn put_vec(&mut self, name: &str, data: &[f64]) {
        self.put(name, &[data.len()], data.to_vec());
    }

    pub fn put_u64s(&mut self, name: &str, words: &[u64]) {
        self.put_vec(name, &words.iter().map(|w| f64::from_bits(*w)).collect::<Vec<_>>());
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray, CheckpointError> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| CheckpointError::Missing(name.to_string()))
    }

    pub fn data(&self, name: &str) -> Result<&[f64], CheckpointError> {
        Ok(&self.get(name)?.data)
    }

    /// Data of an array that must have exactly `shape`.
    pub fn data_shaped(&self, name: &str, shape: &[usize]) -> Result<&[f64], CheckpointError> {
        let a = self.get(name)?;
        if a.shape != shape {
            return Err(CheckpointError::Shape {
                name: name.to_string(),
                found: a.shape.clone(),
                expected: shape.to_vec(),
            });
        }
        Ok(&a.data)
    }

    pub fn u64s(&self, name: &str) -> Result<Vec<u64>, CheckpointError> {
        Ok(self.data(name)?.iter().map(|v| v.to_bits()).collect())
    }

    pub fn u64(&self, name: &str) -> Result<u64, CheckpointError> {
        self.u64s(name)?
            .first()
            .copied()
            .ok_or_else(|| CheckpointError::Malformed(format!("{name} is empty")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for d in &a.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
        }
        for a in &self.arrays {
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut cur = Cursor {
            bytes,
            pos: MAGIC.len(),
        };
        let count = cur.u32()? as usize;
        let mut index = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| CheckpointError::Malformed("array name is not UTF-8".into()))?
                .to_string();
            let rank = cur.u32()? as usize;
            let shape = (0..rank)
                .map(|_| cur.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            index.push((name, shape));
        }
        let mut arrays = Vec::with_capacity(index.len());
        for (name, shape) in index {
            let n = shape
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .ok_or_else(|| CheckpointError::Malformed(format!("{name} is too large")))?;
            let raw = cur.take(n.checked_mul(8).ok_or_else(|| CheckpointError::Malformed(name.clone()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push(NamedArray { name, shape, data });
        }
        if cur.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes".into()));
        }
        Ok(Self { arrays })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), CheckpointError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Malformed(format!("unexpected end at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
