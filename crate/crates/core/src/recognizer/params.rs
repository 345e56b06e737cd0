//! Named parameter storage and the checkpoint file format.
//!
//! A checkpoint is the magic `INVZCKPT`, a little-endian `u64` header
//! length, a JSON header, then the tensors as little-endian `f32`:
//!
//! ```json
//! {"metadata": {...}, "tensors": [{"name": "embed.weight", "shape": [67, 64], "offset": 0}]}
//! ```
//!
//! `offset` counts bytes from the start of the data section.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashMap;
use std::path::Path;

const MAGIC: &[u8; 8] = b"INVZCKPT";

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    /// Buffers such as batch-norm running statistics are not trained.
    pub trainable: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: Value,
    tensors: Vec<TensorHeader>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry { name, tensor, trainable });
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> &ParamEntry {
        &self.entries[i]
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.entries[i].tensor
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].tensor
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.tensor.len()).sum()
    }

    pub fn to_checkpoint_bytes(&self, metadata: &Value) -> Vec<u8> {
        let mut tensors = Vec::with_capacity(self.entries.len());
        let mut offset = 0;
        for e in &self.entries {
            tensors.push(TensorHeader {
                name: e.name.clone(),
                shape: e.tensor.shape().to_vec(),
                offset,
            });
            offset += 4 * e.tensor.len();
        }
        let header = serde_json::to_vec(&Header {
            metadata: metadata.clone(),
            tensors,
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for e in &self.entries {
            for &v in e.tensor.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Reads every tensor of a checkpoint, in file order, plus its metadata.
    pub fn read_checkpoint_bytes(bytes: &[u8]) -> Result<(Value, Vec<(String, Tensor)>)> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let data_start = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(&bytes[16..data_start]).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let data = &bytes[data_start..];
        let mut out = Vec::with_capacity(header.tensors.len());
        for t in header.tensors {
            let n: usize = t.shape.iter().product();
            let end = t.offset.checked_add(4 * n).filter(|&e| e <= data.len());
            let Some(end) = end else {
                return Err(Error::Checkpoint(format!("tensor {} runs past the end of the file", t.name)));
            };
            let values = data[t.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            out.push((t.name, Tensor::new(&t.shape, values)?));
        }
        Ok((header.metadata, out))
    }

    /// Overwrites every parameter from checkpoint tensors, matching by name
    /// and shape.
    pub fn load_tensors(&mut self, tensors: Vec<(String, Tensor)>) -> Result<()> {
        let mut seen = vec![false; self.entries.len()];
        for (name, t) in tensors {
            let i = self
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
            if self.entries[i].tensor.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name}: shape {:?} does not match model {:?}",
                    t.shape(),
                    self.entries[i].tensor.shape()
                )));
            }
            self.entries[i].tensor = t;
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Checkpoint(format!("missing tensor {}", self.entries[i].name)));
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>, metadata: &Value) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes(metadata))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let mut s = ParamStore::new();
        s.add("a.weight", Tensor::new(&[2, 2], vec![1.0, -2.5, 0.125, 3.0]).unwrap(), true);
        s.add("a.running_mean", Tensor::new(&[3], vec![0.5, 0.25, 0.0]).unwrap(), false);
        let meta = serde_json::json!({"d_model": 8});
        let bytes = s.to_checkpoint_bytes(&meta);
        assert_eq!(&bytes[..8], MAGIC);
        let (m, tensors) = ParamStore::read_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(m, meta);
        let mut t = s.clone();
        t.tensor_mut(0).data_mut()[0] = 9.0;
        t.load_tensors(tensors).unwrap();
        assert_eq!(t, s);
    }

    #[test]
    fn checkpoint_errors() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[2]), true);
        let bytes = s.to_checkpoint_bytes(&Value::Null);
        assert!(ParamStore::read_checkpoint_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(ParamStore::read_checkpoint_bytes(b"not a checkpoint").is_err());
        let mut other = ParamStore::new();
        other.add("w", Tensor::zeros(&[3]), true);
        let (_, tensors) = ParamStore::read_checkpoint_bytes(&bytes).unwrap();
        assert!(other.load_tensors(tensors).is_err());
    }
}
