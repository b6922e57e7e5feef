//! Parameter checkpoints.
//!
//! Layout: one line of compact JSON (the manifest), a `\n`, then every tensor's
//! values as little-endian `f64`, in manifest order. Offsets in the manifest are
//! byte offsets from the first byte after the newline.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const FORMAT: &str = "mssan-checkpoint-v1";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    #[serde(default)]
    metadata: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

pub fn to_bytes(store: &ParamStore, metadata: serde_json::Value) -> Result<Vec<u8>> {
    let mut tensors = Vec::with_capacity(store.len());
    let mut offset = 0;
    for (name, t) in store.iter() {
        tensors.push(Entry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.numel() * 8;
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        metadata,
        tensors,
    };
    let mut out = serde_json::to_vec(&manifest)?;
    out.push(b'\n');
    out.reserve(offset);
    for (_, t) in store.iter() {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    let bad = |msg: String| Error::Checkpoint {
        path: path.to_path_buf(),
        msg,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing manifest line".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..nl])?;
    if manifest.format != FORMAT {
        return Err(bad(format!("unsupported format `{}`", manifest.format)));
    }
    let body = &bytes[nl + 1..];
    let mut store = ParamStore::new();
    for e in manifest.tensors {
        let n: usize = e.shape.iter().product();
        let end = e.offset + n * 8;
        if end > body.len() {
            return Err(bad(format!("tensor `{}` runs past end of file", e.name)));
        }
        let data = body[e.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.insert(e.name, Tensor::new(&e.shape, data)?)?;
    }
    Ok((store, manifest.metadata))
}

pub fn save(path: &Path, store: &ParamStore, metadata: serde_json::Value) -> Result<()> {
    fs::write(path, to_bytes(store, metadata)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes, path)
}
