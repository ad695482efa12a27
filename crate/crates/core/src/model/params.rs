//! Flat named-parameter storage, tape insertion, and checkpoint files.
//!
//! Checkpoints are a little-endian `f64` blob plus a JSON manifest listing
//! name, shape, and byte offset per tensor, so they can be read back without
//! the model that wrote them.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, TensorId};

/// Ordered collection of named learnable tensors.
#[derive(Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Registers a tensor and returns its stable index.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        self.entries.push((name.into(), tensor));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.entries[idx].0
    }

    pub fn tensor(&self, idx: usize) -> &Tensor {
        &self.entries[idx].1
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].1
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Inserts every tensor as a gradient-requiring leaf, in index order.
    pub fn insert_leaves(&self, tape: &mut Tape) -> Vec<TensorId> {
        self.entries
            .iter()
            .map(|(_, t)| tape.leaf(t.clone()))
            .collect()
    }

    /// Gradients in index order after a backward pass; parameters the loss
    /// never touched yield zero tensors of matching shape.
    pub fn collect_grads(&self, tape: &Tape, ids: &[TensorId]) -> Vec<Tensor> {
        self.entries
            .iter()
            .zip(ids)
            .map(|((_, t), &id)| match tape.grad(id) {
                Some(g) => g.clone(),
                None => Tensor::zeros(t.rows(), t.cols()),
            })
            .collect()
    }

    /// True when every entry of every tensor is finite; otherwise the name
    /// of the first offender.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, t)| !t.is_finite())
            .map(|(n, _)| n.as_str())
    }
}

/// Xavier-uniform initialization, optionally damped; `gain < 1` keeps early
/// attention logits out of softmax saturation.
pub fn xavier(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = gain * (6.0 / (rows + cols) as f64).sqrt();
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = (rng.random::<f64>() * 2.0 - 1.0) * limit;
    }
    t
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<ManifestEntry>,
}

/// Writes `checkpoint.json` and `checkpoint.bin` into `dir`.
pub fn save_checkpoint(params: &ParamSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut manifest = Manifest { tensors: vec![] };
    let mut blob: Vec<u8> = Vec::new();
    for (name, tensor) in params.iter() {
        manifest.tensors.push(ManifestEntry {
            name: name.to_string(),
            rows: tensor.rows(),
            cols: tensor.cols(),
            offset: blob.len(),
        });
        for v in tensor.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest_path = dir.join("checkpoint.json");
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::validation(e.to_string()))?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::Io {
        path: manifest_path.display().to_string(),
        source: e,
    })?;
    let bin_path = dir.join("checkpoint.bin");
    fs::write(&bin_path, blob).map_err(|e| Error::Io {
        path: bin_path.display().to_string(),
        source: e,
    })
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<ParamSet> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("checkpoint.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::Io {
        path: manifest_path.display().to_string(),
        source: e,
    })?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::validation(e.to_string()))?;
    let bin_path = dir.join("checkpoint.bin");
    let blob = fs::read(&bin_path).map_err(|e| Error::Io {
        path: bin_path.display().to_string(),
        source: e,
    })?;
    let mut params = ParamSet::new();
    for entry in manifest.tensors {
        let count = entry.rows * entry.cols;
        let end = entry.offset + count * 8;
        if end > blob.len() {
            return Err(Error::validation(format!(
                "checkpoint blob too short for tensor {}",
                entry.name
            )));
        }
        let data: Vec<f64> = blob[entry.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.add(entry.name, Tensor::from_vec(entry.rows, entry.cols, data));
    }
    Ok(params)
}
