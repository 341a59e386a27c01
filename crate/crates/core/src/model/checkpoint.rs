//! Checkpoint files.
//!
//! Layout: magic `PDEEGCKP`, `u32` LE version, `u32` LE manifest length, a
//! JSON manifest (config, tensor index, training metadata), then one record
//! per tensor: `u32` rank, `rank × u64` dims, `f64` LE values. Batch-norm
//! running statistics follow the parameters as `[C]` records named
//! `<layer>.running_mean` / `.running_var`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HybridConfig, HybridModel, ModelError, RunningStats};
use crate::autodiff::Tensor;

pub const MAGIC: &[u8; 8] = b"PDEEGCKP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config: HybridConfig,
    tensors: Vec<TensorEntry>,
    metadata: serde_json::Value,
}

/// A model plus free-form metadata (fold, seed, epoch...).
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: HybridModel,
    pub metadata: serde_json::Value,
}

fn err(path: &Path, reason: impl Into<String>) -> ModelError {
    ModelError::Checkpoint {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn encode_checkpoint(model: &HybridModel, metadata: &serde_json::Value) -> Vec<u8> {
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = model
        .params
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec(), t.value.data()))
        .collect();
    let bn_names = model.params.names().iter().filter_map(|n| n.strip_suffix(".gamma"));
    for (name, r) in bn_names.zip(&model.running) {
        tensors.push((format!("{name}.running_mean"), vec![r.mean.len()], &r.mean));
        tensors.push((format!("{name}.running_var"), vec![r.var.len()], &r.var));
    }
    let manifest = Manifest {
        config: model.config.clone(),
        tensors: tensors
            .iter()
            .map(|(n, s, _)| TensorEntry {
                name: n.clone(),
                shape: s.clone(),
            })
            .collect(),
        metadata: metadata.clone(),
    };
    let mj = serde_json::to_vec(&manifest).expect("manifest serialises");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(mj.len() as u32).to_le_bytes());
    out.extend_from_slice(&mj);
    for (_, shape, data) in &tensors {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape.iter() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in data.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &HybridModel, metadata: &serde_json::Value, path: &Path) -> Result<(), ModelError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| err(path, e.to_string()))?;
    }
    std::fs::write(path, encode_checkpoint(model, metadata)).map_err(|e| err(path, e.to_string()))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len())?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Decode a checkpoint. When `expected` is given its config must match.
pub fn decode_checkpoint(bytes: &[u8], path: &Path, expected: Option<&HybridConfig>) -> Result<Checkpoint, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(&MAGIC[..]) {
        return Err(err(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32().ok_or_else(|| err(path, "truncated"))?;
    if version != VERSION {
        return Err(err(path, format!("unsupported version {version}")));
    }
    let mlen = r.u32().ok_or_else(|| err(path, "truncated"))? as usize;
    let mj = r.take(mlen).ok_or_else(|| err(path, "truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(mj).map_err(|e| err(path, e.to_string()))?;
    if let Some(cfg) = expected {
        if *cfg != manifest.config {
            return Err(err(path, "checkpoint config differs from the requested config"));
        }
    }
    let mut model = HybridModel::new(manifest.config.clone(), 0).map_err(|e| err(path, e.to_string()))?;
    let n_params = model.params.len();
    let expected_entries = n_params + 2 * model.running.len();
    if manifest.tensors.len() != expected_entries {
        return Err(err(path, format!("{} tensors, config implies {expected_entries}", manifest.tensors.len())));
    }
    let mut running = Vec::new();
    let mut pending_mean: Option<Vec<f64>> = None;
    for (i, entry) in manifest.tensors.iter().enumerate() {
        let rank = r.u32().ok_or_else(|| err(path, "truncated record"))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64().ok_or_else(|| err(path, "truncated record"))? as usize);
        }
        if shape != entry.shape {
            return Err(err(path, format!("record `{}` shape {shape:?} disagrees with index", entry.name)));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(8 * n).ok_or_else(|| err(path, format!("truncated data for `{}`", entry.name)))?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        if i < n_params {
            if model.params.names()[i] != entry.name || model.params.get(i).shape() != shape.as_slice() {
                return Err(err(path, format!("tensor `{}` {:?} does not fit the config", entry.name, shape)));
            }
            model.params.get_mut(i).value = Tensor::new(shape, data)?;
        } else if let Some(mean) = pending_mean.take() {
            running.push(RunningStats { mean, var: data });
        } else {
            pending_mean = Some(data);
        }
    }
    if r.pos != bytes.len() {
        return Err(err(path, "trailing bytes after last record"));
    }
    model.running = running;
    Ok(Checkpoint {
        model,
        metadata: manifest.metadata,
    })
}

pub fn load_checkpoint(path: &Path, expected: Option<&HybridConfig>) -> Result<Checkpoint, ModelError> {
    let bytes = std::fs::read(path).map_err(|e| err(path, e.to_string()))?;
    decode_checkpoint(&bytes, path, expected)
}
