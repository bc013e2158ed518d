//! Parameter snapshots: a JSON manifest beside a raw little-endian f64 dump.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{CdrModel, ModelSpec, Phase};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset into the dump, in values.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub phase: Phase,
    pub epoch: usize,
    pub seed: u64,
    pub spec: ModelSpec,
    pub tensors: Vec<TensorEntry>,
    pub data_file: String,
}

fn paths(dir: &Path, tag: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{tag}.json")), dir.join(format!("{tag}.bin")))
}

/// Writes `<tag>.json` and `<tag>.bin` under `dir`.
pub fn save_checkpoint(
    model: &CdrModel,
    dir: &Path,
    tag: &str,
    phase: Phase,
    epoch: usize,
    seed: u64,
    config_hash: &str,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (manifest_path, data_path) = paths(dir, tag);
    let mut tensors = Vec::new();
    let mut bytes = Vec::with_capacity(model.store.num_scalars() * 8);
    let mut offset = 0;
    for id in model.store.ids() {
        let v = model.store.get(id);
        tensors.push(TensorEntry {
            name: model.store.name(id).to_string(),
            rows: v.rows(),
            cols: v.cols(),
            offset,
        });
        offset += v.len();
        for x in v.as_slice() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        phase,
        epoch,
        seed,
        spec: model.spec,
        tensors,
        data_file: format!("{tag}.bin"),
    };
    std::fs::write(&data_path, bytes)?;
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    std::fs::write(&manifest_path, json)?;
    Ok(manifest_path)
}

/// Rebuilds a model from a manifest path.
pub fn load_checkpoint(manifest_path: &Path) -> Result<(CdrModel, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bytes = std::fs::read(dir.join(&manifest.data_file))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!("data file length {} is not a multiple of 8", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut model = CdrModel::new(manifest.spec, manifest.seed);
    if model.store.len() != manifest.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model expects {}",
            manifest.tensors.len(),
            model.store.len()
        )));
    }
    for t in &manifest.tensors {
        let id = model
            .store
            .find(&t.name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown tensor '{}'", t.name)))?;
        let dst = model.store.get_mut(id);
        if dst.shape() != (t.rows, t.cols) {
            return Err(Error::Checkpoint(format!(
                "tensor '{}' is {}x{} in the checkpoint but {:?} in the model",
                t.name,
                t.rows,
                t.cols,
                dst.shape()
            )));
        }
        let src = values
            .get(t.offset..t.offset + t.rows * t.cols)
            .ok_or_else(|| Error::Checkpoint(format!("tensor '{}' runs past the data file", t.name)))?;
        dst.as_mut_slice().copy_from_slice(src);
    }
    if !model.store.is_finite() {
        return Err(Error::Checkpoint("checkpoint holds non-finite values".into()));
    }
    Ok((model, manifest))
}
