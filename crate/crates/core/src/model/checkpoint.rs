//! Checkpoint directory: `model.json` (shapes, activation, seed, config echo)
//! plus one flat little-endian `f64` blob per weight matrix and bias vector.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::mlp::MlpModel;
use crate::numkit::{ActivationSpec, Matrix};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "featdiv-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    /// Scalar type the model was trained in; blobs are always `f64`.
    pub scalar: String,
    pub activation: ActivationSpec,
    pub widths: Vec<usize>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub includes_bias: bool,
    pub seed: u64,
    pub layers: Vec<LayerEntry>,
    #[serde(default)]
    pub biases: Vec<LayerEntry>,
    #[serde(default)]
    pub config: serde_json::Value,
}

fn write_blob(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_blob(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::invalid(format!(
            "{}: {} bytes, expected {} f64 values",
            path.display(),
            bytes.len(),
            expected
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn save_checkpoint<T: Scalar>(model: &MlpModel<T>, dir: &Path, config: serde_json::Value) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut layers = Vec::new();
    for (p, w) in model.layer_weights().iter().enumerate() {
        let entry = LayerEntry {
            name: if p == model.depth() { "output".into() } else { format!("hidden{p}") },
            rows: w.rows(),
            cols: w.cols(),
            file: format!("layer{p}.bin"),
        };
        write_blob(&dir.join(&entry.file), w.as_slice().iter().map(|v| v.to_f64_lossy()))?;
        layers.push(entry);
    }
    let mut biases = Vec::new();
    if let Some(bs) = model.biases() {
        for (p, b) in bs.iter().enumerate() {
            let entry = LayerEntry {
                name: format!("bias{p}"),
                rows: b.len(),
                cols: 1,
                file: format!("bias{p}.bin"),
            };
            write_blob(&dir.join(&entry.file), b.iter().map(|v| v.to_f64_lossy()))?;
            biases.push(entry);
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        scalar: T::NAME.into(),
        activation: model.activation(),
        widths: model.widths().to_vec(),
        input_dim: model.input_dim(),
        output_dim: model.output_dim(),
        includes_bias: model.includes_bias(),
        seed: model.seed(),
        layers,
        biases,
        config,
    };
    let path = dir.join("model.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}

pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<(MlpModel<T>, CheckpointManifest)> {
    let path = dir.join("model.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::invalid(format!(
            "{}: format `{}` is not a {CHECKPOINT_FORMAT}",
            path.display(),
            manifest.format
        )));
    }
    let mut weights = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let data = read_blob(&dir.join(&entry.file), entry.rows * entry.cols)?;
        weights.push(Matrix::from_vec(entry.rows, entry.cols, data.into_iter().map(T::lit).collect())?);
    }
    let mut model = MlpModel::from_weights(weights, manifest.activation)?;
    if model.widths() != manifest.widths.as_slice()
        || model.input_dim() != manifest.input_dim
        || model.output_dim() != manifest.output_dim
    {
        return Err(Error::invalid(format!("{}: layer blobs disagree with the recorded shapes", path.display())));
    }
    if manifest.includes_bias {
        let mut bs = Vec::new();
        for entry in &manifest.biases {
            bs.push(read_blob(&dir.join(&entry.file), entry.rows)?.into_iter().map(T::lit).collect());
        }
        model.set_biases(Some(bs))?;
    }
    model.set_seed(manifest.seed);
    Ok((model, manifest))
}
