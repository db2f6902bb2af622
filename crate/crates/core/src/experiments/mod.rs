//! The desk-scale experiments: generalization gap against training-set size,
//! diversity across training epochs, and final diversity across depth.
//!
//! Every experiment is a pure function of its config and data, so its CSV
//! outputs can be regenerated byte-for-byte from an [`ExperimentManifest`].

mod depth;
mod epoch;
mod gap;
mod manifest;
mod stats;
mod svg;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_mnist, make_synthetic, sample_rows, subset, Dataset, InputDigest, SplitSpec, Task};
use crate::error::{Error, Result};
use crate::model::{LossKind, TrainConfig};
use crate::numkit::{ActivationKind, ActivationSpec};
use crate::scalar::Scalar;

pub use depth::{run_depth_sweep, DepthRow, DepthSummaryRow, DepthSweepConfig, DepthSweepResult};
pub use epoch::{run_epoch_tracking, EpochRow, EpochSummaryRow, EpochTrackingConfig, EpochTrackingResult};
pub use gap::{
    run_gap_correlation, CorrelationRow, GapCorrelationConfig, GapCorrelationResult, GapRow, GapSummaryRow,
};
pub use manifest::{ExperimentKind, ExperimentManifest, MANIFEST_FORMAT};
pub use stats::{min_max_scale, pearson, ranks, spearman};
pub use svg::{LineChart, Series};

/// Optimizer and architecture settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub activation: ActivationKind,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.1,
            batch_size: 256,
            loss: LossKind::Mse,
            activation: ActivationKind::Relu,
        }
    }
}

impl TrainSettings {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            loss: self.loss,
            record_every: 1,
            eval_every: 0,
        }
    }

    pub fn activation_spec(&self) -> ActivationSpec {
        ActivationSpec::from(self.activation)
    }

    pub fn validate(&self) -> Result<()> {
        self.config(0).validate()
    }
}

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// The standard MNIST train/test files in `dir`.
    Mnist { dir: PathBuf },
    /// A seeded multiclass problem from [`make_synthetic`], split in order.
    Synthetic {
        train: usize,
        test: usize,
        d_in: usize,
        classes: usize,
        seed: u64,
    },
}

pub struct LoadedData<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub inputs: Vec<InputDigest>,
}

pub fn load_data<T: Scalar>(spec: &DataSpec) -> Result<LoadedData<T>> {
    match spec {
        DataSpec::Mnist { dir } => {
            let (train, test, inputs) = load_mnist(dir)?;
            Ok(LoadedData { train, test, inputs })
        }
        &DataSpec::Synthetic { train, test, d_in, classes, seed } => {
            let all = make_synthetic::<T>(Task::MulticlassClassification, train + test, d_in, classes, seed)?;
            let split = subset(
                &all,
                &SplitSpec {
                    train_size: train,
                    test_size: test,
                    seed,
                    shuffle: false,
                },
            )?;
            Ok(LoadedData {
                train: split.train,
                test: split.test,
                inputs: Vec::new(),
            })
        }
    }
}

/// Progress notifications from a running experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Event<'a> {
    Message(String),
    /// One finished sub-run as a CSV line under `header`.
    Row { header: &'a str, line: String },
}

pub type Observer<'a> = dyn FnMut(Event<'_>) + 'a;

/// The first `size` rows of a seeded permutation, or the whole set when
/// `size` is absent or covers it.
fn training_subset<T: Scalar>(train: &Dataset<T>, size: Option<usize>, seed: u64) -> Result<Dataset<T>> {
    match size {
        Some(n) if n < train.len() => Ok(sample_rows(train, n, seed)?.0),
        Some(n) if n > train.len() => Err(Error::invalid(format!(
            "training size {n} exceeds the {} available samples",
            train.len()
        ))),
        _ => Ok(train.clone()),
    }
}

fn probe_subset<T: Scalar>(train: &Dataset<T>, size: usize, seed: u64) -> Result<Dataset<T>> {
    if size == 0 {
        return Err(Error::invalid("probe_size must be at least 1"));
    }
    if size >= train.len() {
        return Ok(train.clone());
    }
    Ok(sample_rows(train, size, seed)?.0)
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(Error::invalid("seeds must be distinct"));
    }
    Ok(())
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.is_empty() {
        return Err(Error::invalid("at least one width is required"));
    }
    if let Some(w) = widths.iter().find(|&&w| w < 2) {
        return Err(Error::invalid(format!("width {w} is too small; diversity needs at least 2 units")));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".to_string())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_spec_toml_round_trip() {
        let spec = DataSpec::Synthetic { train: 10, test: 5, d_in: 3, classes: 4, seed: 1 };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"source\":\"synthetic\""));
        assert_eq!(serde_json::from_str::<DataSpec>(&json).unwrap(), spec);
        let bad = r#"{"source":"synthetic","train":1,"test":1,"d_in":1,"classes":2,"seed":0,"extra":1}"#;
        assert!(serde_json::from_str::<DataSpec>(bad).is_err());
    }

    #[test]
    fn synthetic_split_sizes() {
        let spec = DataSpec::Synthetic { train: 30, test: 12, d_in: 4, classes: 3, seed: 2 };
        let d = load_data::<f64>(&spec).unwrap();
        assert_eq!((d.train.len(), d.test.len(), d.train.output_dim()), (30, 12, 3));
        assert!(d.inputs.is_empty());
    }

    #[test]
    fn subset_helpers() {
        let spec = DataSpec::Synthetic { train: 30, test: 2, d_in: 2, classes: 2, seed: 0 };
        let d = load_data::<f64>(&spec).unwrap();
        assert_eq!(training_subset(&d.train, None, 0).unwrap().len(), 30);
        assert_eq!(training_subset(&d.train, Some(10), 0).unwrap().len(), 10);
        assert!(training_subset(&d.train, Some(31), 0).is_err());
        assert_eq!(probe_subset(&d.train, 100, 0).unwrap().len(), 30);
        assert!(check_seeds(&[1, 1]).is_err());
        assert!(check_widths(&[1]).is_err());
    }
}
