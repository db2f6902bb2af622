//! TOML run configs, data-source resolution and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use featdiv::experiments::{DataSpec, DepthSweepConfig, EpochTrackingConfig, ExperimentKind, GapCorrelationConfig};
use featdiv::model::TrainConfig;
use featdiv::numkit::ActivationKind;

use crate::error::{CliError, CliResult};

pub const DATA_DIR_ENV: &str = "FEATDIV_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/mnist";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            _ => Err(CliError::usage(format!("unknown precision `{s}`"))),
        }
    }
}

/// The `[data]` table. `source` is `mnist` (default) or `synthetic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_source() -> String {
    "mnist".to_string()
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: default_source(),
            dir: None,
            train: None,
            test: None,
            d_in: None,
            classes: None,
            seed: None,
        }
    }
}

/// The MNIST directory: the flag, then the config, then the environment, then `data/mnist`.
pub fn mnist_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| configured.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    std::fs::canonicalize(&dir).unwrap_or(dir)
}

impl DataSection {
    pub fn resolve(&self, dir_flag: Option<&Path>) -> CliResult<DataSpec> {
        match self.source.as_str() {
            "mnist" => Ok(DataSpec::Mnist {
                dir: mnist_dir(dir_flag, self.dir.as_deref()),
            }),
            "synthetic" => {
                let need = |v: Option<usize>, name: &str| {
                    v.ok_or_else(|| CliError::usage(format!("[data] source = \"synthetic\" needs `{name}`")))
                };
                Ok(DataSpec::Synthetic {
                    train: need(self.train, "train")?,
                    test: need(self.test, "test")?,
                    d_in: need(self.d_in, "d_in")?,
                    classes: need(self.classes, "classes")?,
                    seed: self.seed.unwrap_or(0),
                })
            }
            other => Err(CliError::usage(format!(
                "[data] source: unknown source `{other}`, expected `mnist` or `synthetic`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub widths: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
    /// Bias terms are off by default; the bounds assume a bias-free network.
    #[serde(default)]
    pub bias: bool,
}

fn default_activation() -> ActivationKind {
    ActivationKind::Relu
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            widths: vec![256],
            activation: ActivationKind::Relu,
            bias: false,
        }
    }
}

/// Which training rows are used and how labels are encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SubsetSection {
    /// Training rows drawn with `seed`; absent means all of them.
    pub train_size: Option<usize>,
    pub seed: u64,
    /// Keep two classes and relabel them -1 / +1.
    pub binarize: Option<[u32; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeOn {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Hidden layer to probe; absent means the last one.
    pub layer: Option<usize>,
    pub size: usize,
    pub seed: u64,
    pub batch: usize,
    pub on: ProbeOn,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            layer: None,
            size: 10_000,
            seed: 0,
            batch: 1024,
            on: ProbeOn::Train,
        }
    }
}

/// A `featdiv train` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub subset: SubsetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub probe: ProbeSection,
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("invalid config {}: {e}", path.display()))
}

pub fn load_train_file(path: Option<&Path>) -> CliResult<TrainFile> {
    match path {
        None => Ok(TrainFile::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| config_error(p, e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// The full protocol.
    Paper,
    /// The shortened protocol used by the acceptance suite.
    Reduced,
}

/// A `featdiv experiment` config file. The `[experiment]` table overrides
/// individual fields of the chosen preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub kind: Option<String>,
    pub preset: Option<Preset>,
    pub precision: Option<Precision>,
    pub data: Option<DataSection>,
    pub experiment: Option<toml::Table>,
}

pub fn load_experiment_file(path: Option<&Path>) -> CliResult<ExperimentFile> {
    match path {
        None => Ok(ExperimentFile::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| config_error(p, e)),
    }
}

pub fn preset_value(kind: ExperimentKind, preset: Preset) -> CliResult<Value> {
    let v = match (kind, preset) {
        (ExperimentKind::GapCorrelation, Preset::Paper) => serde_json::to_value(GapCorrelationConfig::default()),
        (ExperimentKind::GapCorrelation, Preset::Reduced) => serde_json::to_value(GapCorrelationConfig::reduced()),
        (ExperimentKind::EpochTracking, Preset::Paper) => serde_json::to_value(EpochTrackingConfig::default()),
        (ExperimentKind::EpochTracking, Preset::Reduced) => serde_json::to_value(EpochTrackingConfig::reduced()),
        (ExperimentKind::DepthSweep, Preset::Paper) => serde_json::to_value(DepthSweepConfig::default()),
        (ExperimentKind::DepthSweep, Preset::Reduced) => serde_json::to_value(DepthSweepConfig::reduced()),
        (ExperimentKind::Train, _) => return Err(CliError::usage("train runs have no presets")),
    };
    Ok(v?)
}

/// Recursively overlays `patch` onto `base`; tables merge, everything else replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets a dotted key such as `train.epochs`.
pub fn set_path(base: &mut Value, path: &str, value: Value) {
    let mut patch = value;
    for key in path.rsplit('.') {
        let mut m = serde_json::Map::new();
        m.insert(key.to_string(), patch);
        patch = Value::Object(m);
    }
    merge(base, patch);
}

pub fn decode<C: serde::de::DeserializeOwned>(value: Value, origin: &str) -> CliResult<C> {
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid [experiment] settings ({origin}): {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_nested() {
        let mut base = serde_json::json!({"a": 1, "train": {"epochs": 100, "lr": 0.1}});
        merge(&mut base, serde_json::json!({"train": {"epochs": 5}, "b": [1]}));
        assert_eq!(base, serde_json::json!({"a": 1, "b": [1], "train": {"epochs": 5, "lr": 0.1}}));
        set_path(&mut base, "train.lr", serde_json::json!(0.5));
        assert_eq!(base["train"]["lr"], 0.5);
    }

    #[test]
    fn unknown_train_field_names_the_field() {
        let err = toml::from_str::<TrainFile>("[train]\nlrr = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("lrr"), "{err}");
    }

    #[test]
    fn partial_train_table_uses_defaults() {
        let f: TrainFile = toml::from_str("[train]\nepochs = 3\n[model]\nwidths = [8]\n").unwrap();
        assert_eq!(f.train.epochs, 3);
        assert_eq!(f.train.lr, 0.1);
        assert_eq!(f.model.activation, ActivationKind::Relu);
    }

    #[test]
    fn synthetic_needs_sizes() {
        let d = DataSection {
            source: "synthetic".into(),
            ..DataSection::default()
        };
        assert!(d.resolve(None).unwrap_err().message.contains("train"));
    }
}
