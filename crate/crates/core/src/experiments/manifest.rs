use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataSpec;
use crate::data::InputDigest;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "featdiv-manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Train,
    GapCorrelation,
    EpochTracking,
    DepthSweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::GapCorrelation => "gap-correlation",
            ExperimentKind::EpochTracking => "epoch-tracking",
            ExperimentKind::DepthSweep => "depth-sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::Train,
            ExperimentKind::GapCorrelation,
            ExperimentKind::EpochTracking,
            ExperimentKind::DepthSweep,
        ]
        .into_iter()
        .find(|k| k.as_str() == s.trim())
        .ok_or_else(|| Error::invalid(format!("unknown experiment kind `{s}`")))
    }
}

/// Everything needed to regenerate a run directory's CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub format: String,
    pub kind: ExperimentKind,
    pub tool_version: String,
    pub timestamp: String,
    pub seeds: Vec<u64>,
    /// Scalar type used for training, `f64` or `f32`.
    pub precision: String,
    pub data: DataSpec,
    /// The full experiment config as it was run.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    /// Digests of the CSV files written next to the manifest.
    pub outputs: Vec<InputDigest>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ExperimentManifest {
    pub fn new(
        kind: ExperimentKind,
        timestamp: impl Into<String>,
        seeds: Vec<u64>,
        precision: &str,
        data: DataSpec,
        config: serde_json::Value,
    ) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            kind,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp.into(),
            seeds,
            precision: precision.to_string(),
            data,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::invalid(format!(
                "not a run manifest: format is `{}`, expected `{MANIFEST_FORMAT}`",
                m.format
            )));
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// Decodes the echoed config as the given experiment config type.
    pub fn config_as<C: serde::de::DeserializeOwned>(&self) -> Result<C> {
        Ok(serde_json::from_value(self.config.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let data = DataSpec::Synthetic { train: 4, test: 2, d_in: 2, classes: 2, seed: 0 };
        let mut m = ExperimentManifest::new(
            ExperimentKind::DepthSweep,
            "2026-01-01T00:00:00Z",
            vec![0, 1],
            "f64",
            data,
            serde_json::json!({"depths": [1, 2]}),
        );
        m.notes.push("note".into());
        let back = ExperimentManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(ExperimentManifest::from_json(&m.to_json().unwrap().replace(MANIFEST_FORMAT, "other")).is_err());
    }

    #[test]
    fn kind_names() {
        assert_eq!("gap-correlation".parse::<ExperimentKind>().unwrap(), ExperimentKind::GapCorrelation);
        assert!("gap".parse::<ExperimentKind>().is_err());
    }
}
