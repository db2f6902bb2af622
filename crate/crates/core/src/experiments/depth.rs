use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::svg::{LineChart, Series};
use super::{check_seeds, check_widths, mean, probe_subset, training_subset, Event, Observer, TrainSettings};
use crate::data::Dataset;
use crate::diversity::estimate_dmin;
use crate::error::{Error, Result};
use crate::model::{init_model, train, LossKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSweepConfig {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train_size: Option<usize>,
    pub probe_size: usize,
    #[serde(default)]
    pub probe_seed: u64,
    #[serde(default = "default_probe_batch")]
    pub probe_batch: usize,
    #[serde(default = "default_train")]
    pub train: TrainSettings,
}

fn default_train() -> TrainSettings {
    TrainSettings {
        loss: LossKind::CrossEntropy,
        ..TrainSettings::default()
    }
}

fn default_probe_batch() -> usize {
    1024
}

impl Default for DepthSweepConfig {
    fn default() -> Self {
        Self {
            depths: (1..=12).collect(),
            widths: vec![256, 512, 1024],
            seeds: (0..5).collect(),
            train_size: None,
            probe_size: 10_000,
            probe_seed: 0,
            probe_batch: 1024,
            train: default_train(),
        }
    }
}

impl DepthSweepConfig {
    /// Depths {1, 4, 8, 12} and widths {256, 512}, trained for 10 epochs on 3000 samples.
    pub fn reduced() -> Self {
        Self {
            depths: vec![1, 4, 8, 12],
            widths: vec![256, 512],
            train_size: Some(3000),
            probe_size: 2000,
            train: TrainSettings {
                epochs: 10,
                ..default_train()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_widths(&self.widths)?;
        check_seeds(&self.seeds)?;
        self.train.validate()?;
        if self.depths.is_empty() || self.depths.contains(&0) {
            return Err(Error::invalid("depths must be non-empty and every depth at least 1"));
        }
        if self.probe_size == 0 || self.probe_batch == 0 {
            return Err(Error::invalid("probe_size and probe_batch must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub width: usize,
    pub depth: usize,
    pub seed: u64,
    pub train_err: f64,
    pub test_err: f64,
    pub diversity: f64,
    pub d_min_sq: f64,
}

impl DepthRow {
    pub const CSV_HEADER: &'static str = "width,depth,seed,train_err,test_err,diversity,d_min_sq";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.width, self.depth, self.seed, self.train_err, self.test_err, self.diversity, self.d_min_sq
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummaryRow {
    pub width: usize,
    pub depth: usize,
    pub mean_diversity: f64,
    pub mean_test_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSweepResult {
    pub rows: Vec<DepthRow>,
    pub summary: Vec<DepthSummaryRow>,
}

impl DepthSweepResult {
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{}\n", DepthRow::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("width,depth,mean_diversity,mean_test_err\n");
        for r in &self.summary {
            writeln!(s, "{},{},{},{}", r.width, r.depth, r.mean_diversity, r.mean_test_err).unwrap();
        }
        s
    }

    pub fn mean_diversity(&self, width: usize, depth: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.width == width && r.depth == depth)
            .map(|r| r.mean_diversity)
    }

    pub fn svg(&self) -> String {
        let mut widths: Vec<usize> = self.summary.iter().map(|r| r.width).collect();
        widths.dedup();
        LineChart {
            title: "final diversity against depth".into(),
            x_label: "hidden layers".into(),
            y_label: "last hidden layer diversity".into(),
            series: widths
                .into_iter()
                .map(|w| Series {
                    name: format!("FCN-{w}"),
                    points: self
                        .summary
                        .iter()
                        .filter(|r| r.width == w)
                        .map(|r| (r.depth as f64, r.mean_diversity))
                        .collect(),
                })
                .collect(),
        }
        .render()
    }
}

/// Trains a width-`w`, depth-`p` network for every (width, depth, seed) and
/// records the last hidden layer's final diversity on a probe subsample.
pub fn run_depth_sweep<T: Scalar>(
    cfg: &DepthSweepConfig,
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    observer: &mut Observer<'_>,
) -> Result<DepthSweepResult> {
    cfg.validate()?;
    let act = cfg.train.activation_spec();
    let mut rows = Vec::new();
    for &width in &cfg.widths {
        for &depth in &cfg.depths {
            for &seed in &cfg.seeds {
                let sub = training_subset(train_set, cfg.train_size, seed)?;
                let probe_set = probe_subset(&sub, cfg.probe_size, cfg.probe_seed)?;
                let mut model = init_model::<T>(&vec![width; depth], sub.input_dim(), sub.output_dim(), act, seed)?;
                let record = train(&mut model, &sub, test_set, &cfg.train.config(seed), None)?;
                let div = estimate_dmin(&model, &probe_set, depth - 1, cfg.probe_batch)?;
                let row = DepthRow {
                    width,
                    depth,
                    seed,
                    train_err: record.final_train.error.unwrap_or(f64::NAN),
                    test_err: record.final_test.error.unwrap_or(f64::NAN),
                    diversity: div.dataset_diversity,
                    d_min_sq: div.d_min_sq,
                };
                observer(Event::Message(format!(
                    "width {width} depth {depth} seed {seed}: diversity {:.4e} test_err {:.4}",
                    row.diversity, row.test_err
                )));
                observer(Event::Row {
                    header: DepthRow::CSV_HEADER,
                    line: row.csv_line(),
                });
                rows.push(row);
            }
        }
    }
    let mut summary = Vec::new();
    for &width in &cfg.widths {
        for &depth in &cfg.depths {
            let at: Vec<&DepthRow> = rows.iter().filter(|r| r.width == width && r.depth == depth).collect();
            summary.push(DepthSummaryRow {
                width,
                depth,
                mean_diversity: mean(&at.iter().map(|r| r.diversity).collect::<Vec<_>>()),
                mean_test_err: mean(&at.iter().map(|r| r.test_err).collect::<Vec<_>>()),
            });
        }
    }
    Ok(DepthSweepResult { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{load_data, DataSpec};

    #[test]
    fn sweep_shapes_and_rejections() {
        let d = load_data::<f64>(&DataSpec::Synthetic { train: 60, test: 20, d_in: 4, classes: 3, seed: 2 }).unwrap();
        let mut cfg = DepthSweepConfig {
            depths: vec![1, 3],
            widths: vec![5],
            seeds: vec![0, 1],
            probe_size: 30,
            train: TrainSettings { epochs: 2, batch_size: 16, ..TrainSettings::default() },
            ..DepthSweepConfig::default()
        };
        let res = run_depth_sweep(&cfg, &d.train, &d.test, &mut |_| {}).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.summary.len(), 2);
        assert!(res.mean_diversity(5, 3).is_some());
        assert_eq!(res.rows_csv(), run_depth_sweep(&cfg, &d.train, &d.test, &mut |_| {}).unwrap().rows_csv());
        cfg.depths = vec![0, 1];
        assert!(run_depth_sweep(&cfg, &d.train, &d.test, &mut |_| {}).is_err());
    }
}
