use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::svg::{LineChart, Series};
use super::{check_seeds, mean, opt, probe_subset, spearman, training_subset, Event, Observer, TrainSettings};
use crate::data::Dataset;
use crate::diversity::estimate_dmin;
use crate::error::{Error, Result};
use crate::model::{init_model, train, MlpModel, ProbeFn};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochTrackingConfig {
    pub width: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    pub seeds: Vec<u64>,
    /// Training samples drawn per seed; absent means the full training set.
    #[serde(default)]
    pub train_size: Option<usize>,
    /// Size of the fixed training subsample on which diversity is measured.
    pub probe_size: usize,
    #[serde(default)]
    pub probe_seed: u64,
    #[serde(default = "default_one")]
    pub record_every: usize,
    #[serde(default = "default_probe_batch")]
    pub probe_batch: usize,
    #[serde(default)]
    pub train: TrainSettings,
}

fn default_depth() -> usize {
    1
}

fn default_one() -> usize {
    1
}

fn default_probe_batch() -> usize {
    1024
}

impl Default for EpochTrackingConfig {
    fn default() -> Self {
        Self {
            width: 256,
            depth: 1,
            seeds: (0..5).collect(),
            train_size: None,
            probe_size: 10_000,
            probe_seed: 0,
            record_every: 1,
            probe_batch: 1024,
            train: TrainSettings::default(),
        }
    }
}

impl EpochTrackingConfig {
    /// The full 100-epoch protocol on a 5000-sample subset with a 2000-sample probe.
    pub fn reduced() -> Self {
        Self {
            train_size: Some(5000),
            probe_size: 2000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_seeds(&self.seeds)?;
        self.train.validate()?;
        if self.width < 2 {
            return Err(Error::invalid("width must be at least 2"));
        }
        if self.depth == 0 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        if self.record_every == 0 || self.probe_size == 0 || self.probe_batch == 0 {
            return Err(Error::invalid("record_every, probe_size and probe_batch must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub train_err: Option<f64>,
    pub diversity: f64,
    pub d_min_sq: f64,
}

impl EpochRow {
    pub const CSV_HEADER: &'static str = "seed,epoch,train_loss,train_err,diversity,d_min_sq";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.seed,
            self.epoch,
            self.train_loss,
            opt(self.train_err),
            self.diversity,
            self.d_min_sq
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummaryRow {
    pub epoch: usize,
    pub mean_diversity: f64,
    pub mean_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrackingResult {
    pub rows: Vec<EpochRow>,
    pub summary: Vec<EpochSummaryRow>,
    /// Spearman(epoch, diversity) for each seed, in config order.
    pub spearman_per_seed: Vec<(u64, Option<f64>)>,
    /// Spearman(epoch, seed-averaged diversity).
    pub spearman_mean_curve: Option<f64>,
}

impl EpochTrackingResult {
    /// Average of the defined per-seed correlations.
    pub fn mean_per_seed_spearman(&self) -> Option<f64> {
        let vals: Vec<f64> = self.spearman_per_seed.iter().filter_map(|(_, s)| *s).collect();
        (!vals.is_empty()).then(|| mean(&vals))
    }

    pub fn rows_csv(&self) -> String {
        let mut s = format!("{}\n", EpochRow::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("epoch,mean_diversity,mean_train_loss\n");
        for r in &self.summary {
            writeln!(s, "{},{},{}", r.epoch, r.mean_diversity, r.mean_train_loss).unwrap();
        }
        s
    }

    pub fn spearman_csv(&self) -> String {
        let mut s = String::from("scope,spearman\n");
        for (seed, v) in &self.spearman_per_seed {
            writeln!(s, "seed:{seed},{}", opt(*v)).unwrap();
        }
        writeln!(s, "mean_curve,{}", opt(self.spearman_mean_curve)).unwrap();
        writeln!(s, "mean_of_seeds,{}", opt(self.mean_per_seed_spearman())).unwrap();
        s
    }

    pub fn svg(&self) -> String {
        let mut series: Vec<Series> = Vec::new();
        series.push(Series {
            name: "mean over seeds".into(),
            points: self.summary.iter().map(|r| (r.epoch as f64, r.mean_diversity)).collect(),
        });
        for (seed, _) in &self.spearman_per_seed {
            series.push(Series {
                name: format!("seed {seed}"),
                points: self
                    .rows
                    .iter()
                    .filter(|r| r.seed == *seed)
                    .map(|r| (r.epoch as f64, r.diversity))
                    .collect(),
            });
        }
        LineChart {
            title: format!("diversity during training, Spearman {}", opt(self.spearman_mean_curve)),
            x_label: "epoch".into(),
            y_label: "last hidden layer diversity".into(),
            series,
        }
        .render()
    }
}

/// Trains one network per seed and measures the last hidden layer's
/// diversity on a fixed probe subsample after every `record_every` epochs.
pub fn run_epoch_tracking<T: Scalar>(
    cfg: &EpochTrackingConfig,
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    observer: &mut Observer<'_>,
) -> Result<EpochTrackingResult> {
    cfg.validate()?;
    let act = cfg.train.activation_spec();
    let last = cfg.depth - 1;
    let mut rows = Vec::new();
    let mut spearman_per_seed = Vec::new();
    for &seed in &cfg.seeds {
        let sub = training_subset(train_set, cfg.train_size, seed)?;
        let probe_set = probe_subset(&sub, cfg.probe_size, cfg.probe_seed)?;
        let mut model = init_model::<T>(&vec![cfg.width; cfg.depth], sub.input_dim(), sub.output_dim(), act, seed)?;
        let mut tc = cfg.train.config(seed);
        tc.record_every = cfg.record_every;
        let batch = cfg.probe_batch;
        let mut probe = |m: &MlpModel<T>, _epoch: usize| estimate_dmin(m, &probe_set, last, batch);
        let record = train(&mut model, &sub, test_set, &tc, Some(&mut probe as &mut ProbeFn<'_, T>))?;
        let mut epochs = Vec::new();
        let mut divs = Vec::new();
        for e in &record.epochs {
            let (Some(diversity), Some(d_min_sq)) = (e.diversity, e.d_min_sq) else { continue };
            let row = EpochRow {
                seed,
                epoch: e.epoch,
                train_loss: e.train_loss,
                train_err: e.train_err,
                diversity,
                d_min_sq,
            };
            observer(Event::Row {
                header: EpochRow::CSV_HEADER,
                line: row.csv_line(),
            });
            epochs.push(e.epoch as f64);
            divs.push(diversity);
            rows.push(row);
        }
        let rho = spearman(&epochs, &divs);
        observer(Event::Message(format!(
            "seed {seed}: final diversity {:.4e}, Spearman {}",
            divs.last().copied().unwrap_or(f64::NAN),
            opt(rho)
        )));
        spearman_per_seed.push((seed, rho));
    }
    let mut summary = Vec::new();
    let mut probe_epochs: Vec<usize> = rows.iter().map(|r| r.epoch).collect();
    probe_epochs.sort_unstable();
    probe_epochs.dedup();
    for epoch in probe_epochs {
        let at: Vec<&EpochRow> = rows.iter().filter(|r| r.epoch == epoch).collect();
        summary.push(EpochSummaryRow {
            epoch,
            mean_diversity: mean(&at.iter().map(|r| r.diversity).collect::<Vec<_>>()),
            mean_train_loss: mean(&at.iter().map(|r| r.train_loss).collect::<Vec<_>>()),
        });
    }
    let xs: Vec<f64> = summary.iter().map(|r| r.epoch as f64).collect();
    let ys: Vec<f64> = summary.iter().map(|r| r.mean_diversity).collect();
    Ok(EpochTrackingResult {
        rows,
        summary,
        spearman_per_seed,
        spearman_mean_curve: spearman(&xs, &ys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{load_data, DataSpec};

    fn setup(epochs: usize, lr: f64) -> (EpochTrackingConfig, Dataset<f64>, Dataset<f64>) {
        let d = load_data::<f64>(&DataSpec::Synthetic { train: 80, test: 20, d_in: 5, classes: 3, seed: 1 }).unwrap();
        let cfg = EpochTrackingConfig {
            width: 6,
            seeds: vec![0, 1],
            probe_size: 40,
            train: TrainSettings { epochs, lr, batch_size: 16, ..TrainSettings::default() },
            ..EpochTrackingConfig::default()
        };
        (cfg, d.train, d.test)
    }

    #[test]
    fn single_epoch_has_no_spearman() {
        let (cfg, tr, te) = setup(1, 0.1);
        let res = run_epoch_tracking(&cfg, &tr, &te, &mut |_| {}).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.spearman_mean_curve, None);
        assert!(res.spearman_csv().contains("mean_curve,n/a"));
    }

    #[test]
    fn frozen_model_has_constant_diversity() {
        let (cfg, tr, te) = setup(4, 0.0);
        let res = run_epoch_tracking(&cfg, &tr, &te, &mut |_| {}).unwrap();
        for seed in [0, 1] {
            let d: Vec<f64> = res.rows.iter().filter(|r| r.seed == seed).map(|r| r.diversity).collect();
            assert_eq!(d.len(), 4);
            assert!(d.iter().all(|&v| v == d[0]));
        }
        assert_eq!(res.spearman_mean_curve, None);
    }

    #[test]
    fn record_every_thins_the_curve() {
        let (mut cfg, tr, te) = setup(6, 0.1);
        cfg.record_every = 3;
        let res = run_epoch_tracking(&cfg, &tr, &te, &mut |_| {}).unwrap();
        assert_eq!(res.summary.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![3, 6]);
        assert_eq!(res.rows_csv(), run_epoch_tracking(&cfg, &tr, &te, &mut |_| {}).unwrap().rows_csv());
    }
}
