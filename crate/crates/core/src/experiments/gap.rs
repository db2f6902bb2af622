use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::svg::{LineChart, Series};
use super::{
    check_seeds, check_widths, mean, min_max_scale, opt, pearson, training_subset, Event, Observer, TrainSettings,
};
use crate::bounds::{
    bound_thm2_hinge, bound_thm3_logistic, bound_thm4_multivariate, bound_thm5_crossentropy, estimate_constants,
    scaling_proxy, BoundReport, ConstantsReport, DEFAULT_DELTA,
};
use crate::data::Dataset;
use crate::diversity::estimate_dmin;
use crate::error::{Error, Result};
use crate::model::{init_model, train, LossKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapCorrelationConfig {
    pub widths: Vec<usize>,
    pub train_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_probe_batch")]
    pub probe_batch: usize,
    #[serde(default)]
    pub train: TrainSettings,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_probe_batch() -> usize {
    1024
}

impl Default for GapCorrelationConfig {
    fn default() -> Self {
        Self {
            widths: vec![128, 256, 512],
            train_sizes: vec![1000, 2500, 5000, 10000, 20000, 40000, 60000],
            seeds: (0..5).collect(),
            delta: DEFAULT_DELTA,
            probe_batch: 1024,
            train: TrainSettings::default(),
        }
    }
}

impl GapCorrelationConfig {
    /// 25 epochs, three seeds and training sizes from 500 to 8000.
    pub fn reduced() -> Self {
        Self {
            train_sizes: vec![500, 1000, 2000, 4000, 8000],
            seeds: vec![0, 1, 2],
            train: TrainSettings {
                epochs: 25,
                ..TrainSettings::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_widths(&self.widths)?;
        check_seeds(&self.seeds)?;
        self.train.validate()?;
        let mut sizes = self.train_sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.len() < 2 || sizes.len() != self.train_sizes.len() {
            return Err(Error::invalid(
                "train_sizes needs at least two distinct sizes; the correlation is undefined otherwise",
            ));
        }
        if sizes[0] == 0 {
            return Err(Error::invalid("train sizes must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if self.probe_batch == 0 {
            return Err(Error::invalid("probe_batch must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub width: usize,
    pub train_size: usize,
    pub seed: u64,
    pub train_err: f64,
    pub test_err: f64,
    pub gap: f64,
    pub diversity: f64,
    pub d_min_sq: f64,
    pub c5_sq: f64,
    pub proxy: f64,
    pub bound: String,
    pub bound_total: f64,
}

impl GapRow {
    pub const CSV_HEADER: &'static str =
        "width,train_size,seed,train_err,test_err,gap,diversity,d_min_sq,c5_sq,proxy,bound,bound_total";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.width,
            self.train_size,
            self.seed,
            self.train_err,
            self.test_err,
            self.gap,
            self.diversity,
            self.d_min_sq,
            self.c5_sq,
            self.proxy,
            self.bound,
            self.bound_total
        )
    }
}

/// Seed-averaged values for one (width, size) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummaryRow {
    pub width: usize,
    pub train_size: usize,
    pub mean_gap: f64,
    pub mean_proxy: f64,
    /// `mean_proxy` mapped affinely onto the range of `mean_gap` for this width.
    pub scaled_proxy: f64,
    pub mean_d_min_sq: f64,
    pub mean_bound_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub width: usize,
    /// `mean` for the seed-averaged curve, `seed:<s>` for a single seed.
    pub scope: String,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCorrelationResult {
    pub rows: Vec<GapRow>,
    pub summary: Vec<GapSummaryRow>,
    pub correlations: Vec<CorrelationRow>,
}

impl GapCorrelationResult {
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{}\n", GapRow::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("width,train_size,mean_gap,mean_proxy,scaled_proxy,mean_d_min_sq,mean_bound_total\n");
        for r in &self.summary {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.width, r.train_size, r.mean_gap, r.mean_proxy, r.scaled_proxy, r.mean_d_min_sq, r.mean_bound_total
            )
            .unwrap();
        }
        s
    }

    pub fn correlations_csv(&self) -> String {
        let mut s = String::from("width,scope,pearson\n");
        for r in &self.correlations {
            writeln!(s, "{},{},{}", r.width, r.scope, opt(r.pearson)).unwrap();
        }
        s
    }

    /// Pearson correlation of the seed-averaged curves for `width`.
    pub fn pearson_for(&self, width: usize) -> Option<f64> {
        self.correlations
            .iter()
            .find(|c| c.width == width && c.scope == "mean")
            .and_then(|c| c.pearson)
    }

    /// Gap and min-max scaled proxy against training size for one width.
    pub fn svg(&self, width: usize) -> String {
        let cells: Vec<&GapSummaryRow> = self.summary.iter().filter(|r| r.width == width).collect();
        let r = self.pearson_for(width).map(|p| format!("{p:.4}")).unwrap_or_else(|| "n/a".into());
        LineChart {
            title: format!("width {width}: gap vs scaled (C5^2 - d_min^2)/sqrt(N), r = {r}"),
            x_label: "training samples N".into(),
            y_label: "test error - train error".into(),
            series: vec![
                Series {
                    name: "generalization gap".into(),
                    points: cells.iter().map(|c| (c.train_size as f64, c.mean_gap)).collect(),
                },
                Series {
                    name: "scaled proxy".into(),
                    points: cells.iter().map(|c| (c.train_size as f64, c.scaled_proxy)).collect(),
                },
            ],
        }
        .render()
    }
}

/// The bound matching the training loss: the multivariate squared-loss bound
/// (the one-output case coincides with the scalar one), the cross-entropy
/// bound, or the hinge and logistic bounds for binary tasks.
fn bound_for_loss(loss: LossKind, c: &ConstantsReport, d: f64, n: usize, delta: f64) -> Result<BoundReport> {
    match loss {
        LossKind::Mse => bound_thm4_multivariate(c, d, n, delta, c.d_out),
        LossKind::CrossEntropy => bound_thm5_crossentropy(c, d, n, delta, c.d_out),
        LossKind::Hinge => bound_thm2_hinge(c, d, n, delta),
        LossKind::Logistic => bound_thm3_logistic(c, d, n, delta),
    }
}

/// Trains one single-hidden-layer network per (width, size, seed), in that
/// order, and correlates the seed-averaged gap with the seed-averaged proxy
/// `(C5^2 - d_min^2)/sqrt(N)` across sizes.
///
/// `d_min^2` and the constants are measured on each run's own training subset.
pub fn run_gap_correlation<T: Scalar>(
    cfg: &GapCorrelationConfig,
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    observer: &mut Observer<'_>,
) -> Result<GapCorrelationResult> {
    cfg.validate()?;
    if !train_set.task().is_classification() {
        return Err(Error::invalid("the gap experiment needs a classification dataset"));
    }
    let act = cfg.train.activation_spec();
    let mut rows = Vec::new();
    for &width in &cfg.widths {
        for &size in &cfg.train_sizes {
            for &seed in &cfg.seeds {
                let sub = training_subset(train_set, Some(size), seed)?;
                let mut model = init_model::<T>(&[width], sub.input_dim(), sub.output_dim(), act, seed)?;
                let record = train(&mut model, &sub, test_set, &cfg.train.config(seed), None)?;
                let train_err = record.final_train.error.unwrap_or(f64::NAN);
                let test_err = record.final_test.error.unwrap_or(f64::NAN);
                let div = estimate_dmin(&model, &sub, 0, cfg.probe_batch)?;
                let consts = estimate_constants(&model, &sub)?;
                let bound = bound_for_loss(cfg.train.loss, &consts, div.d_min_sq, sub.len(), cfg.delta)?;
                let row = GapRow {
                    width,
                    train_size: sub.len(),
                    seed,
                    train_err,
                    test_err,
                    gap: test_err - train_err,
                    diversity: div.dataset_diversity,
                    d_min_sq: div.d_min_sq,
                    c5_sq: consts.c5_sq(),
                    proxy: scaling_proxy(&consts, div.d_min_sq, sub.len()),
                    bound: bound.theorem.to_string(),
                    bound_total: bound.total,
                };
                observer(Event::Message(format!(
                    "width {width} N {size} seed {seed}: train_err {train_err:.4} test_err {test_err:.4} d_min^2 {:.4e} proxy {:.4}",
                    row.d_min_sq, row.proxy
                )));
                observer(Event::Row {
                    header: GapRow::CSV_HEADER,
                    line: row.csv_line(),
                });
                rows.push(row);
            }
        }
    }
    Ok(summarize(cfg, rows))
}

fn summarize(cfg: &GapCorrelationConfig, rows: Vec<GapRow>) -> GapCorrelationResult {
    let mut summary = Vec::new();
    let mut correlations = Vec::new();
    for &width in &cfg.widths {
        let cell = |size: usize| -> Vec<&GapRow> {
            rows.iter().filter(|r| r.width == width && r.train_size == size).collect()
        };
        let pick = |rs: &[&GapRow], f: fn(&GapRow) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
        let mut gaps = Vec::new();
        let mut proxies = Vec::new();
        let mut partial = Vec::new();
        for &size in &cfg.train_sizes {
            let rs = cell(size);
            let g = pick(&rs, |r| r.gap);
            let p = pick(&rs, |r| r.proxy);
            gaps.push(g);
            proxies.push(p);
            partial.push((size, g, p, pick(&rs, |r| r.d_min_sq), pick(&rs, |r| r.bound_total)));
        }
        let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled = min_max_scale(&proxies, lo, hi);
        for ((size, g, p, d, b), s) in partial.into_iter().zip(scaled) {
            summary.push(GapSummaryRow {
                width,
                train_size: size,
                mean_gap: g,
                mean_proxy: p,
                scaled_proxy: s,
                mean_d_min_sq: d,
                mean_bound_total: b,
            });
        }
        correlations.push(CorrelationRow {
            width,
            scope: "mean".into(),
            pearson: pearson(&proxies, &gaps),
        });
        for &seed in &cfg.seeds {
            let per: Vec<&GapRow> = rows.iter().filter(|r| r.width == width && r.seed == seed).collect();
            let x: Vec<f64> = per.iter().map(|r| r.proxy).collect();
            let y: Vec<f64> = per.iter().map(|r| r.gap).collect();
            correlations.push(CorrelationRow {
                width,
                scope: format!("seed:{seed}"),
                pearson: pearson(&x, &y),
            });
        }
    }
    GapCorrelationResult {
        rows,
        summary,
        correlations,
    }
}
