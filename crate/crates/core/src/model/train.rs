use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::diversity::DiversityReport;
use crate::error::{Error, Result};
use crate::model::loss::{loss_value, misclassified, LossKind};
use crate::model::mlp::{backward, forward, MlpModel};
use crate::numkit::Rng;
use crate::scalar::Scalar;

/// Plain minibatch SGD settings. Missing fields take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Epochs between diversity probes.
    pub record_every: usize,
    /// Epochs between test-set evaluations; 0 evaluates after the last epoch only.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            batch_size: 256,
            epochs: 100,
            seed: 0,
            loss: LossKind::Mse,
            record_every: 1,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted: it trains a frozen baseline.
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss seen during the epoch, before each update.
    pub train_loss: f64,
    /// Minibatch misclassification rate during the epoch (classification only).
    pub train_err: Option<f64>,
    pub test_err: Option<f64>,
    pub diversity: Option<f64>,
    pub d_min_sq: Option<f64>,
}

/// Loss and error of a frozen model over a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub error: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub probes: Vec<DiversityReport>,
    pub final_train: Evaluation,
    pub final_test: Evaluation,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_err,test_err,diversity,d_min2";

    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.epoch,
                e.train_loss,
                opt(e.train_err),
                opt(e.test_err),
                opt(e.diversity),
                opt(e.d_min_sq)
            )
            .unwrap();
        }
        out
    }

    /// Final test error minus final train error, for classification runs.
    pub fn generalization_gap(&self) -> Option<f64> {
        Some(self.final_test.error? - self.final_train.error?)
    }
}

/// Called with the model and the epoch number after every `record_every` epochs.
pub type ProbeFn<'a, T> = dyn FnMut(&MlpModel<T>, usize) -> Result<DiversityReport> + 'a;

const EVAL_BATCH: usize = 1024;

/// Mean loss and error of `model` over `ds`, streamed in fixed-size batches.
pub fn evaluate<T: Scalar>(model: &MlpModel<T>, ds: &Dataset<T>, loss: LossKind) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let mut loss_sum = 0.0;
    let mut wrong = 0usize;
    let classify = ds.task().is_classification();
    let mut start = 0;
    while start < ds.len() {
        let end = (start + EVAL_BATCH).min(ds.len());
        let x = ds.inputs().row_range(start, end);
        let y = ds.targets().row_range(start, end);
        let out = forward(model, &x)?.outputs;
        loss_sum += loss_value(loss, &out, &y)?.to_f64_lossy() * (end - start) as f64;
        if classify {
            wrong += misclassified(&out, &y, ds.task())?;
        }
        start = end;
    }
    let n = ds.len();
    Ok(Evaluation {
        loss: loss_sum / n as f64,
        error: classify.then(|| wrong as f64 / n as f64),
        n,
    })
}

/// Minibatch SGD with a fresh seeded shuffle each epoch (stream `epoch` of `config.seed`).
///
/// The model is updated in place. Training aborts with [`Error::Diverged`] as
/// soon as a minibatch loss is not finite.
pub fn train<T: Scalar>(
    model: &mut MlpModel<T>,
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    config: &TrainConfig,
    mut probe: Option<&mut ProbeFn<'_, T>>,
) -> Result<RunRecord> {
    config.validate()?;
    for (which, ds) in [("train", train_set), ("test", test_set)] {
        if ds.is_empty() {
            return Err(Error::invalid(format!("{which} set is empty")));
        }
        if ds.input_dim() != model.input_dim() || ds.output_dim() != model.output_dim() {
            return Err(Error::invalid(format!(
                "{which} set has {} inputs / {} targets, model expects {} / {}",
                ds.input_dim(),
                ds.output_dim(),
                model.input_dim(),
                model.output_dim()
            )));
        }
    }
    if !config.loss.supports(train_set.task()) {
        return Err(Error::invalid(format!(
            "{} loss cannot train on {} data",
            config.loss,
            train_set.task()
        )));
    }
    let lr = T::lit(config.lr);
    let classify = train_set.task().is_classification();
    let n = train_set.len();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut probes = Vec::new();

    for epoch in 1..=config.epochs {
        let order = Rng::with_stream(config.seed, epoch as u64).permutation(n);
        let mut loss_sum = 0.0;
        let mut wrong = 0usize;
        for batch in order.chunks(config.batch_size) {
            let x = train_set.inputs().select_rows(batch);
            let y = train_set.targets().select_rows(batch);
            let trace = forward(model, &x)?;
            let loss = loss_value(config.loss, &trace.outputs, &y)?.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * batch.len() as f64;
            if classify {
                wrong += misclassified(&trace.outputs, &y, train_set.task())?;
            }
            let grads = backward(model, &trace, &y, config.loss)?;
            model.apply_gradients(&grads, lr)?;
        }
        let evaluate_now = epoch == config.epochs || (config.eval_every > 0 && epoch % config.eval_every == 0);
        let test_err = if evaluate_now && classify {
            evaluate(model, test_set, config.loss)?.error
        } else {
            None
        };
        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            train_err: classify.then(|| wrong as f64 / n as f64),
            test_err,
            diversity: None,
            d_min_sq: None,
        };
        if epoch % config.record_every == 0 {
            if let Some(p) = probe.as_mut() {
                let report = p(model, epoch)?;
                record.diversity = Some(report.dataset_diversity);
                record.d_min_sq = Some(report.d_min_sq);
                probes.push(report);
            }
        }
        epochs.push(record);
    }
    let final_train = evaluate(model, train_set, config.loss)?;
    if !final_train.loss.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            loss: final_train.loss,
        });
    }
    let final_test = evaluate(model, test_set, config.loss)?;
    Ok(RunRecord {
        config: config.clone(),
        seed: config.seed,
        epochs,
        probes,
        final_train,
        final_test,
    })
}
