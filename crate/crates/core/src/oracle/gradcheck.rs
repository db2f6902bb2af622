use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{backward, forward, loss_value, train, LossKind, MlpModel, TrainConfig};
use crate::numkit::Matrix;

use super::VerificationReport;

/// Relative tolerance for analytic against central-difference gradients.
pub const GRADIENT_REL: f64 = 1e-5;
/// Relative tolerance for one full-batch epoch against one explicit step.
pub const STEP_REL: f64 = 1e-12;

const FD_STEP: f64 = 1e-6;

fn batch_loss(model: &MlpModel<f64>, x: &Matrix<f64>, y: &Matrix<f64>, loss: LossKind) -> Result<f64> {
    loss_value(loss, &forward(model, x)?.outputs, y)
}

/// Compares backprop with central differences, one trial per weight matrix.
///
/// Each trial's margin is `||fd - g|| / ||g|| - GRADIENT_REL`.
pub fn gradient_check(
    model: &MlpModel<f64>,
    x: &Matrix<f64>,
    y: &Matrix<f64>,
    loss: LossKind,
) -> Result<VerificationReport> {
    let grads = backward(model, &forward(model, x)?, y, loss)?;
    let mut report = VerificationReport::new(format!("gradient/{loss}"), model.seed());
    for (l, g) in grads.weights.iter().enumerate() {
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for i in 0..g.as_slice().len() {
            let mut plus = model.clone();
            plus.layer_weights_mut()[l].as_mut_slice()[i] += FD_STEP;
            let mut minus = model.clone();
            minus.layer_weights_mut()[l].as_mut_slice()[i] -= FD_STEP;
            let fd = (batch_loss(&plus, x, y, loss)? - batch_loss(&minus, x, y, loss)?) / (2.0 * FD_STEP);
            let a = g.as_slice()[i];
            diff2 += (fd - a) * (fd - a);
            norm2 += a * a;
        }
        if norm2 == 0.0 {
            return Err(Error::invalid(format!("layer {l} has a zero gradient; nothing to compare")));
        }
        report.record((diff2 / norm2).sqrt() - GRADIENT_REL, 0.0);
    }
    Ok(report)
}

/// One epoch of [`train`] with `batch_size = N` against `W - lr * grad(W)`,
/// one trial per weight.
pub fn full_batch_step_check(model: &MlpModel<f64>, ds: &Dataset<f64>, loss: LossKind, lr: f64) -> Result<VerificationReport> {
    let mut stepped = model.clone();
    let grads = backward(&stepped, &forward(&stepped, ds.inputs())?, ds.targets(), loss)?;
    stepped.apply_gradients(&grads, lr)?;

    let mut trained = model.clone();
    let cfg = TrainConfig {
        lr,
        batch_size: ds.len(),
        epochs: 1,
        loss,
        ..TrainConfig::default()
    };
    train(&mut trained, ds, ds, &cfg, None)?;

    let mut report = VerificationReport::new(format!("full_batch_step/{loss}"), model.seed());
    for (a, b) in trained.layer_weights().iter().zip(stepped.layer_weights()) {
        for (&p, &q) in a.as_slice().iter().zip(b.as_slice()) {
            report.record((p - q).abs() - STEP_REL * q.abs(), 0.0);
        }
    }
    Ok(report)
}
