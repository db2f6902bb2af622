use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::numkit::activation::sigmoid;
use crate::numkit::Matrix;
use crate::scalar::Scalar;

/// Per-sample losses; every reported value is the batch mean.
///
/// * `mse`: `1/2 ||f - y||^2` (summed over output coordinates)
/// * `hinge`: `max(0, 1 - y f)`, subgradient 0 at the margin
/// * `logistic`: `log(1 + exp(-y f))`
/// * `cross_entropy`: softmax cross-entropy against one-hot rows
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Hinge,
    Logistic,
    CrossEntropy,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mse => "mse",
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
            LossKind::CrossEntropy => "cross_entropy",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

impl LossKind {
    /// Whether this loss can train on data of the given task.
    pub fn supports(self, task: Task) -> bool {
        match self {
            LossKind::Mse => true,
            LossKind::Hinge | LossKind::Logistic => task == Task::BinaryClassification,
            LossKind::CrossEntropy => task == Task::MulticlassClassification,
        }
    }
}

fn check(kind: LossKind, outputs: &Matrix<impl Scalar>, targets: &Matrix<impl Scalar>) -> Result<()> {
    if outputs.shape() != targets.shape() {
        return Err(Error::Shape {
            op: "loss",
            left: outputs.shape(),
            right: targets.shape(),
        });
    }
    if outputs.rows() == 0 {
        return Err(Error::invalid("loss of an empty batch"));
    }
    match kind {
        LossKind::Hinge | LossKind::Logistic => {
            if outputs.cols() != 1 {
                return Err(Error::invalid(format!(
                    "{kind} loss needs a single output with targets in {{-1, +1}}, got {} columns",
                    outputs.cols()
                )));
            }
            if targets
                .as_slice()
                .iter()
                .any(|&y| y.to_f64_lossy().abs() != 1.0)
            {
                return Err(Error::invalid(format!("{kind} loss needs targets in {{-1, +1}}")));
            }
        }
        LossKind::CrossEntropy => {
            if outputs.cols() < 2 {
                return Err(Error::invalid("cross-entropy needs at least two outputs"));
            }
        }
        LossKind::Mse => {}
    }
    Ok(())
}

/// `log(1 + exp(x))` without overflow.
#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn log_softmax_row<T: Scalar>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    row.iter().map(|&v| v - lse).collect()
}

/// Mean per-sample loss over the batch.
pub fn loss_value<T: Scalar>(kind: LossKind, outputs: &Matrix<T>, targets: &Matrix<T>) -> Result<T> {
    check(kind, outputs, targets)?;
    let half = T::lit(0.5);
    let total: T = outputs
        .row_iter()
        .zip(targets.row_iter())
        .map(|(f, y)| match kind {
            LossKind::Mse => half * f.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>(),
            LossKind::Hinge => (T::one() - y[0] * f[0]).max(T::zero()),
            LossKind::Logistic => softplus(-y[0] * f[0]),
            LossKind::CrossEntropy => -log_softmax_row(f)
                .iter()
                .zip(y)
                .map(|(&l, &t)| if t == T::zero() { T::zero() } else { t * l })
                .sum::<T>(),
        })
        .sum();
    Ok(total / T::from_usize(outputs.rows()).unwrap())
}

/// Gradient of [`loss_value`] with respect to the outputs (already divided by the batch size).
pub fn loss_grad<T: Scalar>(kind: LossKind, outputs: &Matrix<T>, targets: &Matrix<T>) -> Result<Matrix<T>> {
    check(kind, outputs, targets)?;
    let inv_n = T::one() / T::from_usize(outputs.rows()).unwrap();
    let mut g = Matrix::zeros(outputs.rows(), outputs.cols());
    for r in 0..outputs.rows() {
        let f = outputs.row(r);
        let y = targets.row(r);
        let out = g.row_mut(r);
        match kind {
            LossKind::Mse => {
                for ((o, &a), &b) in out.iter_mut().zip(f).zip(y) {
                    *o = (a - b) * inv_n;
                }
            }
            LossKind::Hinge => {
                out[0] = if y[0] * f[0] < T::one() { -y[0] * inv_n } else { T::zero() };
            }
            LossKind::Logistic => {
                out[0] = -y[0] * sigmoid(-y[0] * f[0]) * inv_n;
            }
            LossKind::CrossEntropy => {
                let ls = log_softmax_row(f);
                let ysum: T = y.iter().copied().sum();
                for ((o, &l), &t) in out.iter_mut().zip(&ls).zip(y) {
                    *o = (ysum * l.exp() - t) * inv_n;
                }
            }
        }
    }
    Ok(g)
}

/// Fraction of misclassified rows: sign of the single output for binary tasks
/// (zero counts as `+1`), argmax (first maximum) for multiclass.
pub fn classification_error<T: Scalar>(outputs: &Matrix<T>, targets: &Matrix<T>, task: Task) -> Result<f64> {
    if outputs.shape() != targets.shape() {
        return Err(Error::Shape {
            op: "classification_error",
            left: outputs.shape(),
            right: targets.shape(),
        });
    }
    if outputs.rows() == 0 {
        return Err(Error::invalid("classification error of an empty batch"));
    }
    Ok(misclassified(outputs, targets, task)? as f64 / outputs.rows() as f64)
}

pub(crate) fn misclassified<T: Scalar>(outputs: &Matrix<T>, targets: &Matrix<T>, task: Task) -> Result<usize> {
    match task {
        Task::BinaryClassification => Ok(outputs
            .as_slice()
            .iter()
            .zip(targets.as_slice())
            .filter(|(&f, &y)| {
                let pred = if f >= T::zero() { T::one() } else { -T::one() };
                pred != y
            })
            .count()),
        Task::MulticlassClassification => Ok(outputs
            .row_iter()
            .zip(targets.row_iter())
            .filter(|(f, y)| argmax(f) != argmax(y))
            .count()),
        other => Err(Error::invalid(format!(
            "classification error is undefined for {other}; use the loss instead"
        ))),
    }
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn mse_at_fit_is_zero() {
        let y = col(&[0.3, -2.0]);
        assert_eq!(loss_value(LossKind::Mse, &y, &y).unwrap(), 0.0);
    }

    #[test]
    fn hinge_values() {
        assert_eq!(loss_value(LossKind::Hinge, &col(&[1.0]), &col(&[1.0])).unwrap(), 0.0);
        assert_eq!(loss_value(LossKind::Hinge, &col(&[0.0]), &col(&[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn hinge_subgradient_is_zero_at_margin() {
        let g = loss_grad(LossKind::Hinge, &col(&[1.0, -1.0]), &col(&[1.0, -1.0])).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn logistic_at_zero_is_log2() {
        let v = loss_value(LossKind::Logistic, &col(&[0.0]), &col(&[1.0])).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        // Large margins neither overflow nor lose the tail.
        let big = loss_value(LossKind::Logistic, &col(&[-800.0]), &col(&[1.0])).unwrap();
        assert!((big - 800.0).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let f = Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        let v = loss_value(LossKind::CrossEntropy, &f, &y).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn task_mismatch_is_rejected() {
        let f = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(loss_value(LossKind::Hinge, &f, &f).is_err());
        assert!(loss_value(LossKind::Logistic, &col(&[0.5]), &col(&[0.5])).is_err());
        assert!(loss_value(LossKind::CrossEntropy, &col(&[0.5]), &col(&[1.0])).is_err());
        assert!(!LossKind::Hinge.supports(Task::MulticlassClassification));
    }

    #[test]
    fn error_extremes_and_regression_rejection() {
        let y = col(&[1.0, -1.0, 1.0]);
        assert_eq!(classification_error(&col(&[2.0, -0.1, 0.5]), &y, Task::BinaryClassification).unwrap(), 0.0);
        assert_eq!(classification_error(&col(&[-2.0, 0.1, -0.5]), &y, Task::BinaryClassification).unwrap(), 1.0);
        assert!(classification_error(&y, &y, Task::ScalarRegression).is_err());
    }

    #[test]
    fn error_matches_per_sample_loop() {
        let mut rng = crate::numkit::Rng::new(12);
        let f = Matrix::<f64>::random_uniform(100, 4, -1.0, 1.0, &mut rng);
        let mut y = Matrix::<f64>::zeros(100, 4);
        for i in 0..100 {
            y.set(i, rng.below(4) as usize, 1.0);
        }
        let mut wrong = 0;
        for i in 0..100 {
            let mut bf = 0;
            let mut by = 0;
            for j in 1..4 {
                if f.get(i, j) > f.get(i, bf) {
                    bf = j;
                }
                if y.get(i, j) > y.get(i, by) {
                    by = j;
                }
            }
            if bf != by {
                wrong += 1;
            }
        }
        let e = classification_error(&f, &y, Task::MulticlassClassification).unwrap();
        assert_eq!(e, wrong as f64 / 100.0);
    }
}
