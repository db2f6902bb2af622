use crate::data::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};
use crate::scalar::Scalar;

/// Draws a synthetic dataset with inputs uniform on `[-1, 1]^d_in`.
///
/// Targets come from a random linear teacher `U` (`d_in x d_out`, entries
/// `N(0, 1/d_in)`), recorded in the dataset name:
///
/// * scalar / multivariate regression: `y = U^T x`;
/// * binary classification: `y = sign(u^T x)`, with `+1` at zero, so the data
///   are linearly separable through the origin;
/// * multiclass: one-hot of `argmax(U^T x)`, lowest index on ties.
///
/// Inputs are drawn before the teacher, both from stream 0 of `seed`.
pub fn make_synthetic<T: Scalar>(kind: Task, n: usize, d_in: usize, d_out: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || d_in == 0 || d_out == 0 {
        return Err(Error::invalid(format!(
            "synthetic dimensions must be positive (n={n}, d_in={d_in}, d_out={d_out})"
        )));
    }
    match kind {
        Task::ScalarRegression | Task::BinaryClassification if d_out != 1 => {
            return Err(Error::invalid(format!("{kind} needs d_out = 1, got {d_out}")));
        }
        Task::MulticlassClassification if d_out < 2 => {
            return Err(Error::invalid("multiclass synthetic data needs d_out >= 2"));
        }
        _ => {}
    }
    let mut rng = Rng::new(seed);
    let inputs = Matrix::<T>::random_uniform(n, d_in, -1.0, 1.0, &mut rng);
    let sd = 1.0 / (d_in as f64).sqrt();
    let teacher = Matrix::from_vec(
        d_in,
        d_out,
        (0..d_in * d_out).map(|_| T::lit(sd * rng.normal())).collect(),
    )?;
    let scores = inputs.matmul(&teacher)?;
    let name = format!("synthetic-{kind}-linear-teacher-seed{seed}");
    match kind {
        Task::ScalarRegression | Task::MultivariateRegression => Dataset::new(inputs, scores, kind, name),
        Task::BinaryClassification => {
            let y = scores.map(|s| if s >= T::zero() { T::one() } else { -T::one() });
            Dataset::new(inputs, y, kind, name)
        }
        Task::MulticlassClassification => {
            let labels = scores
                .row_iter()
                .map(|r| {
                    let mut best = 0;
                    for (j, &v) in r.iter().enumerate() {
                        if v > r[best] {
                            best = j;
                        }
                    }
                    best as u32
                })
                .collect();
            Dataset::from_labels(inputs, labels, d_out, name)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_targets_are_signs() {
        let ds = make_synthetic::<f64>(Task::BinaryClassification, 200, 3, 1, 4).unwrap();
        assert!(ds.targets().as_slice().iter().all(|&y| y == 1.0 || y == -1.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = make_synthetic::<f64>(Task::MulticlassClassification, 50, 4, 3, 8).unwrap();
        let b = make_synthetic::<f64>(Task::MulticlassClassification, 50, 4, 3, 8).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic::<f64>(Task::MulticlassClassification, 50, 4, 3, 9).unwrap();
        assert_ne!(a.inputs(), c.inputs());
    }

    #[test]
    fn inputs_stay_in_the_cube() {
        let ds = make_synthetic::<f64>(Task::ScalarRegression, 100, 4, 1, 0).unwrap();
        assert!(ds.inputs().as_slice().iter().all(|v| (-1.0..1.0).contains(v)));
        let c1 = ds.inputs().norms().l2_per_row.into_iter().fold(0.0, f64::max);
        assert!(c1 <= 2.0);
    }

    #[test]
    fn invalid_dims() {
        assert!(make_synthetic::<f64>(Task::ScalarRegression, 0, 2, 1, 0).is_err());
        assert!(make_synthetic::<f64>(Task::ScalarRegression, 5, 0, 1, 0).is_err());
        assert!(make_synthetic::<f64>(Task::BinaryClassification, 5, 2, 2, 0).is_err());
    }
}
