//! Feature diversity: the mean pairwise squared difference between the units
//! of one layer, per sample and averaged over a dataset, and its minimum over
//! a probe set (`d_min^2`).
//!
//! For a feature row `phi` of width `M`, summing over ordered pairs `i != j`,
//!
//! ```text
//! 1/(2M(M-1)) * sum_{i!=j} (phi_i - phi_j)^2
//!     = (M * sum phi_i^2 - (sum phi_i)^2) / (M(M-1))
//!     = sum_i (phi_i - mean)^2 / (M - 1)
//! ```
//!
//! The last form is evaluated: O(M), and non-negative by construction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{hidden_features, MlpModel};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub layer_index: usize,
    /// Width of the probed layer.
    pub m: usize,
    pub dataset_diversity: f64,
    pub per_sample: Vec<f64>,
    /// Minimum per-sample diversity over the probe set.
    pub d_min_sq: f64,
    pub n: usize,
}

impl DiversityReport {
    pub const CSV_HEADER: &'static str = "layer,M,N,diversity,d_min_sq";

    pub fn d_min(&self) -> f64 {
        self.d_min_sq.sqrt()
    }

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        write!(s, "{},{},{},{},{}", self.layer_index, self.m, self.n, self.dataset_diversity, self.d_min_sq).unwrap();
        s
    }
}

fn sample_diversity<T: Scalar>(row: &[T]) -> T {
    let m = T::from_usize(row.len()).unwrap();
    let mean = row.iter().copied().sum::<T>() / m;
    let ss: T = row.iter().map(|&v| (v - mean) * (v - mean)).sum();
    ss / (m - T::one())
}

/// Diversity of each row of a `batch x M` feature matrix.
pub fn per_sample_diversity<T: Scalar>(features: &Matrix<T>) -> Result<Vec<T>> {
    if features.cols() < 2 {
        return Err(Error::invalid(format!(
            "diversity needs at least 2 units, layer has {}",
            features.cols()
        )));
    }
    Ok(features.row_iter().map(sample_diversity).collect())
}

/// Mean of [`per_sample_diversity`] over the batch.
pub fn dataset_diversity<T: Scalar>(features: &Matrix<T>) -> Result<T> {
    if features.rows() == 0 {
        return Err(Error::invalid("diversity of an empty batch"));
    }
    let per = per_sample_diversity(features)?;
    Ok(per.into_iter().sum::<T>() / T::from_usize(features.rows()).unwrap())
}

/// Exact diversity statistics of hidden layer `layer_index` over every row of
/// `probe`, streamed through the network `batch_size` rows at a time.
///
/// Samples are reduced in row order, so the result is bit-identical for any
/// batch size.
pub fn estimate_dmin_inputs<T: Scalar>(
    model: &MlpModel<T>,
    probe: &Matrix<T>,
    layer_index: usize,
    batch_size: usize,
) -> Result<DiversityReport> {
    if probe.rows() == 0 {
        return Err(Error::invalid("probe set is empty"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("probe batch size must be at least 1"));
    }
    let m = *model.widths().get(layer_index).ok_or_else(|| {
        Error::invalid(format!(
            "layer index {layer_index} out of range for a model with {} hidden layers",
            model.depth()
        ))
    })?;
    if m < 2 {
        return Err(Error::invalid(format!("layer {layer_index} has width {m}; diversity needs at least 2 units")));
    }
    let mut per_sample = Vec::with_capacity(probe.rows());
    let mut sum = T::zero();
    let mut min = T::infinity();
    let mut start = 0;
    while start < probe.rows() {
        let end = (start + batch_size).min(probe.rows());
        let feats = hidden_features(model, &probe.row_range(start, end), layer_index)?;
        for row in feats.row_iter() {
            let d = sample_diversity(row);
            sum += d;
            min = min.min(d);
            per_sample.push(d.to_f64_lossy());
        }
        start = end;
    }
    let n = probe.rows();
    Ok(DiversityReport {
        layer_index,
        m,
        dataset_diversity: (sum / T::from_usize(n).unwrap()).to_f64_lossy(),
        per_sample,
        d_min_sq: min.to_f64_lossy(),
        n,
    })
}

/// [`estimate_dmin_inputs`] over the inputs of a dataset.
pub fn estimate_dmin<T: Scalar>(
    model: &MlpModel<T>,
    probe_set: &Dataset<T>,
    layer_index: usize,
    batch_size: usize,
) -> Result<DiversityReport> {
    estimate_dmin_inputs(model, probe_set.inputs(), layer_index, batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, init_model};
    use crate::numkit::{ActivationSpec, Rng};

    fn rows(r: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_rows(r).unwrap()
    }

    #[test]
    fn identical_features_have_zero_diversity() {
        let f = rows(&[vec![0.7; 5], vec![-3.0; 5]]);
        for v in per_sample_diversity(&f).unwrap() {
            assert!(v.abs() <= 1e-12);
        }
        assert!(dataset_diversity(&f).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn two_unit_hand_value() {
        assert_eq!(per_sample_diversity(&rows(&[vec![0.0, 2.0]])).unwrap(), vec![2.0]);
    }

    #[test]
    fn dataset_mean_of_two_and_zero() {
        let f = rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]);
        assert_eq!(dataset_diversity(&f).unwrap(), 1.0);
    }

    #[test]
    fn width_one_and_empty_are_rejected() {
        assert!(per_sample_diversity(&rows(&[vec![1.0]])).is_err());
        assert!(dataset_diversity(&Matrix::<f64>::zeros(0, 3)).is_err());
    }

    #[test]
    fn single_sample_probe() {
        let model = init_model::<f64>(&[6], 3, 1, ActivationSpec::relu(), 5).unwrap();
        let x = Matrix::random_uniform(1, 3, -1.0, 1.0, &mut Rng::new(2));
        let r = estimate_dmin_inputs(&model, &x, 0, 8).unwrap();
        assert_eq!(r.d_min_sq, r.dataset_diversity);
        assert_eq!(r.n, 1);
    }

    #[test]
    fn duplicated_units_have_zero_dmin() {
        let w = Matrix::from_rows(&vec![vec![0.5, -0.25, 1.0]; 4]).unwrap();
        let v = Matrix::from_rows(&[vec![1.0; 4]]).unwrap();
        let model = MlpModel::from_weights(vec![w, v], ActivationSpec::sigmoid()).unwrap();
        let x = Matrix::random_uniform(20, 3, -1.0, 1.0, &mut Rng::new(2));
        assert_eq!(estimate_dmin_inputs(&model, &x, 0, 7).unwrap().d_min_sq, 0.0);
    }

    #[test]
    fn streaming_equals_full_batch_bitwise() {
        let model = init_model::<f64>(&[16, 12], 5, 2, ActivationSpec::relu(), 8).unwrap();
        let x = Matrix::random_uniform(64, 5, -1.0, 1.0, &mut Rng::new(3));
        let full = forward(&model, &x).unwrap();
        for layer in 0..2 {
            let per = per_sample_diversity(&full.features[layer]).unwrap();
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            for &p in &per {
                sum += p;
                min = min.min(p);
            }
            for batch in [1, 5, 64, 100] {
                let r = estimate_dmin_inputs(&model, &x, layer, batch).unwrap();
                assert_eq!(r.per_sample, per);
                assert_eq!(r.d_min_sq.to_bits(), min.to_bits());
                assert_eq!(r.dataset_diversity.to_bits(), (sum / 64.0).to_bits());
            }
        }
    }

    #[test]
    fn csv_row_format() {
        let r = DiversityReport {
            layer_index: 0,
            m: 4,
            dataset_diversity: 0.5,
            per_sample: vec![0.25, 0.75],
            d_min_sq: 0.25,
            n: 2,
        };
        assert_eq!(r.csv_row(), "0,4,2,0.5,0.25");
        assert_eq!(r.d_min(), 0.5);
    }
}
