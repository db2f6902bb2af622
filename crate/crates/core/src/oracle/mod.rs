//! Brute-force verifiers for the fast paths and the sup/Rademacher lemmas.
//!
//! Everything here runs in `f64` regardless of the model's scalar type.

mod gradcheck;
mod rademacher;
mod suite;
mod sup;

use serde::{Deserialize, Serialize};

use crate::bounds::{bound_multilayer, evaluate_theorem, ConstantsReport, MultilayerVariant, Theorem};
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

pub use gradcheck::{full_batch_step_check, gradient_check, GRADIENT_REL, STEP_REL};
pub use rademacher::{mc_rademacher, ModelSpace};
pub use suite::{run_suite, SuiteConfig};
pub use sup::{verify_sup_f, verify_sup_f_multilayer, verify_sup_loss};

/// Absolute slack for inequality checks.
pub const INEQUALITY_SLACK: f64 = 1e-9;
/// Relative tolerance for equivalence checks.
pub const EQUIVALENCE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` seen; non-positive means every trial held with room to spare.
    pub worst_margin: f64,
    pub passed: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl VerificationReport {
    pub(crate) fn new(check_name: impl Into<String>, seed: u64) -> Self {
        Self {
            check_name: check_name.into(),
            trials: 0,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
            passed: true,
            seed,
            detail: String::new(),
        }
    }

    /// Records one trial of `lhs <= rhs` allowing `slack`.
    pub(crate) fn record(&mut self, margin: f64, slack: f64) {
        self.trials += 1;
        if margin.is_nan() || margin > slack {
            self.violations += 1;
        }
        if margin.is_nan() {
            self.worst_margin = f64::NAN;
        } else if !self.worst_margin.is_nan() {
            self.worst_margin = self.worst_margin.max(margin);
        }
        self.passed = self.violations == 0;
    }

    /// Folds another report's trials into this one.
    pub(crate) fn absorb(&mut self, other: &VerificationReport) {
        self.trials += other.trials;
        self.violations += other.violations;
        if other.worst_margin.is_nan() || self.worst_margin.is_nan() {
            self.worst_margin = f64::NAN;
        } else {
            self.worst_margin = self.worst_margin.max(other.worst_margin);
        }
        self.passed = self.violations == 0;
    }

    pub fn table_row(&self) -> String {
        format!(
            "{:<34} {:>8} {:>10} {:>14.6e}  {}",
            self.check_name,
            self.trials,
            self.violations,
            self.worst_margin,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }

    pub fn table_header() -> String {
        format!("{:<34} {:>8} {:>10} {:>14}  {}", "check", "trials", "violations", "worst_margin", "result")
    }
}

fn check_width<T: Scalar>(features: &Matrix<T>) -> Result<()> {
    if features.cols() < 2 {
        return Err(Error::invalid(format!(
            "diversity needs at least 2 units, got {}",
            features.cols()
        )));
    }
    Ok(())
}

/// Literal double loop over ordered pairs `i != j`, normalized by `2M(M-1)`.
pub fn naive_pairwise_diversity<T: Scalar>(features: &Matrix<T>) -> Result<Vec<f64>> {
    check_width(features)?;
    let m = features.cols();
    Ok(features
        .row_iter()
        .map(|row| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        let d = row[i].to_f64_lossy() - row[j].to_f64_lossy();
                        s += d * d;
                    }
                }
            }
            s / (2.0 * m as f64 * (m as f64 - 1.0))
        })
        .collect())
}

/// Unordered pairs `i < j`, normalized by `M(M-1)`.
pub fn naive_pairwise_diversity_unordered<T: Scalar>(features: &Matrix<T>) -> Result<Vec<f64>> {
    check_width(features)?;
    let m = features.cols();
    Ok(features
        .row_iter()
        .map(|row| {
            let mut s = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    let d = row[i].to_f64_lossy() - row[j].to_f64_lossy();
                    s += d * d;
                }
            }
            s / (m as f64 * (m as f64 - 1.0))
        })
        .collect())
}

/// Checks that bound totals never increase along an ascending `d_min^2` grid.
///
/// The multi-layer bound is evaluated with the same value for every layer.
pub fn verify_monotonicity(
    theorem: Theorem,
    consts: &ConstantsReport,
    n: usize,
    delta: f64,
    grid: &[f64],
    d_out: usize,
) -> Result<VerificationReport> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("monotonicity grid must be ascending"));
    }
    let total = |d: f64| -> Result<f64> {
        Ok(match theorem {
            Theorem::ThmMultilayer => {
                let ds = vec![d; consts.depth()];
                bound_multilayer(consts, &ds, n, delta, MultilayerVariant::NormConsistent)?.total
            }
            t => evaluate_theorem(t, consts, d, n, delta, d_out)?.total,
        })
    };
    let mut report = VerificationReport::new(format!("monotonicity/{theorem}"), 0);
    let mut prev: Option<f64> = None;
    for &d in grid {
        let t = total(d)?;
        if let Some(p) = prev {
            report.record(t - p, 0.0);
        }
        prev = Some(t);
    }
    if report.trials == 0 {
        report.worst_margin = 0.0;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::per_sample_diversity;
    use crate::numkit::{ActivationSpec, Rng};

    #[test]
    fn naive_hand_values() {
        let f = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(naive_pairwise_diversity(&f).unwrap(), vec![2.0, 0.0]);
        assert_eq!(naive_pairwise_diversity_unordered(&f).unwrap(), vec![2.0, 0.0]);
        let one = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(naive_pairwise_diversity(&one).is_err());
    }

    #[test]
    fn naive_agrees_with_fast_path() {
        let mut rng = Rng::new(5);
        for m in [2, 3, 16, 64] {
            let f = Matrix::<f64>::random_uniform(8, m, -2.0, 3.0, &mut rng);
            let fast = per_sample_diversity(&f).unwrap();
            let ordered = naive_pairwise_diversity(&f).unwrap();
            let unordered = naive_pairwise_diversity_unordered(&f).unwrap();
            for ((a, b), c) in fast.iter().zip(&ordered).zip(&unordered) {
                assert!((a - b).abs() <= EQUIVALENCE_REL * b.abs());
                assert!((c - b).abs() <= EQUIVALENCE_REL * b.abs());
            }
        }
    }

    #[test]
    fn monotonicity_constant_and_two_point() {
        let c = ConstantsReport::single_layer(2.0, 0.5, 1.0, 1.0, ActivationSpec::relu(), 3, 100, 1);
        let r = verify_monotonicity(Theorem::Thm1Mse, &c, 100, 0.05, &[1.0, 1.0, 1.0], 1).unwrap();
        assert!(r.passed && r.worst_margin == 0.0);
        let r = verify_monotonicity(Theorem::Thm1Mse, &c, 100, 0.05, &[0.0, 4.0], 1).unwrap();
        assert!(r.passed && r.worst_margin < 0.0);
        assert!(verify_monotonicity(Theorem::Thm1Mse, &c, 100, 0.05, &[1.0, 0.0], 1).is_err());
    }

    #[test]
    fn report_bookkeeping() {
        let mut r = VerificationReport::new("x", 1);
        r.record(-1.0, 1e-9);
        assert!(r.passed);
        r.record(1e-10, 1e-9);
        assert!(r.passed);
        r.record(1e-3, 1e-9);
        assert!(!r.passed);
        assert_eq!((r.trials, r.violations, r.worst_margin), (3, 1, 1e-3));
        r.record(f64::NAN, 1e-9);
        assert_eq!(r.violations, 2);
        assert!(r.worst_margin.is_nan());
    }
}
