use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ScalarRegression,
    BinaryClassification,
    MultivariateRegression,
    MulticlassClassification,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(
            self,
            Task::BinaryClassification | Task::MulticlassClassification
        )
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::ScalarRegression => "scalar_regression",
            Task::BinaryClassification => "binary_classification",
            Task::MultivariateRegression => "multivariate_regression",
            Task::MulticlassClassification => "multiclass_classification",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar_regression" => Ok(Task::ScalarRegression),
            "binary_classification" => Ok(Task::BinaryClassification),
            "multivariate_regression" => Ok(Task::MultivariateRegression),
            "multiclass_classification" => Ok(Task::MulticlassClassification),
            other => Err(Error::invalid(format!("unknown task `{other}`"))),
        }
    }
}

/// Inputs (N x D_in) paired with targets (N x D_out).
///
/// Binary targets are `-1`/`+1` in a single column; multiclass targets are
/// one-hot rows, with the integer labels kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    inputs: Matrix<T>,
    targets: Matrix<T>,
    task: Task,
    name: String,
    labels: Option<Vec<u32>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: Matrix<T>, targets: Matrix<T>, task: Task, name: impl Into<String>) -> Result<Self> {
        let labels = if task == Task::MulticlassClassification {
            Some(one_hot_labels(&targets)?)
        } else {
            None
        };
        let ds = Self {
            inputs,
            targets,
            task,
            name: name.into(),
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// A multiclass dataset from integer labels; targets are their one-hot encoding.
    pub fn from_labels(inputs: Matrix<T>, labels: Vec<u32>, classes: usize, name: impl Into<String>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid("a multiclass dataset needs at least 2 classes"));
        }
        let mut targets = Matrix::zeros(labels.len(), classes);
        for (i, &l) in labels.iter().enumerate() {
            if l as usize >= classes {
                return Err(Error::invalid(format!("label {l} at row {i} is out of range for {classes} classes")));
            }
            targets.set(i, l as usize, T::one());
        }
        let ds = Self {
            inputs,
            targets,
            task: Task::MulticlassClassification,
            name: name.into(),
            labels: Some(labels),
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.inputs.rows() != self.targets.rows() {
            return Err(Error::Shape {
                op: "dataset",
                left: self.inputs.shape(),
                right: self.targets.shape(),
            });
        }
        if !self.inputs.is_finite() || !self.targets.is_finite() {
            return Err(Error::NonFinite("dataset"));
        }
        match self.task {
            Task::BinaryClassification => {
                if self.targets.cols() != 1 {
                    return Err(Error::invalid("binary classification needs exactly one target column"));
                }
                if let Some(bad) = self
                    .targets
                    .as_slice()
                    .iter()
                    .position(|&y| y != T::one() && y != -T::one())
                {
                    return Err(Error::invalid(format!("binary target at row {bad} is not -1 or +1")));
                }
            }
            Task::ScalarRegression => {
                if self.targets.cols() != 1 {
                    return Err(Error::invalid("scalar regression needs exactly one target column"));
                }
            }
            Task::MulticlassClassification => {
                one_hot_labels(&self.targets)?;
            }
            Task::MultivariateRegression => {}
        }
        Ok(())
    }

    pub fn inputs(&self) -> &Matrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix<T> {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Integer class labels, for multiclass data.
    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rows gathered in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
            task: self.task,
            name: self.name.clone(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Converts every value to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            inputs: self.inputs.cast(),
            targets: self.targets.cast(),
            task: self.task,
            name: self.name.clone(),
            labels: self.labels.clone(),
        }
    }
}

fn one_hot_labels<T: Scalar>(targets: &Matrix<T>) -> Result<Vec<u32>> {
    if targets.cols() < 2 {
        return Err(Error::invalid("multiclass targets need at least 2 columns"));
    }
    targets
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            let ones = row.iter().filter(|&&v| v == T::one()).count();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::invalid(format!("multiclass target row {i} is not one-hot")));
            }
            Ok(row.iter().position(|&v| v == T::one()).unwrap() as u32)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Disjoint train/test subsets. Without shuffling the train part is the first
/// `train_size` rows and the test part the next `test_size`.
pub fn subset<T: Scalar>(ds: &Dataset<T>, spec: &SplitSpec) -> Result<Split<T>> {
    if spec.train_size == 0 || spec.test_size == 0 {
        return Err(Error::invalid("split sizes must both be positive"));
    }
    if spec.train_size + spec.test_size > ds.len() {
        return Err(Error::invalid(format!(
            "split of {} + {} rows requested from a dataset of {}",
            spec.train_size,
            spec.test_size,
            ds.len()
        )));
    }
    let order: Vec<usize> = if spec.shuffle {
        Rng::new(spec.seed).permutation(ds.len())
    } else {
        (0..ds.len()).collect()
    };
    let train_indices = order[..spec.train_size].to_vec();
    let test_indices = order[spec.train_size..spec.train_size + spec.test_size].to_vec();
    Ok(Split {
        train: ds.select(&train_indices),
        test: ds.select(&test_indices),
        train_indices,
        test_indices,
    })
}

/// A seeded random subset of `count` rows (the whole set, permuted, when `count == len`).
pub fn sample_rows<T: Scalar>(ds: &Dataset<T>, count: usize, seed: u64) -> Result<(Dataset<T>, Vec<usize>)> {
    if count == 0 || count > ds.len() {
        return Err(Error::invalid(format!(
            "cannot sample {count} rows from a dataset of {}",
            ds.len()
        )));
    }
    let mut order = Rng::new(seed).permutation(ds.len());
    order.truncate(count);
    Ok((ds.select(&order), order))
}

/// Keeps the samples of two classes, relabelled `-1` (class_a) and `+1` (class_b).
pub fn binarize<T: Scalar>(ds: &Dataset<T>, class_a: u32, class_b: u32) -> Result<Dataset<T>> {
    if class_a == class_b {
        return Err(Error::invalid("binarize needs two distinct classes"));
    }
    let labels = match (ds.task(), ds.labels()) {
        (Task::MulticlassClassification, Some(l)) => l,
        _ => return Err(Error::invalid("binarize needs a multiclass dataset")),
    };
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| labels[i] == class_a || labels[i] == class_b)
        .collect();
    for class in [class_a, class_b] {
        if !keep.iter().any(|&i| labels[i] == class) {
            return Err(Error::invalid(format!("class {class} has no samples")));
        }
    }
    let inputs = ds.inputs().select_rows(&keep);
    let targets = Matrix::from_vec(
        keep.len(),
        1,
        keep.iter()
            .map(|&i| if labels[i] == class_a { -T::one() } else { T::one() })
            .collect(),
    )?;
    Dataset::new(
        inputs,
        targets,
        Task::BinaryClassification,
        format!("{}[{class_a}-vs-{class_b}]", ds.name()),
    )
}
