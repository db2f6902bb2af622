use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        })
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Self::Relu),
            "sigmoid" => Ok(Self::Sigmoid),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::invalid(format!(
                "unknown activation `{other}` (expected relu, sigmoid or tanh)"
            ))),
        }
    }
}

/// An element-wise activation with its Lipschitz constant and value at zero.
///
/// Serialized as the bare kind; the two constants are always derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ActivationKind", into = "ActivationKind")]
pub struct ActivationSpec {
    kind: ActivationKind,
    lipschitz: f64,
    at_zero: f64,
}

impl From<ActivationKind> for ActivationSpec {
    fn from(kind: ActivationKind) -> Self {
        let (lipschitz, at_zero) = match kind {
            ActivationKind::Relu => (1.0, 0.0),
            ActivationKind::Sigmoid => (0.25, 0.5),
            ActivationKind::Tanh => (1.0, 0.0),
        };
        Self {
            kind,
            lipschitz,
            at_zero,
        }
    }
}

impl From<ActivationSpec> for ActivationKind {
    fn from(spec: ActivationSpec) -> Self {
        spec.kind
    }
}

impl ActivationSpec {
    pub fn relu() -> Self {
        ActivationKind::Relu.into()
    }

    pub fn sigmoid() -> Self {
        ActivationKind::Sigmoid.into()
    }

    pub fn tanh() -> Self {
        ActivationKind::Tanh.into()
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    /// Lipschitz constant L_rho.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// rho(0).
    pub fn at_zero(&self) -> f64 {
        self.at_zero
    }

    /// Whether the activation never takes negative values.
    pub fn is_nonnegative(&self) -> bool {
        matches!(self.kind, ActivationKind::Relu | ActivationKind::Sigmoid)
    }

    #[inline]
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match self.kind {
            ActivationKind::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
        }
    }

    /// Derivative at `x`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative<T: Scalar>(&self, x: T) -> T {
        match self.kind {
            ActivationKind::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn apply_activation<T: Scalar>(spec: &ActivationSpec, m: &Matrix<T>) -> Matrix<T> {
    m.map(|x| spec.eval(x))
}

pub fn activation_grad<T: Scalar>(spec: &ActivationSpec, m: &Matrix<T>) -> Matrix<T> {
    m.map(|x| spec.derivative(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::rng::Rng;

    fn row(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn constants_per_kind() {
        assert_eq!((ActivationSpec::relu().lipschitz(), ActivationSpec::relu().at_zero()), (1.0, 0.0));
        assert_eq!(
            (ActivationSpec::sigmoid().lipschitz(), ActivationSpec::sigmoid().at_zero()),
            (0.25, 0.5)
        );
        assert_eq!((ActivationSpec::tanh().lipschitz(), ActivationSpec::tanh().at_zero()), (1.0, 0.0));
    }

    #[test]
    fn relu_values_and_grad() {
        let m = row(&[-1.0, 0.0, 2.0]);
        assert_eq!(apply_activation(&ActivationSpec::relu(), &m).as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(activation_grad(&ActivationSpec::relu(), &m).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        let s = ActivationSpec::sigmoid();
        assert_eq!(s.eval(0.0f64), 0.5);
        assert_eq!(s.derivative(0.0f64), 0.25);
    }

    #[test]
    fn zero_matrix_maps_to_at_zero() {
        for spec in [ActivationSpec::relu(), ActivationSpec::sigmoid(), ActivationSpec::tanh()] {
            let out = apply_activation(&spec, &Matrix::<f64>::zeros(3, 4));
            assert!(out.as_slice().iter().all(|&v| v == spec.at_zero()));
        }
    }

    #[test]
    fn tanh_matches_exponential_form() {
        let spec = ActivationSpec::tanh();
        for i in 0..100 {
            let x = -5.0 + 10.0 * i as f64 / 99.0;
            let e = (2.0 * x).exp();
            let oracle = (e - 1.0) / (e + 1.0);
            assert!((spec.eval(x) - oracle).abs() <= 1e-12, "{x}");
        }
    }

    #[test]
    fn lipschitz_holds_on_random_pairs() {
        let mut rng = Rng::new(17);
        for spec in [ActivationSpec::relu(), ActivationSpec::sigmoid(), ActivationSpec::tanh()] {
            for _ in 0..10_000 {
                let a = rng.uniform_range(-10.0, 10.0);
                let b = rng.uniform_range(-10.0, 10.0);
                let lhs = (spec.eval(a) - spec.eval(b)).abs();
                assert!(lhs <= spec.lipschitz() * (a - b).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn grad_matches_central_differences() {
        let mut rng = Rng::new(23);
        let h = 1e-6;
        for spec in [ActivationSpec::relu(), ActivationSpec::sigmoid(), ActivationSpec::tanh()] {
            let m = Matrix::<f64>::random_uniform(6, 6, -3.0, 3.0, &mut rng);
            let g = activation_grad(&spec, &m);
            for (&x, &d) in m.as_slice().iter().zip(g.as_slice()) {
                if x.abs() < 1e-3 {
                    continue;
                }
                let fd = (spec.eval(x + h) - spec.eval(x - h)) / (2.0 * h);
                assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-2), "{spec:?} at {x}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn serializes_as_kind() {
        let json = serde_json::to_string(&ActivationSpec::sigmoid()).unwrap();
        assert_eq!(json, "\"sigmoid\"");
        let back: ActivationSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ActivationSpec::sigmoid());
    }
}
