//! Feature diversity of hidden layers and the diversity-dependent
//! generalization bounds built on it, for small bias-free MLPs.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod bounds;
pub mod data;
pub mod diversity;
pub mod error;
pub mod experiments;
pub mod model;
pub mod numkit;
pub mod oracle;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = numkit::Matrix<f64>;
pub type Matrix32 = numkit::Matrix<f32>;
pub type Mlp64 = model::MlpModel<f64>;
pub type Mlp32 = model::MlpModel<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
