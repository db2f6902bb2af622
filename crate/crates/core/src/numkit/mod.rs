//! Dense matrices, seeded random streams and the activation catalog.

pub mod activation;
pub mod matrix;
pub mod rng;

pub use activation::{activation_grad, apply_activation, ActivationKind, ActivationSpec};
pub use matrix::{Matrix, Norms};
pub use rng::Rng;
