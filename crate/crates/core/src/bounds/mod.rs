//! Diversity-dependent generalization bounds.
//!
//! Constants are realized empirically from a trained model and its data
//! ([`estimate_constants`]); each `bound_*` function turns them, a `d_min^2`,
//! the sample count and a confidence level into a [`BoundReport`].

mod constants;
mod theorems;

pub use constants::{estimate_constants, ConstantsReport};
pub use theorems::{
    bound_multilayer, bound_thm1, bound_thm2_hinge, bound_thm3_logistic, bound_thm4_multivariate,
    bound_thm5_crossentropy, compute_j, evaluate_theorem, rademacher_bound_f, scaling_proxy, BoundReport,
    MultilayerVariant, Theorem, DEFAULT_DELTA,
};
