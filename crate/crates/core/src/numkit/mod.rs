//! Dense numerical kernel: matrices, perceptrons with manual backprop,
//! Adam, and a finite-difference gradient oracle.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;
mod scalar;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, max_relative_error};
pub use matrix::{squared_distance, Matrix};
pub use mlp::{Activation, DenseLayer, MlpCache, MlpGrads, MlpNet};
pub use scalar::Scalar;
