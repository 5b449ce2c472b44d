//! Generative metric learning for generalized zero-shot recognition.
//!
//! Two VAEs map visual features and class attributes into one latent space,
//! aligned by a closed-form Wasserstein term, cross reconstruction and
//! triplet losses. At test time an entropy-gated cascade sends confident
//! samples to a seen-class classifier and the rest to a classifier over all
//! classes.

pub mod calib;
pub mod datakit;
pub mod error;
pub mod evalkit;
pub mod gml;
pub mod numkit;
pub mod pipeline;

pub use calib::{CascadeConfig, EntropyMode, Prediction, Route, SoftmaxClassifier};
pub use datakit::{LatentMode, SyntheticSpec, ZslDataset};
pub use error::{Error, Result};
pub use evalkit::MetricsReport;
pub use gml::{DualVae, DualVaeConfig, LossWeights, ModelBundle, TrainConfig};
pub use numkit::Matrix;
pub use pipeline::{run_pipeline, RunConfig};
