//! Softmax classifiers, seen-class entropy and the entropy-gated cascade.

mod cascade;
mod classifier;
mod entropy;

pub use cascade::{
    cascade_predict, cascade_predict_batch, general_outputs, route_with_threshold, CascadeConfig,
    GeneralOutputs, Prediction, Route,
};
pub use classifier::{
    argmax, softmax_in_place, softmax_probs, train_softmax, SoftmaxClassifier, SoftmaxConfig,
};
pub use entropy::{seen_entropy, EntropyMode};
