//! Datasets: file formats, synthetic generation, triplet sampling and the
//! latent training set of the general classifier.

mod dataset;
mod latent_set;
mod sampler;
mod synth;

pub use dataset::{import_csv, load_dataset, save_dataset, Manifest, ZslDataset, MANIFEST_FILE};
pub use latent_set::{
    build_latent_train_set, cyclic_rows, LatentMode, LatentTrainSet, DEFAULT_SEEN_PER_CLASS,
    DEFAULT_UNSEEN_PER_CLASS,
};
pub use sampler::{sample_triplet_batch, TripletSampler};
pub use synth::{make_synthetic, make_synthetic_with_centroids, SyntheticCentroids, SyntheticSpec};
