//! Dual VAEs over a shared latent space, the metric-learning objective and
//! its training loop.

mod checkpoint;
pub(crate) mod gaussian;
pub(crate) mod losses;
mod model;
mod objective;
mod train;

pub use checkpoint::ModelBundle;
pub use gaussian::{
    encode, kl_to_standard_normal, kl_to_standard_normal_grad, reparameterize, GaussianParams,
    LatentBatch, Modality,
};
pub use losses::{
    l1_loss, l1_loss_grad, multimodal_triplet_loss, multimodal_triplet_loss_grad, triplet_loss,
    triplet_loss_grad, wasserstein2_diag, wasserstein2_diag_grad, TripletLatents,
    CROSS_MODAL_COMBINATIONS,
};
pub use model::{DualVae, DualVaeConfig, DualVaeGrads};
pub use objective::{
    cross_reconstruction_loss, cross_reconstruction_loss_grad, total_gml_loss, vae_loss,
    CrossReconstructionGrads, GmlLossOutput, GmlNoise, LossBreakdown, LossWeights, TripletBatch,
    TripletPart, VaeLossOutput,
};
pub use train::{train_gml, TrainConfig, TrainLog};
