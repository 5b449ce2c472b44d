//! Epoch-based optimisation of the dual VAE with Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::{TripletSampler, ZslDataset};
use crate::error::{Error, Result};
use crate::gml::{total_gml_loss, DualVae, GmlNoise, LossBreakdown, LossWeights};
use crate::numkit::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Usage("batch_size must be positive".into()));
        }
        if !(self.adam.learning_rate.is_finite() && self.adam.learning_rate >= 0.0) {
            return Err(Error::Usage(format!(
                "invalid learning rate {}",
                self.adam.learning_rate
            )));
        }
        self.weights.validate()
    }
}

/// Batch-averaged loss terms, one entry per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<LossBreakdown>,
}

impl TrainLog {
    pub fn first_total(&self) -> Option<f64> {
        self.epochs.first().map(|b| b.total)
    }

    pub fn last_total(&self) -> Option<f64> {
        self.epochs.last().map(|b| b.total)
    }
}

/// Trains `vae` in place.
///
/// Each epoch visits every seen training row once as an anchor, in shuffled
/// order; positives, negatives and reparameterisation noise are redrawn per
/// batch.
pub fn train_gml<R: Rng + ?Sized>(
    vae: &mut DualVae,
    dataset: &ZslDataset,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainLog> {
    config.validate()?;
    let sampler = TripletSampler::new(dataset)?;
    if vae.visual_dim() != dataset.visual_dim() || vae.attribute_dim() != dataset.attribute_dim() {
        return Err(Error::Usage("model and dataset dimensions differ".into()));
    }
    let mut params = Vec::with_capacity(vae.param_count());
    vae.write_params(&mut params);
    let mut adam = AdamState::new(params.len(), config.adam);
    let mut log = TrainLog::default();

    for epoch in 0..config.epochs {
        let anchors = sampler.shuffled_anchors(rng);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for chunk in anchors.chunks(config.batch_size) {
            let batch = sampler.batch_for_anchors(chunk, rng)?;
            let noise = GmlNoise::sample(batch.len(), vae.latent_dim(), rng);
            let out = total_gml_loss(vae, &batch, &config.weights, &noise)?;
            if !out.breakdown.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {batches}"
                )));
            }
            let grads = out.grads.to_flat();
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, batch {batches}"
                )));
            }
            adam_step(&mut params, &grads, &mut adam)?;
            vae.read_params(&params)?;
            accumulate(&mut sum, &out.breakdown);
            batches += 1;
        }
        log.epochs.push(scaled(&sum, 1.0 / batches.max(1) as f64));
    }
    Ok(log)
}

fn accumulate(acc: &mut LossBreakdown, b: &LossBreakdown) {
    acc.v_vae += b.v_vae;
    acc.s_vae += b.s_vae;
    acc.wasserstein += b.wasserstein;
    acc.cross_reconstruction += b.cross_reconstruction;
    acc.v_triplet += b.v_triplet;
    acc.s_triplet += b.s_triplet;
    acc.multimodal_triplet += b.multimodal_triplet;
    acc.total += b.total;
}

fn scaled(b: &LossBreakdown, s: f64) -> LossBreakdown {
    LossBreakdown {
        v_vae: b.v_vae * s,
        s_vae: b.s_vae * s,
        wasserstein: b.wasserstein * s,
        cross_reconstruction: b.cross_reconstruction * s,
        v_triplet: b.v_triplet * s,
        s_triplet: b.s_triplet * s,
        multimodal_triplet: b.multimodal_triplet * s,
        total: b.total * s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{make_synthetic, SyntheticSpec};
    use crate::gml::DualVaeConfig;
    use crate::numkit::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn four_class() -> ZslDataset {
        make_synthetic(&SyntheticSpec {
            seen_count: 4,
            unseen_count: 1,
            visual_dim: 8,
            attribute_dim: 4,
            samples_per_class: 40,
            cluster_spread: 1.0,
            overlap: 0.3,
            test_fraction: 0.25,
            seed: 3,
        })
        .unwrap()
    }

    fn run(epochs: usize, seed: u64) -> (DualVae, TrainLog) {
        let ds = four_class();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vae = DualVae::init(&DualVaeConfig::uniform(8, 4, 4, 16), &mut rng);
        let cfg = TrainConfig {
            epochs,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let log = train_gml(&mut vae, &ds, &cfg, &mut rng).unwrap();
        (vae, log)
    }

    #[test]
    fn zero_epochs_is_identity() {
        let ds = four_class();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = DualVae::init(&DualVaeConfig::uniform(8, 4, 4, 16), &mut rng);
        let mut vae = init.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let log = train_gml(&mut vae, &ds, &cfg, &mut rng).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(vae, init);
    }

    #[test]
    fn fifty_epochs_descend() {
        let (_, log) = run(50, 4);
        assert_eq!(log.epochs.len(), 50);
        assert!(log.last_total().unwrap() < log.first_total().unwrap());
    }

    #[test]
    fn same_seed_same_log() {
        let (a, la) = run(5, 11);
        let (b, lb) = run(5, 11);
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }

    #[test]
    fn single_seen_class_is_usage_error() {
        let ds = ZslDataset::new(
            Matrix::zeros(4, 2),
            Matrix::zeros(2, 1),
            vec![0, 0, 1, 1],
            vec![0],
            vec![1],
            vec![0, 1],
            vec![2, 3],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut vae = DualVae::init(&DualVaeConfig::uniform(2, 1, 1, 2), &mut rng);
        let r = train_gml(&mut vae, &ds, &TrainConfig::default(), &mut rng);
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn divergence_is_numeric_error() {
        let ds = four_class();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut vae = DualVae::init(&DualVaeConfig::uniform(8, 4, 4, 16), &mut rng);
        vae.q_v.layers_mut()[0].bias[0] = f32::NAN;
        let r = train_gml(&mut vae, &ds, &TrainConfig::default(), &mut rng);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
