//! Conventional zero-shot protocol: classify unseen test samples among the
//! unseen classes only.

use rand::Rng;

use crate::calib::{train_softmax, SoftmaxConfig};
use crate::datakit::{build_latent_train_set, LatentMode, ZslDataset};
use crate::error::{Error, Result};
use crate::evalkit::per_class_top1;
use crate::gml::{DualVae, Modality};

pub const DEFAULT_ZSL_PER_CLASS: usize = 400;

/// Trains a softmax on `per_class` attribute-generated latents per unseen
/// class and scores the mean-encoded unseen test visuals.
pub fn zsl_accuracy<R: Rng + ?Sized>(
    vae: &DualVae,
    dataset: &ZslDataset,
    per_class: usize,
    mode: LatentMode,
    softmax: &SoftmaxConfig,
    rng: &mut R,
) -> Result<f64> {
    if dataset.unseen_classes.len() < 2 {
        return Err(Error::Usage(
            "the unseen-only protocol needs at least 2 unseen classes".into(),
        ));
    }
    let unseen_only = ZslDataset {
        seen_classes: Vec::new(),
        ..dataset.clone()
    };
    let set = build_latent_train_set(vae, &unseen_only, 0, per_class, mode, rng)?;
    let clf = train_softmax(&set.latents, &set.labels, &dataset.unseen_classes, softmax)?;
    let rows: Vec<usize> = dataset
        .test_index
        .iter()
        .copied()
        .filter(|&i| !dataset.is_seen(dataset.labels[i]))
        .collect();
    let labels: Vec<usize> = rows.iter().map(|&i| dataset.labels[i]).collect();
    let z = vae
        .encode(Modality::Visual, &dataset.visual.select_rows(&rows))?
        .mean;
    let preds = clf.predict(&z)?;
    per_class_top1(&preds, &labels, &dataset.unseen_classes)
}
