//! Latent training set for the general classifier.
//!
//! Seen classes contribute encodings of their training visuals; unseen
//! classes contribute encodings of their attribute row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::ZslDataset;
use crate::error::{Error, Result};
use crate::gml::{reparameterize, DualVae, Modality};
use crate::numkit::Matrix;

pub const DEFAULT_SEEN_PER_CLASS: usize = 200;
pub const DEFAULT_UNSEEN_PER_CLASS: usize = 400;

/// How encoder outputs become latent rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatentMode {
    /// `mean + σ ⊙ ε` with fresh noise for every row.
    #[default]
    Sampled,
    /// The encoder mean.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrainSet {
    pub latents: Matrix,
    pub labels: Vec<usize>,
    pub provenance: Vec<Modality>,
}

/// Source rows for a seen class, repeated cyclically up to `n`.
pub fn cyclic_rows(rows: &[usize], n: usize) -> Vec<usize> {
    rows.iter().copied().cycle().take(n).collect()
}

pub fn build_latent_train_set<R: Rng + ?Sized>(
    vae: &DualVae,
    dataset: &ZslDataset,
    n_seen: usize,
    n_unseen: usize,
    mode: LatentMode,
    rng: &mut R,
) -> Result<LatentTrainSet> {
    if vae.visual_dim() != dataset.visual_dim() || vae.attribute_dim() != dataset.attribute_dim() {
        return Err(Error::Usage(format!(
            "model expects {}-d visuals / {}-d attributes, dataset has {} / {}",
            vae.visual_dim(),
            vae.attribute_dim(),
            dataset.visual_dim(),
            dataset.attribute_dim()
        )));
    }
    let l = vae.latent_dim();
    let mut blocks = Vec::new();
    let mut labels = Vec::new();
    let mut provenance = Vec::new();

    let mut emit = |source: Modality, inputs: &Matrix, class: usize, rng: &mut R| -> Result<()> {
        let gp = vae.encode(source, inputs)?;
        let z = match mode {
            LatentMode::Mean => gp.mean,
            LatentMode::Sampled => {
                let noise = Matrix::standard_normal(inputs.rows(), l, rng);
                reparameterize(&gp, &noise, source)?.z
            }
        };
        labels.extend(std::iter::repeat_n(class, z.rows()));
        provenance.extend(std::iter::repeat_n(source, z.rows()));
        blocks.push(z);
        Ok(())
    };

    for &class in &dataset.seen_classes {
        let rows = dataset.train_rows_of(class);
        if rows.is_empty() {
            return Err(Error::Usage(format!(
                "seen class {class} has no training rows"
            )));
        }
        let picked = cyclic_rows(&rows, n_seen);
        emit(
            Modality::Visual,
            &dataset.visual.select_rows(&picked),
            class,
            rng,
        )?;
    }
    for &class in &dataset.unseen_classes {
        let attrs = dataset.attributes.select_rows(&vec![class; n_unseen]);
        emit(Modality::Semantic, &attrs, class, rng)?;
    }

    let refs: Vec<&Matrix> = blocks.iter().collect();
    let latents = if refs.is_empty() {
        Matrix::zeros(0, l)
    } else {
        Matrix::vstack(&refs)?
    };
    Ok(LatentTrainSet {
        latents,
        labels,
        provenance,
    })
}
