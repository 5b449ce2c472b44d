//! Attribute-to-image retrieval in the latent space.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::ZslDataset;
use crate::error::{Error, Result};
use crate::gml::{reparameterize, DualVae, Modality};
use crate::numkit::{squared_distance, Matrix};

/// Precision averaged over the relevant positions of a ranked list.
///
/// The denominator is the number of relevant items in the list, so a list
/// with no relevant item scores 0.
pub fn average_precision(relevant: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// Gallery row indices, nearest first, truncated.
    pub ranking: Vec<usize>,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub ratio_percent: u32,
    pub per_class_ap: BTreeMap<usize, f64>,
    pub mean_average_precision: f64,
}

fn check_ratio(ratio_percent: u32) -> Result<()> {
    if matches!(ratio_percent, 25 | 50 | 100) {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "retrieval ratio must be 25, 50 or 100, got {ratio_percent}"
        )))
    }
}

/// Mean of `n_generate` sampled latents for one attribute row.
pub fn class_query<R: Rng + ?Sized>(
    vae: &DualVae,
    class_attribute: &[f32],
    n_generate: usize,
    rng: &mut R,
) -> Result<Vec<f32>> {
    if n_generate == 0 {
        return Err(Error::Usage("n_generate must be positive".into()));
    }
    let row = Matrix::from_vec(1, class_attribute.len(), class_attribute.to_vec())?;
    let gp = vae.encode(Modality::Semantic, &row)?;
    let reps = gp.select_rows(&vec![0; n_generate]);
    let noise = Matrix::standard_normal(n_generate, vae.latent_dim(), rng);
    let z = reparameterize(&reps, &noise, Modality::Semantic)?.z;
    let inv = 1.0 / n_generate as f32;
    Ok(z.sum_rows().into_iter().map(|v| v * inv).collect())
}

/// Ranks precomputed gallery latents by Euclidean distance to `query`.
///
/// Ties keep gallery order. The list is cut at `ceil(ratio · R)` where `R`
/// is the number of relevant gallery items.
pub fn rank_gallery(
    query: &[f32],
    gallery_latents: &Matrix,
    relevant: &[bool],
    ratio_percent: u32,
) -> Result<RetrievalResult> {
    check_ratio(ratio_percent)?;
    if gallery_latents.rows() == 0 {
        return Err(Error::Usage("retrieval gallery is empty".into()));
    }
    if gallery_latents.rows() != relevant.len() || gallery_latents.cols() != query.len() {
        return Err(Error::shape(
            "gallery, relevance flags and query disagree in size",
        ));
    }
    let mut order: Vec<(f32, usize)> = gallery_latents
        .row_iter()
        .enumerate()
        .map(|(i, row)| (squared_distance(row, query), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let r = relevant.iter().filter(|&&x| x).count();
    let keep = (r * ratio_percent as usize).div_ceil(100);
    let ranking: Vec<usize> = order.into_iter().take(keep).map(|(_, i)| i).collect();
    let flags: Vec<bool> = ranking.iter().map(|&i| relevant[i]).collect();
    Ok(RetrievalResult {
        average_precision: average_precision(&flags),
        ranking,
    })
}

/// Retrieves test rows for one class from its attribute vector.
pub fn retrieve<R: Rng + ?Sized>(
    vae: &DualVae,
    class_attribute: &[f32],
    gallery: &Matrix,
    relevant: &[bool],
    n_generate: usize,
    ratio_percent: u32,
    rng: &mut R,
) -> Result<RetrievalResult> {
    check_ratio(ratio_percent)?;
    let query = class_query(vae, class_attribute, n_generate, rng)?;
    let latents = vae.encode(Modality::Visual, gallery)?.mean;
    rank_gallery(&query, &latents, relevant, ratio_percent)
}

/// Mean average precision over `classes`, using all test rows as the gallery.
pub fn retrieval_map<R: Rng + ?Sized>(
    vae: &DualVae,
    dataset: &ZslDataset,
    classes: &[usize],
    n_generate: usize,
    ratio_percent: u32,
    rng: &mut R,
) -> Result<RetrievalReport> {
    check_ratio(ratio_percent)?;
    if classes.is_empty() {
        return Err(Error::Usage("no classes to retrieve".into()));
    }
    let gallery = dataset.test_visual();
    let labels = dataset.test_labels();
    let latents = vae.encode(Modality::Visual, &gallery)?.mean;
    let mut per_class_ap = BTreeMap::new();
    for &class in classes {
        let query = class_query(vae, dataset.attributes.row(class), n_generate, rng)?;
        let relevant: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        per_class_ap.insert(
            class,
            rank_gallery(&query, &latents, &relevant, ratio_percent)?.average_precision,
        );
    }
    let mean_average_precision = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(RetrievalReport {
        ratio_percent,
        per_class_ap,
        mean_average_precision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_ap() {
        let ap = average_precision(&[true, false, true]);
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((ap - 0.8333).abs() < 1e-4);
        assert_eq!(average_precision(&[true, true]), 1.0);
        assert_eq!(average_precision(&[false, false]), 0.0);
    }

    #[test]
    fn ranking_and_truncation() {
        let gallery = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![1.0], vec![2.0]]).unwrap();
        let relevant = [true, false, true, false];
        let r = rank_gallery(&[0.0], &gallery, &relevant, 100).unwrap();
        assert_eq!(r.ranking, vec![0, 2]);
        assert_eq!(r.average_precision, 1.0);
        let r = rank_gallery(&[0.0], &gallery, &relevant, 25).unwrap();
        assert_eq!(r.ranking, vec![0]);
    }

    #[test]
    fn bad_ratio_is_usage_error() {
        let g = Matrix::zeros(1, 1);
        assert!(matches!(
            rank_gallery(&[0.0], &g, &[true], 75),
            Err(Error::Usage(_))
        ));
    }
}
