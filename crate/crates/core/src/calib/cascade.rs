//! Two-stage prediction: confident samples go to the seen-class classifier.

use serde::{Deserialize, Serialize};

use crate::calib::{argmax, seen_entropy, EntropyMode, SoftmaxClassifier};
use crate::error::{Error, Result};
use crate::gml::{DualVae, Modality};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Entropy threshold in nats.
    pub tau: f64,
    #[serde(default)]
    pub entropy_mode: EntropyMode,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            tau: 2.7,
            entropy_mode: EntropyMode::default(),
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(Error::Usage(format!(
                "tau must be non-negative, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    SeenClassifier,
    GeneralClassifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: usize,
    pub route: Route,
    pub entropy: f64,
}

/// The general classifier's view of a batch: predicted class and seen-class
/// entropy per row. Routing only needs these, so they can be cached across
/// thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralOutputs {
    pub classes: Vec<usize>,
    pub entropies: Vec<f64>,
}

/// Mean-encodes visuals and scores them with the general classifier.
pub fn general_outputs(
    general: &SoftmaxClassifier,
    seen_clf: &SoftmaxClassifier,
    vae: &DualVae,
    x_visual: &Matrix,
    mode: EntropyMode,
) -> Result<GeneralOutputs> {
    if x_visual.cols() != vae.visual_dim() || x_visual.cols() != seen_clf.input_dim() {
        return Err(Error::Usage(format!(
            "visual rows have {} features; model expects {}, seen classifier {}",
            x_visual.cols(),
            vae.visual_dim(),
            seen_clf.input_dim()
        )));
    }
    if general.input_dim() != vae.latent_dim() {
        return Err(Error::Usage(format!(
            "general classifier takes {} inputs, latent dim is {}",
            general.input_dim(),
            vae.latent_dim()
        )));
    }
    let seen_positions = seen_clf
        .class_ids
        .iter()
        .map(|&c| {
            general.position_of(c).ok_or_else(|| {
                Error::Usage(format!(
                    "seen class {c} is unknown to the general classifier"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let z = vae.encode(Modality::Visual, x_visual)?.mean;
    let probs = general.probs(&z)?;
    let mut classes = Vec::with_capacity(probs.rows());
    let mut entropies = Vec::with_capacity(probs.rows());
    for row in probs.row_iter() {
        classes.push(general.class_ids[argmax(row)]);
        entropies.push(seen_entropy(row, &seen_positions, mode)?);
    }
    Ok(GeneralOutputs { classes, entropies })
}

/// Applies the threshold to precomputed general outputs.
///
/// `seen_predictions` holds the seen classifier's output for every row.
pub fn route_with_threshold(
    general: &GeneralOutputs,
    seen_predictions: &[usize],
    tau: f64,
) -> Vec<Prediction> {
    general
        .classes
        .iter()
        .zip(&general.entropies)
        .zip(seen_predictions)
        .map(|((&g, &h), &s)| {
            if h < tau {
                Prediction {
                    class_id: s,
                    route: Route::SeenClassifier,
                    entropy: h,
                }
            } else {
                Prediction {
                    class_id: g,
                    route: Route::GeneralClassifier,
                    entropy: h,
                }
            }
        })
        .collect()
}

/// Predicts every row of `x_visual`.
///
/// Rows whose seen-class entropy is strictly below `tau` are classified by
/// `seen_clf` on the raw visual features; the rest take the general
/// classifier's argmax over all classes.
pub fn cascade_predict_batch(
    general: &SoftmaxClassifier,
    seen_clf: &SoftmaxClassifier,
    vae: &DualVae,
    x_visual: &Matrix,
    cfg: &CascadeConfig,
) -> Result<Vec<Prediction>> {
    cfg.validate()?;
    let g = general_outputs(general, seen_clf, vae, x_visual, cfg.entropy_mode)?;
    let seen = seen_clf.predict(x_visual)?;
    Ok(route_with_threshold(&g, &seen, cfg.tau))
}

/// Single-row form of [`cascade_predict_batch`].
pub fn cascade_predict(
    general: &SoftmaxClassifier,
    seen_clf: &SoftmaxClassifier,
    vae: &DualVae,
    x_visual: &[f32],
    cfg: &CascadeConfig,
) -> Result<Prediction> {
    let x = Matrix::from_vec(1, x_visual.len(), x_visual.to_vec())?;
    Ok(cascade_predict_batch(general, seen_clf, vae, &x, cfg)?[0])
}
