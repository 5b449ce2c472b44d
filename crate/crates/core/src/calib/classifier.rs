//! Linear softmax classifiers trained by full-batch Adam on cross-entropy.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{adam_step, AdamConfig, AdamState, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// `input_dim × class_count`.
    pub weight: Matrix,
    pub bias: Vec<f32>,
    pub class_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            learning_rate: 0.01,
        }
    }
}

impl SoftmaxClassifier {
    pub fn new(weight: Matrix, bias: Vec<f32>, class_ids: Vec<usize>) -> Result<Self> {
        if weight.cols() != class_ids.len() || bias.len() != class_ids.len() {
            return Err(Error::shape(format!(
                "classifier has {} weight columns, {} biases, {} class ids",
                weight.cols(),
                bias.len(),
                class_ids.len()
            )));
        }
        let mut sorted = class_ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != class_ids.len() {
            return Err(Error::Validation(
                "classifier class ids must be unique".into(),
            ));
        }
        Ok(Self {
            weight,
            bias,
            class_ids,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn class_count(&self) -> usize {
        self.class_ids.len()
    }

    /// Position of `class` in the output vector.
    pub fn position_of(&self, class: usize) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class)
    }

    /// Logits for every row, in f64.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix<f64>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "classifier expects {} features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut out = x.cast::<f64>().matmul(&self.weight.cast::<f64>())?;
        let bias: Vec<f64> = self.bias.iter().map(|&b| b as f64).collect();
        out.add_row_vector(&bias)?;
        Ok(out)
    }

    /// Row-wise class probabilities.
    pub fn probs(&self, x: &Matrix) -> Result<Matrix<f64>> {
        let mut logits = self.logits(x)?;
        for r in 0..logits.rows() {
            softmax_in_place(logits.row_mut(r));
        }
        Ok(logits)
    }

    /// Class id of the most probable output for every row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.probs(x)?;
        Ok(p.row_iter()
            .map(|row| self.class_ids[argmax(row)])
            .collect())
    }
}

/// Probabilities for a single feature row.
pub fn softmax_probs(clf: &SoftmaxClassifier, x: &[f32]) -> Result<Vec<f64>> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(clf.probs(&m)?.into_vec())
}

/// Max-shifted softmax; never overflows.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fits a linear softmax from zero initialisation.
///
/// The loss is the mean cross-entropy, so the result does not depend on the
/// random state and duplicating the training set leaves it unchanged.
pub fn train_softmax(
    features: &Matrix,
    labels: &[usize],
    class_ids: &[usize],
    config: &SoftmaxConfig,
) -> Result<SoftmaxClassifier> {
    if class_ids.len() < 2 {
        return Err(Error::Validation(format!(
            "a softmax needs at least 2 classes, got {}",
            class_ids.len()
        )));
    }
    if features.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    // Rejects duplicate class ids before any work is done.
    SoftmaxClassifier::new(
        Matrix::zeros(features.cols(), class_ids.len()),
        vec![0.0; class_ids.len()],
        class_ids.to_vec(),
    )?;
    let index: HashMap<usize, usize> = class_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut targets = Vec::with_capacity(labels.len());
    let mut counts = vec![0usize; class_ids.len()];
    for &l in labels {
        let k = *index.get(&l).ok_or_else(|| {
            Error::Validation(format!("label {l} is not among the classifier's classes"))
        })?;
        counts[k] += 1;
        targets.push(k);
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Validation(format!(
            "class {} has no training samples",
            class_ids[k]
        )));
    }

    let x = features.cast::<f64>();
    let (d, k) = (features.cols(), class_ids.len());
    let mut params = vec![0.0f64; d * k + k];
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);
    let mut adam = AdamState::new(params.len(), adam_cfg);
    let inv_n = 1.0 / labels.len() as f64;
    for _ in 0..config.steps {
        let w = Matrix::from_vec(d, k, params[..d * k].to_vec())?;
        let mut g = x.matmul(&w)?;
        g.add_row_vector(&params[d * k..])?;
        for (r, &t) in targets.iter().enumerate() {
            let row = g.row_mut(r);
            softmax_in_place(row);
            row[t] -= 1.0;
            row.iter_mut().for_each(|v| *v *= inv_n);
        }
        let gw = x.t_matmul(&g)?;
        let mut grads = gw.into_vec();
        grads.extend(g.sum_rows());
        adam_step(&mut params, &grads, &mut adam)?;
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("softmax training diverged".into()));
    }
    let f: Vec<f32> = params.iter().map(|&p| p as f32).collect();
    SoftmaxClassifier::new(
        Matrix::from_vec(d, k, f[..d * k].to_vec())?,
        f[d * k..].to_vec(),
        class_ids.to_vec(),
    )
}
