//! Per-class accuracy and the seen/unseen harmonic mean.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean over `class_set` of the fraction of each class's samples predicted correctly.
pub fn per_class_top1(predictions: &[usize], labels: &[usize], class_set: &[usize]) -> Result<f64> {
    let per_class = per_class_accuracy(predictions, labels, class_set)?;
    if per_class.is_empty() {
        return Err(Error::Usage(
            "per-class accuracy over an empty class set".into(),
        ));
    }
    Ok(per_class.values().sum::<f64>() / per_class.len() as f64)
}

/// Within-class accuracy for every class in `class_set`.
pub fn per_class_accuracy(
    predictions: &[usize],
    labels: &[usize],
    class_set: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut tally: BTreeMap<usize, (usize, usize)> =
        class_set.iter().map(|&c| (c, (0, 0))).collect();
    for (&p, &l) in predictions.iter().zip(labels) {
        if let Some((hit, total)) = tally.get_mut(&l) {
            *total += 1;
            *hit += usize::from(p == l);
        }
    }
    tally
        .into_iter()
        .map(|(c, (hit, total))| {
            if total == 0 {
                Err(Error::Usage(format!("class {c} has no evaluation samples")))
            } else {
                Ok((c, hit as f64 / total as f64))
            }
        })
        .collect()
}

/// `2ab / (a + b)`, defined as 0 when both are 0.
pub fn harmonic_mean(acc_seen: f64, acc_unseen: f64) -> f64 {
    let s = acc_seen + acc_unseen;
    if s == 0.0 {
        0.0
    } else {
        2.0 * acc_seen * acc_unseen / s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class_acc: BTreeMap<usize, f64>,
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub harmonic: f64,
    /// Accuracy under the unseen-only protocol, when it was run.
    pub zsl_acc: Option<f64>,
}

impl MetricsReport {
    /// Generalized evaluation: predictions range over all classes; accuracy is
    /// averaged separately over the seen and unseen classes present in `labels`.
    pub fn from_predictions(
        predictions: &[usize],
        labels: &[usize],
        seen_classes: &[usize],
        unseen_classes: &[usize],
    ) -> Result<Self> {
        let present: BTreeSet<usize> = labels.iter().copied().collect();
        let seen: Vec<usize> = seen_classes
            .iter()
            .copied()
            .filter(|c| present.contains(c))
            .collect();
        let unseen: Vec<usize> = unseen_classes
            .iter()
            .copied()
            .filter(|c| present.contains(c))
            .collect();
        if seen.is_empty() || unseen.is_empty() {
            return Err(Error::Usage(
                "evaluation needs test samples from both seen and unseen classes".into(),
            ));
        }
        let mut per_class_acc = per_class_accuracy(predictions, labels, &seen)?;
        per_class_acc.extend(per_class_accuracy(predictions, labels, &unseen)?);
        let mean_over =
            |cs: &[usize]| cs.iter().map(|c| per_class_acc[c]).sum::<f64>() / cs.len() as f64;
        let acc_seen = mean_over(&seen);
        let acc_unseen = mean_over(&unseen);
        Ok(Self {
            acc_seen,
            acc_unseen,
            harmonic: harmonic_mean(acc_seen, acc_unseen),
            per_class_acc,
            zsl_acc: None,
        })
    }
}
