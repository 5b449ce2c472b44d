//! Confusion matrices and entropy histograms.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_order: Vec<usize>,
    /// `rows[c][c']` is the fraction of class-`c` samples predicted as `c'`.
    pub rows: Vec<Vec<f64>>,
}

/// Row-normalised confusion matrix. Rows of classes without samples are zero.
pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    class_order: &[usize],
) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let index: HashMap<usize, usize> = class_order
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let k = class_order.len();
    let mut counts = vec![vec![0usize; k]; k];
    let lookup = |c: usize, what: &str| {
        index
            .get(&c)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} class {c} is not in the class order")))
    };
    for (&p, &l) in predictions.iter().zip(labels) {
        counts[lookup(l, "label")?][lookup(p, "predicted")?] += 1;
    }
    let rows = counts
        .into_iter()
        .map(|row| {
            let n: usize = row.iter().sum();
            row.into_iter()
                .map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                .collect()
        })
        .collect();
    Ok(ConfusionMatrix {
        class_order: class_order.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyHistogram {
    /// `bin_count + 1` shared edges over `[0, max entropy]`.
    pub edges: Vec<f64>,
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub tau: Option<f64>,
    /// Samples per group with entropy strictly below `tau`.
    pub seen_below_tau: usize,
    pub unseen_below_tau: usize,
}

pub fn entropy_histogram(
    entropies: &[f64],
    is_seen: &[bool],
    bin_count: usize,
    tau: Option<f64>,
) -> Result<EntropyHistogram> {
    if bin_count == 0 {
        return Err(Error::Usage("histogram needs at least one bin".into()));
    }
    if entropies.len() != is_seen.len() {
        return Err(Error::shape(format!(
            "{} entropies for {} seen flags",
            entropies.len(),
            is_seen.len()
        )));
    }
    let max = entropies.iter().copied().fold(0.0f64, f64::max);
    let top = if max > 0.0 { max } else { 1.0 };
    let edges = (0..=bin_count)
        .map(|i| top * i as f64 / bin_count as f64)
        .collect();
    let mut hist = EntropyHistogram {
        edges,
        seen: vec![0; bin_count],
        unseen: vec![0; bin_count],
        tau,
        seen_below_tau: 0,
        unseen_below_tau: 0,
    };
    for (&h, &s) in entropies.iter().zip(is_seen) {
        let bin = ((h / top * bin_count as f64).floor().max(0.0) as usize).min(bin_count - 1);
        let below = tau.is_some_and(|t| h < t);
        if s {
            hist.seen[bin] += 1;
            hist.seen_below_tau += usize::from(below);
        } else {
            hist.unseen[bin] += 1;
            hist.unseen_below_tau += usize::from(below);
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_give_identity() {
        let y = [3, 1, 2, 1];
        let cm = confusion_matrix(&y, &y, &[1, 2, 3]).unwrap();
        assert_eq!(
            cm.rows,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
    }

    #[test]
    fn forced_row() {
        let cm = confusion_matrix(&[1, 1, 1], &[0, 0, 1], &[0, 1]).unwrap();
        assert_eq!(cm.rows[0], vec![0.0, 1.0]);
    }

    #[test]
    fn unknown_prediction_is_validation_error() {
        assert!(matches!(
            confusion_matrix(&[9], &[0], &[0, 1]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn four_values_two_bins() {
        let h = entropy_histogram(
            &[0.0, 0.4, 0.6, 1.0],
            &[true, false, true, false],
            2,
            Some(0.5),
        )
        .unwrap();
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(h.seen, vec![1, 1]);
        assert_eq!(h.unseen, vec![1, 1]);
        assert_eq!((h.seen_below_tau, h.unseen_below_tau), (1, 1));
    }

    #[test]
    fn equal_entropies_share_one_bin() {
        let h = entropy_histogram(&[0.7; 5], &[true; 5], 4, None).unwrap();
        assert_eq!(h.seen.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.seen.iter().sum::<usize>(), 5);
        let z = entropy_histogram(&[0.0; 3], &[false; 3], 4, None).unwrap();
        assert_eq!(z.unseen, vec![3, 0, 0, 0]);
    }

    #[test]
    fn empty_input() {
        let h = entropy_histogram(&[], &[], 3, None).unwrap();
        assert_eq!(h.seen, vec![0; 3]);
        assert!(entropy_histogram(&[], &[], 0, None).is_err());
    }
}
