//! Triplet batches drawn from the seen-class training rows.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::datakit::synth::pick;
use crate::datakit::ZslDataset;
use crate::error::{Error, Result};
use crate::gml::{TripletBatch, TripletPart};

/// Per-class index of training rows, built once per training loop.
#[derive(Debug, Clone)]
pub struct TripletSampler<'a> {
    dataset: &'a ZslDataset,
    rows_by_class: BTreeMap<usize, Vec<usize>>,
    classes: Vec<usize>,
}

impl<'a> TripletSampler<'a> {
    pub fn new(dataset: &'a ZslDataset) -> Result<Self> {
        if dataset.seen_classes.len() < 2 {
            return Err(Error::Usage(format!(
                "triplets need at least 2 seen classes, dataset has {}",
                dataset.seen_classes.len()
            )));
        }
        let mut rows_by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &class in &dataset.seen_classes {
            let rows = dataset.train_rows_of(class);
            if rows.is_empty() {
                return Err(Error::Sampling(format!(
                    "seen class {class} has no training rows"
                )));
            }
            rows_by_class.insert(class, rows);
        }
        let classes = rows_by_class.keys().copied().collect();
        Ok(Self {
            dataset,
            rows_by_class,
            classes,
        })
    }

    /// Builds a batch whose anchors are the given training rows.
    ///
    /// Positives come uniformly from the anchor's class, negatives from a
    /// uniformly chosen different seen class.
    pub fn batch_for_anchors<R: Rng + ?Sized>(
        &self,
        anchors: &[usize],
        rng: &mut R,
    ) -> Result<TripletBatch> {
        let mut positives = Vec::with_capacity(anchors.len());
        let mut negatives = Vec::with_capacity(anchors.len());
        for &a in anchors {
            let class = self.dataset.labels[a];
            let same = self.rows_by_class.get(&class).ok_or_else(|| {
                Error::Sampling(format!("anchor row {a} is not a seen training row"))
            })?;
            positives.push(*pick(same, rng));
            // Draw among the other classes by skipping over the anchor's slot.
            let slot = self
                .classes
                .binary_search(&class)
                .expect("class indexed above");
            let mut k = rng.random_range(0..self.classes.len() - 1);
            if k >= slot {
                k += 1;
            }
            negatives.push(*pick(&self.rows_by_class[&self.classes[k]], rng));
        }
        Ok(TripletBatch {
            anchor: self.part(anchors),
            positive: self.part(&positives),
            negative: self.part(&negatives),
        })
    }

    /// `batch_size` anchors drawn uniformly from the training rows.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<TripletBatch> {
        let anchors: Vec<usize> = (0..batch_size)
            .map(|_| *pick(&self.dataset.train_index, rng))
            .collect();
        self.batch_for_anchors(&anchors, rng)
    }

    /// Training rows in a fresh random order, for epoch-style passes.
    pub fn shuffled_anchors<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut rows = self.dataset.train_index.clone();
        rows.shuffle(rng);
        rows
    }

    fn part(&self, rows: &[usize]) -> TripletPart {
        let labels: Vec<usize> = rows.iter().map(|&i| self.dataset.labels[i]).collect();
        TripletPart {
            visual: self.dataset.visual.select_rows(rows),
            semantic: self.dataset.attributes.select_rows(&labels),
            labels,
        }
    }
}

pub fn sample_triplet_batch<R: Rng + ?Sized>(
    dataset: &ZslDataset,
    batch_size: usize,
    rng: &mut R,
) -> Result<TripletBatch> {
    TripletSampler::new(dataset)?.sample(batch_size, rng)
}
