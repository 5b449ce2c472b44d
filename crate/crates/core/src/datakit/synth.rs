//! Gaussian-cluster datasets with a controllable seen/unseen overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::datakit::ZslDataset;
use crate::error::{Error, Result};
use crate::numkit::{squared_distance, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seen_count: usize,
    pub unseen_count: usize,
    pub visual_dim: usize,
    pub attribute_dim: usize,
    pub samples_per_class: usize,
    /// Per-dimension standard deviation of samples around their centroid.
    pub cluster_spread: f64,
    /// 0 keeps unseen centroids where they were drawn; 1 moves each onto its
    /// nearest seen centroid.
    pub overlap: f64,
    /// Fraction of each seen class held out for testing.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub seed: u64,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seen_count: 8,
            unseen_count: 4,
            visual_dim: 32,
            attribute_dim: 16,
            samples_per_class: 100,
            cluster_spread: 1.0,
            overlap: 0.6,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seen_count < 2 {
            return Err(Error::Usage(format!(
                "need at least 2 seen classes, got {}",
                self.seen_count
            )));
        }
        if self.unseen_count == 0
            || self.visual_dim == 0
            || self.attribute_dim == 0
            || self.samples_per_class == 0
        {
            return Err(Error::Usage(
                "class counts, dims and samples per class must be ≥ 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Usage(format!(
                "overlap {} outside [0, 1]",
                self.overlap
            )));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::Usage("cluster_spread must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Usage(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Centroids actually used by a generated dataset, for inspection in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCentroids {
    pub seen: Vec<Vec<f64>>,
    pub unseen: Vec<Vec<f64>>,
}

impl SyntheticCentroids {
    /// Smallest Euclidean distance between any seen and any unseen centroid.
    pub fn min_seen_unseen_distance(&self) -> f64 {
        self.unseen
            .iter()
            .flat_map(|u| self.seen.iter().map(move |s| squared_distance(u, s)))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Base centroids with pairwise separation above `6 × spread`, drawn by rejection.
fn draw_base_centroids(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = spec.visual_dim;
    let total = spec.seen_count + spec.unseen_count;
    let spread = spec.cluster_spread;
    let min_sep2 = (6.0 * spread).powi(2);
    // Box half-width giving a typical pairwise distance around 10 × spread.
    let mut half_width = 10.0 * spread * (3.0 / (2.0 * d as f64)).sqrt();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut failures = 0;
    while centroids.len() < total {
        let dist = Uniform::new_inclusive(-half_width, half_width).expect("finite width");
        let candidate: Vec<f64> = (0..d).map(|_| dist.sample(rng)).collect();
        if centroids
            .iter()
            .all(|c| squared_distance(c, &candidate) > min_sep2)
        {
            centroids.push(candidate);
            failures = 0;
        } else {
            failures += 1;
            if failures >= 1000 {
                half_width *= 1.25;
                failures = 0;
            }
        }
    }
    centroids
}

/// Generates the dataset and the centroids behind it.
///
/// Random draws happen in a fixed order that does not depend on `overlap`, so
/// two specs differing only in overlap share base centroids and sample noise.
pub fn make_synthetic_with_centroids(
    spec: &SyntheticSpec,
) -> Result<(ZslDataset, SyntheticCentroids)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (s_count, u_count) = (spec.seen_count, spec.unseen_count);
    let total = s_count + u_count;
    let d = spec.visual_dim;
    let a = spec.attribute_dim;

    let base = draw_base_centroids(spec, &mut rng);
    let projection: Vec<f64> = (0..a * d)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v / (d as f64).sqrt()
        })
        .collect();
    let jitter: Vec<f64> = (0..total * a)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            0.05 * v
        })
        .collect();
    let n = spec.samples_per_class;
    let noise: Vec<f64> = (0..total * n * d)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * spec.cluster_spread
        })
        .collect();

    let seen: Vec<Vec<f64>> = base[..s_count].to_vec();
    let unseen: Vec<Vec<f64>> = base[s_count..]
        .iter()
        .map(|u| {
            let nearest = seen
                .iter()
                .min_by(|x, y| {
                    squared_distance(u, x)
                        .partial_cmp(&squared_distance(u, y))
                        .expect("finite distances")
                })
                .expect("at least two seen classes");
            u.iter()
                .zip(nearest)
                .map(|(&uv, &sv)| uv + spec.overlap * (sv - uv))
                .collect()
        })
        .collect();
    let centroids: Vec<&Vec<f64>> = seen.iter().chain(&unseen).collect();

    // Attributes are a fixed linear view of each class centroid plus a little jitter.
    let scale = 1.0 / spec.cluster_spread;
    let mut attributes = Matrix::zeros(total, a);
    for (k, c) in centroids.iter().enumerate() {
        for j in 0..a {
            let proj: f64 = (0..d).map(|i| projection[j * d + i] * c[i]).sum();
            attributes[(k, j)] = (scale * proj + jitter[k * a + j]) as f32;
        }
    }

    let mut visual = Matrix::zeros(total * n, d);
    let mut labels = Vec::with_capacity(total * n);
    let n_test = ((n as f64) * spec.test_fraction).round() as usize;
    let n_train = n - n_test.min(n);
    let (mut train_index, mut test_index) = (Vec::new(), Vec::new());
    for (k, c) in centroids.iter().enumerate() {
        for s in 0..n {
            let row = k * n + s;
            for i in 0..d {
                visual[(row, i)] = (c[i] + noise[row * d + i]) as f32;
            }
            labels.push(k);
            if k < s_count && s < n_train {
                train_index.push(row);
            } else {
                test_index.push(row);
            }
        }
    }

    let ds = ZslDataset::new(
        visual,
        attributes,
        labels,
        (0..s_count).collect(),
        (s_count..total).collect(),
        train_index,
        test_index,
    )?;
    Ok((ds, SyntheticCentroids { seen, unseen }))
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<ZslDataset> {
    make_synthetic_with_centroids(spec).map(|(ds, _)| ds)
}

/// Uniform random class draw used by tests and samplers.
pub(crate) fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> &'a T {
    &items[rng.random_range(0..items.len())]
}
