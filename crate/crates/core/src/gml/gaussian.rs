//! Diagonal Gaussian encoder outputs and the reparameterized latents drawn from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, MlpNet, Scalar};

/// Which encoder produced a latent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Semantic,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::Visual, Modality::Semantic];
}

/// Per-row mean and log-variance of a diagonal Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams<T = f32> {
    pub mean: Matrix<T>,
    pub log_variance: Matrix<T>,
}

impl<T: Scalar> GaussianParams<T> {
    pub fn new(mean: Matrix<T>, log_variance: Matrix<T>) -> Result<Self> {
        mean.ensure_same_shape(&log_variance, "gaussian params")?;
        Ok(Self { mean, log_variance })
    }

    /// Splits an encoder output `[mean ‖ log-variance]` into its halves.
    pub fn from_encoder_output(out: &Matrix<T>) -> Result<Self> {
        if !out.cols().is_multiple_of(2) {
            return Err(Error::shape(format!(
                "encoder output width {} is not 2 × latent_dim",
                out.cols()
            )));
        }
        let half = out.cols() / 2;
        Ok(Self {
            mean: out.slice_cols(0, half),
            log_variance: out.slice_cols(half, out.cols()),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.mean.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.mean.cols()
    }

    /// Standard deviations `exp(log_variance / 2)`.
    pub fn std_dev(&self) -> Matrix<T> {
        let half = T::from_f64(0.5);
        self.log_variance.map(|lv| (lv * half).exp())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            mean: self.mean.select_rows(rows),
            log_variance: self.log_variance.select_rows(rows),
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        self.mean.ensure_same_shape(&other.mean, "gaussian params")
    }
}

/// Latent codes with the modality of the encoder that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch<T = f32> {
    pub z: Matrix<T>,
    pub source: Modality,
}

impl<T: Scalar> LatentBatch<T> {
    pub fn new(z: Matrix<T>, source: Modality) -> Self {
        Self { z, source }
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            z: self.z.slice_rows(start, end),
            source: self.source,
        }
    }
}

pub fn encode<T: Scalar>(encoder: &MlpNet<T>, batch: &Matrix<T>) -> Result<GaussianParams<T>> {
    let out = encoder.predict(batch)?;
    GaussianParams::from_encoder_output(&out)
}

/// `z = mean + exp(log_variance / 2) ⊙ noise`.
pub fn reparameterize<T: Scalar>(
    gp: &GaussianParams<T>,
    noise: &Matrix<T>,
    source: Modality,
) -> Result<LatentBatch<T>> {
    gp.mean.ensure_same_shape(noise, "reparameterize noise")?;
    let sd = gp.std_dev();
    let scaled = sd.zip_map(noise, |s, e| s * e)?;
    let z = gp.mean.zip_map(&scaled, |m, s| m + s)?;
    Ok(LatentBatch::new(z, source))
}

/// Pulls `∂L/∂z` back to `(∂L/∂mean, ∂L/∂log_variance)`.
pub(crate) fn reparameterize_backward<T: Scalar>(
    gp: &GaussianParams<T>,
    noise: &Matrix<T>,
    grad_z: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let half = T::from_f64(0.5);
    let sd = gp.std_dev();
    let mut grad_lv = grad_z.zip_map(noise, |g, e| g * e)?;
    for (g, &s) in grad_lv.as_mut_slice().iter_mut().zip(sd.as_slice()) {
        *g = *g * half * s;
    }
    Ok((grad_z.clone(), grad_lv))
}

#[inline]
pub(crate) fn batch_scale<T: Scalar>(rows: usize) -> T {
    if rows == 0 {
        T::zero()
    } else {
        T::one() / T::from_f64(rows as f64)
    }
}

/// Batch mean of `½ Σᵢ (μᵢ² + σᵢ² − 1 − ln σᵢ²)`.
pub fn kl_to_standard_normal<T: Scalar>(gp: &GaussianParams<T>) -> T {
    let half = T::from_f64(0.5);
    let total: T = gp
        .mean
        .as_slice()
        .iter()
        .zip(gp.log_variance.as_slice())
        .map(|(&m, &lv)| half * (m * m + lv.exp() - T::one() - lv))
        .sum();
    total * batch_scale(gp.batch_size())
}

/// Gradient of [`kl_to_standard_normal`] with respect to mean and log-variance.
pub fn kl_to_standard_normal_grad<T: Scalar>(gp: &GaussianParams<T>) -> (Matrix<T>, Matrix<T>) {
    let s: T = batch_scale(gp.batch_size());
    let half = T::from_f64(0.5);
    let d_mean = gp.mean.map(|m| m * s);
    let d_lv = gp.log_variance.map(|lv| half * (lv.exp() - T::one()) * s);
    (d_mean, d_lv)
}
