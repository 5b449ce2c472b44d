//! Scalar loss terms over latent distributions and latent codes.
//!
//! Every term is a mean over batch rows. Each `*_grad` companion returns the
//! gradient of the same batch-mean value.

use crate::error::{Error, Result};
use crate::gml::gaussian::batch_scale;
use crate::gml::{kl_to_standard_normal_grad, GaussianParams, LatentBatch, Modality};
use crate::numkit::{squared_distance, Matrix, Scalar};

/// Squared 2-Wasserstein distance between diagonal Gaussians:
/// `‖μa − μb‖² + Σᵢ (σa,ᵢ − σb,ᵢ)²` with `σ` the standard deviation.
pub fn wasserstein2_diag<T: Scalar>(a: &GaussianParams<T>, b: &GaussianParams<T>) -> Result<T> {
    a.ensure_same_shape(b)?;
    let mean_term = squared_distance(a.mean.as_slice(), b.mean.as_slice());
    let cov_term = squared_distance(a.std_dev().as_slice(), b.std_dev().as_slice());
    Ok((mean_term + cov_term) * batch_scale(a.batch_size()))
}

/// Gradients of [`wasserstein2_diag`]: `(∂μa, ∂lva, ∂μb, ∂lvb)`.
pub fn wasserstein2_diag_grad<T: Scalar>(
    a: &GaussianParams<T>,
    b: &GaussianParams<T>,
) -> Result<[Matrix<T>; 4]> {
    a.ensure_same_shape(b)?;
    let s: T = batch_scale(a.batch_size());
    let two = T::from_f64(2.0);
    let d_mean_a = a.mean.zip_map(&b.mean, |x, y| two * (x - y) * s)?;
    let d_mean_b = d_mean_a.map(|v| -v);
    let sa = a.std_dev();
    let sb = b.std_dev();
    // ∂σ/∂lv = σ/2, so ∂(σa − σb)²/∂lva = (σa − σb)·σa.
    let d_lv_a = sa.zip_map(&sb, |x, y| (x - y) * x * s)?;
    let d_lv_b = sa.zip_map(&sb, |x, y| -(x - y) * y * s)?;
    Ok([d_mean_a, d_lv_a, d_mean_b, d_lv_b])
}

/// Batch mean of row-wise L1 distances `‖pred − target‖₁`.
pub fn l1_loss<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
    pred.ensure_same_shape(target, "l1 loss")?;
    let total: T = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| (p - t).abs())
        .sum();
    Ok(total * batch_scale(pred.rows()))
}

/// Subgradient of [`l1_loss`] with respect to `pred` (zero at ties).
pub fn l1_loss_grad<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<Matrix<T>> {
    let s: T = batch_scale(pred.rows());
    pred.zip_map(target, |p, t| {
        if p > t {
            s
        } else if p < t {
            -s
        } else {
            T::zero()
        }
    })
}

fn triplet_margins<T: Scalar>(
    anchor: &Matrix<T>,
    positive: &Matrix<T>,
    negative: &Matrix<T>,
    alpha: T,
) -> Result<Vec<T>> {
    anchor.ensure_same_shape(positive, "triplet positive")?;
    anchor.ensure_same_shape(negative, "triplet negative")?;
    Ok((0..anchor.rows())
        .map(|r| {
            squared_distance(anchor.row(r), positive.row(r))
                - squared_distance(anchor.row(r), negative.row(r))
                + alpha
        })
        .collect())
}

/// Batch mean of `max(‖za − zp‖² − ‖za − zn‖² + α, 0)`.
pub fn triplet_loss<T: Scalar>(
    anchor: &LatentBatch<T>,
    positive: &LatentBatch<T>,
    negative: &LatentBatch<T>,
    alpha: T,
) -> Result<T> {
    let d = triplet_margins(&anchor.z, &positive.z, &negative.z, alpha)?;
    let total: T = d.into_iter().map(|v| v.max(T::zero())).sum();
    Ok(total * batch_scale(anchor.z.rows()))
}

/// Gradients of [`triplet_loss`] for `(anchor, positive, negative)`.
pub fn triplet_loss_grad<T: Scalar>(
    anchor: &LatentBatch<T>,
    positive: &LatentBatch<T>,
    negative: &LatentBatch<T>,
    alpha: T,
) -> Result<[Matrix<T>; 3]> {
    let (a, p, n) = (&anchor.z, &positive.z, &negative.z);
    let d = triplet_margins(a, p, n, alpha)?;
    let s: T = batch_scale(a.rows());
    let two = T::from_f64(2.0);
    let mut ga = Matrix::zeros(a.rows(), a.cols());
    let mut gp = Matrix::zeros(a.rows(), a.cols());
    let mut gn = Matrix::zeros(a.rows(), a.cols());
    for (r, &margin) in d.iter().enumerate() {
        if margin <= T::zero() {
            continue;
        }
        for c in 0..a.cols() {
            let (av, pv, nv) = (a[(r, c)], p[(r, c)], n[(r, c)]);
            ga[(r, c)] = two * (nv - pv) * s;
            gp[(r, c)] = -two * (av - pv) * s;
            gn[(r, c)] = two * (av - nv) * s;
        }
    }
    Ok([ga, gp, gn])
}

/// Anchor/positive/negative latents produced by one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletLatents<T = f32> {
    pub anchor: LatentBatch<T>,
    pub positive: LatentBatch<T>,
    pub negative: LatentBatch<T>,
}

impl<T: Scalar> TripletLatents<T> {
    fn role(&self, role: usize) -> &LatentBatch<T> {
        match role {
            0 => &self.anchor,
            1 => &self.positive,
            _ => &self.negative,
        }
    }

    fn check_source(&self, expected: Modality) -> Result<()> {
        for role in 0..3 {
            if self.role(role).source != expected {
                return Err(Error::Usage(format!(
                    "expected {expected:?} latents, got {:?}",
                    self.role(role).source
                )));
            }
        }
        Ok(())
    }
}

/// The six `(anchor, positive, negative)` modality combinations that are not all equal.
pub const CROSS_MODAL_COMBINATIONS: [[Modality; 3]; 6] = {
    use Modality::{Semantic as S, Visual as V};
    [
        [V, V, S],
        [V, S, V],
        [V, S, S],
        [S, V, V],
        [S, V, S],
        [S, S, V],
    ]
};

fn pick<'a, T: Scalar>(
    visual: &'a TripletLatents<T>,
    semantic: &'a TripletLatents<T>,
    m: Modality,
) -> &'a TripletLatents<T> {
    match m {
        Modality::Visual => visual,
        Modality::Semantic => semantic,
    }
}

/// Sum over [`CROSS_MODAL_COMBINATIONS`] of the triplet hinge with anchor,
/// positive and negative each drawn from the indicated modality.
pub fn multimodal_triplet_loss<T: Scalar>(
    visual: &TripletLatents<T>,
    semantic: &TripletLatents<T>,
    alpha: T,
) -> Result<T> {
    visual.check_source(Modality::Visual)?;
    semantic.check_source(Modality::Semantic)?;
    let mut total = T::zero();
    for [i, j, m] in CROSS_MODAL_COMBINATIONS {
        total = total
            + triplet_loss(
                &pick(visual, semantic, i).anchor,
                &pick(visual, semantic, j).positive,
                &pick(visual, semantic, m).negative,
                alpha,
            )?;
    }
    Ok(total)
}

/// Gradients of [`multimodal_triplet_loss`], indexed `[modality][role]` with
/// modality 0 = visual, 1 = semantic and role 0/1/2 = anchor/positive/negative.
pub fn multimodal_triplet_loss_grad<T: Scalar>(
    visual: &TripletLatents<T>,
    semantic: &TripletLatents<T>,
    alpha: T,
) -> Result<[[Matrix<T>; 3]; 2]> {
    visual.check_source(Modality::Visual)?;
    semantic.check_source(Modality::Semantic)?;
    let zeros = |l: &LatentBatch<T>| Matrix::zeros(l.z.rows(), l.z.cols());
    let mut out = [
        [
            zeros(&visual.anchor),
            zeros(&visual.positive),
            zeros(&visual.negative),
        ],
        [
            zeros(&semantic.anchor),
            zeros(&semantic.positive),
            zeros(&semantic.negative),
        ],
    ];
    let idx = |m: Modality| match m {
        Modality::Visual => 0,
        Modality::Semantic => 1,
    };
    for [i, j, m] in CROSS_MODAL_COMBINATIONS {
        let [ga, gp, gn] = triplet_loss_grad(
            &pick(visual, semantic, i).anchor,
            &pick(visual, semantic, j).positive,
            &pick(visual, semantic, m).negative,
            alpha,
        )?;
        out[idx(i)][0].add_assign(&ga)?;
        out[idx(j)][1].add_assign(&gp)?;
        out[idx(m)][2].add_assign(&gn)?;
    }
    Ok(out)
}

/// Adds `scale · ∇KL` into existing mean / log-variance gradients.
pub(crate) fn kl_grad_scaled<T: Scalar>(
    gp: &GaussianParams<T>,
    scale: T,
    d_mean: &mut Matrix<T>,
    d_log_variance: &mut Matrix<T>,
) -> Result<()> {
    let (dm, dl) = kl_to_standard_normal_grad(gp);
    d_mean.axpy(scale, &dm)?;
    d_log_variance.axpy(scale, &dl)
}
