//! The full training objective and its gradient with respect to all four networks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gml::gaussian::reparameterize_backward;
use crate::gml::losses::{
    kl_grad_scaled, l1_loss, l1_loss_grad, multimodal_triplet_loss, multimodal_triplet_loss_grad,
    triplet_loss, triplet_loss_grad, wasserstein2_diag, wasserstein2_diag_grad, TripletLatents,
};
use crate::gml::{
    kl_to_standard_normal, reparameterize, DualVae, DualVaeGrads, GaussianParams, LatentBatch,
    Modality,
};
use crate::numkit::{Matrix, MlpGrads, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// KL weight of the visual VAE.
    pub beta1: f64,
    /// KL weight of the semantic VAE.
    pub beta2: f64,
    /// Weight of the cross-modal Wasserstein term.
    pub lambda_w: f64,
    /// Shared weight of every triplet term.
    pub triplet_weight: f64,
    pub margin_alpha: f64,
    /// Adds the semantic-only triplet term alongside the visual one.
    pub include_s_triplet: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
            lambda_w: 1.0,
            triplet_weight: 0.1,
            margin_alpha: 5.0,
            include_s_triplet: true,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("lambda_w", self.lambda_w),
            ("triplet_weight", self.triplet_weight),
            ("margin_alpha", self.margin_alpha),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} must be finite and ≥ 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One role (anchor, positive or negative) of a triplet batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletPart<T = f32> {
    pub visual: Matrix<T>,
    /// Class attribute row of each member.
    pub semantic: Matrix<T>,
    pub labels: Vec<usize>,
}

/// Anchor, positive and negative batches of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch<T = f32> {
    pub anchor: TripletPart<T>,
    pub positive: TripletPart<T>,
    pub negative: TripletPart<T>,
}

impl<T: Scalar> TripletBatch<T> {
    pub fn len(&self) -> usize {
        self.anchor.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for part in [&self.anchor, &self.positive, &self.negative] {
            if part.labels.len() != n || part.visual.rows() != n || part.semantic.rows() != n {
                return Err(Error::shape("triplet parts must share one batch size"));
            }
        }
        for r in 0..n {
            if self.anchor.labels[r] != self.positive.labels[r] {
                return Err(Error::Validation(format!(
                    "row {r}: positive label differs from anchor"
                )));
            }
            if self.anchor.labels[r] == self.negative.labels[r] {
                return Err(Error::Validation(format!(
                    "row {r}: negative shares the anchor label"
                )));
            }
        }
        Ok(())
    }

    /// Anchor, positive and negative visuals stacked in that order.
    pub fn stacked_visual(&self) -> Result<Matrix<T>> {
        Matrix::vstack(&[
            &self.anchor.visual,
            &self.positive.visual,
            &self.negative.visual,
        ])
    }

    pub fn stacked_semantic(&self) -> Result<Matrix<T>> {
        Matrix::vstack(&[
            &self.anchor.semantic,
            &self.positive.semantic,
            &self.negative.semantic,
        ])
    }

    pub fn cast<U: Scalar>(&self) -> TripletBatch<U> {
        let part = |p: &TripletPart<T>| TripletPart {
            visual: p.visual.cast(),
            semantic: p.semantic.cast(),
            labels: p.labels.clone(),
        };
        TripletBatch {
            anchor: part(&self.anchor),
            positive: part(&self.positive),
            negative: part(&self.negative),
        }
    }
}

/// Standard-normal draws for the two encoders, shaped like the stacked batch
/// (`3 × batch_size` rows: anchors, positives, negatives).
#[derive(Debug, Clone, PartialEq)]
pub struct GmlNoise<T = f32> {
    pub visual: Matrix<T>,
    pub semantic: Matrix<T>,
}

impl<T: Scalar> GmlNoise<T> {
    pub fn zeros(batch_size: usize, latent_dim: usize) -> Self {
        Self {
            visual: Matrix::zeros(3 * batch_size, latent_dim),
            semantic: Matrix::zeros(3 * batch_size, latent_dim),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(
        batch_size: usize,
        latent_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            visual: Matrix::standard_normal(3 * batch_size, latent_dim, rng),
            semantic: Matrix::standard_normal(3 * batch_size, latent_dim, rng),
        }
    }
}

/// Every term of the objective, unweighted, plus the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub v_vae: f64,
    pub s_vae: f64,
    pub wasserstein: f64,
    pub cross_reconstruction: f64,
    pub v_triplet: f64,
    pub s_triplet: f64,
    pub multimodal_triplet: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [
            self.v_vae,
            self.s_vae,
            self.wasserstein,
            self.cross_reconstruction,
            self.v_triplet,
            self.s_triplet,
            self.multimodal_triplet,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub struct GmlLossOutput<T = f32> {
    pub breakdown: LossBreakdown,
    pub value: T,
    pub grads: DualVaeGrads<T>,
}

pub struct VaeLossOutput<T = f32> {
    pub value: T,
    pub encoder_grads: MlpGrads<T>,
    pub decoder_grads: MlpGrads<T>,
}

/// L1 self-reconstruction plus β-weighted KL for one side of the model.
pub fn vae_loss<T: Scalar>(
    vae: &DualVae<T>,
    side: Modality,
    batch: &Matrix<T>,
    noise: &Matrix<T>,
    weights: &LossWeights,
) -> Result<VaeLossOutput<T>> {
    let beta = T::from_f64(match side {
        Modality::Visual => weights.beta1,
        Modality::Semantic => weights.beta2,
    });
    let encoder = vae.encoder(side);
    let decoder = vae.decoder(side);
    let (enc_out, enc_cache) = encoder.forward(batch)?;
    let gp = GaussianParams::from_encoder_output(&enc_out)?;
    let z = reparameterize(&gp, noise, side)?;
    let (recon, dec_cache) = decoder.forward(&z.z)?;
    let value = l1_loss(&recon, batch)? + beta * kl_to_standard_normal(&gp);

    let (decoder_grads, dz) = decoder.backward(&dec_cache, &l1_loss_grad(&recon, batch)?)?;
    let (mut d_mean, mut d_lv) = reparameterize_backward(&gp, noise, &dz)?;
    kl_grad_scaled(&gp, beta, &mut d_mean, &mut d_lv)?;
    let (encoder_grads, _) = encoder.backward(&enc_cache, &Matrix::hstack(&d_mean, &d_lv)?)?;
    Ok(VaeLossOutput {
        value,
        encoder_grads,
        decoder_grads,
    })
}

/// Batch mean of `‖P_v(z_s) − x‖₁ + ‖P_s(z_v) − s‖₁`.
pub fn cross_reconstruction_loss<T: Scalar>(
    x: &Matrix<T>,
    s: &Matrix<T>,
    z_v: &LatentBatch<T>,
    z_s: &LatentBatch<T>,
    vae: &DualVae<T>,
) -> Result<T> {
    if z_v.source != Modality::Visual || z_s.source != Modality::Semantic {
        return Err(Error::Usage(format!(
            "cross reconstruction needs (visual, semantic) latents, got ({:?}, {:?})",
            z_v.source, z_s.source
        )));
    }
    let x_hat = vae.p_v.predict(&z_s.z)?;
    let s_hat = vae.p_s.predict(&z_v.z)?;
    Ok(l1_loss(&x_hat, x)? + l1_loss(&s_hat, s)?)
}

/// Gradients of [`cross_reconstruction_loss`] with respect to both decoders
/// and both latent batches.
pub struct CrossReconstructionGrads<T = f32> {
    pub p_v: MlpGrads<T>,
    pub p_s: MlpGrads<T>,
    pub z_v: Matrix<T>,
    pub z_s: Matrix<T>,
}

pub fn cross_reconstruction_loss_grad<T: Scalar>(
    x: &Matrix<T>,
    s: &Matrix<T>,
    z_v: &LatentBatch<T>,
    z_s: &LatentBatch<T>,
    vae: &DualVae<T>,
) -> Result<CrossReconstructionGrads<T>> {
    if z_v.source != Modality::Visual || z_s.source != Modality::Semantic {
        return Err(Error::Usage(format!(
            "cross reconstruction needs (visual, semantic) latents, got ({:?}, {:?})",
            z_v.source, z_s.source
        )));
    }
    let (x_hat, cache_v) = vae.p_v.forward(&z_s.z)?;
    let (s_hat, cache_s) = vae.p_s.forward(&z_v.z)?;
    let (p_v, dz_s) = vae.p_v.backward(&cache_v, &l1_loss_grad(&x_hat, x)?)?;
    let (p_s, dz_v) = vae.p_s.backward(&cache_s, &l1_loss_grad(&s_hat, s)?)?;
    Ok(CrossReconstructionGrads {
        p_v,
        p_s,
        z_v: dz_v,
        z_s: dz_s,
    })
}

fn add_rows<T: Scalar>(dst: &mut Matrix<T>, offset: usize, src: &Matrix<T>, scale: T) {
    for r in 0..src.rows() {
        for (d, &v) in dst.row_mut(offset + r).iter_mut().zip(src.row(r)) {
            *d = *d + scale * v;
        }
    }
}

fn split_triplets<T: Scalar>(z: &LatentBatch<T>, b: usize) -> TripletLatents<T> {
    TripletLatents {
        anchor: z.slice_rows(0, b),
        positive: z.slice_rows(b, 2 * b),
        negative: z.slice_rows(2 * b, 3 * b),
    }
}

/// Total objective over a triplet batch with its gradient for all four networks.
///
/// The VAE, Wasserstein and cross-reconstruction terms average over all
/// `3 × batch` stacked rows; triplet terms average over the batch.
pub fn total_gml_loss<T: Scalar>(
    vae: &DualVae<T>,
    batch: &TripletBatch<T>,
    weights: &LossWeights,
    noise: &GmlNoise<T>,
) -> Result<GmlLossOutput<T>> {
    batch.validate()?;
    let b = batch.len();
    let xv = batch.stacked_visual()?;
    let xs = batch.stacked_semantic()?;
    let f = T::from_f64;
    let (beta1, beta2, lambda) = (f(weights.beta1), f(weights.beta2), f(weights.lambda_w));
    let (tw, alpha) = (f(weights.triplet_weight), f(weights.margin_alpha));

    let (enc_v, cache_qv) = vae.q_v.forward(&xv)?;
    let (enc_s, cache_qs) = vae.q_s.forward(&xs)?;
    let gp_v = GaussianParams::from_encoder_output(&enc_v)?;
    let gp_s = GaussianParams::from_encoder_output(&enc_s)?;
    let z_v = reparameterize(&gp_v, &noise.visual, Modality::Visual)?;
    let z_s = reparameterize(&gp_s, &noise.semantic, Modality::Semantic)?;

    let (xv_self, cache_pv_self) = vae.p_v.forward(&z_v.z)?;
    let (xs_self, cache_ps_self) = vae.p_s.forward(&z_s.z)?;
    let (xv_cross, cache_pv_cross) = vae.p_v.forward(&z_s.z)?;
    let (xs_cross, cache_ps_cross) = vae.p_s.forward(&z_v.z)?;

    let kl_v = kl_to_standard_normal(&gp_v);
    let kl_s = kl_to_standard_normal(&gp_s);
    let v_vae = l1_loss(&xv_self, &xv)? + beta1 * kl_v;
    let s_vae = l1_loss(&xs_self, &xs)? + beta2 * kl_s;
    let w = wasserstein2_diag(&gp_v, &gp_s)?;
    let cross = l1_loss(&xv_cross, &xv)? + l1_loss(&xs_cross, &xs)?;
    let tv = split_triplets(&z_v, b);
    let ts = split_triplets(&z_s, b);
    let v_trip = triplet_loss(&tv.anchor, &tv.positive, &tv.negative, alpha)?;
    let s_trip = triplet_loss(&ts.anchor, &ts.positive, &ts.negative, alpha)?;
    let mul_trip = multimodal_triplet_loss(&tv, &ts, alpha)?;
    let s_trip_used = if weights.include_s_triplet {
        s_trip
    } else {
        T::zero()
    };
    let value = v_vae + s_vae + lambda * w + cross + tw * (v_trip + s_trip_used + mul_trip);

    let breakdown = LossBreakdown {
        v_vae: v_vae.to_f64(),
        s_vae: s_vae.to_f64(),
        wasserstein: w.to_f64(),
        cross_reconstruction: cross.to_f64(),
        v_triplet: v_trip.to_f64(),
        s_triplet: s_trip.to_f64(),
        multimodal_triplet: mul_trip.to_f64(),
        total: value.to_f64(),
    };
    if !breakdown.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss: {breakdown:?}")));
    }

    // Decoders: self and cross reconstructions.
    let (mut g_pv, mut dz_v) = vae
        .p_v
        .backward(&cache_pv_self, &l1_loss_grad(&xv_self, &xv)?)?;
    let (mut g_ps, mut dz_s) = vae
        .p_s
        .backward(&cache_ps_self, &l1_loss_grad(&xs_self, &xs)?)?;
    let (g, dz) = vae
        .p_v
        .backward(&cache_pv_cross, &l1_loss_grad(&xv_cross, &xv)?)?;
    g_pv.accumulate(&g)?;
    dz_s.add_assign(&dz)?;
    let (g, dz) = vae
        .p_s
        .backward(&cache_ps_cross, &l1_loss_grad(&xs_cross, &xs)?)?;
    g_ps.accumulate(&g)?;
    dz_v.add_assign(&dz)?;

    // Triplet terms act on the sampled latents.
    if tw > T::zero() && b > 0 {
        let [ga, gp, gn] = triplet_loss_grad(&tv.anchor, &tv.positive, &tv.negative, alpha)?;
        add_rows(&mut dz_v, 0, &ga, tw);
        add_rows(&mut dz_v, b, &gp, tw);
        add_rows(&mut dz_v, 2 * b, &gn, tw);
        if weights.include_s_triplet {
            let [ga, gp, gn] = triplet_loss_grad(&ts.anchor, &ts.positive, &ts.negative, alpha)?;
            add_rows(&mut dz_s, 0, &ga, tw);
            add_rows(&mut dz_s, b, &gp, tw);
            add_rows(&mut dz_s, 2 * b, &gn, tw);
        }
        let [gv, gs] = multimodal_triplet_loss_grad(&tv, &ts, alpha)?;
        for (role, g) in gv.iter().enumerate() {
            add_rows(&mut dz_v, role * b, g, tw);
        }
        for (role, g) in gs.iter().enumerate() {
            add_rows(&mut dz_s, role * b, g, tw);
        }
    }

    // Back through the sampling step, then distribution-level terms.
    let (mut dm_v, mut dlv_v) = reparameterize_backward(&gp_v, &noise.visual, &dz_v)?;
    let (mut dm_s, mut dlv_s) = reparameterize_backward(&gp_s, &noise.semantic, &dz_s)?;
    kl_grad_scaled(&gp_v, beta1, &mut dm_v, &mut dlv_v)?;
    kl_grad_scaled(&gp_s, beta2, &mut dm_s, &mut dlv_s)?;
    if lambda > T::zero() {
        let [dmv, dlvv, dms, dlvs] = wasserstein2_diag_grad(&gp_v, &gp_s)?;
        dm_v.axpy(lambda, &dmv)?;
        dlv_v.axpy(lambda, &dlvv)?;
        dm_s.axpy(lambda, &dms)?;
        dlv_s.axpy(lambda, &dlvs)?;
    }
    let (g_qv, _) = vae
        .q_v
        .backward(&cache_qv, &Matrix::hstack(&dm_v, &dlv_v)?)?;
    let (g_qs, _) = vae
        .q_s
        .backward(&cache_qs, &Matrix::hstack(&dm_s, &dlv_s)?)?;

    Ok(GmlLossOutput {
        breakdown,
        value,
        grads: DualVaeGrads {
            q_v: g_qv,
            q_s: g_qs,
            p_v: g_pv,
            p_s: g_ps,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gml::{encode, DualVaeConfig};
    use crate::numkit::{finite_diff_grad, max_relative_error, Activation, DenseLayer, MlpNet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact identity through one ReLU layer: h = relu([x, −x]), y = h₊ − h₋.
    /// `extra` zero columns are appended to the output (log-variance slots).
    fn relu_identity(d: usize, extra: usize) -> MlpNet<f64> {
        let mut w1 = Matrix::zeros(d, 2 * d);
        let mut w2 = Matrix::zeros(2 * d, d + extra);
        for i in 0..d {
            w1[(i, i)] = 1.0;
            w1[(i, d + i)] = -1.0;
            w2[(i, i)] = 1.0;
            w2[(d + i, i)] = -1.0;
        }
        MlpNet::new(vec![
            DenseLayer::new(w1, vec![0.0; 2 * d], Activation::Relu).unwrap(),
            DenseLayer::new(w2, vec![0.0; d + extra], Activation::Identity).unwrap(),
        ])
        .unwrap()
    }

    fn identity_vae(d: usize) -> DualVae<f64> {
        DualVae::from_parts(
            relu_identity(d, d),
            relu_identity(d, d),
            relu_identity(d, 0),
            relu_identity(d, 0),
        )
        .unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    fn small_vae(rng: &mut ChaCha8Rng) -> DualVae<f64> {
        // 2-d visual, 1-d attributes, 1-d latent, 1 hidden unit: 23 parameters.
        DualVae::init(&DualVaeConfig::uniform(2, 1, 1, 1), rng)
    }

    fn random_batch(rng: &mut ChaCha8Rng, b: usize, dv: usize, ds: usize) -> TripletBatch<f64> {
        let part = |rng: &mut ChaCha8Rng, labels: Vec<usize>| TripletPart {
            visual: random_matrix(rng, b, dv),
            semantic: random_matrix(rng, b, ds),
            labels,
        };
        TripletBatch {
            anchor: part(rng, vec![0; b]),
            positive: part(rng, vec![0; b]),
            negative: part(rng, vec![1; b]),
        }
    }

    fn random_noise(rng: &mut ChaCha8Rng, b: usize, l: usize) -> GmlNoise<f64> {
        GmlNoise {
            visual: random_matrix(rng, 3 * b, l),
            semantic: random_matrix(rng, 3 * b, l),
        }
    }

    #[test]
    fn perfect_autoencoder_leaves_only_kl() {
        let vae = identity_vae(2);
        let x = Matrix::from_vec(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let w = LossWeights {
            beta1: 0.7,
            ..LossWeights::default()
        };
        let out = vae_loss(&vae, Modality::Visual, &x, &Matrix::zeros(2, 2), &w).unwrap();
        let kl = 0.5 * (0.25 + 1.0 + 4.0 + 0.0625) / 2.0;
        assert!((out.value - 0.7 * kl).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_is_pure_reconstruction_and_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vae = DualVae::<f64>::init(&DualVaeConfig::uniform(3, 2, 2, 4), &mut rng);
        let x = random_matrix(&mut rng, 4, 3);
        let eps = random_matrix(&mut rng, 4, 2);

        // Independent composition: forward, split, sample, decode, L1, KL.
        let gp = encode(&vae.q_v, &x).unwrap();
        let mut z = gp.mean.clone();
        for i in 0..z.as_slice().len() {
            z.as_mut_slice()[i] += (gp.log_variance.as_slice()[i] / 2.0).exp() * eps.as_slice()[i];
        }
        let rec = vae.p_v.predict(&z).unwrap();
        let l1: f64 = rec
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 4.0;
        let kl: f64 = gp
            .mean
            .as_slice()
            .iter()
            .zip(gp.log_variance.as_slice())
            .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
            .sum::<f64>()
            / 4.0;

        let w0 = LossWeights {
            beta1: 0.0,
            ..LossWeights::default()
        };
        let got = vae_loss(&vae, Modality::Visual, &x, &eps, &w0)
            .unwrap()
            .value;
        assert!((got - l1).abs() < 1e-12);
        let w = LossWeights {
            beta1: 1.3,
            ..LossWeights::default()
        };
        let got = vae_loss(&vae, Modality::Visual, &x, &eps, &w)
            .unwrap()
            .value;
        assert!((got - (l1 + 1.3 * kl)).abs() < 1e-12);
    }

    #[test]
    fn vae_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vae = small_vae(&mut rng);
        let s = random_matrix(&mut rng, 3, 1);
        let eps = random_matrix(&mut rng, 3, 1);
        let w = LossWeights::default();
        let out = vae_loss(&vae, Modality::Semantic, &s, &eps, &w).unwrap();
        let mut ana = Vec::new();
        out.encoder_grads.write_flat(&mut ana);
        out.decoder_grads.write_flat(&mut ana);
        let mut params = Vec::new();
        vae.q_s.write_params(&mut params);
        vae.p_s.write_params(&mut params);
        let num = finite_diff_grad(
            |p: &[f64]| {
                let mut v = vae.clone();
                let k = v.q_s.read_params(p).unwrap();
                v.p_s.read_params(&p[k..]).unwrap();
                vae_loss(&v, Modality::Semantic, &s, &eps, &w)
                    .unwrap()
                    .value
            },
            &params,
            1e-6,
        )
        .unwrap();
        assert!(max_relative_error(&ana, &num, 1e-6) < 1e-4);
    }

    #[test]
    fn cross_reconstruction_cases() {
        let vae = identity_vae(2);
        let x = Matrix::from_vec(1, 2, vec![0.3, -0.6]).unwrap();
        let s = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let zv = LatentBatch::new(s.clone(), Modality::Visual);
        let zs = LatentBatch::new(x.clone(), Modality::Semantic);
        assert_eq!(
            cross_reconstruction_loss(&x, &s, &zv, &zs, &vae).unwrap(),
            0.0
        );
        assert!(matches!(
            cross_reconstruction_loss(&x, &s, &zs, &zv, &vae),
            Err(Error::Usage(_))
        ));

        // Constant decoders: P_v ≡ 3, P_s ≡ s.
        let constant = |c: f64| {
            MlpNet::new(vec![
                DenseLayer::new(Matrix::zeros(1, 1), vec![0.0], Activation::Relu).unwrap(),
                DenseLayer::new(Matrix::zeros(1, 1), vec![c], Activation::Identity).unwrap(),
            ])
            .unwrap()
        };
        let enc = || relu_identity(1, 1);
        let vae = DualVae::from_parts(enc(), enc(), constant(3.0), constant(0.4)).unwrap();
        let x = Matrix::filled(1, 1, 1.0);
        let s = Matrix::filled(1, 1, 0.4);
        let z = Matrix::filled(1, 1, -0.2);
        let v = cross_reconstruction_loss(
            &x,
            &s,
            &LatentBatch::new(z.clone(), Modality::Visual),
            &LatentBatch::new(z, Modality::Semantic),
            &vae,
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn total_with_only_kl_weights_is_kl() {
        let vae = identity_vae(2);
        let rows = |v: &[f64]| Matrix::from_vec(1, 2, v.to_vec()).unwrap();
        // Visual equals semantic per row so cross reconstruction is exact too.
        let part = |v: &[f64], label| TripletPart {
            visual: rows(v),
            semantic: rows(v),
            labels: vec![label],
        };
        let batch = TripletBatch {
            anchor: part(&[0.5, 1.0], 0),
            positive: part(&[0.5, 1.0], 0),
            negative: part(&[-1.0, 0.0], 1),
        };
        let w = LossWeights {
            beta1: 0.5,
            beta2: 2.0,
            lambda_w: 0.0,
            triplet_weight: 0.0,
            margin_alpha: 5.0,
            include_s_triplet: true,
        };
        let out = total_gml_loss(&vae, &batch, &w, &GmlNoise::zeros(1, 2)).unwrap();
        let kl = 0.5 * (0.25 + 1.0 + 0.25 + 1.0 + 1.0) / 3.0;
        assert!((out.value - 2.5 * kl).abs() < 1e-12);
    }

    #[test]
    fn total_is_sum_of_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vae = DualVae::<f64>::init(&DualVaeConfig::uniform(3, 2, 2, 4), &mut rng);
        let batch = random_batch(&mut rng, 3, 3, 2);
        let noise = random_noise(&mut rng, 3, 2);
        let w = LossWeights {
            lambda_w: 0.8,
            triplet_weight: 0.3,
            margin_alpha: 2.0,
            ..LossWeights::default()
        };
        let out = total_gml_loss(&vae, &batch, &w, &noise).unwrap();

        let xv = batch.stacked_visual().unwrap();
        let xs = batch.stacked_semantic().unwrap();
        let v_vae = vae_loss(&vae, Modality::Visual, &xv, &noise.visual, &w)
            .unwrap()
            .value;
        let s_vae = vae_loss(&vae, Modality::Semantic, &xs, &noise.semantic, &w)
            .unwrap()
            .value;
        let gv = encode(&vae.q_v, &xv).unwrap();
        let gs = encode(&vae.q_s, &xs).unwrap();
        let wd = wasserstein2_diag(&gv, &gs).unwrap();
        let zv = reparameterize(&gv, &noise.visual, Modality::Visual).unwrap();
        let zs = reparameterize(&gs, &noise.semantic, Modality::Semantic).unwrap();
        let cross = cross_reconstruction_loss(&xv, &xs, &zv, &zs, &vae).unwrap();
        let (tv, ts) = (split_triplets(&zv, 3), split_triplets(&zs, 3));
        let vt = triplet_loss(&tv.anchor, &tv.positive, &tv.negative, 2.0).unwrap();
        let st = triplet_loss(&ts.anchor, &ts.positive, &ts.negative, 2.0).unwrap();
        let mt = multimodal_triplet_loss(&tv, &ts, 2.0).unwrap();
        let expected = v_vae + s_vae + 0.8 * wd + cross + 0.3 * (vt + st + mt);
        assert!((out.value - expected).abs() < 1e-12);

        let w_lit = LossWeights {
            include_s_triplet: false,
            ..w
        };
        let lit = total_gml_loss(&vae, &batch, &w_lit, &noise).unwrap();
        assert!((lit.value - (expected - 0.3 * st)).abs() < 1e-12);
    }

    #[test]
    fn total_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let vae = small_vae(&mut rng);
            assert!(vae.param_count() <= 32);
            let batch = random_batch(&mut rng, 2, 2, 1);
            let noise = random_noise(&mut rng, 2, 1);
            let w = LossWeights {
                triplet_weight: 0.5,
                margin_alpha: 1.0,
                ..LossWeights::default()
            };
            let out = total_gml_loss(&vae, &batch, &w, &noise).unwrap();
            let mut params = Vec::new();
            vae.write_params(&mut params);
            let num = finite_diff_grad(
                |p: &[f64]| {
                    let mut v = vae.clone();
                    v.read_params(p).unwrap();
                    total_gml_loss(&v, &batch, &w, &noise).unwrap().value
                },
                &params,
                1e-6,
            )
            .unwrap();
            let err = max_relative_error(&out.grads.to_flat(), &num, 1e-6);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn invalid_triplets_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let vae = small_vae(&mut rng);
        let mut batch = random_batch(&mut rng, 2, 2, 1);
        batch.negative.labels = vec![0, 1];
        let r = total_gml_loss(
            &vae,
            &batch,
            &LossWeights::default(),
            &GmlNoise::zeros(2, 1),
        );
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn weights_must_be_non_negative() {
        assert!(LossWeights {
            lambda_w: -1.0,
            ..LossWeights::default()
        }
        .validate()
        .is_err());
        assert!(LossWeights::default().validate().is_ok());
    }
}
