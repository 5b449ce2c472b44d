use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gml::{encode, GaussianParams, Modality};
use crate::numkit::{Activation, Matrix, MlpGrads, MlpNet, Scalar};

/// Layer widths of the four networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualVaeConfig {
    pub visual_dim: usize,
    pub attribute_dim: usize,
    pub latent_dim: usize,
    pub hidden_visual_encoder: usize,
    pub hidden_semantic_encoder: usize,
    pub hidden_visual_decoder: usize,
    pub hidden_semantic_decoder: usize,
}

impl DualVaeConfig {
    /// Full-size widths (1560/1450/1660/665 hidden units, 64 latent dims).
    pub fn full_size(visual_dim: usize, attribute_dim: usize) -> Self {
        Self {
            visual_dim,
            attribute_dim,
            latent_dim: 64,
            hidden_visual_encoder: 1560,
            hidden_semantic_encoder: 1450,
            hidden_visual_decoder: 1660,
            hidden_semantic_decoder: 665,
        }
    }

    /// Same hidden width everywhere; handy for desk-scale runs.
    pub fn uniform(
        visual_dim: usize,
        attribute_dim: usize,
        latent_dim: usize,
        hidden: usize,
    ) -> Self {
        Self {
            visual_dim,
            attribute_dim,
            latent_dim,
            hidden_visual_encoder: hidden,
            hidden_semantic_encoder: hidden,
            hidden_visual_decoder: hidden,
            hidden_semantic_decoder: hidden,
        }
    }
}

/// Visual and semantic VAEs sharing one latent space.
///
/// Encoders emit `[mean ‖ log-variance]` (width `2 × latent_dim`); decoders map
/// a latent back to their own modality.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVae<T = f32> {
    pub q_v: MlpNet<T>,
    pub q_s: MlpNet<T>,
    pub p_v: MlpNet<T>,
    pub p_s: MlpNet<T>,
    latent_dim: usize,
}

/// Gradients for all four networks.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVaeGrads<T = f32> {
    pub q_v: MlpGrads<T>,
    pub q_s: MlpGrads<T>,
    pub p_v: MlpGrads<T>,
    pub p_s: MlpGrads<T>,
}

impl<T: Scalar> DualVaeGrads<T> {
    pub fn zeros_like(vae: &DualVae<T>) -> Self {
        Self {
            q_v: MlpGrads::zeros_like(&vae.q_v),
            q_s: MlpGrads::zeros_like(&vae.q_s),
            p_v: MlpGrads::zeros_like(&vae.p_v),
            p_s: MlpGrads::zeros_like(&vae.p_s),
        }
    }

    /// Flattened in [`DualVae::write_params`] order.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.q_v.write_flat(&mut out);
        self.q_s.write_flat(&mut out);
        self.p_v.write_flat(&mut out);
        self.p_s.write_flat(&mut out);
        out
    }
}

impl<T: Scalar> DualVae<T> {
    pub fn init<R: Rng + ?Sized>(cfg: &DualVaeConfig, rng: &mut R) -> Self {
        let relu = Activation::Relu;
        let lin = Activation::Identity;
        let l = cfg.latent_dim;
        Self {
            q_v: MlpNet::two_layer(
                cfg.visual_dim,
                cfg.hidden_visual_encoder,
                2 * l,
                relu,
                lin,
                rng,
            ),
            q_s: MlpNet::two_layer(
                cfg.attribute_dim,
                cfg.hidden_semantic_encoder,
                2 * l,
                relu,
                lin,
                rng,
            ),
            p_v: MlpNet::two_layer(l, cfg.hidden_visual_decoder, cfg.visual_dim, relu, lin, rng),
            p_s: MlpNet::two_layer(
                l,
                cfg.hidden_semantic_decoder,
                cfg.attribute_dim,
                relu,
                lin,
                rng,
            ),
            latent_dim: l,
        }
    }

    /// Assembles a model from existing networks, checking that they fit together.
    pub fn from_parts(
        q_v: MlpNet<T>,
        q_s: MlpNet<T>,
        p_v: MlpNet<T>,
        p_s: MlpNet<T>,
    ) -> Result<Self> {
        if !q_v.out_dim().is_multiple_of(2) || q_v.out_dim() != q_s.out_dim() {
            return Err(Error::shape(format!(
                "encoder widths {} and {} must be equal and even",
                q_v.out_dim(),
                q_s.out_dim()
            )));
        }
        let latent_dim = q_v.out_dim() / 2;
        if p_v.in_dim() != latent_dim || p_s.in_dim() != latent_dim {
            return Err(Error::shape(format!(
                "decoders take {} and {} inputs, latent_dim is {latent_dim}",
                p_v.in_dim(),
                p_s.in_dim()
            )));
        }
        if p_v.out_dim() != q_v.in_dim() || p_s.out_dim() != q_s.in_dim() {
            return Err(Error::shape("decoder outputs must match encoder inputs"));
        }
        Ok(Self {
            q_v,
            q_s,
            p_v,
            p_s,
            latent_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn visual_dim(&self) -> usize {
        self.q_v.in_dim()
    }

    pub fn attribute_dim(&self) -> usize {
        self.q_s.in_dim()
    }

    pub fn encoder(&self, m: Modality) -> &MlpNet<T> {
        match m {
            Modality::Visual => &self.q_v,
            Modality::Semantic => &self.q_s,
        }
    }

    pub fn decoder(&self, m: Modality) -> &MlpNet<T> {
        match m {
            Modality::Visual => &self.p_v,
            Modality::Semantic => &self.p_s,
        }
    }

    pub fn encode(&self, m: Modality, batch: &Matrix<T>) -> Result<GaussianParams<T>> {
        encode(self.encoder(m), batch)
    }

    pub fn param_count(&self) -> usize {
        self.q_v.param_count()
            + self.q_s.param_count()
            + self.p_v.param_count()
            + self.p_s.param_count()
    }

    pub fn write_params(&self, out: &mut Vec<T>) {
        self.q_v.write_params(out);
        self.q_s.write_params(out);
        self.p_v.write_params(out);
        self.p_s.write_params(out);
    }

    pub fn read_params(&mut self, src: &[T]) -> Result<()> {
        let mut at = self.q_v.read_params(src)?;
        at += self.q_s.read_params(&src[at..])?;
        at += self.p_v.read_params(&src[at..])?;
        at += self.p_s.read_params(&src[at..])?;
        if at != src.len() {
            return Err(Error::shape(format!(
                "{} parameters supplied, model has {at}",
                src.len()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> DualVae<U> {
        DualVae {
            q_v: self.q_v.cast(),
            q_s: self.q_s.cast(),
            p_v: self.p_v.cast(),
            p_s: self.p_s.cast(),
            latent_dim: self.latent_dim,
        }
    }
}
