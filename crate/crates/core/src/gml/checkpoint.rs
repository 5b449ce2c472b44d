//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GMLV1" | u32 latent_dim | 4 × network (q_v, q_s, p_v, p_s) | "CLF1" section*
//! network: u32 layer_count, then per layer
//!          u32 in | u32 out | u8 activation | f32 weight[in*out] | f32 bias[out]
//! CLF1:    u8 role (0 general, 1 seen) | u32 in | u32 classes
//!          | u32 class_id[classes] | f32 weight[in*classes] | f32 bias[classes]
//! ```

use std::path::Path;

use crate::calib::SoftmaxClassifier;
use crate::error::{Error, Result};
use crate::gml::DualVae;
use crate::numkit::{Activation, DenseLayer, Matrix, MlpNet};

const MAGIC: &[u8; 5] = b"GMLV1";
const CLASSIFIER_TAG: &[u8; 4] = b"CLF1";
const ROLE_GENERAL: u8 = 0;
const ROLE_SEEN: u8 = 1;

/// A trained model with the classifiers built on top of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub vae: DualVae,
    pub general: Option<SoftmaxClassifier>,
    pub seen: Option<SoftmaxClassifier>,
}

impl ModelBundle {
    pub fn new(vae: DualVae) -> Self {
        Self {
            vae,
            general: None,
            seen: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, self.vae.latent_dim());
        for net in [&self.vae.q_v, &self.vae.q_s, &self.vae.p_v, &self.vae.p_s] {
            put_u32(&mut out, net.layers().len());
            for layer in net.layers() {
                put_u32(&mut out, layer.in_dim());
                put_u32(&mut out, layer.out_dim());
                out.push(layer.activation.code());
                put_f32s(&mut out, layer.weight.as_slice());
                put_f32s(&mut out, &layer.bias);
            }
        }
        for (role, clf) in [(ROLE_GENERAL, &self.general), (ROLE_SEEN, &self.seen)] {
            if let Some(clf) = clf {
                out.extend_from_slice(CLASSIFIER_TAG);
                out.push(role);
                put_u32(&mut out, clf.input_dim());
                put_u32(&mut out, clf.class_count());
                for &c in &clf.class_ids {
                    put_u32(&mut out, c);
                }
                put_f32s(&mut out, clf.weight.as_slice());
                put_f32s(&mut out, &clf.bias);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let latent_dim = r.u32()?;
        let mut nets = Vec::with_capacity(4);
        for _ in 0..4 {
            let count = r.u32()?;
            let mut layers = Vec::with_capacity(count.min(64));
            for _ in 0..count {
                let (i, o) = (r.u32()?, r.u32()?);
                let code = r.take(1)?[0];
                let act = Activation::from_code(code)
                    .ok_or_else(|| Error::Format(format!("unknown activation code {code}")))?;
                let weight =
                    Matrix::from_vec(i, o, r.f32s(i.checked_mul(o).ok_or_else(too_big)?)?)?;
                let bias = r.f32s(o)?;
                layers.push(DenseLayer::new(weight, bias, act).map_err(format_err)?);
            }
            nets.push(MlpNet::new(layers).map_err(format_err)?);
        }
        let p_s = nets.pop().expect("four networks");
        let p_v = nets.pop().expect("four networks");
        let q_s = nets.pop().expect("four networks");
        let q_v = nets.pop().expect("four networks");
        let vae = DualVae::from_parts(q_v, q_s, p_v, p_s).map_err(format_err)?;
        if vae.latent_dim() != latent_dim {
            return Err(Error::Format(format!(
                "header says latent_dim {latent_dim}, networks say {}",
                vae.latent_dim()
            )));
        }
        let mut bundle = Self::new(vae);
        while r.pos < bytes.len() {
            if r.take(CLASSIFIER_TAG.len())? != CLASSIFIER_TAG {
                return Err(Error::Format(format!(
                    "unknown section at byte {}",
                    r.pos - 4
                )));
            }
            let role = r.take(1)?[0];
            let (i, k) = (r.u32()?, r.u32()?);
            let ids = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let weight = Matrix::from_vec(i, k, r.f32s(i.checked_mul(k).ok_or_else(too_big)?)?)?;
            let bias = r.f32s(k)?;
            let clf = SoftmaxClassifier::new(weight, bias, ids).map_err(format_err)?;
            let slot = match role {
                ROLE_GENERAL => &mut bundle.general,
                ROLE_SEEN => &mut bundle.seen,
                other => return Err(Error::Format(format!("unknown classifier role {other}"))),
            };
            if slot.replace(clf).is_some() {
                return Err(Error::Format(format!("duplicate classifier role {role}")));
            }
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("dimension fits in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn format_err(e: Error) -> Error {
    Error::Format(format!("inconsistent model file: {e}"))
}

fn too_big() -> Error {
    Error::Format("block size overflows".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated model file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.take(n.checked_mul(4).ok_or_else(too_big)?)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gml::DualVaeConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle(with_classifiers: bool) -> ModelBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vae = DualVae::init(&DualVaeConfig::uniform(6, 3, 2, 5), &mut rng);
        let mut b = ModelBundle::new(vae);
        if with_classifiers {
            let w = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.5, 0.25, 0.0, -1.0]).unwrap();
            b.general =
                Some(SoftmaxClassifier::new(w, vec![0.5, 0.0, -0.5], vec![0, 4, 7]).unwrap());
            let w = Matrix::from_vec(6, 2, (0..12).map(|i| i as f32).collect()).unwrap();
            b.seen = Some(SoftmaxClassifier::new(w, vec![1.0, 2.0], vec![0, 4]).unwrap());
        }
        b
    }

    #[test]
    fn round_trip() {
        for with in [false, true] {
            let b = bundle(with);
            let bytes = b.to_bytes();
            assert_eq!(&bytes[..5], b"GMLV1");
            assert_eq!(ModelBundle::from_bytes(&bytes).unwrap(), b);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let b = bundle(true);
        b.save(&path).unwrap();
        assert_eq!(ModelBundle::load(&path).unwrap(), b);
    }

    #[test]
    fn header_layout() {
        let bytes = bundle(false).to_bytes();
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 2);
        // q_v: two layers, first is 6 → 5 with relu.
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[13..17].try_into().unwrap()), 6);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 5);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = bundle(true).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            ModelBundle::from_bytes(&bad),
            Err(Error::Format(_))
        ));
        for cut in [3, 20, bytes.len() - 1] {
            assert!(matches!(
                ModelBundle::from_bytes(&bytes[..cut]),
                Err(Error::Format(_))
            ));
        }
        let mut trailing = bytes;
        trailing.extend_from_slice(b"JUNK");
        assert!(matches!(
            ModelBundle::from_bytes(&trailing),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            ModelBundle::load("/nonexistent/model.bin"),
            Err(Error::Io { .. })
        ));
    }
}
