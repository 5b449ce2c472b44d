//! Shannon entropy of classifier outputs, in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// Entropy of the distribution restricted to seen classes and renormalised.
    #[default]
    RenormalizedSeen,
    /// Entropy of the full output distribution.
    FullDistribution,
}

/// Entropy of `probs` with respect to the classes at `seen_positions`.
///
/// The result is clamped to `[0, ln K]` where `K` is the number of classes
/// the mode considers. When the seen classes carry no probability mass at all
/// the restricted distribution is undefined and the maximum `ln K` is returned.
pub fn seen_entropy(probs: &[f64], seen_positions: &[usize], mode: EntropyMode) -> Result<f64> {
    if seen_positions.is_empty() {
        return Err(Error::Usage("seen class set is empty".into()));
    }
    if let Some(&p) = seen_positions.iter().find(|&&p| p >= probs.len()) {
        return Err(Error::Usage(format!(
            "seen position {p} is outside a {}-class distribution",
            probs.len()
        )));
    }
    let (h, k) = match mode {
        EntropyMode::FullDistribution => (shannon(probs.iter().copied()), probs.len()),
        EntropyMode::RenormalizedSeen => {
            let k = seen_positions.len();
            let mass: f64 = seen_positions.iter().map(|&p| probs[p]).sum();
            if mass <= 0.0 {
                return Ok((k as f64).ln());
            }
            (shannon(seen_positions.iter().map(|&p| probs[p] / mass)), k)
        }
    };
    Ok(h.clamp(0.0, (k as f64).ln()))
}

fn shannon(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}
