//! One-dimensional hyperparameter sweeps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Entropy threshold; reuses one trained model.
    Tau,
    /// Triplet loss weight; retrains.
    TripletWeight,
    /// Triplet margin; retrains.
    Margin,
    /// Latents per class for the general classifier; retrains the classifiers.
    SamplesPerClass,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tau => "tau",
            Self::TripletWeight => "triplet_weight",
            Self::Margin => "margin",
            Self::SamplesPerClass => "samples_per_class",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(Self::Tau),
            "triplet_weight" => Ok(Self::TripletWeight),
            "margin" => Ok(Self::Margin),
            "samples_per_class" => Ok(Self::SamplesPerClass),
            other => Err(Error::Usage(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub harmonic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Evaluates `evaluate` at every value, in order. The closure returns
/// `(acc_seen, acc_unseen, harmonic)`.
pub fn sweep<F>(axis: SweepAxis, values: &[f64], mut evaluate: F) -> Result<SweepResult>
where
    F: FnMut(f64) -> Result<(f64, f64, f64)>,
{
    if values.is_empty() {
        return Err(Error::Usage(format!("sweep over {axis} has no values")));
    }
    let rows = values
        .iter()
        .map(|&value| {
            let (acc_seen, acc_unseen, harmonic) = evaluate(value)?;
            Ok(SweepRow {
                value,
                acc_seen,
                acc_unseen,
                harmonic,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis,
        values: values.to_vec(),
        rows,
    })
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding) or a comma
/// separated list.
///
/// Range values are computed as `start + i·step` and rounded to 10 decimals
/// so that `0:3.2:0.1` yields exactly 33 tidy values.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Usage(format!("invalid sweep values {spec:?}: {what}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("{s:?} is not a number")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            // Negated so a NaN step is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            let bad_step = !(step > 0.0);
            if bad_step || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err(bad("need finite start <= stop and a positive step"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n)
                .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
                .collect()
        }
        [list] => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:stop:step or a comma list")),
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    Ok(values)
}
