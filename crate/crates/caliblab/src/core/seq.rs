//! Outcome and prediction sequences, transcripts, and per-value biases.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A binary outcome sequence x ∈ {0,1}^T.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct OutcomeSeq {
    bits: Vec<u8>,
}

impl OutcomeSeq {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::validation(format!("outcome {b} is not a bit")));
        }
        Ok(OutcomeSeq { bits })
    }

    /// Decodes the low `len` bits of `code`, most significant bit first, so
    /// that code order is lexicographic order of the sequence.
    pub fn from_code(code: u64, len: usize) -> Self {
        let bits = (0..len)
            .map(|t| ((code >> (len - 1 - t)) & 1) as u8)
            .collect();
        OutcomeSeq { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Bitwise complement 1_T − x.
    pub fn flipped(&self) -> OutcomeSeq {
        OutcomeSeq {
            bits: self.bits.iter().map(|&b| 1 - b).collect(),
        }
    }

    /// The sub-sequence indexed by the set bits of `mask` (index t kept iff
    /// bit t of the mask is set).
    pub fn restrict(&self, mask: u64) -> OutcomeSeq {
        let bits = self
            .bits
            .iter()
            .enumerate()
            .filter(|(t, _)| mask >> t & 1 == 1)
            .map(|(_, &b)| b)
            .collect();
        OutcomeSeq { bits }
    }
}

impl TryFrom<Vec<u8>> for OutcomeSeq {
    type Error = Error;
    fn try_from(bits: Vec<u8>) -> Result<Self> {
        OutcomeSeq::new(bits)
    }
}

impl From<OutcomeSeq> for Vec<u8> {
    fn from(x: OutcomeSeq) -> Vec<u8> {
        x.bits
    }
}

/// A prediction sequence p ∈ [0,1]^T.
///
/// Negative zero is normalized to +0.0 on construction so that exact-equality
/// grouping of prediction values coincides with bitwise equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PredictionSeq {
    values: Vec<f64>,
}

impl PredictionSeq {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut values = values;
        for v in values.iter_mut() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(Error::validation(format!("prediction {v} not in [0,1]")));
            }
            if *v == 0.0 {
                *v = 0.0;
            }
        }
        Ok(PredictionSeq { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for PredictionSeq {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        PredictionSeq::new(values)
    }
}

impl From<PredictionSeq> for Vec<f64> {
    fn from(p: PredictionSeq) -> Vec<f64> {
        p.values
    }
}

/// Paired outcomes and predictions of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTranscript", into = "RawTranscript")]
pub struct Transcript {
    x: OutcomeSeq,
    p: PredictionSeq,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTranscript {
    x: Vec<u8>,
    p: Vec<f64>,
}

impl Transcript {
    pub fn new(x: OutcomeSeq, p: PredictionSeq) -> Result<Self> {
        if x.len() != p.len() {
            return Err(Error::validation(format!(
                "transcript length mismatch: {} outcomes vs {} predictions",
                x.len(),
                p.len()
            )));
        }
        Ok(Transcript { x, p })
    }

    pub fn from_raw(x: Vec<u8>, p: Vec<f64>) -> Result<Self> {
        Transcript::new(OutcomeSeq::new(x)?, PredictionSeq::new(p)?)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &OutcomeSeq {
        &self.x
    }

    pub fn p(&self) -> &PredictionSeq {
        &self.p
    }

    /// Pairs (x_t, p_t) in time order.
    pub fn steps(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.x
            .bits()
            .iter()
            .copied()
            .zip(self.p.values().iter().copied())
    }

    /// Restriction of both sequences to the set bits of `mask`.
    pub fn restrict(&self, mask: u64) -> Transcript {
        let x = self.x.restrict(mask);
        let values = self
            .p
            .values()
            .iter()
            .enumerate()
            .filter(|(t, _)| mask >> t & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        Transcript {
            x,
            p: PredictionSeq { values },
        }
    }
}

impl TryFrom<RawTranscript> for Transcript {
    type Error = Error;
    fn try_from(raw: RawTranscript) -> Result<Self> {
        Transcript::from_raw(raw.x, raw.p)
    }
}

impl From<Transcript> for RawTranscript {
    fn from(t: Transcript) -> RawTranscript {
        RawTranscript {
            x: t.x.into(),
            p: t.p.into(),
        }
    }
}

/// Per-value biases: for each distinct prediction value α, the sum of
/// (x_t − p_t) over the steps with p_t exactly equal to α.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasProfile {
    /// (value, bias, step count), sorted by value ascending.
    entries: Vec<(f64, f64, usize)>,
}

impl BiasProfile {
    /// Distinct prediction values in ascending order, each with its bias.
    pub fn entries(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.entries.iter().map(|&(v, d, _)| (v, d))
    }

    /// Like [`entries`](Self::entries) but including the number of steps in
    /// each level set.
    pub fn entries_with_counts(&self) -> &[(f64, f64, usize)] {
        &self.entries
    }

    pub fn get(&self, value: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|&&(v, _, _)| v == value)
            .map(|&(_, d, _)| d)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Σ_α Δ_α, which telescopes to Σ_t (x_t − p_t).
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, d, _)| d).sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(v, _, _)| v).collect()
    }

    pub fn biases(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, d, _)| d).collect()
    }
}

/// Groups a transcript's steps by exact (bitwise) equality of the predicted
/// value and sums x_t − p_t within each group.
pub fn bias_profile(t: &Transcript) -> BiasProfile {
    let mut steps: Vec<(f64, u8)> = t.steps().map(|(x, p)| (p, x)).collect();
    steps.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("predictions are finite"));
    let mut entries: Vec<(f64, f64, usize)> = Vec::new();
    for (p, x) in steps {
        match entries.last_mut() {
            Some((v, d, c)) if *v == p => {
                *d += x as f64 - p;
                *c += 1;
            }
            _ => entries.push((p, x as f64 - p, 1)),
        }
    }
    BiasProfile { entries }
}
