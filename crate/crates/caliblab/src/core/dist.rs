//! Distributions over binary outcome sequences.

use crate::core::rng::RngStream;
use crate::core::seq::OutcomeSeq;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Default cap on sequence length for exhaustive 2^T enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 16;

/// The enumeration cap, honoring the `CALIBLAB_CAP_OVERRIDE` environment
/// variable when it holds a positive integer.
pub fn enumeration_cap() -> usize {
    std::env::var("CALIBLAB_CAP_OVERRIDE")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_ENUMERATION_CAP)
}

/// A distribution over {0,1}^T, either a product of Bernoullis or a full
/// conditional-probability tree over histories.
///
/// Tree nodes are heap-indexed: the root (empty history) is node 0, and node
/// i has children 2i+1 (next bit 0) and 2i+2 (next bit 1). The conditional
/// stored at a node is the probability that the next bit is 1 given the
/// history encoded by the node's position. This indexing is the wire format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub enum OutcomeDistribution {
    Product {
        pstar: Vec<f64>,
    },
    Tree {
        depth: usize,
        conditionals: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawDistribution {
    Product {
        pstar: Vec<f64>,
    },
    Tree {
        depth: usize,
        conditionals: Vec<f64>,
    },
}

fn check_probs(vals: &[f64], what: &str) -> Result<()> {
    for &v in vals {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::validation(format!("{what}: {v} not in [0,1]")));
        }
    }
    Ok(())
}

impl OutcomeDistribution {
    pub fn product(pstar: Vec<f64>) -> Result<Self> {
        check_probs(&pstar, "product conditional")?;
        Ok(OutcomeDistribution::Product { pstar })
    }

    pub fn tree(depth: usize, conditionals: Vec<f64>) -> Result<Self> {
        check_probs(&conditionals, "tree conditional")?;
        let want = (1usize << depth) - 1;
        if conditionals.len() != want {
            return Err(Error::validation(format!(
                "tree of depth {depth} needs {want} conditionals, got {}",
                conditionals.len()
            )));
        }
        Ok(OutcomeDistribution::Tree {
            depth,
            conditionals,
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            OutcomeDistribution::Product { pstar } => pstar.len(),
            OutcomeDistribution::Tree { depth, .. } => *depth,
        }
    }

    /// Heap index of the node reached by following `history` from the root.
    pub fn heap_index(history: &[u8]) -> usize {
        let mut idx = 0usize;
        for &b in history {
            idx = 2 * idx + 1 + b as usize;
        }
        idx
    }

    /// The conditional probability that the next bit is 1 given `history`.
    pub fn conditional(&self, history: &[u8]) -> Result<f64> {
        if history.len() >= self.depth() {
            return Err(Error::validation(format!(
                "history of length {} out of range for depth {}",
                history.len(),
                self.depth()
            )));
        }
        Ok(match self {
            OutcomeDistribution::Product { pstar } => pstar[history.len()],
            OutcomeDistribution::Tree { conditionals, .. } => {
                conditionals[Self::heap_index(history)]
            }
        })
    }

    /// All 2^T sequences with their probabilities, in lexicographic order.
    /// Probabilities multiply the conditionals along each path and sum to 1
    /// up to floating-point error.
    pub fn enumerate_outcomes(&self) -> Result<Vec<(OutcomeSeq, f64)>> {
        self.enumerate_outcomes_capped(enumeration_cap())
    }

    pub fn enumerate_outcomes_capped(&self, cap: usize) -> Result<Vec<(OutcomeSeq, f64)>> {
        let t = self.depth();
        if t > cap {
            return Err(Error::capacity(format!(
                "enumeration of depth {t} exceeds cap {cap}"
            )));
        }
        let n = 1u64 << t;
        let mut out = Vec::with_capacity(n as usize);
        let mut history = Vec::with_capacity(t);
        for code in 0..n {
            let x = OutcomeSeq::from_code(code, t);
            history.clear();
            let mut prob = 1.0;
            for &b in x.bits() {
                let p1 = self.conditional(&history)?;
                prob *= if b == 1 { p1 } else { 1.0 - p1 };
                history.push(b);
                if prob == 0.0 {
                    break;
                }
            }
            out.push((x, prob));
        }
        Ok(out)
    }

    /// Draws one sequence by sampling each bit from its conditional.
    pub fn sample_with(&self, rng: &mut ChaCha12Rng) -> OutcomeSeq {
        let t = self.depth();
        let mut bits: Vec<u8> = Vec::with_capacity(t);
        for step in 0..t {
            let p1 = match self {
                OutcomeDistribution::Product { pstar } => pstar[step],
                OutcomeDistribution::Tree { conditionals, .. } => {
                    conditionals[Self::heap_index(&bits)]
                }
            };
            let u: f64 = rng.gen();
            bits.push(if u < p1 { 1 } else { 0 });
        }
        OutcomeSeq::new(bits).expect("bits are 0/1")
    }

    /// Deterministic one-shot draw from a named stream.
    pub fn sample(&self, stream: RngStream) -> OutcomeSeq {
        self.sample_with(&mut stream.rng())
    }
}

impl TryFrom<RawDistribution> for OutcomeDistribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw {
            RawDistribution::Product { pstar } => OutcomeDistribution::product(pstar),
            RawDistribution::Tree {
                depth,
                conditionals,
            } => OutcomeDistribution::tree(depth, conditionals),
        }
    }
}

impl From<OutcomeDistribution> for RawDistribution {
    fn from(d: OutcomeDistribution) -> RawDistribution {
        match d {
            OutcomeDistribution::Product { pstar } => RawDistribution::Product { pstar },
            OutcomeDistribution::Tree {
                depth,
                conditionals,
            } => RawDistribution::Tree {
                depth,
                conditionals,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Uniform over {00, 11}: root 1/2, after a 0 the next bit is 0, after a
    /// 1 the next bit is 1.
    pub(crate) fn two_point_tree() -> OutcomeDistribution {
        OutcomeDistribution::tree(2, vec![0.5, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn conditional_product() {
        let d = OutcomeDistribution::product(vec![0.2, 0.9]).unwrap();
        assert_eq!(d.conditional(&[]).unwrap(), 0.2);
        assert_eq!(d.conditional(&[0]).unwrap(), 0.9);
        assert!(d.conditional(&[0, 1]).is_err());
    }

    #[test]
    fn conditional_tree_two_point() {
        let d = two_point_tree();
        assert_eq!(d.conditional(&[]).unwrap(), 0.5);
        assert_eq!(d.conditional(&[1]).unwrap(), 1.0);
        assert_eq!(d.conditional(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn enumerate_fair_pair() {
        let d = OutcomeDistribution::product(vec![0.5, 0.5]).unwrap();
        let all = d.enumerate_outcomes().unwrap();
        assert_eq!(all.len(), 4);
        for (_, prob) in &all {
            assert!((prob - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn enumerate_deterministic() {
        let d = OutcomeDistribution::product(vec![1.0, 0.0]).unwrap();
        let all = d.enumerate_outcomes().unwrap();
        for (x, prob) in &all {
            if x.bits() == [1, 0] {
                assert_eq!(*prob, 1.0);
            } else {
                assert_eq!(*prob, 0.0);
            }
        }
    }

    #[test]
    fn enumerate_two_point_tree() {
        let d = two_point_tree();
        let all = d.enumerate_outcomes().unwrap();
        let probs: Vec<f64> = all.iter().map(|&(_, p)| p).collect();
        assert_eq!(probs, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn enumerate_cap_enforced() {
        let d = OutcomeDistribution::product(vec![0.5; 17]).unwrap();
        assert!(matches!(
            d.enumerate_outcomes_capped(16),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn sample_deterministic_endpoints() {
        let d = OutcomeDistribution::product(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.sample(RngStream::new(1, 0)).bits(), &[1, 1, 1]);
        let d0 = OutcomeDistribution::product(vec![0.0, 0.0]).unwrap();
        assert_eq!(d0.sample(RngStream::new(2, 5)).bits(), &[0, 0]);
    }

    #[test]
    fn sample_mean_matches_binomial_stderr() {
        let d = OutcomeDistribution::product(vec![0.3]).unwrap();
        let n = 100_000u64;
        let mut rng = RngStream::new(11, 0).rng();
        let mut ones = 0u64;
        for _ in 0..n {
            ones += d.sample_with(&mut rng).bits()[0] as u64;
        }
        let mean = ones as f64 / n as f64;
        let tol = 3.0 * (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((mean - 0.3).abs() < tol, "mean {mean} vs 0.3 ± {tol}");
    }

    #[test]
    fn distribution_json_round_trip() {
        let d = two_point_tree();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(
            s,
            r#"{"type":"tree","depth":2,"conditionals":[0.5,0.0,1.0]}"#
        );
        let back: OutcomeDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);

        let p = OutcomeDistribution::product(vec![0.5, 1.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"type":"product","pstar":[0.5,1.0]}"#);
    }

    #[test]
    fn tree_rejects_wrong_arity() {
        assert!(OutcomeDistribution::tree(2, vec![0.5]).is_err());
        assert!(serde_json::from_str::<OutcomeDistribution>(
            r#"{"type":"tree","depth":2,"conditionals":[0.5],"extra":1}"#
        )
        .is_err());
    }
}
