//! Martingale diagnostics along a realized path: cumulative conditional
//! variance, confidently-wrong step counts, and doubling epochs.

use crate::core::dist::OutcomeDistribution;
use crate::core::seq::Transcript;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Identity below 1, square root above; the scale on which cumulative
/// variance enters the truthfulness bounds.
pub fn gamma(x: f64) -> f64 {
    if x < 1.0 {
        x
    } else {
        x.sqrt()
    }
}

/// A closed subinterval of [0,1] used to restrict the variance process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn full() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < 0.0 || hi > 1.0 {
            return Err(Error::validation(format!(
                "interval [{lo}, {hi}] is not a subinterval of [0,1]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// Var_0..Var_T: cumulative conditional variance of the outcomes along
    /// the observed path, restricted to conditionals inside the interval.
    pub var_path: Vec<f64>,
    /// N_0..N_T: cumulative count of steps with |x_t − p_t| ≥ 1/2, the
    /// boundary case counting.
    pub n_path: Vec<u64>,
    /// γ(Var_T).
    pub gamma_var: f64,
    /// τ_0 = 0 and the completed epoch ends; an epoch that never completes
    /// is simply absent.
    pub epochs: Vec<usize>,
}

pub(crate) fn ceil_log2(t: usize) -> u32 {
    debug_assert!(t >= 1);
    t.next_power_of_two().trailing_zeros()
}

/// Epoch ends per the doubling recurrence: τ_0 = 0 and τ_k is the first
/// t > τ_{k−1} with Var_t − Var_{τ_{k−1}} ≥ 2^{k−1}, for k up to
/// ⌈log₂ T⌉ + 2; incomplete epochs are dropped.
pub fn epochs_from_var_path(var_path: &[f64]) -> Vec<usize> {
    let t_len = var_path.len() - 1;
    let mut taus = vec![0usize];
    if t_len == 0 {
        return taus;
    }
    let k_max = ceil_log2(t_len) + 2;
    let mut prev = 0usize;
    for k in 1..=k_max {
        let threshold = (2.0f64).powi(k as i32 - 1);
        let mut found = None;
        for (t, &v) in var_path.iter().enumerate().skip(prev + 1) {
            if v - var_path[prev] >= threshold {
                found = Some(t);
                break;
            }
        }
        match found {
            Some(t) => {
                taus.push(t);
                prev = t;
            }
            None => break,
        }
    }
    taus
}

/// Builds the variance and confidently-wrong paths for a transcript whose
/// outcomes were drawn from `d`, checking path consistency as it goes.
pub fn diagnostics(
    d: &OutcomeDistribution,
    t: &Transcript,
    interval: Option<Interval>,
) -> Result<DiagnosticsReport> {
    let iv = interval.unwrap_or_else(Interval::full);
    if t.len() > d.depth() {
        return Err(Error::validation(format!(
            "transcript length {} exceeds distribution depth {}",
            t.len(),
            d.depth()
        )));
    }
    let mut var_path = Vec::with_capacity(t.len() + 1);
    let mut n_path = Vec::with_capacity(t.len() + 1);
    var_path.push(0.0);
    n_path.push(0u64);
    let mut history: Vec<u8> = Vec::with_capacity(t.len());
    for (bit, pred) in t.steps() {
        let pstar = d.conditional(&history)?;
        if (bit == 1 && pstar == 0.0) || (bit == 0 && pstar == 1.0) {
            return Err(Error::Inconsistency(format!(
                "outcome {bit} at step {} has conditional probability 0",
                history.len() + 1
            )));
        }
        let inc = if iv.contains(pstar) {
            pstar * (1.0 - pstar)
        } else {
            0.0
        };
        var_path.push(var_path.last().unwrap() + inc);
        let wrong = (bit as f64 - pred).abs() >= 0.5;
        n_path.push(n_path.last().unwrap() + wrong as u64);
        history.push(bit);
    }
    let gamma_var = gamma(*var_path.last().unwrap());
    let epochs = epochs_from_var_path(&var_path);
    Ok(DiagnosticsReport {
        var_path,
        n_path,
        gamma_var,
        epochs,
    })
}
