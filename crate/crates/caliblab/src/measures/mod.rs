//! Calibration error measures on transcripts.

pub mod diagnostics;

use crate::core::dist::enumeration_cap;
use crate::core::rng::RngStream;
use crate::core::seq::{bias_profile, Transcript};
use crate::error::{Error, Result};
use crate::lipschitz::{chain_lp_value, ChainLP, ChainValueSolver};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub use diagnostics::{diagnostics, gamma, DiagnosticsReport, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureName {
    Ece,
    Smce,
    Ssce,
    Caldist,
    Intce,
    KceLaplace,
    UcalVshaped,
}

impl MeasureName {
    pub const ALL: [MeasureName; 7] = [
        MeasureName::Ece,
        MeasureName::Smce,
        MeasureName::Ssce,
        MeasureName::Caldist,
        MeasureName::Intce,
        MeasureName::KceLaplace,
        MeasureName::UcalVshaped,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureName::Ece => "ece",
            MeasureName::Smce => "smce",
            MeasureName::Ssce => "ssce",
            MeasureName::Caldist => "caldist",
            MeasureName::Intce => "intce",
            MeasureName::KceLaplace => "kce_laplace",
            MeasureName::UcalVshaped => "ucal_vshaped",
        }
    }

    /// Range multiplier: measures map length-T transcripts into [0, mT].
    /// The regret behind the proper-scoring-rule measure can reach 2T; all
    /// others are bounded by T.
    fn range_multiplier(&self) -> f64 {
        match self {
            MeasureName::UcalVshaped => 2.0,
            _ => 1.0,
        }
    }
}

impl FromStr for MeasureName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ece" => MeasureName::Ece,
            "smce" => MeasureName::Smce,
            "ssce" => MeasureName::Ssce,
            "caldist" => MeasureName::Caldist,
            "intce" => MeasureName::Intce,
            "kce" | "kce_laplace" => MeasureName::KceLaplace,
            "ucal" | "ucal_vshaped" => MeasureName::UcalVshaped,
            other => return Err(Error::validation(format!("unknown measure `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

/// A measure value with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub name: MeasureName,
    pub value: f64,
    pub mode: Mode,
    pub stderr: f64,
    pub samples: u64,
}

/// Clamps into the measure's range; escaping it by more than the numeric
/// tolerance is an internal error, not a clamp.
fn finalize(name: MeasureName, raw: f64, len: usize) -> Result<f64> {
    let upper = name.range_multiplier() * len as f64;
    if !raw.is_finite() || raw < -1e-9 || raw > upper + 1e-9 {
        return Err(Error::Internal(format!(
            "{} value {raw} escapes [0, {upper}]",
            name.as_str()
        )));
    }
    // the added zero turns a clamped -0.0 into +0.0
    Ok(raw.clamp(0.0, upper) + 0.0)
}

fn exact_report(name: MeasureName, raw: f64, len: usize) -> Result<MeasureReport> {
    Ok(MeasureReport {
        name,
        value: finalize(name, raw, len)?,
        mode: Mode::Exact,
        stderr: 0.0,
        samples: 0,
    })
}

/// Sum of absolute per-value biases Σ_α |Δ_α|.
pub fn ece(t: &Transcript) -> Result<MeasureReport> {
    let raw: f64 = bias_profile(t).entries().map(|(_, d)| d.abs()).sum();
    exact_report(MeasureName::Ece, raw, t.len())
}

/// Value of ECE without the report wrapper (internal fast path).
pub(crate) fn ece_value(t: &Transcript) -> f64 {
    bias_profile(t).entries().map(|(_, d)| d.abs()).sum()
}

/// Supremum of Σ_t f(p_t)(x_t − p_t) over 1-Lipschitz f: [0,1] → [−1,1],
/// computed exactly on the support of the bias profile.
pub fn smce(t: &Transcript) -> Result<MeasureReport> {
    exact_report(MeasureName::Smce, smce_value(t), t.len())
}

pub(crate) fn smce_value(t: &Transcript) -> f64 {
    let profile = bias_profile(t);
    let lp = ChainLP::new(profile.values(), profile.biases()).expect("profile support is sorted");
    chain_lp_value(&lp)
}

/// The smooth calibration error of the sub-transcript indexed by the set
/// bits of `mask`, grouping equal predictions via the presorted `order`.
fn subset_smce(
    x: &[u8],
    p: &[f64],
    order: &[usize],
    mask: u64,
    solver: &mut ChainValueSolver,
    vals: &mut Vec<f64>,
    wts: &mut Vec<f64>,
) -> f64 {
    vals.clear();
    wts.clear();
    for &idx in order {
        if mask >> idx & 1 == 1 {
            let v = p[idx];
            let w = x[idx] as f64 - v;
            if vals.last() == Some(&v) {
                *wts.last_mut().expect("nonempty") += w;
            } else {
                vals.push(v);
                wts.push(w);
            }
        }
    }
    solver.value_sorted(vals, wts)
}

fn sorted_index_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("finite predictions"));
    order
}

/// Average of the subset smooth calibration error over all 2^T subsets of
/// the horizon, by exhaustive enumeration.
pub fn ssce_exact(t: &Transcript) -> Result<MeasureReport> {
    ssce_exact_capped(t, enumeration_cap())
}

pub fn ssce_exact_capped(t: &Transcript, cap: usize) -> Result<MeasureReport> {
    let n = t.len();
    if n > cap {
        return Err(Error::capacity(format!(
            "ssce exact enumeration of 2^{n} subsets exceeds cap 2^{cap}"
        )));
    }
    let x: Vec<u8> = t.x().bits().to_vec();
    let p: Vec<f64> = t.p().values().to_vec();
    let order = sorted_index_order(&p);
    let total: u64 = 1u64 << n;
    // fixed chunking keeps the reduction order independent of thread count
    const CHUNK: u64 = 1 << 12;
    let starts: Vec<u64> = (0..total).step_by(CHUNK as usize).collect();
    let partials: Vec<f64> = starts
        .par_iter()
        .map(|&start| {
            let mut solver = ChainValueSolver::new();
            let mut vals = Vec::with_capacity(n);
            let mut wts = Vec::with_capacity(n);
            let mut acc = 0.0;
            for mask in start..(start + CHUNK).min(total) {
                acc += subset_smce(&x, &p, &order, mask, &mut solver, &mut vals, &mut wts);
            }
            acc
        })
        .collect();
    let raw = partials.iter().sum::<f64>() / total as f64;
    exact_report(MeasureName::Ssce, raw, n)
}

/// Monte Carlo estimate of the SSCE: the mean subset smooth calibration
/// error over `n` uniformly random subsets (each index kept independently
/// with probability 1/2). Deterministic given the stream.
pub fn ssce_mc(t: &Transcript, n: u64, stream: RngStream) -> Result<MeasureReport> {
    if n == 0 {
        return Err(Error::validation("ssce_mc needs n >= 1"));
    }
    let len = t.len();
    let x: Vec<u8> = t.x().bits().to_vec();
    let p: Vec<f64> = t.p().values().to_vec();
    let order = sorted_index_order(&p);
    let words = len.div_ceil(64).max(1);
    let mut rng = stream.rng();
    let mut solver = ChainValueSolver::new();
    let mut vals = Vec::with_capacity(len);
    let mut wts = Vec::with_capacity(len);
    let mut mask_words = vec![0u64; words];
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for rep in 0..n {
        for w in mask_words.iter_mut() {
            *w = rand::Rng::gen(&mut rng);
        }
        vals.clear();
        wts.clear();
        for &idx in &order {
            if mask_words[idx / 64] >> (idx % 64) & 1 == 1 {
                let v = p[idx];
                let w = x[idx] as f64 - v;
                if vals.last() == Some(&v) {
                    *wts.last_mut().expect("nonempty") += w;
                } else {
                    vals.push(v);
                    wts.push(w);
                }
            }
        }
        let value = solver.value_sorted(&vals, &wts);
        let delta = value - mean;
        mean += delta / (rep + 1) as f64;
        m2 += delta * (value - mean);
    }
    let stderr = if n > 1 {
        (m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MeasureReport {
        name: MeasureName::Ssce,
        value: finalize(MeasureName::Ssce, mean, len)?,
        mode: Mode::MonteCarlo,
        stderr,
        samples: n,
    })
}

/// Exact E_S |Σ_{t∈S} (x_t − p_t)| over uniformly random subsets, by
/// enumeration. This is the constant-test-function relaxation of the SSCE
/// and a certified lower bound on it.
pub fn mean_abs_subset_bias(t: &Transcript) -> Result<f64> {
    let n = t.len();
    if n > enumeration_cap() {
        return Err(Error::capacity(format!(
            "subset enumeration of 2^{n} exceeds cap"
        )));
    }
    let deltas: Vec<f64> = t.steps().map(|(x, p)| x as f64 - p).collect();
    let total = 1u64 << n;
    let mut acc = 0.0;
    for mask in 0..total {
        let mut s = 0.0;
        for (idx, d) in deltas.iter().enumerate() {
            if mask >> idx & 1 == 1 {
                s += d;
            }
        }
        acc += s.abs();
    }
    Ok(acc / total as f64)
}

/// Minimum ℓ1 distance from the predictions to a perfectly calibrated
/// sequence, exact via exhaustive set-partition search.
///
/// Every perfectly calibrated q is induced by some partition of the steps
/// whose parts each predict their own empirical outcome mean, so the minimum
/// over partitions equals the distance to the calibrated set. Parts that
/// collide on the same forced value merge into one level set without
/// changing the cost.
pub fn caldist_exact(t: &Transcript) -> Result<MeasureReport> {
    let n = t.len();
    if n > 10 {
        return Err(Error::capacity(format!(
            "caldist exact capped at T=10, got {n}"
        )));
    }
    if n == 0 {
        return exact_report(MeasureName::Caldist, 0.0, 0);
    }
    let x: Vec<f64> = t.x().bits().iter().map(|&b| b as f64).collect();
    let p: Vec<f64> = t.p().values().to_vec();
    let mut best = f64::INFINITY;
    let mut sum = vec![0.0f64; n];
    let mut cnt = vec![0usize; n];
    for_each_partition(n, |assign| {
        let parts = assign.iter().copied().max().unwrap_or(0) + 1;
        sum[..parts].fill(0.0);
        cnt[..parts].fill(0);
        for (i, &part) in assign.iter().enumerate() {
            sum[part] += x[i];
            cnt[part] += 1;
        }
        let mut cost = 0.0;
        for (i, &part) in assign.iter().enumerate() {
            cost += (p[i] - sum[part] / cnt[part] as f64).abs();
        }
        if cost < best {
            best = cost;
        }
    });
    exact_report(MeasureName::Caldist, best, n)
}

/// Visits every set partition of {0..n-1} as a restricted-growth string:
/// assign[0] = 0 and assign[i] ≤ max(assign[..i]) + 1.
fn for_each_partition(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut assign = vec![0usize; n];
    // prefix_max[i] = max(assign[..i]); position 0 is pinned to part 0
    let mut prefix_max = vec![0usize; n];
    loop {
        visit(&assign);
        // rightmost position that can still be incremented
        let mut i = n;
        loop {
            if i <= 1 {
                return;
            }
            i -= 1;
            if assign[i] <= prefix_max[i] {
                break;
            }
        }
        assign[i] += 1;
        for j in i + 1..n {
            prefix_max[j] = prefix_max[j - 1].max(assign[j - 1]);
            assign[j] = 0;
        }
    }
}

/// Interval calibration error: the infimum over interval partitions of
/// grouped absolute bias plus total occupied interval length, exact via an
/// O(m²) dynamic program over the sorted distinct prediction values.
/// Gaps of [0,1] holding no predictions cost nothing and singleton values
/// sit in length-zero intervals.
pub fn intce(t: &Transcript) -> Result<MeasureReport> {
    let grouped = bias_profile(t);
    let entries = grouped.entries_with_counts();
    let m = entries.len();
    if m == 0 {
        return exact_report(MeasureName::Intce, 0.0, t.len());
    }
    // prefix sums of biases and counts over the sorted support
    let mut delta_pre = vec![0.0f64; m + 1];
    let mut count_pre = vec![0usize; m + 1];
    for (i, &(_, d, c)) in entries.iter().enumerate() {
        delta_pre[i + 1] = delta_pre[i] + d;
        count_pre[i + 1] = count_pre[i] + c;
    }
    let mut dp = vec![f64::INFINITY; m + 1];
    dp[0] = 0.0;
    for j in 1..=m {
        for i in 0..j {
            let bias = (delta_pre[j] - delta_pre[i]).abs();
            let steps = (count_pre[j] - count_pre[i]) as f64;
            let span = entries[j - 1].0 - entries[i].0;
            let cost = dp[i] + bias + steps * span;
            if cost < dp[j] {
                dp[j] = cost;
            }
        }
    }
    exact_report(MeasureName::Intce, dp[m], t.len())
}

/// Supremum of the bias functional over the Sobolev unit ball
/// {‖f‖₂² + ‖f′‖₂² ≤ 1}, which equals the RKHS norm of the embedded signed
/// measure under the kernel k(u,v) = e^{−|u−v|}/2.
pub fn kce_laplace(t: &Transcript) -> Result<MeasureReport> {
    let profile = bias_profile(t);
    let entries: Vec<(f64, f64)> = profile.entries().collect();
    let mut q = 0.0;
    for &(va, da) in &entries {
        for &(vb, db) in &entries {
            q += da * db * 0.5 * (-(va - vb).abs()).exp();
        }
    }
    exact_report(MeasureName::KceLaplace, q.max(0.0).sqrt(), t.len())
}

/// A V-shaped proper scoring rule: either the weighted-indicator rule with
/// kink θ, or the sign rule at 1/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VShapedRule {
    Weighted { kink: f64 },
    SignAtHalf,
}

impl VShapedRule {
    pub fn score(&self, outcome: u8, beta: f64) -> f64 {
        match *self {
            VShapedRule::Weighted { kink } => {
                if outcome == 0 {
                    if beta > kink {
                        kink
                    } else {
                        0.0
                    }
                } else if beta <= kink {
                    1.0 - kink
                } else {
                    0.0
                }
            }
            VShapedRule::SignAtHalf => {
                let s = if beta > 0.5 {
                    1.0
                } else if beta < 0.5 {
                    -1.0
                } else {
                    0.0
                };
                if outcome == 0 {
                    s
                } else {
                    -s
                }
            }
        }
    }

    /// E_{x~Bern(q)} S(x, β); properness means β = q minimizes this in β.
    pub fn expected_score(&self, q: f64, beta: f64) -> f64 {
        (1.0 - q) * self.score(0, beta) + q * self.score(1, beta)
    }
}

/// Maximum external regret over the V-shaped rule family: incurred loss
/// minus the best fixed prediction in hindsight, maximized over rules and
/// clamped at 0 (the zero rule is proper). The inner minimum over fixed β is
/// exact for these piecewise-constant rules because the total loss only
/// changes at the kinks; 0 and 1 are always candidates.
///
/// Default kinks: the distinct predicted values, midpoints of consecutive
/// distinct values, and 1/2. The reported value is a lower bound on the full
/// supremum over proper scoring rules.
pub fn ucal_vshaped(t: &Transcript, kinks: Option<&[f64]>) -> Result<MeasureReport> {
    let n1 = t.x().ones();
    let n0 = t.len() - n1;
    let thetas: Vec<f64> = match kinks {
        Some(ks) => {
            for &k in ks {
                if !k.is_finite() || !(0.0..=1.0).contains(&k) {
                    return Err(Error::validation(format!("kink {k} not in [0,1]")));
                }
            }
            let mut ks = ks.to_vec();
            ks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            ks.dedup();
            ks
        }
        None => {
            let support = bias_profile(t).values();
            let mut ks = support.clone();
            for w in support.windows(2) {
                ks.push(0.5 * (w[0] + w[1]));
            }
            ks.push(0.5);
            ks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            ks.dedup();
            ks
        }
    };
    let mut betas = thetas.clone();
    betas.push(0.0);
    betas.push(1.0);
    betas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    betas.dedup();

    let mut rules: Vec<VShapedRule> = thetas
        .iter()
        .filter(|&&k| k > 0.0 && k < 1.0)
        .map(|&k| VShapedRule::Weighted { kink: k })
        .collect();
    rules.push(VShapedRule::SignAtHalf);

    let mut best = 0.0f64;
    for rule in &rules {
        let incurred: f64 = t.steps().map(|(x, p)| rule.score(x, p)).sum();
        let fixed = betas
            .iter()
            .map(|&b| n0 as f64 * rule.score(0, b) + n1 as f64 * rule.score(1, b))
            .fold(f64::INFINITY, f64::min);
        best = best.max(incurred - fixed);
    }
    exact_report(MeasureName::UcalVshaped, best.max(0.0), t.len())
}

/// Certified lower bound and unscaled upper diagnostic for the distance
/// from calibration at horizons beyond the exact search: smCE/2 is a true
/// lower bound, and smCE plus the number of distinct predicted values
/// tracks the distance up to an unspecified constant factor, so it is
/// reported as a diagnostic rather than asserted.
pub fn caldist_bounds(t: &Transcript) -> (f64, f64) {
    let smce = smce_value(t);
    let distinct = bias_profile(t).len() as f64;
    (0.5 * smce, smce + distinct)
}

/// Polynomial sandwich around the maximum swap regret: (lower, upper) =
/// (ECE²/T, 2·ECE). Exact swap regret is out of scope; these bounds are.
pub fn msr_bounds(t: &Transcript) -> (f64, f64) {
    if t.is_empty() {
        return (0.0, 0.0);
    }
    let e = ece_value(t);
    (e * e / t.len() as f64, 2.0 * e)
}

/// Evaluates a measure exactly, routing capacity-capped measures through
/// their exact implementations.
pub fn measure_exact(name: MeasureName, t: &Transcript) -> Result<MeasureReport> {
    match name {
        MeasureName::Ece => ece(t),
        MeasureName::Smce => smce(t),
        MeasureName::Ssce => ssce_exact(t),
        MeasureName::Caldist => caldist_exact(t),
        MeasureName::Intce => intce(t),
        MeasureName::KceLaplace => kce_laplace(t),
        MeasureName::UcalVshaped => ucal_vshaped(t, None),
    }
}

/// A plain value-returning closure for use with expectation routines.
pub fn measure_fn(name: MeasureName) -> impl Fn(&Transcript) -> Result<f64> + Sync {
    move |t: &Transcript| measure_exact(name, t).map(|r| r.value)
}
