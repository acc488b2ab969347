//! Exact maximization of Σ_i Δ_i·f(v_i) over 1-Lipschitz f: [0,1] → [−1,1].
//!
//! Restricting the Lipschitz constraints to adjacent support points is
//! lossless: the chain constraints |f_{i+1} − f_i| ≤ v_{i+1} − v_i imply all
//! pairwise ones by the triangle inequality. The resulting problem
//!
//!   max Σ Δ_i f_i   s.t.  |f_i| ≤ 1,  |f_{i+1} − f_i| ≤ v_{i+1} − v_i
//!
//! is solved exactly by a backward sweep over concave piecewise-linear value
//! functions: V_i(z) = Δ_i·z + max{ V_{i+1}(w) : |w − z| ≤ d_i, |w| ≤ 1 }.
//! The sliding-window maximum of a concave function keeps it concave and
//! piecewise linear, so every V_i has an exact breakpoint representation.

use crate::error::{Error, Result};

/// Support points with strictly increasing values and their weights.
#[derive(Clone, Debug)]
pub struct ChainLP {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl ChainLP {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::validation(format!(
                "{} values vs {} weights",
                values.len(),
                weights.len()
            )));
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("value {v} not in [0,1]")));
            }
        }
        for w in values.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::validation(format!(
                    "values must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::validation(format!("weight {w} is not finite")));
        }
        Ok(ChainLP { values, weights })
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

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn abs_weight_sum(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

/// A feasible point of the chain LP: the test function's values at the
/// support points.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzWitness {
    pub f_values: Vec<f64>,
}

impl LipschitzWitness {
    /// Largest violation of the box and pairwise Lipschitz constraints
    /// (0 when feasible).
    pub fn infeasibility(&self, lp: &ChainLP) -> f64 {
        let f = &self.f_values;
        let mut worst = 0.0f64;
        for (i, &fi) in f.iter().enumerate() {
            worst = worst.max(fi.abs() - 1.0);
            for (j, &fj) in f.iter().enumerate().skip(i + 1) {
                worst = worst.max((fj - fi).abs() - (lp.values()[j] - lp.values()[i]));
            }
        }
        worst.max(0.0)
    }

    pub fn objective(&self, lp: &ChainLP) -> f64 {
        self.f_values
            .iter()
            .zip(lp.weights())
            .map(|(f, w)| f * w)
            .sum()
    }
}

/// Evaluates the piecewise-linear function with breakpoints (xs, ys) at z,
/// clamping to the endpoint values outside the domain.
fn eval_pl(xs: &[f64], ys: &[f64], z: f64) -> f64 {
    let n = xs.len();
    if z <= xs[0] {
        return ys[0];
    }
    if z >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = match xs.binary_search_by(|x| x.partial_cmp(&z).expect("finite breakpoints")) {
        Ok(k) => return ys[k],
        Err(k) => k - 1,
    };
    let t = (z - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

/// Argmax interval and maximum of a concave piecewise-linear function; the
/// maximizers form a contiguous interval with breakpoint endpoints.
fn argmax_pl(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let mut ymax = f64::NEG_INFINITY;
    for &y in ys {
        if y > ymax {
            ymax = y;
        }
    }
    let first = ys.iter().position(|&y| y == ymax).expect("nonempty");
    let last = ys.iter().rposition(|&y| y == ymax).expect("nonempty");
    (xs[first], xs[last], ymax)
}

/// W(z) = max{ V(w) : |w − z| ≤ d } for concave V on [−1, 1], restricted to
/// z ∈ [−1, 1]: the top flattens into a plateau widened by d and the
/// rising/falling branches shift inward.
fn window_max_into(xs: &[f64], ys: &[f64], d: f64, out_xs: &mut Vec<f64>, out_ys: &mut Vec<f64>) {
    out_xs.clear();
    out_ys.clear();
    let (amax, bmax, ymax) = argmax_pl(xs, ys);
    let lo = -1.0;
    let hi = 1.0;
    let plat_lo = (amax - d).max(lo);
    let plat_hi = (bmax + d).min(hi);
    if plat_lo > lo {
        out_xs.push(lo);
        out_ys.push(eval_pl(xs, ys, lo + d));
        for (&x, &y) in xs.iter().zip(ys) {
            let z = x - d;
            if z > lo && z < plat_lo {
                out_xs.push(z);
                out_ys.push(y);
            }
        }
    }
    out_xs.push(plat_lo);
    out_ys.push(ymax);
    if plat_hi > plat_lo {
        out_xs.push(plat_hi);
        out_ys.push(ymax);
    }
    if plat_hi < hi {
        for (&x, &y) in xs.iter().zip(ys) {
            let z = x + d;
            if z > plat_hi && z < hi {
                out_xs.push(z);
                out_ys.push(y);
            }
        }
        out_xs.push(hi);
        out_ys.push(eval_pl(xs, ys, hi - d));
    }
}

fn add_linear_inplace(xs: &[f64], ys: &mut [f64], slope: f64) {
    for (x, y) in xs.iter().zip(ys.iter_mut()) {
        *y += slope * x;
    }
}

/// Value-only chain LP solver with reusable scratch buffers, for hot loops
/// (the subset enumeration behind SSCE performs millions of tiny solves).
#[derive(Default)]
pub struct ChainValueSolver {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tmp_xs: Vec<f64>,
    tmp_ys: Vec<f64>,
}

impl ChainValueSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Optimum for support `values` (strictly increasing, caller-checked)
    /// with the given weights.
    pub fn value_sorted(&mut self, values: &[f64], weights: &[f64]) -> f64 {
        debug_assert!(values.windows(2).all(|w| w[1] > w[0]));
        debug_assert_eq!(values.len(), weights.len());
        let m = values.len();
        if m == 0 {
            return 0.0;
        }
        self.xs.clear();
        self.ys.clear();
        self.xs.extend_from_slice(&[-1.0, 1.0]);
        let w_last = weights[m - 1];
        self.ys.extend_from_slice(&[-w_last, w_last]);
        for i in (0..m - 1).rev() {
            let d = values[i + 1] - values[i];
            window_max_into(&self.xs, &self.ys, d, &mut self.tmp_xs, &mut self.tmp_ys);
            add_linear_inplace(&self.tmp_xs, &mut self.tmp_ys, weights[i]);
            std::mem::swap(&mut self.xs, &mut self.tmp_xs);
            std::mem::swap(&mut self.ys, &mut self.tmp_ys);
        }
        argmax_pl(&self.xs, &self.ys).2
    }
}

/// Optimum of the chain LP without witness recovery.
pub fn chain_lp_value(lp: &ChainLP) -> f64 {
    ChainValueSolver::new().value_sorted(&lp.values, &lp.weights)
}

/// Optimum and an attaining witness. The suffix value functions are kept
/// from the backward sweep; the witness is recovered by a forward pass that
/// picks the midpoint of the restricted argmax interval at each support
/// point, then snaps into the feasible window.
pub fn solve_chain_lp(lp: &ChainLP) -> (f64, LipschitzWitness) {
    let m = lp.len();
    if m == 0 {
        return (0.0, LipschitzWitness { f_values: vec![] });
    }
    let mut suffix: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(m);
    let w_last = lp.weights[m - 1];
    suffix.push((vec![-1.0, 1.0], vec![-w_last, w_last]));
    for i in (0..m - 1).rev() {
        let d = lp.values[i + 1] - lp.values[i];
        let (xs, ys) = suffix.last().expect("nonempty");
        let mut nxs = Vec::new();
        let mut nys = Vec::new();
        window_max_into(xs, ys, d, &mut nxs, &mut nys);
        add_linear_inplace(&nxs, &mut nys, lp.weights[i]);
        suffix.push((nxs, nys));
    }
    suffix.reverse();

    let (alo, ahi, optimum) = argmax_pl(&suffix[0].0, &suffix[0].1);
    let mut f = Vec::with_capacity(m);
    f.push(0.5 * (alo + ahi));
    for i in 1..m {
        let d = lp.values[i] - lp.values[i - 1];
        let wlo = (f[i - 1] - d).max(-1.0);
        let whi = (f[i - 1] + d).min(1.0);
        let (alo, ahi, _) = argmax_pl(&suffix[i].0, &suffix[i].1);
        let pick = if ahi <= wlo {
            wlo
        } else if alo >= whi {
            whi
        } else {
            0.5 * (alo.max(wlo) + ahi.min(whi))
        };
        f.push(pick.clamp(wlo, whi));
    }
    (optimum, LipschitzWitness { f_values: f })
}

/// Maximum of the objective over the finite family of δ-grid step functions:
/// values on the δ-grid of [−1,1] at the grid points of [0,1], adjacent
/// steps at most δ, constant on each δ-segment (left-closed). Computed by
/// dynamic programming over grid levels.
pub fn grid_supremum(lp: &ChainLP, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::validation(format!("delta {delta} not in (0,1]")));
    }
    let inv = 1.0 / delta;
    if (inv - inv.round()).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "1/delta must be a positive integer, got {inv}"
        )));
    }
    let cols = inv.round() as usize;
    let levels = 2 * cols + 1;
    let level = |l: usize| -1.0 + l as f64 * delta;

    let mut col_weight = vec![0.0f64; cols + 1];
    for (&v, &w) in lp.values().iter().zip(lp.weights()) {
        let j = ((v / delta).floor() as usize).min(cols);
        col_weight[j] += w;
    }

    let mut dp: Vec<f64> = (0..levels).map(|l| col_weight[0] * level(l)).collect();
    let mut next = vec![0.0f64; levels];
    for &w in &col_weight[1..] {
        for (l, slot) in next.iter_mut().enumerate() {
            let mut best = dp[l];
            if l > 0 && dp[l - 1] > best {
                best = dp[l - 1];
            }
            if l + 1 < levels && dp[l + 1] > best {
                best = dp[l + 1];
            }
            *slot = best + w * level(l);
        }
        std::mem::swap(&mut dp, &mut next);
    }
    Ok(dp.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
}
