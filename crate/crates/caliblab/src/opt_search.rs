//! Exact minimization of expected measures over grid-valued forecaster
//! tables at small horizons.

use crate::core::dist::{enumeration_cap, OutcomeDistribution};
use crate::core::forecast::{expected_measure_capped, Forecaster};
use crate::core::seq::{OutcomeSeq, PredictionSeq, Transcript};
use crate::error::{Error, Result};
use crate::forecasters::truthful;
use serde::{Deserialize, Serialize};

/// Default cap on search work (leaf evaluations for the exact search,
/// candidate tables for the restricted search).
pub const DEFAULT_SEARCH_CAP: u64 = 100_000_000;

/// A finite, sorted set of allowed prediction values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridSpec {
    values: Vec<f64>,
}

impl GridSpec {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("grid must be nonempty"));
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("grid value {v} not in [0,1]")));
            }
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        values.dedup();
        Ok(GridSpec { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.values.contains(&v)
    }
}

impl TryFrom<Vec<f64>> for GridSpec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        GridSpec::new(v)
    }
}

impl From<GridSpec> for Vec<f64> {
    fn from(g: GridSpec) -> Vec<f64> {
        g.values
    }
}

type Children = [Option<Box<SubPlan>>; 2];

/// Optimal continuation plan below one history node.
enum SubPlan {
    Leaf,
    Node { pred: f64, children: Children },
}

struct Search<'a, F> {
    dist: &'a OutcomeDistribution,
    measure: &'a F,
    grid: &'a [f64],
    depth: usize,
}

impl<F> Search<'_, F>
where
    F: Fn(&Transcript) -> Result<f64>,
{
    /// Exact minimum over all grid-valued completions below the current
    /// history, given the predictions already made along it.
    ///
    /// Distinct continuations govern disjoint outcome events, so the
    /// children of a node minimize independently once the node's own
    /// prediction is fixed; recursing over (history, prediction prefix)
    /// pairs therefore reproduces the exhaustive minimum over full tables
    /// in (2·|grid|)^T leaf evaluations. Ties keep the smallest grid value,
    /// which makes the reported argmin the lexicographically first
    /// minimizer in heap order.
    fn go(&self, history: &mut Vec<u8>, preds: &mut Vec<f64>) -> Result<(f64, SubPlan)> {
        if history.len() == self.depth {
            let t = Transcript::new(
                OutcomeSeq::new(history.clone())?,
                PredictionSeq::new(preds.clone())?,
            )?;
            return Ok(((self.measure)(&t)?, SubPlan::Leaf));
        }
        let p1 = self.dist.conditional(history)?;
        let mut best: Option<(f64, f64, Children)> = None;
        for &a in self.grid {
            preds.push(a);
            let mut value = 0.0;
            let mut children: Children = [None, None];
            for b in 0..2u8 {
                let pb = if b == 1 { p1 } else { 1.0 - p1 };
                if pb > 0.0 {
                    history.push(b);
                    let (v, plan) = self.go(history, preds)?;
                    history.pop();
                    value += pb * v;
                    children[b as usize] = Some(Box::new(plan));
                }
            }
            preds.pop();
            if best.as_ref().is_none_or(|(bv, _, _)| value < *bv) {
                best = Some((value, a, children));
            }
        }
        let (value, pred, children) = best.expect("grid is nonempty");
        Ok((value, SubPlan::Node { pred, children }))
    }
}

fn fill_table(plan: &SubPlan, idx: usize, table: &mut [f64], default: f64) {
    if let SubPlan::Node { pred, children } = plan {
        table[idx] = *pred;
        for (b, branch) in children.iter().enumerate() {
            let child = 2 * idx + 1 + b;
            if child < table.len() {
                match branch {
                    Some(p) => fill_table(p, child, table, default),
                    None => fill_default(child, table, default),
                }
            }
        }
    }
}

fn fill_default(idx: usize, table: &mut [f64], default: f64) {
    table[idx] = default;
    for b in 0..2usize {
        let child = 2 * idx + 1 + b;
        if child < table.len() {
            fill_default(child, table, default);
        }
    }
}

fn search_work(grid_len: usize, depth: usize) -> u64 {
    let mut work: u64 = 1;
    for _ in 0..depth {
        work = work.saturating_mul(2 * grid_len as u64);
    }
    work
}

/// Exhaustive minimum of the expected measure over every forecaster table
/// whose predictions all lie on the grid. Returns the minimum and the
/// lexicographically first minimizing table (heap order, grid ascending).
///
/// The value is an upper bound on the optimum over unrestricted
/// deterministic forecasters and equals it when the grid contains all
/// optimal prediction values.
pub fn opt_exact<F>(
    d: &OutcomeDistribution,
    measure: F,
    grid: &GridSpec,
    cap: Option<u64>,
) -> Result<(f64, Forecaster)>
where
    F: Fn(&Transcript) -> Result<f64>,
{
    let depth = d.depth();
    if depth > enumeration_cap() {
        return Err(Error::capacity(format!(
            "opt search depth {depth} exceeds enumeration cap"
        )));
    }
    let cap = cap.unwrap_or(DEFAULT_SEARCH_CAP);
    let work = search_work(grid.len(), depth);
    if work > cap {
        return Err(Error::capacity(format!(
            "opt search work {work} exceeds cap {cap}"
        )));
    }
    let search = Search {
        dist: d,
        measure: &measure,
        grid: grid.values(),
        depth,
    };
    let mut history = Vec::with_capacity(depth);
    let mut preds = Vec::with_capacity(depth);
    let (value, plan) = search.go(&mut history, &mut preds)?;
    let mut table = vec![0.0; (1usize << depth) - 1];
    fill_table(&plan, 0, &mut table, grid.values()[0]);
    Ok((value, Forecaster::table(depth, table)?))
}

/// Upper-bound search over the history-compressed class where the
/// prediction may depend only on (step, number of ones so far). The class
/// does not contain every deterministic forecaster, so the result bounds
/// the exact optimum from above; it is offered for horizons where the full
/// search is out of reach and must never be treated as the exact optimum.
pub fn opt_restricted<F>(
    d: &OutcomeDistribution,
    measure: F,
    grid: &GridSpec,
    cap: Option<u64>,
) -> Result<(f64, Forecaster)>
where
    F: Fn(&Transcript) -> Result<f64>,
{
    let depth = d.depth();
    if depth > enumeration_cap() {
        return Err(Error::capacity(format!(
            "opt search depth {depth} exceeds enumeration cap"
        )));
    }
    let cap = cap.unwrap_or(DEFAULT_SEARCH_CAP);
    // states ordered by (step, ones count)
    let num_states: usize = depth * (depth + 1) / 2;
    let state_index = |t: usize, ones: usize| t * (t + 1) / 2 + ones;
    let mut candidates: u64 = 1;
    for _ in 0..num_states {
        candidates = candidates.saturating_mul(grid.len() as u64);
        if candidates > cap {
            return Err(Error::capacity(format!(
                "restricted search over {num_states} states exceeds cap {cap}"
            )));
        }
    }
    let outcomes = d.enumerate_outcomes()?;
    let gv = grid.values();
    let mut assign = vec![0usize; num_states];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut value = 0.0;
        for (x, prob) in &outcomes {
            if *prob == 0.0 {
                continue;
            }
            let mut ones = 0usize;
            let mut preds = Vec::with_capacity(depth);
            for (t, &b) in x.bits().iter().enumerate() {
                preds.push(gv[assign[state_index(t, ones)]]);
                ones += b as usize;
            }
            let tr = Transcript::new(x.clone(), PredictionSeq::new(preds)?)?;
            value += prob * measure(&tr)?;
        }
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, assign.clone()));
        }
        // odometer over states, last state fastest
        let mut i = num_states;
        loop {
            if i == 0 {
                let (value, assign) = best.expect("at least one candidate");
                let mut table = vec![0.0; (1usize << depth) - 1];
                let mut history: Vec<u8> = Vec::new();
                fill_restricted(
                    &assign,
                    gv,
                    depth,
                    &state_index,
                    &mut history,
                    0,
                    &mut table,
                );
                return Ok((value, Forecaster::table(depth, table)?));
            }
            i -= 1;
            assign[i] += 1;
            if assign[i] < gv.len() {
                break;
            }
            assign[i] = 0;
        }
    }
}

fn fill_restricted(
    assign: &[usize],
    grid: &[f64],
    depth: usize,
    state_index: &impl Fn(usize, usize) -> usize,
    history: &mut Vec<u8>,
    idx: usize,
    table: &mut [f64],
) {
    let t = history.len();
    let ones = history.iter().filter(|&&b| b == 1).count();
    table[idx] = grid[assign[state_index(t, ones)]];
    if t + 1 < depth {
        for b in 0..2u8 {
            history.push(b);
            fill_restricted(
                assign,
                grid,
                depth,
                state_index,
                history,
                2 * idx + 1 + b as usize,
                table,
            );
            history.pop();
        }
    }
}

/// Truthful-arm error, searched optimum, and their ratio when it is
/// well defined.
#[derive(Debug)]
pub struct TruthfulnessReport {
    pub err_truthful: f64,
    pub opt_hat: f64,
    /// err_truthful / opt_hat; absent when opt_hat is numerically zero.
    pub ratio: Option<f64>,
    /// Set when the searched optimum vanished while the truthful arm did
    /// not: the pair itself witnesses the gap.
    pub gap_witnessed: bool,
    pub argmin: Forecaster,
}

/// Compares truthful forecasting (exact conditionals, which need not lie on
/// the grid) against the searched optimum over grid tables.
pub fn truthfulness_report<F>(
    d: &OutcomeDistribution,
    measure: F,
    grid: &GridSpec,
    cap: Option<u64>,
) -> Result<TruthfulnessReport>
where
    F: Fn(&Transcript) -> Result<f64>,
{
    let err_truthful = expected_measure_capped(d, &truthful(d), &measure, enumeration_cap())?;
    let (opt_hat, argmin) = opt_exact(d, &measure, grid, cap)?;
    let (ratio, gap_witnessed) = if opt_hat > 1e-12 {
        (Some(err_truthful / opt_hat), false)
    } else {
        (None, err_truthful > 1e-12)
    };
    Ok(TruthfulnessReport {
        err_truthful,
        opt_hat,
        ratio,
        gap_witnessed,
        argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::forecast::expected_measure;
    use crate::measures::{ece, ssce_exact};

    fn ece_fn(t: &Transcript) -> Result<f64> {
        ece(t).map(|r| r.value)
    }

    fn table_values(f: &Forecaster) -> Vec<f64> {
        match f {
            Forecaster::Table { predictions, .. } => predictions.clone(),
            _ => panic!("expected table"),
        }
    }

    /// Plain odometer enumeration in lexicographic table order; the oracle
    /// for the recursive search.
    fn brute_force<F>(d: &OutcomeDistribution, measure: F, grid: &GridSpec) -> (f64, Vec<f64>)
    where
        F: Fn(&Transcript) -> Result<f64>,
    {
        let depth = d.depth();
        let nodes = (1usize << depth) - 1;
        let gv = grid.values();
        let mut assign = vec![0usize; nodes];
        let mut best_val = f64::INFINITY;
        let mut best_table = Vec::new();
        loop {
            let table: Vec<f64> = assign.iter().map(|&i| gv[i]).collect();
            let f = Forecaster::table(depth, table.clone()).unwrap();
            let v = expected_measure(d, &f, &measure).unwrap();
            if v < best_val {
                best_val = v;
                best_table = table;
            }
            let mut i = nodes;
            loop {
                if i == 0 {
                    return (best_val, best_table);
                }
                i -= 1;
                assign[i] += 1;
                if assign[i] < gv.len() {
                    break;
                }
                assign[i] = 0;
            }
        }
    }

    #[test]
    fn triple_block_ece_opt_is_zero_with_sidestep_argmin() {
        let d = OutcomeDistribution::product(vec![0.5, 0.0, 1.0]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let (value, argmin) = opt_exact(&d, ece_fn, &grid, None).unwrap();
        assert!(value.abs() < 1e-12);
        // the sidestepping table: root 1/2; after 0 predict (0, then 1/2);
        // after 1 predict (1/2, then 1); unreachable cells hold grid[0] = 0
        let sidestep = crate::forecasters::sidestep_blocks().to_table(3).unwrap();
        let mut want = table_values(&sidestep);
        // unreached: after observing 1 in a block, step-2 subtree where the
        // second observation is 1 (the middle bit is always 0); those nodes
        // in the sidestep to_table differ, so compare only reachable nodes
        let d_all = d.enumerate_outcomes().unwrap();
        let got = table_values(&argmin);
        let mut reachable = vec![false; want.len()];
        for (x, prob) in &d_all {
            if *prob > 0.0 {
                let mut idx = 0usize;
                for &b in x.bits() {
                    reachable[idx] = true;
                    idx = 2 * idx + 1 + b as usize;
                }
            }
        }
        for i in 0..want.len() {
            if !reachable[i] {
                want[i] = 0.0;
            }
        }
        for i in 0..want.len() {
            if reachable[i] {
                assert_eq!(got[i], want[i], "node {i}");
            }
        }
    }

    #[test]
    fn triple_blocks_stay_zero_at_two_blocks() {
        let d = OutcomeDistribution::product(vec![0.5, 0.0, 1.0, 0.5, 0.0, 1.0]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let (value, argmin) = opt_exact(&d, ece_fn, &grid, None).unwrap();
        assert!(value.abs() < 1e-12);
        let achieved = expected_measure(&d, &argmin, ece_fn).unwrap();
        assert!(achieved.abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_value_and_lex_first_argmin() {
        let d = OutcomeDistribution::product(vec![0.5, 0.5]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let (bv, bt) = brute_force(&d, ece_fn, &grid);
        let (value, argmin) = opt_exact(&d, ece_fn, &grid, None).unwrap();
        assert!((value - bv).abs() < 1e-12);
        assert_eq!(table_values(&argmin), bt);
        // the optimum over the 27 tables equals 1/2, attained truthfully
        assert!((value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_tree() {
        let d = OutcomeDistribution::tree(2, vec![0.75, 0.25, 0.5]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let (bv, bt) = brute_force(&d, ece_fn, &grid);
        let (value, argmin) = opt_exact(&d, ece_fn, &grid, None).unwrap();
        assert!((value - bv).abs() < 1e-12);
        assert_eq!(table_values(&argmin), bt);
    }

    #[test]
    fn deterministic_distribution_reaches_zero() {
        let d = OutcomeDistribution::product(vec![1.0, 0.0, 1.0]).unwrap();
        let grid = GridSpec::new(vec![0.0, 1.0]).unwrap();
        let (value, _) = opt_exact(&d, |t| ssce_exact(t).map(|r| r.value), &grid, None).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn refinement_never_increases_optimum() {
        let d = OutcomeDistribution::product(vec![0.3, 0.8]).unwrap();
        let coarse = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let fine = GridSpec::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let (v_coarse, _) = opt_exact(&d, ece_fn, &coarse, None).unwrap();
        let (v_fine, _) = opt_exact(&d, ece_fn, &fine, None).unwrap();
        assert!(v_fine <= v_coarse + 1e-12);
    }

    #[test]
    fn truthful_dominates_opt_when_grid_contains_conditionals() {
        let d = OutcomeDistribution::tree(3, vec![0.5, 0.25, 0.75, 0.0, 1.0, 0.5, 0.25]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let report = truthfulness_report(&d, ece_fn, &grid, None).unwrap();
        assert!(report.err_truthful >= report.opt_hat - 1e-9);
    }

    #[test]
    fn triple_block_gap_witnessed() {
        let d = OutcomeDistribution::product(vec![0.5, 0.0, 1.0]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let report = truthfulness_report(&d, ece_fn, &grid, None).unwrap();
        assert!((report.err_truthful - 0.5).abs() < 1e-12);
        assert!(report.opt_hat.abs() <= 1e-12);
        assert!(report.gap_witnessed);
        assert!(report.ratio.is_none());
    }

    #[test]
    fn capacity_cap_enforced() {
        let d = OutcomeDistribution::product(vec![0.5; 16]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert!(matches!(
            opt_exact(&d, ece_fn, &grid, None),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn restricted_upper_bounds_full_search() {
        let d = OutcomeDistribution::tree(2, vec![0.5, 0.25, 0.75]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let (full, _) = opt_exact(&d, ece_fn, &grid, None).unwrap();
        let (restricted, argmin) = opt_restricted(&d, ece_fn, &grid, None).unwrap();
        assert!(restricted >= full - 1e-12);
        // the returned table must achieve the reported value
        let achieved = expected_measure(&d, &argmin, ece_fn).unwrap();
        assert!((achieved - restricted).abs() < 1e-12);
    }

    #[test]
    fn restricted_matches_full_on_product() {
        // product distributions have count-independent truthful optima in
        // this tiny case, so both searches land on the same value
        let d = OutcomeDistribution::product(vec![0.5, 0.5]).unwrap();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0]).unwrap();
        let (full, _) = opt_exact(&d, ece_fn, &grid, None).unwrap();
        let (restricted, _) = opt_restricted(&d, ece_fn, &grid, None).unwrap();
        assert!((restricted - full).abs() < 1e-12);
    }
}
