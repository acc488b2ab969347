//! Deterministic forecasters and transcript construction.

use crate::core::dist::OutcomeDistribution;
use crate::core::seq::{OutcomeSeq, PredictionSeq, Transcript};
use crate::error::{Error, Result};
use crate::forecasters;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// A pure function from observed history to the next prediction.
pub type PolicyRule = Arc<dyn Fn(&[u8]) -> f64 + Send + Sync>;

/// A deterministic forecaster: a map from history prefixes to predictions.
///
/// `Table` stores one prediction per history node in the same heap indexing
/// as [`OutcomeDistribution::Tree`]; the named variants are strategies whose
/// predictions are generated on the fly. `Policy` wraps an arbitrary pure
/// function of the history for in-process use (it has no wire format).
#[derive(Clone)]
pub enum Forecaster {
    Table { depth: usize, predictions: Vec<f64> },
    Truthful(OutcomeDistribution),
    Constant(f64),
    SidestepBlocks,
    Algorithm1 { pstar: PredictionSeq },
    UcalStrategic,
    Policy { name: String, rule: PolicyRule },
}

impl fmt::Debug for Forecaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forecaster::Table { depth, .. } => write!(f, "Table(depth={depth})"),
            Forecaster::Truthful(d) => write!(f, "Truthful(depth={})", d.depth()),
            Forecaster::Constant(a) => write!(f, "Constant({a})"),
            Forecaster::SidestepBlocks => write!(f, "SidestepBlocks"),
            Forecaster::Algorithm1 { pstar } => write!(f, "Algorithm1(T={})", pstar.len()),
            Forecaster::UcalStrategic => write!(f, "UcalStrategic"),
            Forecaster::Policy { name, .. } => write!(f, "Policy({name})"),
        }
    }
}

/// Incremental interface driven by [`run_forecaster`]: alternate `predict`
/// and `observe` along the outcome sequence.
pub(crate) trait Stepper {
    fn predict(&mut self) -> f64;
    fn observe(&mut self, bit: u8);
}

struct TableStepper<'a> {
    predictions: &'a [f64],
    idx: usize,
}

impl Stepper for TableStepper<'_> {
    fn predict(&mut self) -> f64 {
        self.predictions[self.idx]
    }
    fn observe(&mut self, bit: u8) {
        self.idx = 2 * self.idx + 1 + bit as usize;
    }
}

struct PolicyStepper<'a> {
    rule: &'a (dyn Fn(&[u8]) -> f64 + Send + Sync),
    history: Vec<u8>,
}

impl Stepper for PolicyStepper<'_> {
    fn predict(&mut self) -> f64 {
        (self.rule)(&self.history)
    }
    fn observe(&mut self, bit: u8) {
        self.history.push(bit);
    }
}

impl Forecaster {
    pub fn table(depth: usize, predictions: Vec<f64>) -> Result<Self> {
        let want = (1usize << depth) - 1;
        if predictions.len() != want {
            return Err(Error::validation(format!(
                "table of depth {depth} needs {want} predictions, got {}",
                predictions.len()
            )));
        }
        for &p in &predictions {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!("prediction {p} not in [0,1]")));
            }
        }
        Ok(Forecaster::Table { depth, predictions })
    }

    pub fn policy(
        name: impl Into<String>,
        rule: impl Fn(&[u8]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Forecaster::Policy {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    pub(crate) fn make_stepper(&self, horizon: usize) -> Result<Box<dyn Stepper + '_>> {
        match self {
            Forecaster::Table { depth, predictions } => {
                if *depth < horizon {
                    return Err(Error::validation(format!(
                        "table depth {depth} < horizon {horizon}"
                    )));
                }
                Ok(Box::new(TableStepper {
                    predictions,
                    idx: 0,
                }))
            }
            Forecaster::Policy { rule, .. } => Ok(Box::new(PolicyStepper {
                rule: rule.as_ref(),
                history: Vec::with_capacity(horizon),
            })),
            Forecaster::Truthful(d) => forecasters::truthful_stepper(d, horizon),
            Forecaster::Constant(a) => forecasters::constant_stepper(*a),
            Forecaster::SidestepBlocks => forecasters::sidestep_stepper(horizon),
            Forecaster::Algorithm1 { pstar } => forecasters::algorithm1_stepper(pstar, horizon),
            Forecaster::UcalStrategic => forecasters::ucal_strategic_stepper(horizon),
        }
    }

    /// Materializes the strategy for horizon `depth` as a heap-indexed table
    /// by replaying it on every history prefix.
    pub fn to_table(&self, depth: usize) -> Result<Forecaster> {
        let n = (1usize << depth) - 1;
        let mut predictions = vec![0.0; n];
        let mut history: Vec<u8> = Vec::with_capacity(depth);
        loop {
            let idx = OutcomeDistribution::heap_index(&history);
            let mut stepper = self.make_stepper(depth)?;
            for &b in &history {
                stepper.predict();
                stepper.observe(b);
            }
            predictions[idx] = stepper.predict();
            // advance to the next history in DFS order
            if history.len() + 1 < depth {
                history.push(0);
            } else {
                while history.last() == Some(&1) {
                    history.pop();
                }
                match history.last_mut() {
                    Some(b) => *b = 1,
                    None => break,
                }
            }
        }
        Forecaster::table(depth, predictions)
    }
}

/// Runs the forecaster along an outcome sequence: p_t is its output on the
/// prefix x_{1..t-1}.
pub fn run_forecaster(a: &Forecaster, x: &OutcomeSeq) -> Result<Transcript> {
    let mut stepper = a.make_stepper(x.len())?;
    let mut p = Vec::with_capacity(x.len());
    for &b in x.bits() {
        p.push(stepper.predict());
        stepper.observe(b);
    }
    Transcript::new(x.clone(), PredictionSeq::new(p)?)
}

/// Exact expectation of a transcript measure under a distribution: sums
/// probability times measure over every outcome sequence (no sampling).
pub fn expected_measure<F>(d: &OutcomeDistribution, a: &Forecaster, m: F) -> Result<f64>
where
    F: Fn(&Transcript) -> Result<f64>,
{
    expected_measure_capped(d, a, m, crate::core::dist::enumeration_cap())
}

pub fn expected_measure_capped<F>(
    d: &OutcomeDistribution,
    a: &Forecaster,
    m: F,
    cap: usize,
) -> Result<f64>
where
    F: Fn(&Transcript) -> Result<f64>,
{
    let outcomes = d.enumerate_outcomes_capped(cap)?;
    let mut total = 0.0;
    for (x, prob) in &outcomes {
        if *prob > 0.0 {
            total += prob * m(&run_forecaster(a, x)?)?;
        }
    }
    Ok(total)
}

/// Wire format for forecasters: either a literal table or a named strategy.
///
/// `truthful` binds to the distribution supplied in context; `constant`
/// takes `alpha`, `algorithm1` takes `pstar`, `sidestep` and
/// `ucal_strategic` take no parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForecasterSpec {
    Table {
        depth: usize,
        predictions: Vec<f64>,
    },
    Named {
        name: String,
        #[serde(default)]
        params: serde_json::Map<String, serde_json::Value>,
    },
}

impl ForecasterSpec {
    pub fn resolve(&self, dist: Option<&OutcomeDistribution>) -> Result<Forecaster> {
        match self {
            ForecasterSpec::Table { depth, predictions } => {
                Forecaster::table(*depth, predictions.clone())
            }
            ForecasterSpec::Named { name, params } => match name.as_str() {
                "truthful" => {
                    let d = dist.ok_or_else(|| {
                        Error::validation("named forecaster `truthful` needs a distribution")
                    })?;
                    Ok(forecasters::truthful(d))
                }
                "constant" => {
                    let alpha = params
                        .get("alpha")
                        .and_then(|v| v.as_f64())
                        .ok_or_else(|| {
                            Error::validation("field `params.alpha` must be a number")
                        })?;
                    forecasters::constant(alpha)
                }
                "sidestep" => Ok(forecasters::sidestep_blocks()),
                "algorithm1" => {
                    let raw = params
                        .get("pstar")
                        .and_then(|v| v.as_array())
                        .ok_or_else(|| {
                            Error::validation("field `params.pstar` must be an array")
                        })?;
                    let pstar: Vec<f64> = raw
                        .iter()
                        .map(|v| {
                            v.as_f64().ok_or_else(|| {
                                Error::validation("field `params.pstar` must hold numbers")
                            })
                        })
                        .collect::<Result<_>>()?;
                    Ok(forecasters::algorithm1(PredictionSeq::new(pstar)?))
                }
                "ucal_strategic" => Ok(forecasters::ucal_strategic()),
                other => Err(Error::validation(format!("unknown forecaster `{other}`"))),
            },
        }
    }
}
