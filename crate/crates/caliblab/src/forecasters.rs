//! Named forecasting strategies.

use crate::core::dist::OutcomeDistribution;
use crate::core::forecast::{Forecaster, Stepper};
use crate::core::seq::{OutcomeSeq, PredictionSeq, Transcript};
use crate::error::{Error, Result};
use serde::Serialize;

/// Predicts the conditional probability of the next outcome given the true
/// distribution and the observed history.
pub fn truthful(d: &OutcomeDistribution) -> Forecaster {
    Forecaster::Truthful(d.clone())
}

/// Predicts `alpha` at every step.
pub fn constant(alpha: f64) -> Result<Forecaster> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::validation(format!("alpha {alpha} not in [0,1]")));
    }
    Ok(Forecaster::Constant(alpha))
}

/// The block strategy for horizons divisible by 3: predict 1/2 on the first
/// step of each block, then use the two known steps to cancel the bias, so
/// every realized transcript is perfectly calibrated.
pub fn sidestep_blocks() -> Forecaster {
    Forecaster::SidestepBlocks
}

/// The round-based forecaster for a product distribution with marginals
/// `pstar`. Each round covers the remaining horizon, predicts at most two
/// values, and exits early once its running bias returns to [-1, 1].
pub fn algorithm1(pstar: PredictionSeq) -> Forecaster {
    Forecaster::Algorithm1 { pstar }
}

/// Predicts 5/8 for the first half of the horizon, keeps predicting 5/8
/// until the running bias at 5/8 has magnitude at most 1, then predicts 1.
pub fn ucal_strategic() -> Forecaster {
    Forecaster::UcalStrategic
}

// ---------------------------------------------------------------------------
// steppers

struct TruthfulStepper<'a> {
    dist: &'a OutcomeDistribution,
    step: usize,
    node: usize,
}

impl Stepper for TruthfulStepper<'_> {
    fn predict(&mut self) -> f64 {
        match self.dist {
            OutcomeDistribution::Product { pstar } => pstar[self.step],
            OutcomeDistribution::Tree { conditionals, .. } => conditionals[self.node],
        }
    }
    fn observe(&mut self, bit: u8) {
        self.step += 1;
        // the node index is only meaningful (and bounded) for trees
        if matches!(self.dist, OutcomeDistribution::Tree { .. }) {
            self.node = 2 * self.node + 1 + bit as usize;
        }
    }
}

pub(crate) fn truthful_stepper(
    d: &OutcomeDistribution,
    horizon: usize,
) -> Result<Box<dyn Stepper + '_>> {
    if d.depth() < horizon {
        return Err(Error::validation(format!(
            "distribution depth {} < horizon {horizon}",
            d.depth()
        )));
    }
    Ok(Box::new(TruthfulStepper {
        dist: d,
        step: 0,
        node: 0,
    }))
}

struct ConstantStepper(f64);

impl Stepper for ConstantStepper {
    fn predict(&mut self) -> f64 {
        self.0
    }
    fn observe(&mut self, _bit: u8) {}
}

pub(crate) fn constant_stepper(alpha: f64) -> Result<Box<dyn Stepper + 'static>> {
    Ok(Box::new(ConstantStepper(alpha)))
}

struct SidestepStepper {
    pos: usize,
    block_bit: u8,
}

impl Stepper for SidestepStepper {
    fn predict(&mut self) -> f64 {
        match self.pos {
            0 => 0.5,
            1 => {
                if self.block_bit == 1 {
                    0.5
                } else {
                    0.0
                }
            }
            _ => {
                if self.block_bit == 1 {
                    1.0
                } else {
                    0.5
                }
            }
        }
    }
    fn observe(&mut self, bit: u8) {
        if self.pos == 0 {
            self.block_bit = bit;
        }
        self.pos = (self.pos + 1) % 3;
    }
}

pub(crate) fn sidestep_stepper(horizon: usize) -> Result<Box<dyn Stepper + 'static>> {
    if !horizon.is_multiple_of(3) {
        return Err(Error::validation(format!(
            "sidestep blocks need a horizon divisible by 3, got {horizon}"
        )));
    }
    Ok(Box::new(SidestepStepper {
        pos: 0,
        block_bit: 0,
    }))
}

struct UcalStrategicStepper {
    horizon: usize,
    t: usize,
    delta: f64,
    switched: bool,
}

impl Stepper for UcalStrategicStepper {
    fn predict(&mut self) -> f64 {
        if self.t < self.horizon / 2 || !self.switched {
            0.625
        } else {
            1.0
        }
    }
    fn observe(&mut self, bit: u8) {
        if self.t < self.horizon / 2 || !self.switched {
            self.delta += bit as f64 - 0.625;
        }
        self.t += 1;
        if self.t >= self.horizon / 2 && !self.switched && self.delta.abs() <= 1.0 {
            self.switched = true;
        }
    }
}

pub(crate) fn ucal_strategic_stepper(horizon: usize) -> Result<Box<dyn Stepper + 'static>> {
    if !horizon.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "ucal_strategic needs an even horizon, got {horizon}"
        )));
    }
    Ok(Box::new(UcalStrategicStepper {
        horizon,
        t: 0,
        delta: 0.0,
        switched: false,
    }))
}

// ---------------------------------------------------------------------------
// round-based product-distribution forecaster

/// Which branch a round took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RoundType {
    /// The two half-means are far apart: one value is predicted for up to a
    /// full round, scanning for a small bias after the halfway point.
    Type1,
    /// Half-means are close and the first-half mean is predicted directly.
    Type2,
    /// Half-means are close but the first-half mean is too extreme, so a
    /// shifted and clipped value is predicted instead.
    Type3,
    /// A single remaining step, predicted as 0.
    FinalSingle,
}

/// Bookkeeping for one round, exposed so tests can check per-round values.
#[derive(Clone, Debug, Serialize)]
pub struct Alg1Round {
    pub round: usize,
    pub start_t: usize,
    pub horizon_left: usize,
    pub half_len: usize,
    pub mu_first: f64,
    pub mu_second: f64,
    pub mu: f64,
    pub round_type: RoundType,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub end_t: usize,
    pub end_delta: f64,
}

enum Alg1Phase {
    BetweenRounds,
    FinalSingle,
    Type1Scan { i: usize },
    FirstHalf { i: usize },
    SecondHalf { i: usize },
}

struct Alg1Stepper {
    pstar: Vec<f64>,
    total: usize,
    t: usize,
    phase: Alg1Phase,
    round: usize,
    half_len: usize,
    mu_second: f64,
    alpha: f64,
    beta: f64,
    delta: f64,
    log_horizon: f64,
    trace: Vec<Alg1Round>,
}

impl Alg1Stepper {
    fn begin_round(&mut self) {
        self.round += 1;
        let t_r = self.total - self.t;
        self.delta = 0.0;
        if t_r == 1 {
            self.phase = Alg1Phase::FinalSingle;
            self.alpha = 0.0;
            self.half_len = 0;
            self.trace.push(Alg1Round {
                round: self.round,
                start_t: self.t,
                horizon_left: t_r,
                half_len: 0,
                mu_first: 0.0,
                mu_second: 0.0,
                mu: 0.0,
                round_type: RoundType::FinalSingle,
                alpha: 0.0,
                beta: None,
                end_t: 0,
                end_delta: 0.0,
            });
            return;
        }
        let h = t_r / 2;
        let hf = h as f64;
        let mu_first = self.pstar[self.t..self.t + h].iter().sum::<f64>() / hf;
        let mu_second = self.pstar[self.t + h..self.t + 2 * h].iter().sum::<f64>() / hf;
        let mu = (mu_first + mu_second) / 2.0;
        self.log_horizon = (t_r as f64).ln();
        self.half_len = h;
        self.mu_second = mu_second;
        let round_type;
        if (mu_first - mu).abs() >= (2.0 * self.log_horizon / hf).sqrt() {
            round_type = RoundType::Type1;
            self.alpha = (mu_first + mu) / 2.0;
            self.phase = Alg1Phase::Type1Scan { i: 0 };
        } else {
            let wide = 10.0 * (self.log_horizon / hf).sqrt();
            if mu_first <= 0.5 {
                if mu_first >= wide {
                    round_type = RoundType::Type2;
                    self.alpha = mu_first;
                } else {
                    round_type = RoundType::Type3;
                    self.alpha =
                        (mu_first - (2.0 * mu_first * self.log_horizon / hf).sqrt()).max(0.0);
                }
            } else if 1.0 - mu_first >= wide {
                round_type = RoundType::Type2;
                self.alpha = mu_first;
            } else {
                round_type = RoundType::Type3;
                self.alpha =
                    (mu_first + (2.0 * (1.0 - mu_first) * self.log_horizon / hf).sqrt()).min(1.0);
            }
            self.phase = Alg1Phase::FirstHalf { i: 0 };
        }
        self.trace.push(Alg1Round {
            round: self.round,
            start_t: self.t,
            horizon_left: t_r,
            half_len: h,
            mu_first,
            mu_second,
            mu,
            round_type,
            alpha: self.alpha,
            beta: None,
            end_t: 0,
            end_delta: 0.0,
        });
    }

    fn end_round(&mut self) {
        let rec = self.trace.last_mut().expect("round open");
        rec.end_t = self.t;
        rec.end_delta = self.delta;
        self.phase = Alg1Phase::BetweenRounds;
    }
}

impl Stepper for Alg1Stepper {
    fn predict(&mut self) -> f64 {
        if matches!(self.phase, Alg1Phase::BetweenRounds) {
            self.begin_round();
        }
        match self.phase {
            Alg1Phase::FinalSingle => 0.0,
            Alg1Phase::Type1Scan { .. } | Alg1Phase::FirstHalf { .. } => self.alpha,
            Alg1Phase::SecondHalf { .. } => self.beta,
            Alg1Phase::BetweenRounds => unreachable!(),
        }
    }

    fn observe(&mut self, bit: u8) {
        self.t += 1;
        match self.phase {
            Alg1Phase::BetweenRounds => unreachable!("observe before predict"),
            Alg1Phase::FinalSingle => {
                self.delta += bit as f64;
                self.end_round();
            }
            Alg1Phase::Type1Scan { i } => {
                let i = i + 1;
                self.delta += bit as f64 - self.alpha;
                if (i > self.half_len && self.delta.abs() <= 1.0) || i == 2 * self.half_len {
                    self.end_round();
                } else {
                    self.phase = Alg1Phase::Type1Scan { i };
                }
            }
            Alg1Phase::FirstHalf { i } => {
                let i = i + 1;
                self.delta += bit as f64 - self.alpha;
                if i == self.half_len {
                    let hf = self.half_len as f64;
                    let shift = (self.log_horizon / (2.0 * hf)).sqrt();
                    self.beta = if self.delta >= 0.0 {
                        (self.mu_second + self.delta / hf + shift).min(1.0)
                    } else {
                        (self.mu_second + self.delta / hf - shift).max(0.0)
                    };
                    self.trace.last_mut().expect("round open").beta = Some(self.beta);
                    self.phase = Alg1Phase::SecondHalf { i: 0 };
                } else {
                    self.phase = Alg1Phase::FirstHalf { i };
                }
            }
            Alg1Phase::SecondHalf { i } => {
                let i = i + 1;
                self.delta += bit as f64 - self.beta;
                if self.delta.abs() <= 1.0 || i == self.half_len {
                    self.end_round();
                } else {
                    self.phase = Alg1Phase::SecondHalf { i };
                }
            }
        }
    }
}

pub(crate) fn algorithm1_stepper(
    pstar: &PredictionSeq,
    horizon: usize,
) -> Result<Box<dyn Stepper + 'static>> {
    if pstar.len() < horizon {
        return Err(Error::validation(format!(
            "algorithm1 configured for {} steps, asked for {horizon}",
            pstar.len()
        )));
    }
    Ok(Box::new(Alg1Stepper {
        pstar: pstar.values().to_vec(),
        total: pstar.len(),
        t: 0,
        phase: Alg1Phase::BetweenRounds,
        round: 0,
        half_len: 0,
        mu_second: 0.0,
        alpha: 0.0,
        beta: 0.0,
        delta: 0.0,
        log_horizon: 0.0,
        trace: Vec::new(),
    }))
}

/// Runs the round-based forecaster and returns the transcript together with
/// its per-round trace.
pub fn run_algorithm1(
    pstar: &PredictionSeq,
    x: &OutcomeSeq,
) -> Result<(Transcript, Vec<Alg1Round>)> {
    if pstar.len() != x.len() {
        return Err(Error::validation(format!(
            "algorithm1 trace run needs len(x) == len(pstar), got {} vs {}",
            x.len(),
            pstar.len()
        )));
    }
    let mut stepper = Alg1Stepper {
        pstar: pstar.values().to_vec(),
        total: pstar.len(),
        t: 0,
        phase: Alg1Phase::BetweenRounds,
        round: 0,
        half_len: 0,
        mu_second: 0.0,
        alpha: 0.0,
        beta: 0.0,
        delta: 0.0,
        log_horizon: 0.0,
        trace: Vec::new(),
    };
    let mut p = Vec::with_capacity(x.len());
    for &b in x.bits() {
        p.push(stepper.predict());
        stepper.observe(b);
    }
    let t = Transcript::new(x.clone(), PredictionSeq::new(p)?)?;
    Ok((t, stepper.trace))
}

/// Number of distinct prediction values in a transcript (exact equality).
pub fn distinct_predictions(t: &Transcript) -> usize {
    crate::core::seq::bias_profile(t).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::forecast::run_forecaster;
    use crate::core::seq::bias_profile;

    #[test]
    fn sidestep_block_with_one() {
        let a = sidestep_blocks();
        let x = OutcomeSeq::new(vec![1, 0, 1]).unwrap();
        let t = run_forecaster(&a, &x).unwrap();
        assert_eq!(t.p().values(), &[0.5, 0.5, 1.0]);
        for (_, d) in bias_profile(&t).entries() {
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn sidestep_block_with_zero() {
        let a = sidestep_blocks();
        let x = OutcomeSeq::new(vec![0, 0, 1]).unwrap();
        let t = run_forecaster(&a, &x).unwrap();
        assert_eq!(t.p().values(), &[0.5, 0.0, 0.5]);
        for (_, d) in bias_profile(&t).entries() {
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn sidestep_rejects_bad_horizon() {
        let a = sidestep_blocks();
        let x = OutcomeSeq::new(vec![1, 0]).unwrap();
        assert!(run_forecaster(&a, &x).is_err());
    }

    #[test]
    fn truthful_tree_reproduces_conditionals() {
        let d = OutcomeDistribution::tree(2, vec![0.5, 0.0, 1.0]).unwrap();
        let a = truthful(&d);
        let t = run_forecaster(&a, &OutcomeSeq::new(vec![1, 1]).unwrap()).unwrap();
        assert_eq!(t.p().values(), &[0.5, 1.0]);
        let t = run_forecaster(&a, &OutcomeSeq::new(vec![0, 0]).unwrap()).unwrap();
        assert_eq!(t.p().values(), &[0.5, 0.0]);
    }

    #[test]
    fn algorithm1_two_step_round_trace() {
        // T = 2, pstar = (0.3, 0.8): half-means are 0.3 and 0.8, their gap
        // from the average 0.55 is 0.25 < sqrt(2 ln 2), and 0.3 < 10 sqrt(ln 2),
        // so the round is Type3 with alpha = max(0.3 - sqrt(0.6 ln 2), 0) = 0.
        let pstar = PredictionSeq::new(vec![0.3, 0.8]).unwrap();
        for bits in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let x = OutcomeSeq::new(bits.to_vec()).unwrap();
            let (t, trace) = run_algorithm1(&pstar, &x).unwrap();
            assert_eq!(trace.len(), 1);
            let r = &trace[0];
            assert_eq!(r.round_type, RoundType::Type3);
            assert_eq!(r.half_len, 1);
            assert!((r.mu_first - 0.3).abs() < 1e-15);
            assert!((r.mu_second - 0.8).abs() < 1e-15);
            assert_eq!(r.alpha, 0.0);
            // delta = x_1 >= 0, so beta = min(0.8 + x_1 + sqrt(ln 2 / 2), 1) = 1
            assert_eq!(r.beta, Some(1.0));
            assert_eq!(t.p().values(), &[0.0, 1.0]);
            assert!(r.end_delta.abs() <= 1.0);
        }
    }

    #[test]
    fn algorithm1_round_has_at_most_two_values() {
        let t_len = 257;
        let pstar = PredictionSeq::new(vec![0.5; t_len]).unwrap();
        let x = OutcomeDistribution::product(vec![0.5; t_len])
            .unwrap()
            .sample(crate::core::rng::RngStream::new(3, 0));
        let (t, trace) = run_algorithm1(&pstar, &x).unwrap();
        for r in &trace {
            let lo = r.start_t;
            let hi = r.end_t;
            let mut vals: Vec<f64> = t.p().values()[lo..hi].to_vec();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            assert!(vals.len() <= 2, "round predicted {} values", vals.len());
        }
        // all rounds accounted for every step
        assert_eq!(trace.last().unwrap().end_t, t_len);
    }

    #[test]
    fn algorithm1_predictions_in_range_and_delta_smooth() {
        for seed in 0..5u64 {
            let t_len = 200;
            let mut rng = crate::core::rng::RngStream::new(seed, 9).rng();
            let pstar: Vec<f64> = (0..t_len).map(|_| rand::Rng::gen(&mut rng)).collect();
            let d = OutcomeDistribution::product(pstar.clone()).unwrap();
            let x = d.sample(crate::core::rng::RngStream::new(seed, 10));
            let (t, _) = run_algorithm1(&PredictionSeq::new(pstar).unwrap(), &x).unwrap();
            for &p in t.p().values() {
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    /// Straight-line transcription of the round loop, evaluated offline on
    /// a known outcome sequence; an independent oracle for the incremental
    /// state machine.
    fn algorithm1_offline(pstar: &[f64], x: &[u8]) -> Vec<f64> {
        let total = pstar.len();
        let mut p = vec![0.0; total];
        let mut t = 0usize;
        while t < total {
            let t_r = total - t;
            if t_r == 1 {
                p[t] = 0.0;
                break;
            }
            let h = t_r / 2;
            let hf = h as f64;
            let mu_first: f64 = pstar[t..t + h].iter().sum::<f64>() / hf;
            let mu_second: f64 = pstar[t + h..t + 2 * h].iter().sum::<f64>() / hf;
            let mu = (mu_first + mu_second) / 2.0;
            let ln_t = (t_r as f64).ln();
            let mut delta = 0.0;
            if (mu_first - mu).abs() >= (2.0 * ln_t / hf).sqrt() {
                let alpha = (mu_first + mu) / 2.0;
                for i in 1..=2 * h {
                    p[t] = alpha;
                    delta += x[t] as f64 - alpha;
                    t += 1;
                    if i > h && delta.abs() <= 1.0 {
                        break;
                    }
                }
            } else {
                let alpha = if mu_first <= 0.5 {
                    if mu_first >= 10.0 * (ln_t / hf).sqrt() {
                        mu_first
                    } else {
                        (mu_first - (2.0 * mu_first * ln_t / hf).sqrt()).max(0.0)
                    }
                } else if 1.0 - mu_first >= 10.0 * (ln_t / hf).sqrt() {
                    mu_first
                } else {
                    (mu_first + (2.0 * (1.0 - mu_first) * ln_t / hf).sqrt()).min(1.0)
                };
                for _ in 0..h {
                    p[t] = alpha;
                    delta += x[t] as f64 - alpha;
                    t += 1;
                }
                let shift = (ln_t / (2.0 * hf)).sqrt();
                let beta = if delta >= 0.0 {
                    (mu_second + delta / hf + shift).min(1.0)
                } else {
                    (mu_second + delta / hf - shift).max(0.0)
                };
                for _ in 0..h {
                    p[t] = beta;
                    delta += x[t] as f64 - beta;
                    t += 1;
                    if delta.abs() <= 1.0 {
                        break;
                    }
                }
            }
        }
        p
    }

    #[test]
    fn algorithm1_stepper_matches_offline_transcription() {
        for seed in 0..20u64 {
            for t_len in [1usize, 2, 3, 17, 50, 96, 201] {
                let mut rng = crate::core::rng::RngStream::new(seed, 40).rng();
                let pstar: Vec<f64> = if seed % 2 == 0 {
                    vec![0.5; t_len]
                } else {
                    (0..t_len).map(|_| rand::Rng::gen(&mut rng)).collect()
                };
                let d = OutcomeDistribution::product(pstar.clone()).unwrap();
                let x = d.sample(crate::core::rng::RngStream::new(seed, 41));
                let (tr, _) =
                    run_algorithm1(&PredictionSeq::new(pstar.clone()).unwrap(), &x).unwrap();
                let offline = algorithm1_offline(&pstar, x.bits());
                assert_eq!(tr.p().values(), offline.as_slice(), "seed {seed} T {t_len}");
            }
        }
    }

    #[test]
    fn algorithm1_distinct_values_logarithmic() {
        for t_len in [96usize, 384] {
            let pstar = PredictionSeq::new(vec![0.5; t_len]).unwrap();
            let d = OutcomeDistribution::product(vec![0.5; t_len]).unwrap();
            for seed in 0..10u64 {
                let x = d.sample(crate::core::rng::RngStream::new(seed, 1));
                let (t, _) = run_algorithm1(&pstar, &x).unwrap();
                let bound = 2 * (t_len as f64).log2().ceil() as usize + 2;
                assert!(distinct_predictions(&t) <= bound);
            }
        }
    }

    #[test]
    fn ucal_strategic_two_values_and_small_final_bias() {
        let t_len = 400;
        // half Bern(1/2), half ones
        let mut pstar = vec![0.5; t_len / 2];
        pstar.extend(vec![1.0; t_len / 2]);
        let d = OutcomeDistribution::product(pstar).unwrap();
        let a = ucal_strategic();
        let mut reached = 0;
        for seed in 0..50u64 {
            let x = d.sample(crate::core::rng::RngStream::new(seed, 2));
            let t = run_forecaster(&a, &x).unwrap();
            let profile = bias_profile(&t);
            assert!(profile.len() <= 2);
            if let Some(delta) = profile.get(0.625) {
                if delta.abs() <= 1.0 {
                    reached += 1;
                }
            }
        }
        assert!(reached >= 48, "only {reached}/50 runs ended near zero bias");
    }

    #[test]
    fn constant_forecaster_soundness_and_completeness() {
        use crate::core::forecast::expected_measure;
        use crate::measures::ssce_exact;
        let t_len = 10;
        let ssce = |t: &Transcript| ssce_exact(t).map(|r| r.value);
        // systematically wrong constants cost linearly: at least |a-b|T/2
        let d = OutcomeDistribution::product(vec![0.5; t_len]).unwrap();
        let wrong = expected_measure(&d, &constant(0.9).unwrap(), ssce).unwrap();
        assert!(wrong >= 0.4 * t_len as f64 / 2.0 - 1e-9, "wrong = {wrong}");
        // the matching constant costs sublinearly (square-root scale)
        let right = expected_measure(&d, &constant(0.5).unwrap(), ssce).unwrap();
        assert!(right <= (t_len as f64).sqrt(), "right = {right}");
        assert!(right < wrong);
    }

    #[test]
    fn ucal_strategic_needs_even_horizon() {
        let a = ucal_strategic();
        let x = OutcomeSeq::new(vec![1, 0, 1]).unwrap();
        assert!(run_forecaster(&a, &x).is_err());
    }
}
