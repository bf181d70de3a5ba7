//! Seeded frequency simulation of a protocol.
//!
//! Each trial tosses the protocol's coin once; everything after the toss is
//! fixed by the schedules, so a trial contributes one experiment to its
//! outcome's tally and one awakening per scheduled day.
//!
//! # Generator
//!
//! The draw for trial `i` is the 64-bit word pair at word position `2·i` of
//! a ChaCha8 keystream (stream 0) keyed by `ChaCha8Rng::seed_from_u64(seed)`.
//! ChaCha is a counter-mode cipher, so any trial can be reached directly and
//! a worker that owns trials `a..b` seeks to word `2·a` and reads forward.
//! This mapping is fixed for the 0.x series of this crate.
//!
//! Outcomes are picked by comparing the draw against cumulative thresholds
//! `floor(F_j · 2^64)`, where `F_j` is the exact cumulative probability of
//! the first `j + 1` outcomes. The represented probability of each outcome
//! is off by less than `2^-63`.

use std::ops::Range;

use indexmap::IndexMap;
use num_traits::Zero;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exact::{check_agent, check_proposition, CredenceError, Measure};
use crate::protocol::{ExperimentProtocol, Proposition, ValidatedProtocol};
use crate::rational::{fixed_point_64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimulationError {
    #[error("NoEvents: no {0} events to estimate from")]
    NoEvents(Measure),
    #[error("ProtocolMismatch: {0}")]
    ProtocolMismatch(String),
    #[error("InvalidWorkers: need at least one worker")]
    InvalidWorkers,
    #[error(transparent)]
    Credence(#[from] CredenceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AwakeningTally {
    pub outcome: String,
    pub agent: String,
    pub day: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationResult {
    pub protocol: String,
    pub trials: u64,
    pub seed: u64,
    /// Experiments per outcome, in protocol outcome order.
    pub tallies: IndexMap<String, u64>,
    /// Interviews per (outcome, agent, day), ordered by agent, then outcome,
    /// then schedule day. Unscheduled triples are implicitly zero.
    pub awakening_tallies: Vec<AwakeningTally>,
}

impl SimulationResult {
    pub fn awakening_count(&self, outcome: &str, agent: &str, day: &str) -> u64 {
        self.awakening_tallies
            .iter()
            .find(|t| t.outcome == outcome && t.agent == agent && t.day == day)
            .map_or(0, |t| t.count)
    }

    fn from_counts(p: &ExperimentProtocol, trials: u64, seed: u64, counts: &[u64]) -> Self {
        let tallies = p
            .outcomes
            .iter()
            .zip(counts)
            .map(|(o, &c)| (o.label.clone(), c))
            .collect();
        let mut awakening_tallies = Vec::new();
        for agent in &p.agents {
            let schedule = p.schedule(agent).expect("validated protocol");
            for (o, &count) in p.outcomes.iter().zip(counts) {
                for day in schedule.days(&o.label) {
                    awakening_tallies.push(AwakeningTally {
                        outcome: o.label.clone(),
                        agent: agent.clone(),
                        day: day.clone(),
                        count,
                    });
                }
            }
        }
        SimulationResult { protocol: p.name.clone(), trials, seed, tallies, awakening_tallies }
    }
}

/// Maps a uniform 64-bit draw to an outcome index.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    thresholds: Vec<u128>,
}

impl OutcomeSampler {
    pub fn new(p: &ExperimentProtocol) -> Self {
        let mut cumulative = Rational::zero();
        let thresholds = p
            .outcomes
            .iter()
            .map(|o| {
                cumulative += &o.prob;
                fixed_point_64(&cumulative)
            })
            .collect();
        OutcomeSampler { thresholds }
    }

    pub fn thresholds(&self) -> &[u128] {
        &self.thresholds
    }

    #[inline]
    pub fn sample(&self, draw: u64) -> usize {
        let x = draw as u128;
        self.thresholds
            .iter()
            .position(|&t| x < t)
            .unwrap_or(self.thresholds.len() - 1)
    }
}

/// Generator positioned at trial `first`.
pub fn trial_stream(seed: u64, first: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * first as u128);
    rng
}

/// The raw 64-bit draw of a single trial.
pub fn trial_draw(seed: u64, trial: u64) -> u64 {
    trial_stream(seed, trial).next_u64()
}

/// Outcome counts for the trials in `range`, indexed like `p.outcomes`.
pub fn count_outcomes(p: &ExperimentProtocol, seed: u64, range: Range<u64>) -> Vec<u64> {
    let sampler = OutcomeSampler::new(p);
    count_with(&sampler, seed, range)
}

fn count_with(sampler: &OutcomeSampler, seed: u64, range: Range<u64>) -> Vec<u64> {
    let mut counts = vec![0u64; sampler.thresholds.len()];
    if range.is_empty() {
        return counts;
    }
    let mut rng = trial_stream(seed, range.start);
    for _ in range {
        counts[sampler.sample(rng.next_u64())] += 1;
    }
    counts
}

/// Runs `trials` experiments on one thread.
pub fn run_trials(p: &ValidatedProtocol, trials: u64, seed: u64) -> SimulationResult {
    let counts = count_outcomes(p, seed, 0..trials);
    SimulationResult::from_counts(p, trials, seed, &counts)
}

/// Splits the trial range into `workers` contiguous blocks, runs them on
/// separate threads and adds the tallies. The result does not depend on
/// `workers`.
pub fn run_trials_parallel(
    p: &ValidatedProtocol,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SimulationResult, SimulationError> {
    if workers == 0 {
        return Err(SimulationError::InvalidWorkers);
    }
    if workers == 1 {
        return Ok(run_trials(p, trials, seed));
    }
    let sampler = OutcomeSampler::new(p);
    let w = workers as u64;
    let ranges: Vec<Range<u64>> = (0..w)
        .map(|i| (trials * i / w)..(trials * (i + 1) / w))
        .collect();
    let partials: Vec<Vec<u64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let sampler = &sampler;
                scope.spawn(move || count_with(sampler, seed, r))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut counts = vec![0u64; p.outcomes.len()];
    for part in partials {
        for (c, x) in counts.iter_mut().zip(part) {
            *c += x;
        }
    }
    Ok(SimulationResult::from_counts(p, trials, seed, &counts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CredenceEstimate {
    pub agent: String,
    pub proposition: String,
    pub measure: Measure,
    pub point: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// Events in the denominator.
    pub n_effective: u64,
    /// Events in the numerator.
    pub hits: u64,
}

impl CredenceEstimate {
    /// `hits / n_effective` as an exact fraction.
    pub fn exact_ratio(&self) -> Rational {
        Rational::new(self.hits.into(), self.n_effective.into())
    }
}

fn check_matches(r: &SimulationResult, p: &ExperimentProtocol) -> Result<(), SimulationError> {
    if r.protocol != p.name {
        return Err(SimulationError::ProtocolMismatch(format!(
            "result is for protocol {:?}, not {:?}",
            r.protocol, p.name
        )));
    }
    let same_outcomes = r.tallies.len() == p.outcomes.len()
        && r.tallies.keys().zip(&p.outcomes).all(|(l, o)| *l == o.label);
    if !same_outcomes {
        return Err(SimulationError::ProtocolMismatch(
            "result outcomes differ from protocol outcomes".into(),
        ));
    }
    Ok(())
}

/// Frequency estimate of a credence from simulated tallies.
pub fn estimate_credence(
    r: &SimulationResult,
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
    measure: Measure,
) -> Result<CredenceEstimate, SimulationError> {
    check_matches(r, p)?;
    check_agent(p, agent)?;
    check_proposition(p, proposition)?;

    let (hits, n) = match measure {
        Measure::PerExperiment => r.tallies.iter().fold((0u64, 0u64), |(h, n), (o, &c)| {
            (if proposition.contains(o) { h + c } else { h }, n + c)
        }),
        Measure::PerAwakening => r
            .awakening_tallies
            .iter()
            .filter(|t| t.agent == agent)
            .fold((0u64, 0u64), |(h, n), t| {
                (if proposition.contains(&t.outcome) { h + t.count } else { h }, n + t.count)
            }),
    };
    if n == 0 {
        return Err(SimulationError::NoEvents(measure));
    }
    let point = hits as f64 / n as f64;
    let stderr = (point * (1.0 - point) / n as f64).sqrt();
    let lo = (point - 1.96 * stderr).max(0.0);
    let hi = (point + 1.96 * stderr).min(1.0);
    Ok(CredenceEstimate {
        agent: agent.to_string(),
        proposition: proposition.to_string(),
        measure,
        point,
        stderr,
        ci95: (lo, hi),
        n_effective: n,
        hits,
    })
}
