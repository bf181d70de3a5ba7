//! Shared generators and independent oracles for the integration suites.
//!
//! The oracles walk protocol schedules directly and never call into the
//! engine modules they are used to check.

#![allow(dead_code)]

use num_traits::Zero;
use proptest::prelude::*;
use sb_core::rational::{int, ratio};
use sb_core::{
    AwakeningSchedule, ExperimentProtocol, Measure, OutcomeSpec, Proposition, Question, Rational,
};

pub const MAX_OUTCOMES: usize = 4;
pub const MAX_AGENTS: usize = 3;
pub const MAX_DAYS: usize = 5;

pub fn outcome_label(i: usize) -> String {
    format!("o{i}")
}

pub fn agent_label(i: usize) -> String {
    format!("A{i}")
}

/// Days selected by the low `MAX_DAYS` bits of `mask`, in calendar order.
pub fn days_from_mask(mask: u8) -> Vec<String> {
    (0..MAX_DAYS).filter(|d| mask & (1 << d) != 0).map(|d| format!("d{}", d + 1)).collect()
}

pub fn proposition_from_mask(mask: u32, n_outcomes: usize) -> Proposition {
    Proposition::new((0..n_outcomes).filter(|i| mask & (1 << i) != 0).map(outcome_label))
}

/// Every non-empty proposition over the protocol's outcomes.
pub fn all_propositions(p: &ExperimentProtocol) -> Vec<Proposition> {
    let n = p.outcomes.len();
    (1u32..(1 << n))
        .map(|mask| Proposition::new((0..n).filter(|i| mask & (1 << i) != 0).map(|i| p.outcomes[i].label.clone())))
        .collect()
}

fn build(
    weights: Vec<u32>,
    schedule_masks: Vec<Vec<u8>>,
    questions: Vec<(usize, u32)>,
) -> ExperimentProtocol {
    let n_out = weights.len();
    let total: u32 = weights.iter().sum();
    let outcomes = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| OutcomeSpec::new(outcome_label(i), ratio(w as i64, total as i64)))
        .collect();
    let agents: Vec<String> = (0..schedule_masks.len()).map(agent_label).collect();
    let schedules = schedule_masks
        .iter()
        .enumerate()
        .map(|(a, masks)| {
            masks.iter().enumerate().fold(AwakeningSchedule::new(agent_label(a)), |s, (o, &m)| {
                s.with(&outcome_label(o), days_from_mask(m))
            })
        })
        .collect();
    let questions = questions
        .into_iter()
        .map(|(a, mask)| Question::new(agent_label(a), proposition_from_mask(mask, n_out)))
        .collect();
    ExperimentProtocol { name: "random".into(), outcomes, agents, schedules, questions }
}

/// Small valid protocols: up to 4 outcomes with rational probabilities,
/// up to 3 agents, schedules drawn from 5 days.
pub fn small_protocol() -> impl Strategy<Value = ExperimentProtocol> {
    (1..=MAX_OUTCOMES, 1..=MAX_AGENTS)
        .prop_flat_map(|(n_out, n_agents)| {
            let weights = prop::collection::vec(0u32..=6, n_out)
                .prop_filter("some outcome has positive weight", |w| w.iter().sum::<u32>() > 0);
            let schedules = prop::collection::vec(
                prop::collection::vec(0u8..(1 << MAX_DAYS), n_out),
                n_agents,
            );
            let questions = prop::collection::vec((0..n_agents, 1u32..(1 << n_out)), 0..=3);
            (weights, schedules, questions)
        })
        .prop_map(|(w, s, q)| build(w, s, q))
}

/// Replacement schedule masks for an existing protocol's shape.
pub fn schedule_edit(p: &ExperimentProtocol) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(
        prop::collection::vec(0u8..(1 << MAX_DAYS), p.outcomes.len()),
        p.agents.len(),
    )
}

pub fn with_schedules(p: &ExperimentProtocol, masks: &[Vec<u8>]) -> ExperimentProtocol {
    let mut q = p.clone();
    for (s, agent_masks) in q.schedules.iter_mut().zip(masks) {
        for (o, &m) in p.outcomes.iter().zip(agent_masks) {
            s.per_outcome.insert(o.label.clone(), days_from_mask(m));
        }
    }
    q
}

/// Brute-force awakening list for one agent: `(outcome, weight)` per
/// scheduled interview.
pub fn brute_force_events(p: &ExperimentProtocol, agent: &str) -> Vec<(String, Rational)> {
    let schedule = p.schedules.iter().find(|s| s.agent == agent).expect("agent has a schedule");
    let mut events = Vec::new();
    for o in &p.outcomes {
        if let Some(days) = schedule.per_outcome.get(&o.label) {
            for _ in days {
                events.push((o.label.clone(), o.prob.clone()));
            }
        }
    }
    events
}

/// Per-awakening credence by summing over the enumerated events, or `None`
/// when the agent has no weighted interviews.
pub fn enumeration_ratio(p: &ExperimentProtocol, agent: &str, prop: &Proposition) -> Option<Rational> {
    let events = brute_force_events(p, agent);
    let total: Rational = events.iter().map(|(_, w)| w).sum();
    if total.is_zero() {
        return None;
    }
    let hits: Rational = events.iter().filter(|(o, _)| prop.contains(o)).map(|(_, w)| w).sum();
    Some(hits / total)
}

/// Expected quadratic loss of constant forecast `r`, computed from the
/// enumerated events (per awakening) or the raw outcome list (per
/// experiment).
pub fn oracle_brier(
    p: &ExperimentProtocol,
    agent: &str,
    prop: &Proposition,
    r: &Rational,
    measure: Measure,
) -> Rational {
    let events: Vec<(String, Rational)> = match measure {
        Measure::PerExperiment => p.outcomes.iter().map(|o| (o.label.clone(), o.prob.clone())).collect(),
        Measure::PerAwakening => brute_force_events(p, agent),
    };
    let total: Rational = events.iter().map(|(_, w)| w).sum();
    events
        .iter()
        .map(|(o, w)| {
            let y = if prop.contains(o) { int(1) } else { int(0) };
            let e = y - r;
            w * &e * &e
        })
        .sum::<Rational>()
        / total
}

/// Reports `0, 0.001, ..., 1`.
pub fn grid() -> impl Iterator<Item = Rational> {
    (0..=1000).map(|i| ratio(i, 1000))
}
