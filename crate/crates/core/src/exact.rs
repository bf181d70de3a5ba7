//! Exact credences over the weighted awakening-event space.
//!
//! Two measures are computed side by side:
//!
//! * **per experiment** (the halfer reading): each outcome counts once, with
//!   its protocol probability, whatever the agent's schedule.
//! * **per awakening** (the thirder reading): each outcome is weighted by its
//!   probability times the number of interviews the agent has under it,
//!   then renormalized.
//!
//! All arithmetic is on arbitrary-precision rationals.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::protocol::{ExperimentProtocol, Proposition, ValidatedProtocol};
use crate::rational::{to_decimal, Rational, DEFAULT_PRECISION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    PerExperiment,
    PerAwakening,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::PerExperiment, Measure::PerAwakening];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::PerExperiment => "per_experiment",
            Measure::PerAwakening => "per_awakening",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per_experiment" | "per-experiment" => Ok(Measure::PerExperiment),
            "per_awakening" | "per-awakening" => Ok(Measure::PerAwakening),
            other => Err(format!(
                "unknown measure {other:?} (expected per_experiment or per_awakening)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CredenceError {
    #[error("UnknownAgent: {0:?}")]
    UnknownAgent(String),
    #[error("UnknownOutcomeInProposition: {0:?}")]
    UnknownOutcomeInProposition(String),
    #[error("EmptyProposition: a proposition needs at least one outcome")]
    EmptyProposition,
    #[error("NoAwakenings: agent {0:?} is never interviewed under a positive-probability outcome, so the per-awakening measure is undefined")]
    NoAwakenings(String),
    #[error("EmptyQuestionList: credence_sum_check needs at least one question")]
    EmptyQuestions,
}

/// One interview occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AwakeningEvent {
    pub outcome: String,
    pub agent: String,
    pub day: String,
    /// Probability of `outcome`; the per-awakening measure renormalizes.
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredenceReport {
    pub agent: String,
    pub proposition: Proposition,
    pub measure: Measure,
    pub value: Rational,
    pub decimal: String,
}

impl CredenceReport {
    fn new(agent: &str, proposition: &Proposition, measure: Measure, value: Rational) -> Self {
        let decimal = to_decimal(&value, DEFAULT_PRECISION);
        CredenceReport {
            agent: agent.to_string(),
            proposition: proposition.clone(),
            measure,
            value,
            decimal,
        }
    }

    /// Re-renders the decimal at another precision.
    pub fn with_precision(mut self, digits: usize) -> Self {
        self.decimal = to_decimal(&self.value, digits);
        self
    }
}

pub(crate) fn check_agent(p: &ExperimentProtocol, agent: &str) -> Result<(), CredenceError> {
    if p.has_agent(agent) && p.schedule(agent).is_some() {
        Ok(())
    } else {
        Err(CredenceError::UnknownAgent(agent.to_string()))
    }
}

pub(crate) fn check_proposition(
    p: &ExperimentProtocol,
    proposition: &Proposition,
) -> Result<(), CredenceError> {
    if proposition.is_empty() {
        return Err(CredenceError::EmptyProposition);
    }
    match proposition.iter().find(|l| p.outcome(l).is_none()) {
        Some(l) => Err(CredenceError::UnknownOutcomeInProposition(l.to_string())),
        None => Ok(()),
    }
}

/// Lists the agent's interviews in canonical order: protocol outcome order,
/// then schedule day order.
pub fn enumerate_awakenings(
    p: &ValidatedProtocol,
    agent: &str,
) -> Result<Vec<AwakeningEvent>, CredenceError> {
    check_agent(p, agent)?;
    let schedule = p.schedule(agent).expect("checked");
    Ok(p.outcomes
        .iter()
        .flat_map(|o| {
            schedule.days(&o.label).iter().map(move |day| AwakeningEvent {
                outcome: o.label.clone(),
                agent: agent.to_string(),
                day: day.clone(),
                weight: o.prob.clone(),
            })
        })
        .collect())
}

/// Sum of outcome probabilities over `proposition`. Schedules play no part.
pub fn per_experiment_credence(
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
) -> Result<CredenceReport, CredenceError> {
    check_agent(p, agent)?;
    check_proposition(p, proposition)?;
    let value: Rational = p
        .outcomes
        .iter()
        .filter(|o| proposition.contains(&o.label))
        .map(|o| &o.prob)
        .sum();
    Ok(CredenceReport::new(agent, proposition, Measure::PerExperiment, value))
}

/// Fraction of the agent's probability-weighted interviews that fall under
/// an outcome in `proposition`.
pub fn per_awakening_credence(
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
) -> Result<CredenceReport, CredenceError> {
    check_agent(p, agent)?;
    check_proposition(p, proposition)?;
    let (inside, total) = awakening_mass(p, agent, proposition);
    if total.is_zero() {
        return Err(CredenceError::NoAwakenings(agent.to_string()));
    }
    Ok(CredenceReport::new(agent, proposition, Measure::PerAwakening, inside / total))
}

/// `(Σ_{o in prop} prob(o)·n(o), Σ_o prob(o)·n(o))` for the agent.
pub(crate) fn awakening_mass(
    p: &ExperimentProtocol,
    agent: &str,
    proposition: &Proposition,
) -> (Rational, Rational) {
    let schedule = p.schedule(agent).expect("agent checked by caller");
    let mut inside = Rational::zero();
    let mut total = Rational::zero();
    for o in &p.outcomes {
        let mass = &o.prob * Rational::from_integer(schedule.count(&o.label).into());
        if proposition.contains(&o.label) {
            inside += &mass;
        }
        total += mass;
    }
    (inside, total)
}

pub fn credence(
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
    measure: Measure,
) -> Result<CredenceReport, CredenceError> {
    match measure {
        Measure::PerExperiment => per_experiment_credence(p, agent, proposition),
        Measure::PerAwakening => per_awakening_credence(p, agent, proposition),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumVerdict {
    SumsToOne,
    Deviates,
}

impl fmt::Display for SumVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SumVerdict::SumsToOne => "sums_to_one",
            SumVerdict::Deviates => "deviates",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumCheck {
    pub measure: Measure,
    pub reports: Vec<CredenceReport>,
    pub sum: Rational,
    pub verdict: SumVerdict,
}

/// Adds up the credences of several (agent, proposition) questions under one
/// measure and reports whether the total is exactly 1. No judgement is made
/// about which measure is right.
pub fn credence_sum_check(
    p: &ValidatedProtocol,
    questions: &[(String, Proposition)],
    measure: Measure,
) -> Result<SumCheck, CredenceError> {
    if questions.is_empty() {
        return Err(CredenceError::EmptyQuestions);
    }
    let reports = questions
        .iter()
        .map(|(agent, prop)| credence(p, agent, prop, measure))
        .collect::<Result<Vec<_>, _>>()?;
    let sum: Rational = reports.iter().map(|r| &r.value).sum();
    let verdict = if sum.is_one() { SumVerdict::SumsToOne } else { SumVerdict::Deviates };
    Ok(SumCheck { measure, reports, sum, verdict })
}
