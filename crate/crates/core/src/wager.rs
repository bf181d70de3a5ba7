//! Credences as bets and forecasts.
//!
//! A standing bet on a proposition can be settled once per experiment or at
//! every interview. The two settlement schemes reward different constant
//! credences: the fair price of a per-interview bet is the per-awakening
//! credence, the fair price of a once-per-experiment bet is the
//! per-experiment credence. The same split shows up for the quadratic
//! (Brier) score depending on which measure weights the forecast events.
//!
//! This is one operationalization of "reward attached to an outcome"; the
//! engine computes both schemes and does not rank them.

use num_traits::{One, Signed, Zero};

use crate::exact::{awakening_mass, check_agent, check_proposition, CredenceError, Measure};
use crate::protocol::{ExperimentProtocol, Proposition, ValidatedProtocol};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WagerError {
    #[error(transparent)]
    Credence(#[from] CredenceError),
    #[error("InvalidWager: {0}")]
    InvalidWager(String),
    #[error("DegenerateProposition: credence is {0}, so no interior breakeven probability exists")]
    DegenerateProposition(String),
    #[error("InvalidReport: forecast {0} is outside [0, 1]")]
    InvalidReport(String),
}

/// How often a standing bet pays out. Shares its variants with [`Measure`].
pub type Settlement = Measure;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WagerSpec {
    pub agent: String,
    pub proposition: Proposition,
    /// Amount lost per settlement when the proposition is false.
    pub stake: Rational,
    /// Odds as an implied probability `q`: a true proposition pays
    /// `stake·(1−q)/q`.
    pub implied_probability: Rational,
    pub settlement: Settlement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WagerOutcome {
    pub expected_value_per_experiment: Rational,
    /// Per-experiment EV divided by the expected number of settlements per
    /// experiment.
    pub expected_value_per_settlement: Rational,
    pub breakeven: bool,
}

/// Probability-weighted event masses `(w_o)` for the agent under a
/// settlement scheme or scoring measure, in protocol outcome order.
fn event_weights<'a>(
    p: &'a ExperimentProtocol,
    agent: &str,
    measure: Measure,
) -> Vec<(&'a str, Rational)> {
    let schedule = p.schedule(agent).expect("agent checked by caller");
    p.outcomes
        .iter()
        .map(|o| {
            let w = match measure {
                Measure::PerExperiment => o.prob.clone(),
                Measure::PerAwakening => {
                    &o.prob * Rational::from_integer(schedule.count(&o.label).into())
                }
            };
            (o.label.as_str(), w)
        })
        .collect()
}

fn require_awakenings(p: &ExperimentProtocol, agent: &str) -> Result<(), CredenceError> {
    let (_, total) = awakening_mass(p, agent, &Proposition::default());
    if total.is_zero() {
        Err(CredenceError::NoAwakenings(agent.to_string()))
    } else {
        Ok(())
    }
}

fn check_wager(p: &ExperimentProtocol, w: &WagerSpec) -> Result<(), WagerError> {
    check_agent(p, &w.agent)?;
    check_proposition(p, &w.proposition)?;
    let q = &w.implied_probability;
    if !q.is_positive() || *q >= Rational::one() {
        return Err(WagerError::InvalidWager(format!(
            "implied probability {} must lie strictly between 0 and 1",
            format_rational(q)
        )));
    }
    if !w.stake.is_positive() {
        return Err(WagerError::InvalidWager(format!(
            "stake {} must be positive",
            format_rational(&w.stake)
        )));
    }
    require_awakenings(p, &w.agent)?;
    Ok(())
}

/// Exact expected value of a standing bet, by enumerating outcomes.
pub fn evaluate_wager(p: &ValidatedProtocol, w: &WagerSpec) -> Result<WagerOutcome, WagerError> {
    check_wager(p, w)?;
    let q = &w.implied_probability;
    let win = &w.stake * (Rational::one() - q) / q;
    let lose = -w.stake.clone();

    let weights = event_weights(p, &w.agent, w.settlement);
    let mut ev = Rational::zero();
    let mut settlements = Rational::zero();
    for (label, weight) in &weights {
        let payoff = if w.proposition.contains(label) { &win } else { &lose };
        ev += weight * payoff;
        settlements += weight;
    }
    let per_settlement = &ev / &settlements;
    Ok(WagerOutcome {
        breakeven: ev.is_zero(),
        expected_value_per_experiment: ev,
        expected_value_per_settlement: per_settlement,
    })
}

/// The implied probability at which the bet's expected value is zero.
///
/// Setting `Σ_{o∈P} w_o·s(1−q)/q = Σ_{o∉P} w_o·s` gives
/// `q = W_in / (W_in + W_out)`.
pub fn breakeven_probability(
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
    settlement: Settlement,
) -> Result<Rational, WagerError> {
    check_agent(p, agent)?;
    check_proposition(p, proposition)?;
    require_awakenings(p, agent)?;
    let (mut w_in, mut w_out) = (Rational::zero(), Rational::zero());
    for (label, weight) in event_weights(p, agent, settlement) {
        if proposition.contains(label) {
            w_in += weight;
        } else {
            w_out += weight;
        }
    }
    if w_in.is_zero() {
        return Err(WagerError::DegenerateProposition("0".into()));
    }
    if w_out.is_zero() {
        return Err(WagerError::DegenerateProposition("1".into()));
    }
    Ok(&w_in / (&w_in + &w_out))
}

fn normalized_weights<'a>(
    p: &'a ExperimentProtocol,
    agent: &str,
    measure: Measure,
) -> Result<Vec<(&'a str, Rational)>, CredenceError> {
    if measure == Measure::PerAwakening {
        require_awakenings(p, agent)?;
    }
    let weights = event_weights(p, agent, measure);
    let total: Rational = weights.iter().map(|(_, w)| w).sum();
    Ok(weights.into_iter().map(|(l, w)| (l, w / &total)).collect())
}

/// Expected quadratic loss of a constant forecast `report` for the
/// proposition, with events weighted by `measure`.
pub fn brier_score(
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
    report: &Rational,
    measure: Measure,
) -> Result<Rational, WagerError> {
    check_agent(p, agent)?;
    check_proposition(p, proposition)?;
    if report.is_negative() || *report > Rational::one() {
        return Err(WagerError::InvalidReport(format_rational(report)));
    }
    let weights = normalized_weights(p, agent, measure)?;
    Ok(weights
        .into_iter()
        .map(|(label, w)| {
            let hit = if proposition.contains(label) { Rational::one() } else { Rational::zero() };
            let err = hit - report;
            w * &err * &err
        })
        .sum())
}

/// The constant forecast with the lowest expected Brier score: the
/// measure-weighted mean of the proposition's indicator.
pub fn brier_minimizer(
    p: &ValidatedProtocol,
    agent: &str,
    proposition: &Proposition,
    measure: Measure,
) -> Result<Rational, WagerError> {
    check_agent(p, agent)?;
    check_proposition(p, proposition)?;
    let weights = normalized_weights(p, agent, measure)?;
    Ok(weights
        .into_iter()
        .filter(|(label, _)| proposition.contains(label))
        .map(|(_, w)| w)
        .sum())
}
