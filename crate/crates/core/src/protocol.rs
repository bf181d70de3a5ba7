//! Experiment protocols: outcomes, agents, awakening schedules, and the
//! questions put to each agent at interview time.
//!
//! Only interviews are modeled. An awakening without an interview (the
//! closing Wednesday of the classic setup) carries no credence event and is
//! therefore not representable in a schedule.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{format_rational, ratio, Rational};

/// A set of outcome labels whose credence is asked about.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Proposition(BTreeSet<String>);

impl Proposition {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Proposition(labels.into_iter().map(Into::into).collect())
    }

    /// Parses the comma-separated command-line form, e.g. `heads,tails`.
    pub fn from_csv(text: &str) -> Self {
        Proposition::new(text.split(',').map(str::trim).filter(|s| !s.is_empty()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.contains(label)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn is_subset(&self, other: &Proposition) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Labels in the order the protocol lists its outcomes; unknown labels
    /// trail in sorted order.
    pub fn ordered_by<'a>(&'a self, outcomes: &'a [OutcomeSpec]) -> Vec<&'a str> {
        let mut out: Vec<&str> = outcomes
            .iter()
            .map(|o| o.label.as_str())
            .filter(|l| self.contains(l))
            .collect();
        out.extend(
            self.iter()
                .filter(|l| !outcomes.iter().any(|o| o.label == *l)),
        );
        out
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, label) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{label}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpec {
    pub label: String,
    pub prob: Rational,
}

impl OutcomeSpec {
    pub fn new(label: impl Into<String>, prob: Rational) -> Self {
        OutcomeSpec { label: label.into(), prob }
    }
}

/// Interview days for one agent under each outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AwakeningSchedule {
    pub agent: String,
    pub per_outcome: BTreeMap<String, Vec<String>>,
}

impl AwakeningSchedule {
    pub fn new(agent: impl Into<String>) -> Self {
        AwakeningSchedule { agent: agent.into(), per_outcome: BTreeMap::new() }
    }

    pub fn with<I, S>(mut self, outcome: &str, days: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.per_outcome
            .insert(outcome.to_string(), days.into_iter().map(Into::into).collect());
        self
    }

    pub fn days(&self, outcome: &str) -> &[String] {
        self.per_outcome.get(outcome).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of interviews under `outcome`.
    pub fn count(&self, outcome: &str) -> usize {
        self.days(outcome).len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub agent: String,
    pub proposition: Proposition,
}

impl Question {
    pub fn new(agent: impl Into<String>, proposition: Proposition) -> Self {
        Question { agent: agent.into(), proposition }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentProtocol {
    pub name: String,
    pub outcomes: Vec<OutcomeSpec>,
    pub agents: Vec<String>,
    pub schedules: Vec<AwakeningSchedule>,
    pub questions: Vec<Question>,
}

impl ExperimentProtocol {
    pub fn outcome(&self, label: &str) -> Option<&OutcomeSpec> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    pub fn has_agent(&self, agent: &str) -> bool {
        self.agents.iter().any(|a| a == agent)
    }

    pub fn schedule(&self, agent: &str) -> Option<&AwakeningSchedule> {
        self.schedules.iter().find(|s| s.agent == agent)
    }

    /// The proposition containing every outcome.
    pub fn all_outcomes(&self) -> Proposition {
        Proposition::new(self.outcomes.iter().map(|o| o.label.clone()))
    }

    /// Outcomes not in `prop`.
    pub fn complement(&self, prop: &Proposition) -> Proposition {
        Proposition::new(
            self.outcomes
                .iter()
                .filter(|o| !prop.contains(&o.label))
                .map(|o| o.label.clone()),
        )
    }
}

/// One reason a protocol failed validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("protocol has no outcomes")]
    NoOutcomes,
    #[error("protocol has no agents")]
    NoAgents,
    #[error("outcome probabilities sum to {0}, expected exactly 1")]
    ProbabilitySum(String),
    #[error("probability of outcome {label:?} is {prob}, outside [0, 1]")]
    ProbabilityOutOfRange { label: String, prob: String },
    #[error("duplicate {kind} {label:?}")]
    DuplicateLabel { kind: &'static str, label: String },
    #[error("{context} references unknown {kind} {name:?}")]
    DanglingReference { context: String, kind: &'static str, name: String },
    #[error("agent {0:?} has no schedule")]
    MissingSchedule(String),
    #[error("schedule of agent {agent:?} has no entry for outcome {outcome:?}")]
    MissingOutcomeEntry { agent: String, outcome: String },
    #[error("question {index} for agent {agent:?} has an empty proposition")]
    EmptyProposition { index: usize, agent: String },
}

impl Violation {
    /// Error class name used in reports and CLI messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::NoOutcomes | Violation::NoAgents => "EmptyProtocol",
            Violation::ProbabilitySum(_) | Violation::ProbabilityOutOfRange { .. } => {
                "ProbabilitySumError"
            }
            Violation::DuplicateLabel { .. } => "DuplicateLabel",
            Violation::DanglingReference { .. }
            | Violation::MissingSchedule(_)
            | Violation::MissingOutcomeEntry { .. } => "DanglingReference",
            Violation::EmptyProposition { .. } => "EmptyProposition",
        }
    }
}

/// Every violation found in a protocol, in discovery order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn has_kind(&self, kind: &str) -> bool {
        self.violations.iter().any(|v| v.kind() == kind)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid protocol ({} violation", self.violations.len())?;
        if self.violations.len() != 1 {
            write!(f, "s")?;
        }
        write!(f, ")")?;
        for v in &self.violations {
            write!(f, "; {}: {}", v.kind(), v)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    ZeroProbabilityOutcome(String),
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ZeroProbabilityOutcome(l) => write!(f, "outcome {l:?} has probability 0"),
        }
    }
}

/// A protocol that has passed [`validate_protocol`]. Immutable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedProtocol {
    inner: ExperimentProtocol,
    warnings: Vec<Warning>,
}

impl ValidatedProtocol {
    pub fn protocol(&self) -> &ExperimentProtocol {
        &self.inner
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn into_inner(self) -> ExperimentProtocol {
        self.inner
    }
}

impl std::ops::Deref for ValidatedProtocol {
    type Target = ExperimentProtocol;

    fn deref(&self) -> &ExperimentProtocol {
        &self.inner
    }
}

fn duplicates<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    let mut dup = Vec::new();
    for l in labels {
        if !seen.insert(l) && !dup.contains(&l) {
            dup.push(l);
        }
    }
    dup
}

/// Checks every protocol invariant and reports all violations at once.
///
/// On success the schedules are reordered to follow the agent list, so two
/// protocols that differ only in schedule order validate to equal values.
pub fn validate_protocol(mut p: ExperimentProtocol) -> Result<ValidatedProtocol, ValidationError> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    if p.outcomes.is_empty() {
        violations.push(Violation::NoOutcomes);
    }
    if p.agents.is_empty() {
        violations.push(Violation::NoAgents);
    }

    for label in duplicates(p.outcomes.iter().map(|o| o.label.as_str())) {
        violations.push(Violation::DuplicateLabel { kind: "outcome", label: label.to_string() });
    }
    for label in duplicates(p.agents.iter().map(String::as_str)) {
        violations.push(Violation::DuplicateLabel { kind: "agent", label: label.to_string() });
    }

    let mut total = Rational::zero();
    for o in &p.outcomes {
        if o.prob.is_negative() || o.prob > Rational::one() {
            violations.push(Violation::ProbabilityOutOfRange {
                label: o.label.clone(),
                prob: format_rational(&o.prob),
            });
        } else if o.prob.is_zero() {
            warnings.push(Warning::ZeroProbabilityOutcome(o.label.clone()));
        }
        total += &o.prob;
    }
    if !p.outcomes.is_empty() && !total.is_one() {
        violations.push(Violation::ProbabilitySum(format_rational(&total)));
    }

    let outcome_known = |l: &str| p.outcomes.iter().any(|o| o.label == l);

    for label in duplicates(p.schedules.iter().map(|s| s.agent.as_str())) {
        violations.push(Violation::DuplicateLabel { kind: "schedule for agent", label: label.to_string() });
    }
    for s in &p.schedules {
        if !p.has_agent(&s.agent) {
            violations.push(Violation::DanglingReference {
                context: "schedule".into(),
                kind: "agent",
                name: s.agent.clone(),
            });
        }
        for (outcome, days) in &s.per_outcome {
            if !outcome_known(outcome) {
                violations.push(Violation::DanglingReference {
                    context: format!("schedule of agent {:?}", s.agent),
                    kind: "outcome",
                    name: outcome.clone(),
                });
            }
            for day in duplicates(days.iter().map(String::as_str)) {
                violations.push(Violation::DuplicateLabel {
                    kind: "day",
                    label: format!("{day} (agent {:?}, outcome {outcome:?})", s.agent),
                });
            }
        }
        for o in &p.outcomes {
            if !s.per_outcome.contains_key(&o.label) {
                violations.push(Violation::MissingOutcomeEntry {
                    agent: s.agent.clone(),
                    outcome: o.label.clone(),
                });
            }
        }
    }
    for a in &p.agents {
        if p.schedule(a).is_none() {
            violations.push(Violation::MissingSchedule(a.clone()));
        }
    }

    for (i, q) in p.questions.iter().enumerate() {
        if !p.has_agent(&q.agent) {
            violations.push(Violation::DanglingReference {
                context: format!("question {i}"),
                kind: "agent",
                name: q.agent.clone(),
            });
        }
        if q.proposition.is_empty() {
            violations.push(Violation::EmptyProposition { index: i, agent: q.agent.clone() });
        }
        for l in q.proposition.iter() {
            if !outcome_known(l) {
                violations.push(Violation::DanglingReference {
                    context: format!("question {i}"),
                    kind: "outcome",
                    name: l.to_string(),
                });
            }
        }
    }

    if violations.is_empty() {
        let agents = p.agents.clone();
        p.schedules
            .sort_by_key(|s| agents.iter().position(|a| *a == s.agent));
        Ok(ValidatedProtocol { inner: p, warnings })
    } else {
        Err(ValidationError { violations })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PresetError {
    #[error("UnknownPreset: {0:?} (expected one of original, double, chain)")]
    UnknownPreset(String),
    #[error("InvalidParam: {0}")]
    InvalidParam(String),
}

pub const PRESET_NAMES: [&str; 3] = ["original", "double", "chain"];

/// Optional preset parameters.
#[derive(Debug, Clone, Default)]
pub struct PresetParams {
    /// Chain length; only meaningful for `chain`.
    pub k: Option<u64>,
    /// Probability of heads; defaults to 1/2.
    pub heads_prob: Option<Rational>,
}

impl PresetParams {
    pub fn chain(k: u64) -> Self {
        PresetParams { k: Some(k), heads_prob: None }
    }
}

fn coin(heads: Rational) -> Vec<OutcomeSpec> {
    let tails = Rational::one() - &heads;
    vec![OutcomeSpec::new("heads", heads), OutcomeSpec::new("tails", tails)]
}

/// Builds one of the built-in protocols.
///
/// * `original`: one agent `SB`; heads wakes her on `Mon`, tails on `Mon`
///   and `Tue`; she is asked about `{heads}`.
/// * `double`: agents `SB1` and `SB2` with mirrored schedules; SB1 is asked
///   about `{heads}`, SB2 about `{tails}`.
/// * `chain` (requires `k >= 1`): agent `SB`; heads wakes her on `day1`,
///   tails on `day1..dayk`.
pub fn preset(name: &str, params: &PresetParams) -> Result<ExperimentProtocol, PresetError> {
    if !PRESET_NAMES.contains(&name) {
        return Err(PresetError::UnknownPreset(name.to_string()));
    }
    let heads = params.heads_prob.clone().unwrap_or_else(|| ratio(1, 2));
    if heads.is_negative() || heads > Rational::one() {
        return Err(PresetError::InvalidParam(format!(
            "heads probability {} is outside [0, 1]",
            format_rational(&heads)
        )));
    }
    if params.k.is_some() && name != "chain" {
        return Err(PresetError::InvalidParam(format!("preset {name} does not take k")));
    }

    let protocol = match name {
        "original" => ExperimentProtocol {
            name: "original".into(),
            outcomes: coin(heads),
            agents: vec!["SB".into()],
            schedules: vec![AwakeningSchedule::new("SB")
                .with("heads", ["Mon"])
                .with("tails", ["Mon", "Tue"])],
            questions: vec![Question::new("SB", Proposition::new(["heads"]))],
        },
        "double" => ExperimentProtocol {
            name: "double".into(),
            outcomes: coin(heads),
            agents: vec!["SB1".into(), "SB2".into()],
            schedules: vec![
                AwakeningSchedule::new("SB1")
                    .with("heads", ["Mon"])
                    .with("tails", ["Mon", "Tue"]),
                AwakeningSchedule::new("SB2")
                    .with("heads", ["Mon", "Tue"])
                    .with("tails", ["Mon"]),
            ],
            questions: vec![
                Question::new("SB1", Proposition::new(["heads"])),
                Question::new("SB2", Proposition::new(["tails"])),
            ],
        },
        _ => {
            let k = match params.k {
                None => return Err(PresetError::InvalidParam("chain requires k".into())),
                Some(0) => {
                    return Err(PresetError::InvalidParam(
                        "chain requires k >= 1, got 0".into(),
                    ))
                }
                Some(k) => k,
            };
            ExperimentProtocol {
                name: format!("chain{k}"),
                outcomes: coin(heads),
                agents: vec!["SB".into()],
                schedules: vec![AwakeningSchedule::new("SB")
                    .with("heads", ["day1"])
                    .with("tails", (1..=k).map(|d| format!("day{d}")))],
                questions: vec![Question::new("SB", Proposition::new(["heads"]))],
            }
        }
    };
    Ok(protocol)
}
