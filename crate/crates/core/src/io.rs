//! Protocol documents and report tables.
//!
//! A protocol document is JSON with keys in this order:
//!
//! ```json
//! {
//!   "format": 1,
//!   "name": "original",
//!   "outcomes": [{ "label": "heads", "prob": "1/2" }, ...],
//!   "agents": ["SB"],
//!   "schedules": { "SB": { "heads": ["Mon"], "tails": ["Mon", "Tue"] } },
//!   "questions": [{ "agent": "SB", "proposition": ["heads"] }]
//! }
//! ```
//!
//! Probabilities are always strings `"p/q"` or `"p"`; decimal numbers are
//! rejected so no rounding can sneak in.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::exact::{CredenceReport, Measure};
use crate::monte_carlo::{CredenceEstimate, SimulationResult};
use crate::protocol::{
    validate_protocol, AwakeningSchedule, ExperimentProtocol, OutcomeSpec, Proposition, Question,
    ValidatedProtocol, ValidationError,
};
use crate::rational::{format_rational, parse_rational, to_decimal, RationalFormatError, DEFAULT_PRECISION};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDocument {
    #[serde(default = "default_format")]
    pub format: u64,
    pub name: String,
    pub outcomes: Vec<OutcomeEntry>,
    pub agents: Vec<String>,
    pub schedules: IndexMap<String, IndexMap<String, Vec<String>>>,
    #[serde(default)]
    pub questions: Vec<QuestionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeEntry {
    pub label: String,
    pub prob: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionEntry {
    pub agent: String,
    pub proposition: Vec<String>,
}

fn default_format() -> u64 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("SyntaxError at line {line}, column {column} (path {path}): {message}")]
    Syntax { line: usize, column: usize, path: String, message: String },
    #[error("RationalFormatError at {path}: {source}")]
    RationalFormat { path: String, source: RationalFormatError },
    #[error("SyntaxError at format: unsupported format version {0} (expected 1)")]
    UnsupportedFormat(u64),
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

/// Parses and validates a protocol document.
pub fn parse_protocol(text: &str) -> Result<ValidatedProtocol, ParseError> {
    let syntax = |path: String, e: serde_json::Error| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        path,
        message: e.to_string(),
    };
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ProtocolDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        syntax(path, e.into_inner())
    })?;
    de.end().map_err(|e| syntax(".".into(), e))?;
    let protocol = from_document(doc)?;
    Ok(validate_protocol(protocol)?)
}

/// Converts a document into an unvalidated protocol. Schedules follow the
/// agent list; schedules naming unknown agents trail in document order.
pub fn from_document(doc: ProtocolDocument) -> Result<ExperimentProtocol, ParseError> {
    if doc.format != FORMAT_VERSION {
        return Err(ParseError::UnsupportedFormat(doc.format));
    }
    let outcomes = doc
        .outcomes
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            let prob = parse_rational(&o.prob).map_err(|source| ParseError::RationalFormat {
                path: format!("outcomes[{i}].prob"),
                source,
            })?;
            Ok(OutcomeSpec::new(o.label, prob))
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    let mut raw: Vec<(String, IndexMap<String, Vec<String>>)> = doc.schedules.into_iter().collect();
    let rank = |agent: &str| doc.agents.iter().position(|a| a == agent).unwrap_or(usize::MAX);
    raw.sort_by_key(|(agent, _)| rank(agent));
    let schedules = raw
        .into_iter()
        .map(|(agent, per)| AwakeningSchedule {
            agent,
            per_outcome: per.into_iter().collect::<BTreeMap<_, _>>(),
        })
        .collect();

    let questions = doc
        .questions
        .into_iter()
        .map(|q| Question::new(q.agent, Proposition::new(q.proposition)))
        .collect();

    Ok(ExperimentProtocol { name: doc.name, outcomes, agents: doc.agents, schedules, questions })
}

/// Builds the canonical document: schedules in agent order, each schedule's
/// outcomes in protocol outcome order, propositions in outcome order.
pub fn to_document(p: &ExperimentProtocol) -> ProtocolDocument {
    let outcome_order: Vec<&str> = p.outcomes.iter().map(|o| o.label.as_str()).collect();
    let mut schedules: Vec<&AwakeningSchedule> = p.schedules.iter().collect();
    schedules.sort_by_key(|s| p.agents.iter().position(|a| *a == s.agent).unwrap_or(usize::MAX));
    let schedules = schedules
        .into_iter()
        .map(|s| {
            let mut per: Vec<(&String, &Vec<String>)> = s.per_outcome.iter().collect();
            per.sort_by_key(|(o, _)| {
                outcome_order.iter().position(|l| l == o).unwrap_or(usize::MAX)
            });
            let per = per.into_iter().map(|(o, d)| (o.clone(), d.clone())).collect();
            (s.agent.clone(), per)
        })
        .collect();
    ProtocolDocument {
        format: FORMAT_VERSION,
        name: p.name.clone(),
        outcomes: p
            .outcomes
            .iter()
            .map(|o| OutcomeEntry { label: o.label.clone(), prob: format_rational(&o.prob) })
            .collect(),
        agents: p.agents.clone(),
        schedules,
        questions: p
            .questions
            .iter()
            .map(|q| QuestionEntry {
                agent: q.agent.clone(),
                proposition: q
                    .proposition
                    .ordered_by(&p.outcomes)
                    .into_iter()
                    .map(str::to_string)
                    .collect(),
            })
            .collect(),
    }
}

/// Canonical text: fixed key order, reduced rationals, two-space indent,
/// trailing newline.
pub fn serialize_protocol(p: &ExperimentProtocol) -> String {
    let mut out = serde_json::to_string_pretty(&to_document(p)).expect("document serializes");
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    #[default]
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv, md or json)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
            ReportFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("EmptyReport: nothing to emit")]
    EmptyReport,
}

/// Columns only present for simulated estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateColumns {
    pub stderr: String,
    pub ci_lo: String,
    pub ci_hi: String,
    pub n_effective: u64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub protocol: String,
    pub agent: String,
    pub proposition: String,
    pub measure: Measure,
    pub value_exact: String,
    pub value_decimal: String,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateColumns>,
}

fn fixed(x: f64) -> String {
    format!("{:.*}", DEFAULT_PRECISION, x)
}

impl ReportRow {
    pub fn exact(protocol: &str, r: &CredenceReport) -> Self {
        ReportRow {
            protocol: protocol.to_string(),
            agent: r.agent.clone(),
            proposition: r.proposition.to_string(),
            measure: r.measure,
            value_exact: format_rational(&r.value),
            value_decimal: r.decimal.clone(),
            estimate: None,
        }
    }

    /// `value_exact` is the observed frequency `hits/n_effective`.
    pub fn estimate(result: &SimulationResult, e: &CredenceEstimate) -> Self {
        ReportRow {
            protocol: result.protocol.clone(),
            agent: e.agent.clone(),
            proposition: e.proposition.clone(),
            measure: e.measure,
            value_exact: format_rational(&e.exact_ratio()),
            value_decimal: to_decimal(&e.exact_ratio(), DEFAULT_PRECISION),
            estimate: Some(EstimateColumns {
                stderr: fixed(e.stderr),
                ci_lo: fixed(e.ci95.0),
                ci_hi: fixed(e.ci95.1),
                n_effective: e.n_effective,
                trials: result.trials,
                seed: result.seed,
            }),
        }
    }

    fn cells(&self) -> Vec<String> {
        let mut cells = vec![
            self.protocol.clone(),
            self.agent.clone(),
            self.proposition.clone(),
            self.measure.to_string(),
            self.value_exact.clone(),
            self.value_decimal.clone(),
        ];
        if let Some(e) = &self.estimate {
            cells.extend([
                e.stderr.clone(),
                e.ci_lo.clone(),
                e.ci_hi.clone(),
                e.n_effective.to_string(),
                e.trials.to_string(),
                e.seed.to_string(),
            ]);
        }
        cells
    }
}

const BASE_COLUMNS: [&str; 6] =
    ["protocol", "agent", "proposition", "measure", "value_exact", "value_decimal"];
const ESTIMATE_COLUMNS: [&str; 6] = ["stderr", "ci_lo", "ci_hi", "n_effective", "trials", "seed"];

/// Renders credence rows. Estimate columns appear when any row carries them;
/// exact rows leave those cells empty.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    if format == ReportFormat::Json {
        let mut out = serde_json::to_string_pretty(rows).expect("rows serialize");
        out.push('\n');
        return Ok(out);
    }
    let with_estimates = rows.iter().any(|r| r.estimate.is_some());
    let mut columns: Vec<&str> = BASE_COLUMNS.to_vec();
    if with_estimates {
        columns.extend(ESTIMATE_COLUMNS);
    }
    let mut table = Table::new(columns);
    for r in rows {
        let mut cells = r.cells();
        cells.resize(table.columns.len(), String::new());
        table.push(cells);
    }
    table.render(format)
}

/// A plain string table, used for everything the CLI prints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::EmptyReport);
        }
        Ok(match format {
            ReportFormat::Csv => self.csv(),
            ReportFormat::Markdown => self.markdown(),
            ReportFormat::Json => self.json(),
        })
    }

    fn csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    fn markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let line = |cells: &[String]| {
            let inner: Vec<String> = cells.iter().map(|c| esc(c)).collect();
            format!("| {} |\n", inner.join(" | "))
        };
        let mut out = line(&self.columns);
        out.push_str(&format!("|{}\n", "---|".repeat(self.columns.len())));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    fn json(&self) -> String {
        let rows: Vec<IndexMap<&str, &str>> = self
            .rows
            .iter()
            .map(|r| self.columns.iter().map(String::as_str).zip(r.iter().map(String::as_str)).collect())
            .collect();
        let mut out = serde_json::to_string_pretty(&rows).expect("rows serialize");
        out.push('\n');
        out
    }
}
