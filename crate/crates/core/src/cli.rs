//! Command-line surface. [`run`] is the whole program minus process I/O so it
//! can be driven from tests.
//!
//! Exit codes: 0 success, 1 domain error (the message names the failing
//! operation), 2 usage error.

use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::exact::{credence, credence_sum_check, Measure};
use crate::io::{emit_report, parse_protocol, serialize_protocol, ReportFormat, ReportRow, Table};
use crate::monte_carlo::{estimate_credence, run_trials_parallel};
use crate::protocol::{
    preset, validate_protocol, PresetParams, Proposition, Question, ValidatedProtocol, PRESET_NAMES,
};
use crate::rational::{format_rational, parse_rational, to_decimal, Rational, DEFAULT_PRECISION};
use crate::wager::{
    breakeven_probability, brier_minimizer, brier_score, evaluate_wager, WagerError, WagerSpec,
};

#[derive(Debug, Parser)]
#[command(name = "sleeping-beauty", version, about = "Exact, simulated and betting credences for Sleeping-Beauty-style experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in protocols.
    Presets {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print a protocol (canonical document with --format json).
    Show {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact credences under both measures.
    Credence {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long)]
        measure: Option<Measure>,
        /// Fractional digits in value_decimal.
        #[arg(long, default_value_t = DEFAULT_PRECISION)]
        precision: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Seeded Monte Carlo estimates of the credences.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long)]
        measure: Option<Measure>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
        workers: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Expected value of a standing bet at implied probability q.
    Wager {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long, value_parser = rational_arg)]
        q: Rational,
        #[arg(long, default_value = "1", value_parser = rational_arg)]
        stake: Rational,
        /// Settle per_awakening or per_experiment; both when omitted.
        #[arg(long)]
        settlement: Option<Measure>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Expected Brier score of a constant forecast.
    Score {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long, value_parser = rational_arg)]
        report: Rational,
        #[arg(long)]
        measure: Option<Measure>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sum the protocol's questions' credences and check the total against 1.
    SumCheck {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        measure: Option<Measure>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Built-in protocol: original, double or chain.
    #[arg(long, conflicts_with = "protocol")]
    preset: Option<String>,
    /// Chain length for --preset chain.
    #[arg(long)]
    k: Option<u64>,
    /// Heads probability for a preset, as p/q.
    #[arg(long = "heads-prob", value_parser = rational_arg)]
    heads_prob: Option<Rational>,
    /// Protocol document (JSON).
    #[arg(long)]
    protocol: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    agent: Option<String>,
    /// Comma-separated outcome labels.
    #[arg(long)]
    prop: Option<String>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Usage(String),
    Domain { operation: &'static str, message: String },
}

fn usage(msg: impl Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn domain(operation: &'static str) -> impl Fn(&dyn Display) -> Failure {
    move |e| Failure::Domain { operation, message: e.to_string() }
}

pub fn run<I, T>(args: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Invocation { code: 2, stdout: String::new(), stderr: text }
            } else {
                Invocation { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    let mut stderr = String::new();
    match execute(cli.command, &mut stderr) {
        Ok((text, out)) => match out {
            Some(path) => match std::fs::write(&path, &text) {
                Ok(()) => Invocation { code: 0, stdout: String::new(), stderr },
                Err(e) => Invocation {
                    code: 1,
                    stdout: String::new(),
                    stderr: format!("{stderr}error: cannot write {}: {e}\n", path.display()),
                },
            },
            None => Invocation { code: 0, stdout: text, stderr },
        },
        Err(Failure::Usage(msg)) => Invocation {
            code: 2,
            stdout: String::new(),
            stderr: format!("{stderr}error: {msg}\n"),
        },
        Err(Failure::Domain { operation, message }) => Invocation {
            code: 1,
            stdout: String::new(),
            stderr: format!("{stderr}error in {operation}: {message}\n"),
        },
    }
}

fn load(source: &SourceArgs, stderr: &mut String) -> Result<ValidatedProtocol, Failure> {
    let protocol = match (&source.preset, &source.protocol) {
        (Some(name), None) => {
            let params = PresetParams { k: source.k, heads_prob: source.heads_prob.clone() };
            let raw = preset(name, &params).map_err(usage)?;
            validate_protocol(raw).map_err(usage)?
        }
        (None, Some(path)) => {
            if source.k.is_some() || source.heads_prob.is_some() {
                return Err(usage("--k and --heads-prob only apply to --preset"));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            parse_protocol(&text).map_err(|e| domain("parse_protocol")(&e))?
        }
        (None, None) => return Err(usage("one of --preset or --protocol is required")),
        (Some(_), Some(_)) => return Err(usage("--preset and --protocol are mutually exclusive")),
    };
    for w in protocol.warnings() {
        stderr.push_str(&format!("warning: {w}\n"));
    }
    Ok(protocol)
}

/// Questions to answer: the protocol's own, or those narrowed by
/// `--agent`/`--prop`.
fn select(p: &ValidatedProtocol, sel: &SelectArgs) -> Result<Vec<Question>, Failure> {
    if let Some(agent) = &sel.agent {
        if !p.has_agent(agent) {
            return Err(usage(format!("unknown agent {agent:?}")));
        }
    }
    let prop = match &sel.prop {
        Some(text) => {
            let prop = Proposition::from_csv(text);
            if prop.is_empty() {
                return Err(usage("--prop needs at least one outcome label"));
            }
            if let Some(l) = prop.iter().find(|l| p.outcome(l).is_none()) {
                return Err(usage(format!("unknown outcome {l:?} in --prop")));
            }
            Some(prop)
        }
        None => None,
    };
    let questions: Vec<Question> = match (&sel.agent, prop) {
        (Some(agent), Some(prop)) => vec![Question::new(agent.clone(), prop)],
        (None, Some(prop)) => match p.agents.as_slice() {
            [only] => vec![Question::new(only.clone(), prop)],
            _ => return Err(usage("--prop needs --agent when the protocol has several agents")),
        },
        (Some(agent), None) => p.questions.iter().filter(|q| q.agent == *agent).cloned().collect(),
        (None, None) => p.questions.clone(),
    };
    if questions.is_empty() {
        return Err(usage("no questions selected; pass --agent and --prop"));
    }
    Ok(questions)
}

fn measures(m: Option<Measure>) -> Vec<Measure> {
    match m {
        Some(m) => vec![m],
        None => vec![Measure::PerAwakening, Measure::PerExperiment],
    }
}

type Emitted = (String, Option<PathBuf>);

fn render(table: Table, output: OutputArgs) -> Result<Emitted, Failure> {
    let text = table.render(output.format).map_err(|e| domain("emit_report")(&e))?;
    Ok((text, output.out))
}

fn execute(command: Command, stderr: &mut String) -> Result<Emitted, Failure> {
    match command {
        Command::Presets { output } => {
            let mut t = Table::new(["name", "params", "description"]);
            for name in PRESET_NAMES {
                let (params, description) = match name {
                    "original" => ("[--heads-prob p/q]", "SB woken Mon on heads, Mon+Tue on tails; asked about heads"),
                    "double" => ("[--heads-prob p/q]", "SB1 and SB2 with mirrored schedules; SB1 asked about heads, SB2 about tails"),
                    _ => ("--k K [--heads-prob p/q]", "SB woken day1 on heads, day1..dayK on tails; asked about heads"),
                };
                t.push(vec![name.into(), params.into(), description.into()]);
            }
            render(t, output)
        }
        Command::Show { source, output } => {
            let p = load(&source, stderr)?;
            if output.format == ReportFormat::Json {
                return Ok((serialize_protocol(&p), output.out));
            }
            let mut t = Table::new(["agent", "outcome", "prob", "interviews", "days"]);
            for agent in &p.agents {
                let s = p.schedule(agent).expect("validated");
                for o in &p.outcomes {
                    t.push(vec![
                        agent.clone(),
                        o.label.clone(),
                        format_rational(&o.prob),
                        s.count(&o.label).to_string(),
                        s.days(&o.label).join(" "),
                    ]);
                }
            }
            render(t, output)
        }
        Command::Credence { source, select: sel, measure, precision, output } => {
            let p = load(&source, stderr)?;
            let questions = select(&p, &sel)?;
            let mut rows = Vec::new();
            for q in &questions {
                for m in measures(measure) {
                    let r = credence(&p, &q.agent, &q.proposition, m)
                        .map_err(|e| domain(operation_name(m))(&e))?
                        .with_precision(precision);
                    rows.push(ReportRow::exact(&p.name, &r));
                }
            }
            let text = emit_report(&rows, output.format).map_err(|e| domain("emit_report")(&e))?;
            Ok((text, output.out))
        }
        Command::Simulate { source, select: sel, measure, trials, seed, workers, output } => {
            let p = load(&source, stderr)?;
            let questions = select(&p, &sel)?;
            let result = run_trials_parallel(&p, trials, seed, workers as usize)
                .map_err(|e| domain("run_trials")(&e))?;
            let mut rows = Vec::new();
            for q in &questions {
                for m in measures(measure) {
                    let e = estimate_credence(&result, &p, &q.agent, &q.proposition, m)
                        .map_err(|e| domain("estimate_credence")(&e))?;
                    rows.push(ReportRow::estimate(&result, &e));
                }
            }
            let text = emit_report(&rows, output.format).map_err(|e| domain("emit_report")(&e))?;
            Ok((text, output.out))
        }
        Command::Wager { source, select: sel, q, stake, settlement, output } => {
            let p = load(&source, stderr)?;
            let questions = select(&p, &sel)?;
            let mut t = Table::new([
                "protocol",
                "agent",
                "proposition",
                "settlement",
                "q",
                "stake",
                "ev_per_experiment",
                "ev_per_settlement",
                "breakeven",
                "breakeven_q",
            ]);
            for question in &questions {
                for s in measures(settlement) {
                    let spec = WagerSpec {
                        agent: question.agent.clone(),
                        proposition: question.proposition.clone(),
                        stake: stake.clone(),
                        implied_probability: q.clone(),
                        settlement: s,
                    };
                    let out = evaluate_wager(&p, &spec).map_err(|e| wager_failure("evaluate_wager", e))?;
                    let breakeven_q =
                        match breakeven_probability(&p, &question.agent, &question.proposition, s) {
                            Ok(b) => format_rational(&b),
                            Err(WagerError::DegenerateProposition(_)) => "none".into(),
                            Err(e) => return Err(domain("breakeven_probability")(&e)),
                        };
                    t.push(vec![
                        p.name.clone(),
                        question.agent.clone(),
                        question.proposition.to_string(),
                        s.to_string(),
                        format_rational(&q),
                        format_rational(&stake),
                        format_rational(&out.expected_value_per_experiment),
                        format_rational(&out.expected_value_per_settlement),
                        out.breakeven.to_string(),
                        breakeven_q,
                    ]);
                }
            }
            render(t, output)
        }
        Command::Score { source, select: sel, report, measure, output } => {
            let p = load(&source, stderr)?;
            let questions = select(&p, &sel)?;
            let mut t = Table::new([
                "protocol",
                "agent",
                "proposition",
                "measure",
                "report",
                "brier_exact",
                "brier_decimal",
                "minimizer",
                "minimum_brier",
            ]);
            for question in &questions {
                for m in measures(measure) {
                    let score = brier_score(&p, &question.agent, &question.proposition, &report, m)
                        .map_err(|e| wager_failure("brier_score", e))?;
                    let best = brier_minimizer(&p, &question.agent, &question.proposition, m)
                        .map_err(|e| wager_failure("brier_minimizer", e))?;
                    let floor = brier_score(&p, &question.agent, &question.proposition, &best, m)
                        .map_err(|e| wager_failure("brier_score", e))?;
                    t.push(vec![
                        p.name.clone(),
                        question.agent.clone(),
                        question.proposition.to_string(),
                        m.to_string(),
                        format_rational(&report),
                        format_rational(&score),
                        to_decimal(&score, DEFAULT_PRECISION),
                        format_rational(&best),
                        format_rational(&floor),
                    ]);
                }
            }
            render(t, output)
        }
        Command::SumCheck { source, measure, output } => {
            let p = load(&source, stderr)?;
            let questions: Vec<(String, Proposition)> =
                p.questions.iter().map(|q| (q.agent.clone(), q.proposition.clone())).collect();
            if questions.is_empty() {
                return Err(usage("protocol has no questions to sum"));
            }
            let mut t = Table::new(["protocol", "measure", "questions", "sum_exact", "sum_decimal", "verdict"]);
            for m in measures(measure) {
                let check = credence_sum_check(&p, &questions, m)
                    .map_err(|e| domain("credence_sum_check")(&e))?;
                let listed: Vec<String> =
                    questions.iter().map(|(a, prop)| format!("{a}:{prop}")).collect();
                t.push(vec![
                    p.name.clone(),
                    m.to_string(),
                    listed.join(" "),
                    format_rational(&check.sum),
                    to_decimal(&check.sum, DEFAULT_PRECISION),
                    check.verdict.to_string(),
                ]);
            }
            render(t, output)
        }
    }
}

fn operation_name(m: Measure) -> &'static str {
    match m {
        Measure::PerExperiment => "per_experiment_credence",
        Measure::PerAwakening => "per_awakening_credence",
    }
}

fn wager_failure(operation: &'static str, e: WagerError) -> Failure {
    match e {
        WagerError::InvalidWager(_) | WagerError::InvalidReport(_) => usage(e),
        other => domain(operation)(&other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &str) -> Invocation {
        run(std::iter::once("sleeping-beauty").chain(args.split_whitespace()))
    }

    #[test]
    fn credence_original() {
        let out = call("credence --preset original --format csv");
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert!(out.stdout.contains("original,SB,{heads},per_awakening,1/3,0.333333"));
        assert!(out.stdout.contains("original,SB,{heads},per_experiment,1/2,0.500000"));
    }

    #[test]
    fn sum_check_double() {
        let out = call("sum-check --preset double --measure per_awakening --format csv");
        assert_eq!(out.code, 0);
        assert_eq!(out.stdout.lines().nth(1).unwrap(), "double,per_awakening,SB1:{heads} SB2:{tails},2/3,0.666667,deviates");
    }

    #[test]
    fn chain_zero_is_usage_error() {
        let out = call("simulate --preset chain --k 0 --trials 10 --seed 1");
        assert_eq!(out.code, 2);
        assert!(out.stderr.contains("InvalidParam"));
        assert!(out.stdout.is_empty());
    }

    #[test]
    fn seed_is_mandatory() {
        let out = call("simulate --preset original --trials 10");
        assert_eq!(out.code, 2);
        assert!(out.stderr.contains("--seed"));
    }

    #[test]
    fn usage_errors() {
        for args in [
            "credence",
            "credence --preset original --protocol x.json",
            "credence --preset nope",
            "credence --preset original --measure thirder",
            "credence --preset double --prop heads",
            "credence --preset original --agent SB3",
            "credence --preset original --prop edge",
            "wager --preset original --q 0.5",
            "wager --preset original --q 3/2",
            "score --preset original --report 2",
            "simulate --preset original --seed 1 --workers 0",
            "frobnicate",
        ] {
            assert_eq!(call(args).code, 2, "{args}");
        }
    }

    #[test]
    fn domain_error_names_operation() {
        let dir = std::env::temp_dir().join(format!("sb-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sleeper.json");
        let mut doc = crate::io::to_document(&preset("original", &PresetParams::default()).unwrap());
        doc.schedules["SB"].values_mut().for_each(Vec::clear);
        let text = serde_json::to_string(&doc).unwrap();
        std::fs::write(&path, text).unwrap();
        let out = call(&format!("credence --protocol {} --measure per_awakening", path.display()));
        assert_eq!(out.code, 1, "{}", out.stderr);
        assert!(out.stderr.contains("per_awakening_credence"));
        assert!(out.stderr.contains("NoAwakenings"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn wager_and_score_tables() {
        let out = call("wager --preset original --q 1/2 --format csv");
        assert_eq!(out.code, 0, "{}", out.stderr);
        let lines: Vec<&str> = out.stdout.lines().collect();
        assert_eq!(lines[1], "original,SB,{heads},per_awakening,1/2,1,-1/2,-1/3,false,1/3");
        assert_eq!(lines[2], "original,SB,{heads},per_experiment,1/2,1,0,0,true,1/2");

        let out = call("score --preset original --report 1/3 --measure per_awakening --format csv");
        assert_eq!(out.stdout.lines().nth(1).unwrap(), "original,SB,{heads},per_awakening,1/3,2/9,0.222222,1/3,2/9");
    }

    #[test]
    fn show_json_is_canonical_document() {
        let out = call("show --preset double --format json");
        assert_eq!(out.stdout, serialize_protocol(&preset("double", &PresetParams::default()).unwrap()));
        let md = call("show --preset chain --k 3");
        assert!(md.stdout.contains("| SB | tails | 1/2 | 3 | day1 day2 day3 |"));
    }

    #[test]
    fn help_exits_zero() {
        let out = call("--help");
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("sum-check"));
    }

    #[test]
    fn zero_probability_warning_goes_to_stderr() {
        let out = call("credence --preset original --heads-prob 0 --measure per_experiment");
        assert_eq!(out.code, 0);
        assert!(out.stderr.contains("warning"));
    }
}
