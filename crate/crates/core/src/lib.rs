//! Sleeping-Beauty-style self-locating-belief experiments: protocol model,
//! exact credences under the per-experiment and per-awakening measures,
//! seeded Monte Carlo, betting and scoring, file formats and a CLI.

pub mod cli;
pub mod exact;
pub mod io;
pub mod monte_carlo;
pub mod protocol;
pub mod rational;
pub mod wager;

pub use exact::{
    credence, credence_sum_check, enumerate_awakenings, per_awakening_credence,
    per_experiment_credence, AwakeningEvent, CredenceError, CredenceReport, Measure, SumCheck,
    SumVerdict,
};
pub use monte_carlo::{
    estimate_credence, run_trials, run_trials_parallel, CredenceEstimate, SimulationError,
    SimulationResult,
};
pub use protocol::{
    preset, validate_protocol, AwakeningSchedule, ExperimentProtocol, OutcomeSpec, PresetError,
    PresetParams, Proposition, Question, ValidatedProtocol, ValidationError,
};
pub use rational::Rational;
pub use wager::{
    breakeven_probability, brier_minimizer, brier_score, evaluate_wager, WagerError, WagerOutcome,
    WagerSpec,
};
