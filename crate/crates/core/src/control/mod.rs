//! The intermittent controller.
//!
//! A one-input Mamdani fuzzy system turns the distance `d` between the COP
//! and the identified curve into an activation level `y`. While `y` stays
//! at or below the activation threshold the controller is silent and the
//! PID state is held at rest; above it a parallel PID acting on `d`
//! produces the stimulation intensity.

mod fuzzy;
mod intermittent;
mod pid;
mod tuning;

use thiserror::Error;

use crate::phase::PhaseError;

pub use fuzzy::{fuzzy_evaluate, FuzzyConfig, MembershipFn, Rule, OUTPUT_GRID};
pub use intermittent::{gate_step, intermittent_step, ControllerLimits, ControllerState, IntermittentController};
pub use pid::{pid_step, PidGains, PidState};
pub use tuning::{
    analyze_oscillation, tune_ziegler_nichols, AllPolePlant, ErrorTrace, Oscillation, TuningResult,
    SUSTAINED_BAND, ZN_CYCLES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("no fuzzy rule fires for d = {0}")]
    NoRuleFires(f64),
    #[error("invalid fuzzy configuration: {0}")]
    InvalidFuzzyConfig(String),
    #[error("invalid PID gains: {0}")]
    InvalidGains(String),
    #[error("distance must be a non-negative number, got {0}")]
    InvalidDistance(f64),
    #[error("no gain in [{lo}, {hi}] sustains oscillation")]
    NoUltimateGain { lo: f64, hi: f64 },
    #[error("horizon too short: only {cycles} oscillation cycles at kp = {kp}")]
    NoDecayMeasurement { kp: f64, cycles: usize },
    #[error("invalid tuning setup: {0}")]
    InvalidTuning(String),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}
