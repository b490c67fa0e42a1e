use thiserror::Error;

use crate::model::Channel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("composite `{name}` = {given} disagrees with layer-level value {expected}")]
    LayerMismatch {
        name: &'static str,
        given: f64,
        expected: f64,
    },
    #[error("delay rate bound d = {d} on channel {channel} must be < 1")]
    DelayRateTooLarge { channel: Channel, d: f64 },
    #[error("delay spec on channel {channel} violates its declared bounds: {reason}")]
    DelayBounds { channel: Channel, reason: String },
    #[error("damping spec on channel {channel} is invalid: {reason}")]
    Damping { channel: Channel, reason: String },
    #[error("no feasible Lyapunov weights found; binding constraint: {binding}")]
    Infeasible { binding: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 8 cells, got {0}")]
    TooCoarse(usize),
    #[error("domain length must be positive, got {0}")]
    BadLength(f64),
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("state dimension {got} does not match layout dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("delay history required for the delayed variant with nonzero feedback")]
    MissingHistory,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelayError {
    #[error("initial delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error("push at t = {t} is not after the last sample at {last}")]
    NonMonotoneTime { t: f64, last: f64 },
    #[error("lookup at s = {s} precedes the earliest retained sample {earliest}")]
    LookupBeforeHistory { s: f64, earliest: f64 },
    #[error("lookup at s = {s} is beyond the latest sample {latest}")]
    LookupAfterHistory { s: f64, latest: f64 },
    #[error("delayed argument stopped increasing on channel {channel}: {previous} then {current}")]
    NonMonotoneArgument {
        channel: Channel,
        previous: f64,
        current: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("time step {dt} exceeds the smallest delay lower bound {tau0}")]
    DelaySafety { dt: f64, tau0: f64 },
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("non-finite value detected at step {step}")]
    NonFinite { step: usize },
    #[error("variant mismatch: {0}")]
    Variant(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("non-positive energy {energy} at t = {t} inside the fit window")]
    NonPositiveEnergy { t: f64, energy: f64 },
    #[error("fit window [{start}, {end}] contains fewer than two usable samples")]
    EmptyWindow { start: f64, end: f64 },
    #[error("simulation output carries no dissipation ledger")]
    MissingLedger,
    #[error("analysis requires the stabilized-delayed variant")]
    WrongVariant,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HumError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("conjugate gradient did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("conjugate gradient stagnated at iteration {iteration} (residual {residual:e})")]
    Stagnation { iteration: usize, residual: f64 },
    #[error("non-finite value in conjugate gradient iterate {iteration}")]
    NonFinite { iteration: usize },
    #[error("terminal relative norm {achieved:e} exceeds tolerance {tol:e}")]
    Verification { achieved: f64, tol: f64 },
    #[error("HUM requires the controlled-conservative variant")]
    WrongVariant,
}
