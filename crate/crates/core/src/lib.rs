//! Numerical laboratory for the three-layer Rao-Nakra sandwich beam under
//! delayed boundary feedback and under boundary control.

pub mod analysis;
pub mod delay;
pub mod error;
pub mod grid;
pub mod hum;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod study;

pub use delay::{Histories, Interp, TraceHistory};
pub use error::{AnalysisError, DelayError, GridError, HumError, ModelError, SimError};
pub use grid::{build_system, discrete_energy, hspace_norm, DiscreteState, DofLayout, Grid1D, SemiDiscreteSystem, Variant};
pub use integrate::{simulate, simulate_controlled, simulate_delayed, Controls, Dynamics, HistoryPreset, SchemeConfig, SimOutput, StepLedger};
pub use model::{
    check_hypotheses, decay_bound, is_negative_definite, phi_matrix, select_mus, validate_gains, BoundaryQuadForm, Channel,
    ChannelDamping, ChannelDelay, DampingFn, DampingSpec, DelayFn, DelaySpec, GainConfig, HypothesisReport, LayerInputs,
    PhysicalParams, TheoreticalRates,
};
pub use presets::InitialPreset;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
