//! Identification of an unknown reaction law `Π` in
//! `u̇ − ∇·(a∇u) + bu + Π(u) = φ` from full or terminal-time observations,
//! by standard and sequential bi-level Landweber iteration.
//!
//! The upper level runs Landweber on the reaction curve; each of its steps
//! needs a state, which the lower level approximates by a Landweber
//! iteration on the PDE residual instead of solving the PDE. In sequential
//! mode each lower run starts from the previous lower output.

pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod grid;
pub mod harness;
pub mod lower;
pub mod ops;
pub mod reaction;
pub mod stopping;
pub mod upper;

pub use diagnostics::DiagnosticReport;
pub use error::{Error, Result};
pub use forward::{Observation, ObservationData, ObservationMode, PdeProblem, ResidualPair};
pub use grid::{SpaceGrid, SpaceTimeField, SpatialField, TimeGrid};
pub use harness::{parse_config, run_experiment, run_sweep, ExperimentConfig, RunSummary};
pub use lower::{LowerMetric, LowerSettings, LowerSolver, LowerState, StepPolicy};
pub use reaction::{BuiltinReaction, RangeGrid, ReactionCurve, SobolevRiesz, SobolevSpec};
pub use stopping::StoppingRule;
pub use upper::{
    InversionConfig, InversionMode, InversionResult, RunLog, RunRecord, Truth, UpperStop,
};
