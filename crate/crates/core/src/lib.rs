//! Guided value-iteration pitch control with adaptive critics.
//!
//! Two learners run side by side: a tracking learner over a six-component
//! error feature vector and a stabilizing learner over pitch attitude, rate
//! and acceleration. Each keeps a quadratic critic and a linear actor, both
//! adapted online by gradient descent on Bellman and guided-policy targets.
//! Their controls are summed and saturated into one normalized winch command.
//!
//! The crate also carries a surrogate wing-pitch plant with a noisy attitude
//! sensor, reference oracles for testing, and a scenario harness.

pub mod checks;
pub mod controller;
pub mod error;
pub mod learner;
pub mod oracle;
pub mod plant;
pub mod scenario;
pub mod signals;
pub mod snapshot;
pub mod telemetry;

pub use controller::{
    combine, CombinedControl, Controller, ControllerConfig, ControllerMode, StepRecord,
};
pub use error::{Error, Result};
pub use learner::{ActorWeights, CriticWeights, LearnerConfig, LearnerState};
pub use scenario::{run_scenario, run_with_snapshot, RunSummary, ScenarioKind, ScenarioSpec};
pub use snapshot::WeightSnapshot;
