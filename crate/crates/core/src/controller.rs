//! Online value-iteration loop coupling the tracking and stabilizing learners.
//!
//! Each call to [`Controller::step`] consumes one filtered attitude sample.
//! The new sample completes the transition started on the previous call, so
//! both learners are updated first (critic, then actor) and the fresh actors
//! then produce the controls for the current sample. Time and policy indices
//! advance together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, LearnerState};
use crate::signals::{
    AttitudeHistory, ErrorHistory, ErrorVector, PitchState, ReferenceSignal, DEFAULT_SAMPLE_PERIOD,
    DEFAULT_WINDOW,
};
use crate::snapshot::WeightSnapshot;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Critics and actors both adapt.
    #[default]
    Learning,
    /// Actors are frozen; critics keep adapting.
    ActorOnlyFrozen,
    /// No weight changes.
    FullyFrozen,
}

impl ControllerMode {
    pub fn updates_critic(self) -> bool {
        !matches!(self, ControllerMode::FullyFrozen)
    }

    pub fn updates_actor(self) -> bool {
        matches!(self, ControllerMode::Learning)
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learning" => Ok(Self::Learning),
            "actor-frozen" | "actor_only_frozen" => Ok(Self::ActorOnlyFrozen),
            "frozen" | "fully_frozen" => Ok(Self::FullyFrozen),
            other => Err(Error::InvalidConfig(format!(
                "unknown controller mode `{other}`"
            ))),
        }
    }
}

/// Tracking and stabilizing controls and their saturated sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CombinedControl {
    pub u_e: f64,
    pub u_x: f64,
    /// `clamp(u_e + u_x, -1, 1)`.
    pub u_f: f64,
}

pub fn combine(u_e: f64, u_x: f64) -> CombinedControl {
    CombinedControl {
        u_e,
        u_x,
        u_f: (u_e + u_x).clamp(-1.0, 1.0),
    }
}

/// Pull-only winch forces; at most one side pulls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WinchForces {
    pub fore: f64,
    pub aft: f64,
}

impl WinchForces {
    pub fn from_control(u_f: f64) -> Self {
        Self {
            fore: u_f.max(0.0),
            aft: (-u_f).max(0.0),
        }
    }
}

/// One control step of telemetry.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub theta_ref: f64,
    pub theta_meas: f64,
    pub error: ErrorVector,
    pub pitch: PitchState,
    pub control: CombinedControl,
    pub winch: WinchForces,
    pub value_tracking: f64,
    pub value_stabilizing: f64,
    /// Frobenius norms of this step's critic changes.
    pub critic_step_tracking: f64,
    pub critic_step_stabilizing: f64,
    pub fault: bool,
    pub snapshot: Option<WeightSnapshot>,
}

#[derive(Clone, Debug)]
pub struct ControllerConfig {
    pub tracking: LearnerConfig,
    pub stabilizing: LearnerConfig,
    pub reference: ReferenceSignal,
    pub sample_period: f64,
    pub window: usize,
    /// Attach a weight snapshot to every n-th record.
    pub snapshot_every: Option<usize>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            tracking: LearnerConfig::tracking_default(),
            stabilizing: LearnerConfig::stabilizing_default(),
            reference: ReferenceSignal::nominal(),
            sample_period: DEFAULT_SAMPLE_PERIOD,
            window: DEFAULT_WINDOW,
            snapshot_every: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PendingTransition {
    error: [f64; 6],
    u_e: f64,
    pitch: [f64; 3],
    u_x: f64,
}

#[derive(Clone, Debug)]
pub struct Controller {
    tracking: LearnerState,
    stabilizing: LearnerState,
    reference: ReferenceSignal,
    errors: ErrorHistory,
    attitude: AttitudeHistory,
    sample_period: f64,
    snapshot_every: Option<usize>,
    mode: ControllerMode,
    pending: Option<PendingTransition>,
    last_control: CombinedControl,
    steps: u64,
    faults: u64,
}

impl Controller {
    /// Fresh learners seeded at the critic/actor fixed point.
    pub fn new(config: ControllerConfig) -> Result<Self> {
        let tracking = LearnerState::new(config.tracking.clone())?;
        let stabilizing = LearnerState::new(config.stabilizing.clone())?;
        Self::with_learners(config, tracking, stabilizing)
    }

    /// Learners initialized from a stored snapshot.
    pub fn from_snapshot(config: ControllerConfig, snapshot: &WeightSnapshot) -> Result<Self> {
        let tracking = LearnerState::with_weights(
            config.tracking.clone(),
            snapshot.tracking_critic.clone(),
            snapshot.tracking_actor.clone(),
        )?;
        let stabilizing = LearnerState::with_weights(
            config.stabilizing.clone(),
            snapshot.stabilizing_critic.clone(),
            snapshot.stabilizing_actor.clone(),
        )?;
        Self::with_learners(config, tracking, stabilizing)
    }

    fn with_learners(
        config: ControllerConfig,
        tracking: LearnerState,
        stabilizing: LearnerState,
    ) -> Result<Self> {
        if tracking.dim() != ErrorVector::DIM {
            return Err(Error::DimensionMismatch {
                expected: ErrorVector::DIM,
                got: tracking.dim(),
            });
        }
        if stabilizing.dim() != PitchState::DIM {
            return Err(Error::DimensionMismatch {
                expected: PitchState::DIM,
                got: stabilizing.dim(),
            });
        }
        config.reference.validate()?;
        if config.snapshot_every == Some(0) {
            return Err(Error::InvalidConfig(
                "snapshot interval must be positive".into(),
            ));
        }
        Ok(Self {
            errors: ErrorHistory::new(config.sample_period, config.window)?,
            attitude: AttitudeHistory::new(),
            reference: config.reference,
            sample_period: config.sample_period,
            snapshot_every: config.snapshot_every,
            tracking,
            stabilizing,
            mode: ControllerMode::Learning,
            pending: None,
            last_control: CombinedControl::default(),
            steps: 0,
            faults: 0,
        })
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: ControllerMode) {
        self.mode = mode;
    }

    pub fn tracking(&self) -> &LearnerState {
        &self.tracking
    }

    pub fn stabilizing(&self) -> &LearnerState {
        &self.stabilizing
    }

    pub fn faults(&self) -> u64 {
        self.faults
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Time of the next step in seconds.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.sample_period
    }

    pub fn snapshot(&self) -> WeightSnapshot {
        WeightSnapshot {
            tracking_critic: self.tracking.critic.clone(),
            tracking_actor: self.tracking.actor.clone(),
            stabilizing_critic: self.stabilizing.critic.clone(),
            stabilizing_actor: self.stabilizing.actor.clone(),
        }
    }

    /// Runs one loop iteration on a filtered attitude sample (degrees).
    pub fn step(&mut self, theta_meas: f64) -> Result<(CombinedControl, StepRecord)> {
        let time = self.time();
        let theta_ref = self.reference.at(time);
        self.steps += 1;

        if !theta_meas.is_finite() {
            // Hold the last command and drop the transition that spans the fault.
            self.faults += 1;
            self.pending = None;
            let control = self.last_control;
            let record = StepRecord {
                time,
                theta_ref,
                theta_meas,
                error: self.errors.error_vector(),
                pitch: self.attitude.pitch_state(self.sample_period)?,
                control,
                winch: WinchForces::from_control(control.u_f),
                value_tracking: self.tracking.last_value,
                value_stabilizing: self.stabilizing.last_value,
                critic_step_tracking: 0.0,
                critic_step_stabilizing: 0.0,
                fault: true,
                snapshot: None,
            };
            return Ok((control, record));
        }

        self.errors.push_at(time, theta_meas - theta_ref)?;
        self.attitude.push(theta_meas)?;
        let error = self.errors.error_vector();
        let pitch = self.attitude.pitch_state(self.sample_period)?;
        let e = error.to_array();
        let x = pitch.to_array();

        let (mut step_e, mut step_x) = (0.0, 0.0);
        if let Some(prev) = self.pending.take() {
            let (critic, actor) = (self.mode.updates_critic(), self.mode.updates_actor());
            step_e = self
                .tracking
                .learn(&prev.error, prev.u_e, &e, critic, actor)?;
            step_x = self
                .stabilizing
                .learn(&prev.pitch, prev.u_x, &x, critic, actor)?;
        }

        let control = combine(self.tracking.control(&e)?, self.stabilizing.control(&x)?);
        let value_tracking = self.tracking.value_metric(&e)?;
        let value_stabilizing = self.stabilizing.value_metric(&x)?;
        self.pending = Some(PendingTransition {
            error: e,
            u_e: control.u_e,
            pitch: x,
            u_x: control.u_x,
        });
        self.last_control = control;

        let snapshot = self
            .snapshot_every
            .filter(|n| (self.steps - 1).is_multiple_of(*n as u64))
            .map(|_| self.snapshot());

        let record = StepRecord {
            time,
            theta_ref,
            theta_meas,
            error,
            pitch,
            control,
            winch: WinchForces::from_control(control.u_f),
            value_tracking,
            value_stabilizing,
            critic_step_tracking: step_e,
            critic_step_stabilizing: step_x,
            fault: false,
            snapshot,
        };
        Ok((control, record))
    }
}

/// Thresholds for the advisory convergence flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct ConvergenceCriteria {
    /// Samples in the trailing window.
    pub window: usize,
    /// Mean absolute tracking error bound, degrees.
    pub error_tol: f64,
    /// Bound on the per-step critic change norm of either learner.
    pub weight_step_tol: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self {
            window: 200,
            error_tol: 1.0,
            weight_step_tol: 1e-3,
        }
    }
}

/// True when the trailing window's mean absolute error is below
/// `error_tol` and every critic step in it is below `weight_step_tol`.
pub fn convergence_check(
    abs_errors: &[f64],
    critic_steps: &[f64],
    criteria: &ConvergenceCriteria,
) -> bool {
    let w = criteria.window.max(2);
    if abs_errors.len() < w || critic_steps.len() < w {
        return false;
    }
    let tail = &abs_errors[abs_errors.len() - w..];
    let mean = tail.iter().map(|e| e.abs()).sum::<f64>() / w as f64;
    let steps_ok = critic_steps[critic_steps.len() - w..]
        .iter()
        .all(|s| s.is_finite() && *s < criteria.weight_step_tol);
    mean.is_finite() && mean < criteria.error_tol && steps_ok
}
