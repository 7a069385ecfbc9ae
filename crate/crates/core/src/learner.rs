//! Linear actor / quadratic critic learners for the guided value-iteration
//! scheme.
//!
//! Each learner holds a symmetric critic matrix `omega_c` approximating the
//! value `V(z) = 0.5 z' omega_c z`, and an actor row `omega_a` producing the
//! control `u = omega_a . z`. The guide row `P` turns the critic into a target
//! policy `-P omega_c`, so that the target control `-P omega_c z` equals
//! `-P dV/dz`.
//!
//! Both updates are semi-gradient steps: the Bellman target and the actor
//! target are held constant while differentiating the squared errors.

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Scale of the identity used to seed the critic.
pub const INITIAL_CRITIC_SCALE: f64 = 1e-3;

/// Weighting, guide and step-size parameters of one learner.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    /// Feature weight, symmetric positive definite, `d x d`.
    pub q: DMatrix<f64>,
    /// Control weight.
    pub r: f64,
    /// Guide row `P`, length `d`.
    pub guide: DVector<f64>,
    pub alpha_critic: f64,
    pub alpha_actor: f64,
}

impl LearnerConfig {
    pub fn new(
        q: DMatrix<f64>,
        r: f64,
        guide: DVector<f64>,
        alpha_critic: f64,
        alpha_actor: f64,
    ) -> Result<Self> {
        let cfg = Self {
            q,
            r,
            guide,
            alpha_critic,
            alpha_actor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Tracking learner over `[e, e_prev, e_v, e_v_prev, e_s, e_s_prev]`.
    pub fn tracking_default() -> Self {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![
            25e-4, 25e-4, 0.25e-4, 0.25e-4, 25e-4, 25e-4,
        ]));
        let guide = DVector::from_vec(vec![200.0, 50.0, 10.0, 5.0, 10.0, 5.0]);
        Self::new(q, 1e-7, guide, 0.01, 0.01).expect("default tracking config is valid")
    }

    /// Stabilizing learner over `[theta, theta_v, theta_a]`.
    pub fn stabilizing_default() -> Self {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![25e-6, 25e-6, 0.0025e-6]));
        let guide = DVector::from_vec(vec![10.0, 10.0, 5.0]);
        Self::new(q, 10.0, guide, 0.01, 0.05).expect("default stabilizing config is valid")
    }

    pub fn dim(&self) -> usize {
        self.guide.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.guide.len();
        if d == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be positive".into(),
            ));
        }
        if self.q.nrows() != d || self.q.ncols() != d {
            return Err(Error::InvalidConfig(format!(
                "Q must be {d}x{d}, got {}x{}",
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        if self
            .q
            .iter()
            .chain(self.guide.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig("Q and P must be finite".into()));
        }
        let scale = self.q.amax().max(f64::MIN_POSITIVE);
        if (&self.q - self.q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidConfig("Q must be symmetric".into()));
        }
        let min_eig = self.q.clone().symmetric_eigenvalues().min();
        if min_eig.is_nan() || min_eig <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "Q must be positive definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "R must be positive, got {}",
                self.r
            )));
        }
        for (name, a) in [("critic", self.alpha_critic), ("actor", self.alpha_actor)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} learning rate must lie in (0, 1), got {a}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric critic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticWeights {
    pub omega: DMatrix<f64>,
}

impl CriticWeights {
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        if !omega.is_square() {
            return Err(Error::InvalidConfig(format!(
                "critic matrix must be square, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        Ok(Self { omega })
    }

    pub fn scaled_identity(d: usize, scale: f64) -> Self {
        Self {
            omega: DMatrix::identity(d, d) * scale,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            omega: DMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// Largest `|omega - omega'|` entry.
    pub fn asymmetry(&self) -> f64 {
        (&self.omega - self.omega.transpose()).amax()
    }

    /// Smallest eigenvalue of the symmetric part; reported, never enforced.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.omega + self.omega.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().all(|v| v.is_finite())
    }
}

/// Actor row.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorWeights {
    pub omega: DVector<f64>,
}

impl ActorWeights {
    pub fn new(omega: DVector<f64>) -> Self {
        Self { omega }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            omega: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().all(|v| v.is_finite())
    }
}

/// Configuration plus the current weights of one learner.
#[derive(Clone, Debug)]
pub struct LearnerState {
    pub config: LearnerConfig,
    pub critic: CriticWeights,
    pub actor: ActorWeights,
    /// Most recent value metric.
    pub last_value: f64,
}

impl LearnerState {
    /// Critic at `1e-3 I`, actor at the matching guided policy.
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        let critic = CriticWeights::scaled_identity(config.dim(), INITIAL_CRITIC_SCALE);
        let actor = ActorWeights::new(extract_policy(&config, &critic)?);
        Ok(Self {
            config,
            critic,
            actor,
            last_value: 0.0,
        })
    }

    pub fn with_weights(
        config: LearnerConfig,
        critic: CriticWeights,
        actor: ActorWeights,
    ) -> Result<Self> {
        config.validate()?;
        ensure_dim(config.dim(), critic.dim())?;
        ensure_dim(config.dim(), actor.dim())?;
        Ok(Self {
            config,
            critic,
            actor,
            last_value: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn control(&self, z: &[f64]) -> Result<f64> {
        control_signal(&self.actor, z)
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        value(&self.critic, z)
    }

    /// Records `V(z)` as the latest value metric.
    pub fn value_metric(&mut self, z: &[f64]) -> Result<f64> {
        let v = value(&self.critic, z)?;
        self.last_value = v;
        Ok(v)
    }

    /// One critic step followed by one actor step on the transition
    /// `(z_now, u_now) -> z_next`. The actor target uses the freshly updated
    /// critic. Returns the Frobenius norm of the critic change.
    pub fn learn(
        &mut self,
        z_now: &[f64],
        u_now: f64,
        z_next: &[f64],
        update_critic: bool,
        update_actor: bool,
    ) -> Result<f64> {
        let mut step = 0.0;
        if update_critic {
            let critic = critic_update(self, z_now, u_now, z_next)?;
            step = (&critic.omega - &self.critic.omega).norm();
            self.critic = critic;
        }
        if update_actor {
            self.actor = actor_update(self, z_now)?;
        }
        Ok(step)
    }
}

fn as_vector(expected: usize, z: &[f64]) -> Result<DVector<f64>> {
    ensure_dim(expected, z.len())?;
    Ok(DVector::from_column_slice(z))
}

/// `0.5 (z' Q z + R u^2)`.
pub fn stage_cost(cfg: &LearnerConfig, z: &[f64], u: f64) -> Result<f64> {
    let z = as_vector(cfg.dim(), z)?;
    Ok(0.5 * (z.dot(&(&cfg.q * &z)) + cfg.r * u * u))
}

/// `0.5 z' omega_c z`.
pub fn value(critic: &CriticWeights, z: &[f64]) -> Result<f64> {
    let z = as_vector(critic.dim(), z)?;
    Ok(0.5 * z.dot(&(&critic.omega * &z)))
}

/// Guided policy row `-P omega_c`.
pub fn extract_policy(cfg: &LearnerConfig, critic: &CriticWeights) -> Result<DVector<f64>> {
    ensure_dim(cfg.dim(), critic.dim())?;
    Ok(-(critic.omega.tr_mul(&cfg.guide)))
}

/// `omega_a . z`.
pub fn control_signal(actor: &ActorWeights, z: &[f64]) -> Result<f64> {
    let z = as_vector(actor.dim(), z)?;
    Ok(actor.omega.dot(&z))
}

/// Stage cost at `(z_now, u_now)` plus the critic's value of `z_next`.
pub fn bellman_target(
    cfg: &LearnerConfig,
    critic: &CriticWeights,
    z_now: &[f64],
    u_now: f64,
    z_next: &[f64],
) -> Result<f64> {
    ensure_dim(cfg.dim(), critic.dim())?;
    Ok(stage_cost(cfg, z_now, u_now)? + value(critic, z_next)?)
}

/// Squared critic error `0.5 (V(z) - target)^2` for a fixed target.
pub fn critic_loss(critic: &CriticWeights, z: &[f64], target: f64) -> Result<f64> {
    let d = value(critic, z)? - target;
    Ok(0.5 * d * d)
}

/// Elementwise derivative of [`critic_loss`] with the target held fixed:
/// `0.5 (V - target) z z'`.
pub fn critic_loss_gradient(
    critic: &CriticWeights,
    z: &[f64],
    target: f64,
) -> Result<DMatrix<f64>> {
    let zv = as_vector(critic.dim(), z)?;
    let td = value(critic, z)? - target;
    Ok(&zv * zv.transpose() * (0.5 * td))
}

/// Critic descent direction `(V - target) z z'`.
///
/// This is twice [`critic_loss_gradient`]: the factor 2 from the quadratic
/// form is folded into the critic step size.
pub fn critic_step_direction(
    critic: &CriticWeights,
    z: &[f64],
    target: f64,
) -> Result<DMatrix<f64>> {
    let zv = as_vector(critic.dim(), z)?;
    let td = value(critic, z)? - target;
    Ok(&zv * zv.transpose() * td)
}

/// `omega_c - alpha_c (V(z_now) - target) z_now z_now'`, re-symmetrized.
pub fn critic_update(
    state: &LearnerState,
    z_now: &[f64],
    u_now: f64,
    z_next: &[f64],
) -> Result<CriticWeights> {
    let cfg = &state.config;
    ensure_finite("control", u_now)?;
    let target = bellman_target(cfg, &state.critic, z_now, u_now, z_next)?;
    let td = value(&state.critic, z_now)? - target;
    ensure_finite("temporal-difference error", td)?;
    let zv = DVector::from_column_slice(z_now);
    let mut omega = &state.critic.omega - (&zv * zv.transpose()) * (cfg.alpha_critic * td);
    let sym = (&omega + omega.transpose()) * 0.5;
    omega.copy_from(&sym);
    if let Some(bad) = omega.iter().copied().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "critic weight",
            value: bad,
        });
    }
    Ok(CriticWeights { omega })
}

/// Actor target `-P omega_c z` under the current critic.
pub fn actor_target(cfg: &LearnerConfig, critic: &CriticWeights, z: &[f64]) -> Result<f64> {
    let policy = extract_policy(cfg, critic)?;
    let z = as_vector(cfg.dim(), z)?;
    Ok(policy.dot(&z))
}

/// Squared actor error `0.5 (omega_a . z - target)^2` for a fixed target.
pub fn actor_loss(actor: &ActorWeights, z: &[f64], target: f64) -> Result<f64> {
    let d = control_signal(actor, z)? - target;
    Ok(0.5 * d * d)
}

/// `(omega_a . z - target) z'`.
pub fn actor_loss_gradient(actor: &ActorWeights, z: &[f64], target: f64) -> Result<DVector<f64>> {
    let err = control_signal(actor, z)? - target;
    Ok(DVector::from_column_slice(z) * err)
}

/// `omega_a - alpha_a (omega_a z + P omega_c z) z'`.
pub fn actor_update(state: &LearnerState, z_now: &[f64]) -> Result<ActorWeights> {
    let target = actor_target(&state.config, &state.critic, z_now)?;
    let grad = actor_loss_gradient(&state.actor, z_now, target)?;
    let omega = &state.actor.omega - grad * state.config.alpha_actor;
    if omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "actor weight",
            value: omega
                .iter()
                .copied()
                .find(|v| !v.is_finite())
                .unwrap_or(f64::NAN),
        });
    }
    Ok(ActorWeights { omega })
}
