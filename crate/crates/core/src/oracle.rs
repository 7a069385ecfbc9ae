//! Independent references used to validate the learners and the simulator.
//!
//! - [`exact_guided_vi`]: the matrix recursion obtained by substituting a
//!   known linear plant into the Bellman identity with guided policies.
//! - [`finite_diff_gradient`]: central differences of a scalar field.
//! - [`linear_plant_closed_form`]: analytic response of the linear surrogate.
//! - [`train_on_linear_plant`]: runs the adaptive-critic learner on a linear
//!   plant so its weights can be compared with the exact recursion.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::learner::{extract_policy, CriticWeights, LearnerConfig, LearnerState};
use crate::plant::{PlantParams, PlantState};

/// Norm beyond which the recursion is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// `z' = A z + B u` with a scalar input.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPlant {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearPlant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidConfig("A must be square".into()));
        }
        ensure_dim(a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `A + B policy` for a policy row.
    pub fn closed_loop(&self, policy: &DVector<f64>) -> DMatrix<f64> {
        &self.a + &self.b * policy.transpose()
    }

    pub fn next(&self, z: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * z + &self.b * u
    }

    /// Spectral radius of `A + B policy`.
    pub fn closed_loop_radius(&self, policy: &DVector<f64>) -> f64 {
        self.closed_loop(policy)
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Value matrices `S(0..=iterations)` and the policies `-P S(t)` extracted
/// from each.
#[derive(Clone, Debug)]
pub struct GuidedViTrace {
    pub values: Vec<DMatrix<f64>>,
    pub policies: Vec<DVector<f64>>,
}

impl GuidedViTrace {
    pub fn last(&self) -> &DMatrix<f64> {
        self.values.last().expect("trace holds the initial matrix")
    }

    /// `0.5 z' S(t) z` for every iterate.
    pub fn probe_values(&self, z: &DVector<f64>) -> Vec<f64> {
        self.values.iter().map(|s| 0.5 * z.dot(&(s * z))).collect()
    }

    /// Frobenius norm of the last increment.
    pub fn last_increment(&self) -> f64 {
        match self.values.as_slice() {
            [.., a, b] => (b - a).norm(),
            _ => f64::INFINITY,
        }
    }
}

/// Iterates `S <- Q + pi' R pi + (A + B pi)' S (A + B pi)` with
/// `pi = -P S`, starting from `s0`. Stops early once the increment falls
/// below `tol` (pass `0.0` to run all iterations).
pub fn exact_guided_vi(
    plant: &LinearPlant,
    cfg: &LearnerConfig,
    s0: DMatrix<f64>,
    iterations: usize,
    tol: f64,
) -> Result<GuidedViTrace> {
    let d = plant.dim();
    ensure_dim(d, cfg.dim())?;
    ensure_dim(d, cfg.q.nrows())?;
    ensure_dim(d, s0.nrows())?;
    ensure_dim(d, s0.ncols())?;
    let mut values = vec![s0];
    let mut policies = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let s = values.last().unwrap();
        let policy = -(s.tr_mul(&cfg.guide));
        let acl = plant.closed_loop(&policy);
        let next = &cfg.q + &policy * policy.transpose() * cfg.r + acl.transpose() * s * &acl;
        let next = (&next + next.transpose()) * 0.5;
        let norm = next.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                iteration: t + 1,
                norm,
            });
        }
        let step = (&next - s).norm();
        policies.push(policy);
        values.push(next);
        if step < tol {
            break;
        }
    }
    let last = values.last().unwrap();
    policies.push(-(last.tr_mul(&cfg.guide)));
    Ok(GuidedViTrace { values, policies })
}

/// Residual of the stationary identity `S = Q + pi' R pi + Acl' S Acl`
/// with `pi = -P S`, as a max-abs entry.
pub fn bellman_residual(plant: &LinearPlant, cfg: &LearnerConfig, s: &DMatrix<f64>) -> f64 {
    let policy = -(s.tr_mul(&cfg.guide));
    let acl = plant.closed_loop(&policy);
    let rhs = &cfg.q + &policy * policy.transpose() * cfg.r + acl.transpose() * s * &acl;
    (rhs - s).amax()
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: f64) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        }),
    )
}

/// Finite-difference gradient of `f` over every entry of `m`, each entry
/// perturbed independently.
pub fn finite_diff_matrix_gradient<F>(f: F, m: &DMatrix<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DMatrix<f64>) -> f64,
{
    let (r, c) = m.shape();
    let flat = finite_diff_gradient(|x| f(&DMatrix::from_column_slice(r, c, x)), m.as_slice(), h);
    DMatrix::from_column_slice(r, c, flat.as_slice())
}

/// Largest entrywise relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Exact response of the linear-mode plant under a constant input,
/// underdamped case only.
pub fn linear_plant_closed_form(
    params: &PlantParams,
    state: PlantState,
    u: f64,
    disturbance: f64,
    t: f64,
) -> Result<PlantState> {
    let sigma = params.damping / (2.0 * params.inertia);
    let omega2 = params.stiffness / params.inertia;
    let wd2 = omega2 - sigma * sigma;
    if wd2.is_nan() || wd2 <= 0.0 {
        return Err(Error::InvalidConfig(
            "closed form needs an underdamped linear plant".into(),
        ));
    }
    let wd = wd2.sqrt();
    let forcing = (params.torque_gain * params.moment_arm * u + disturbance) / params.inertia;
    let x_eq = params.trim.to_radians() + forcing / omega2;
    let y0 = state.theta.to_radians() - x_eq;
    let v0 = state.theta_dot.to_radians();
    let decay = (-sigma * t).exp();
    let (s, c) = (wd * t).sin_cos();
    let k = (v0 + sigma * y0) / wd;
    let y = decay * (y0 * c + k * s);
    let v = decay * (-sigma * (y0 * c + k * s) + (-y0 * wd * s + k * wd * c));
    Ok(PlantState {
        theta: (x_eq + y).to_degrees(),
        theta_dot: v.to_degrees(),
    })
}

/// Runs the adaptive-critic learner on a linear plant: each episode starts
/// from a random state on the unit sphere and applies the actor's control
/// for `steps` transitions, updating critic and actor after each.
pub fn train_on_linear_plant(
    plant: &LinearPlant,
    cfg: &LearnerConfig,
    initial_critic: CriticWeights,
    episodes: usize,
    steps: usize,
    seed: u64,
) -> Result<LearnerState> {
    let d = plant.dim();
    ensure_dim(d, cfg.dim())?;
    let actor = crate::learner::ActorWeights::new(extract_policy(cfg, &initial_critic)?);
    let mut state = LearnerState::with_weights(cfg.clone(), initial_critic, actor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..episodes {
        let mut z = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let n = z.norm();
        if n > 0.0 {
            z /= n;
        }
        for _ in 0..steps {
            let u = state.control(z.as_slice())?;
            let next = plant.next(&z, u);
            state.learn(z.as_slice(), u, next.as_slice(), true, true)?;
            z = next;
        }
    }
    Ok(state)
}
