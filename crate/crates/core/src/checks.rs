//! Self-contained invariant suite behind the `check` command.
//!
//! Every check is deterministic (fixed seeds) and cheap enough to run on each
//! invocation. The returned reports carry the measured quantity next to the
//! bound it was held to.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::learner::{
    actor_loss, actor_loss_gradient, actor_update, critic_loss, critic_loss_gradient,
    critic_step_direction, critic_update, extract_policy, ActorWeights, CriticWeights,
    LearnerConfig, LearnerState,
};
use crate::oracle::{
    bellman_residual, exact_guided_vi, finite_diff_gradient, finite_diff_matrix_gradient,
    max_relative_error, train_on_linear_plant, LinearPlant,
};
use crate::plant::{advance, PlantParams, PlantState};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub const GRADIENT_POINTS: usize = 100;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const MONOTONE_SLACK: f64 = 1e-9;
pub const VI_STEP_TOL: f64 = 1e-8;
pub const VI_MAX_ITERATIONS: usize = 10_000;
pub const ORACLE_TOL: f64 = 0.05;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const MIN_RK4_ORDER: f64 = 3.5;

/// The stabilizable two-state plant shared by the value-iteration checks.
pub fn reference_plant() -> LinearPlant {
    LinearPlant::new(
        DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
        DVector::from_vec(vec![0.0, 0.1]),
    )
    .expect("reference plant is well formed")
}

pub fn reference_config() -> LearnerConfig {
    LearnerConfig::new(
        DMatrix::identity(2, 2) * 0.1,
        1.0,
        DVector::from_vec(vec![0.15, 0.3]),
        0.05,
        0.1,
    )
    .expect("reference learner config is valid")
}

pub fn reference_probe() -> DVector<f64> {
    DVector::from_vec(vec![1.0, -0.5])
}

fn random_critic(rng: &mut ChaCha8Rng, d: usize) -> CriticWeights {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    CriticWeights::new((&m + m.transpose()) * 0.5).expect("symmetric by construction")
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Analytic critic and actor loss gradients against central differences at
/// random weights, features and targets.
pub fn gradient_check(points: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst_critic: f64 = 0.0;
    let mut worst_actor: f64 = 0.0;
    let mut worst_direction: f64 = 0.0;
    for _ in 0..points {
        let d = rng.random_range(1..=6);
        let z = random_vec(&mut rng, d, 2.0);
        let target = rng.random_range(-1.0..1.0);

        let critic = random_critic(&mut rng, d);
        let analytic = critic_loss_gradient(&critic, &z, target)?;
        let numeric = finite_diff_matrix_gradient(
            |m| critic_loss(&CriticWeights { omega: m.clone() }, &z, target).unwrap_or(f64::NAN),
            &critic.omega,
            h,
        );
        let floor = 1e-6 * analytic.amax().max(1e-12);
        worst_critic = worst_critic.max(max_relative_error(
            analytic.as_slice(),
            numeric.as_slice(),
            floor,
        ));
        let direction = critic_step_direction(&critic, &z, target)?;
        worst_direction = worst_direction.max((direction - &analytic * 2.0).amax());

        let actor = ActorWeights::new(DVector::from_vec(random_vec(&mut rng, d, 1.0)));
        let analytic = actor_loss_gradient(&actor, &z, target)?;
        let numeric = finite_diff_gradient(
            |w| {
                actor_loss(
                    &ActorWeights::new(DVector::from_column_slice(w)),
                    &z,
                    target,
                )
                .unwrap_or(f64::NAN)
            },
            actor.omega.as_slice(),
            h,
        );
        let floor = 1e-6 * analytic.amax().max(1e-12);
        worst_actor = worst_actor.max(max_relative_error(
            analytic.as_slice(),
            numeric.as_slice(),
            floor,
        ));
    }
    let passed =
        worst_critic < GRADIENT_TOL && worst_actor < GRADIENT_TOL && worst_direction < 1e-12;
    Ok(CheckReport::new(
        "gradients",
        passed,
        format!(
            "{points} points, critic rel err {worst_critic:.2e}, actor rel err {worst_actor:.2e}, \
             update direction vs 2x gradient {worst_direction:.1e} (tol {GRADIENT_TOL:e})"
        ),
    ))
}

/// Exact guided value iteration from `S = 0` on the reference plant: values
/// at the probe never decrease and the recursion settles.
pub fn monotone_values_check() -> Result<CheckReport> {
    let plant = reference_plant();
    let cfg = reference_config();
    let trace = exact_guided_vi(
        &plant,
        &cfg,
        DMatrix::zeros(2, 2),
        VI_MAX_ITERATIONS,
        VI_STEP_TOL,
    )?;
    let probe = trace.probe_values(&reference_probe());
    let worst_drop = probe
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let iterations = trace.values.len() - 1;
    let increment = trace.last_increment();
    let passed =
        worst_drop <= MONOTONE_SLACK && increment < VI_STEP_TOL && iterations < VI_MAX_ITERATIONS;
    Ok(CheckReport::new(
        "monotone-values",
        passed,
        format!(
            "{iterations} iterations, final step {increment:.1e}, largest drop {:.1e}, probe value {:.6}",
            worst_drop.max(0.0),
            probe.last().copied().unwrap_or(0.0)
        ),
    ))
}

/// The fixed point of the exact recursion satisfies the stationary Bellman
/// identity.
pub fn bellman_identity_check() -> Result<CheckReport> {
    let plant = reference_plant();
    let cfg = reference_config();
    let trace = exact_guided_vi(&plant, &cfg, DMatrix::zeros(2, 2), VI_MAX_ITERATIONS, 1e-14)?;
    let residual = bellman_residual(&plant, &cfg, trace.last());
    Ok(CheckReport::new(
        "bellman-identity",
        residual < 1e-9,
        format!("residual {residual:.1e} (tol 1e-9)"),
    ))
}

/// Online adaptive critics on noise-free plant transitions land on the exact
/// fixed point.
pub fn oracle_equivalence_check(episodes: usize, seed: u64) -> Result<CheckReport> {
    let plant = reference_plant();
    let cfg = reference_config();
    let exact = exact_guided_vi(&plant, &cfg, DMatrix::zeros(2, 2), VI_MAX_ITERATIONS, 1e-14)?;
    let target = exact.last();
    let learned = train_on_linear_plant(
        &plant,
        &cfg,
        CriticWeights::scaled_identity(2, 1e-3),
        episodes,
        50,
        seed,
    )?;
    let err = learned
        .critic
        .omega
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
        .fold(0.0, f64::max);
    Ok(CheckReport::new(
        "oracle-equivalence",
        err < ORACLE_TOL,
        format!("{episodes} episodes, max relative deviation {err:.2e} (tol {ORACLE_TOL})"),
    ))
}

/// Symmetry drift of the critic and the actor fixed point under long random
/// update sequences.
pub fn structural_check(updates: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_asym: f64 = 0.0;
    let mut worst_fixed: f64 = 0.0;
    for cfg in [
        LearnerConfig::tracking_default(),
        LearnerConfig::stabilizing_default(),
    ] {
        let d = cfg.dim();
        let mut state = LearnerState::new(cfg.clone())?;
        for _ in 0..updates {
            let z = random_vec(&mut rng, d, 0.5);
            let next = random_vec(&mut rng, d, 0.5);
            let u = state.control(&z)?;
            state.critic = critic_update(&state, &z, u, &next)?;
            worst_asym = worst_asym.max(state.critic.asymmetry());

            let fixed = LearnerState::with_weights(
                cfg.clone(),
                state.critic.clone(),
                ActorWeights::new(extract_policy(&cfg, &state.critic)?),
            )?;
            let moved = actor_update(&fixed, &z)?;
            worst_fixed = worst_fixed.max((&moved.omega - &fixed.actor.omega).amax());
            state.actor = actor_update(&state, &z)?;
        }
    }
    Ok(CheckReport::new(
        "structural",
        worst_asym < SYMMETRY_TOL && worst_fixed == 0.0,
        format!("critic asymmetry {worst_asym:.1e} (tol {SYMMETRY_TOL:e}), actor fixed-point drift {worst_fixed:.1e}"),
    ))
}

/// Observed convergence order of the plant integrator over a 10 s forced
/// swing, from three successive step halvings.
pub fn rk4_order() -> Result<f64> {
    let params = PlantParams::default();
    let start = PlantState {
        theta: 40.0,
        theta_dot: -30.0,
    };
    let run = |substeps: usize| -> Result<PlantState> {
        let mut s = start;
        for k in 0..100 {
            let u = 0.5 * (0.3 * k as f64).sin();
            s = advance(&params, s, u, 0.1, 0.1, substeps)?;
        }
        Ok(s)
    };
    let coarse = run(1)?;
    let mid = run(2)?;
    let fine = run(4)?;
    let e1 = (coarse.theta - mid.theta).abs() + (coarse.theta_dot - mid.theta_dot).abs();
    let e2 = (mid.theta - fine.theta).abs() + (mid.theta_dot - fine.theta_dot).abs();
    Ok((e1 / e2).log2())
}

pub fn integrator_check() -> Result<CheckReport> {
    let order = rk4_order()?;
    Ok(CheckReport::new(
        "rk4-order",
        order >= MIN_RK4_ORDER,
        format!("observed order {order:.3} (min {MIN_RK4_ORDER})"),
    ))
}

/// Runs the whole suite in a fixed order.
pub fn run_all() -> Result<Vec<CheckReport>> {
    Ok(vec![
        gradient_check(GRADIENT_POINTS, 11)?,
        monotone_values_check()?,
        bellman_identity_check()?,
        oracle_equivalence_check(2000, 7)?,
        structural_check(2000, 5)?,
        integrator_check()?,
    ])
}
