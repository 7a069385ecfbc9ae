//! Surrogate wing-pitch plant, attitude sensor and disturbance sources.
//!
//! The plant is a damped pendulum about a trim angle driven by the
//! normalized winch force:
//!
//! ```text
//! J th'' = -c th' - k g(th - trim) + torque_gain * moment_arm * u + d(t)
//! ```
//!
//! with `g = sin` in nonlinear mode and the identity otherwise. Dynamics are
//! integrated in radians; the public state is in degrees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct PlantParams {
    /// kg m^2
    pub inertia: f64,
    /// N m s / rad
    pub damping: f64,
    /// N m / rad
    pub stiffness: f64,
    /// Degrees.
    pub trim: f64,
    /// N m per unit normalized force.
    pub torque_gain: f64,
    pub moment_arm: f64,
    /// `sin` restoring term instead of the linear one.
    pub nonlinear: bool,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            inertia: 0.5,
            damping: 0.8,
            stiffness: 2.0,
            trim: 0.0,
            torque_gain: 2.0,
            moment_arm: 1.0,
            nonlinear: true,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.inertia,
            self.damping,
            self.stiffness,
            self.trim,
            self.torque_gain,
            self.moment_arm,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "plant parameters must be finite".into(),
            ));
        }
        if self.inertia <= 0.0 {
            return Err(Error::InvalidConfig(
                "plant inertia must be positive".into(),
            ));
        }
        if self.damping < 0.0 || self.stiffness < 0.0 {
            return Err(Error::InvalidConfig(
                "plant damping and stiffness must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Angular acceleration in rad/s^2.
    fn acceleration(&self, theta_rad: f64, rate_rad: f64, u: f64, disturbance: f64) -> f64 {
        let offset = theta_rad - self.trim.to_radians();
        let restoring = if self.nonlinear { offset.sin() } else { offset };
        (-self.damping * rate_rad - self.stiffness * restoring
            + self.torque_gain * self.moment_arm * u
            + disturbance)
            / self.inertia
    }
}

/// Pitch attitude (deg) and rate (deg/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.theta_dot.is_finite()
    }
}

/// One fixed RK4 step of length `dt` with `u` and `disturbance` held.
pub fn plant_step(
    params: &PlantParams,
    state: PlantState,
    u: f64,
    disturbance: f64,
    dt: f64,
) -> Result<PlantState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "integration step must be positive, got {dt}"
        )));
    }
    if !state.is_finite() || !u.is_finite() || !disturbance.is_finite() {
        return Err(Error::NonFinite {
            what: "plant input",
            value: [state.theta, state.theta_dot, u, disturbance]
                .into_iter()
                .find(|v| !v.is_finite())
                .unwrap_or(f64::NAN),
        });
    }
    let f = |x: f64, v: f64| (v, params.acceleration(x, v, u, disturbance));
    let (x, v) = (state.theta.to_radians(), state.theta_dot.to_radians());
    let (k1x, k1v) = f(x, v);
    let (k2x, k2v) = f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
    let (k3x, k3v) = f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
    let (k4x, k4v) = f(x + dt * k3x, v + dt * k3v);
    let x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    let v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    let next = PlantState {
        theta: x.to_degrees(),
        theta_dot: v.to_degrees(),
    };
    if !next.is_finite() {
        return Err(Error::NonFinite {
            what: "plant state",
            value: next.theta,
        });
    }
    Ok(next)
}

/// Integrates over `period` using `substeps` equal RK4 steps.
pub fn advance(
    params: &PlantParams,
    mut state: PlantState,
    u: f64,
    disturbance: f64,
    period: f64,
    substeps: usize,
) -> Result<PlantState> {
    let n = substeps.max(1);
    let h = period / n as f64;
    for _ in 0..n {
        state = plant_step(params, state, u, disturbance, h)?;
    }
    Ok(state)
}

/// Linear-mode mechanical energy about trim, `0.5 J w^2 + 0.5 k x^2` (rad).
pub fn linear_energy(params: &PlantParams, state: PlantState) -> f64 {
    let x = (state.theta - params.trim).to_radians();
    let w = state.theta_dot.to_radians();
    0.5 * params.inertia * w * w + 0.5 * params.stiffness * x * x
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SensorParams {
    pub sample_rate_hz: f64,
    /// Gyro rate noise, deg/s RMS; contributes `rms / rate` deg per sample.
    pub gyro_rms_dps: f64,
    /// Direct attitude noise, deg standard deviation.
    pub attitude_noise_std: f64,
    pub spike_probability: f64,
    /// Spike magnitude range in degrees; sign is random.
    pub spike_min: f64,
    pub spike_max: f64,
    pub cutoff_hz: f64,
    /// Noise and spike stream seed; scenarios override it with their own.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: 20.0,
            gyro_rms_dps: 0.1,
            attitude_noise_std: 0.02,
            spike_probability: 0.002,
            spike_min: 5.0,
            spike_max: 15.0,
            cutoff_hz: 5.0,
            seed: 7,
        }
    }
}

impl SensorParams {
    /// Noise- and spike-free sensor with the default filter.
    pub fn ideal() -> Self {
        Self {
            gyro_rms_dps: 0.0,
            attitude_noise_std: 0.0,
            spike_probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidConfig(
                "sensor sample rate must be positive".into(),
            ));
        }
        if !(self.gyro_rms_dps >= 0.0 && self.attitude_noise_std >= 0.0) {
            return Err(Error::InvalidConfig(
                "sensor noise levels must be non-negative".into(),
            ));
        }
        if !(0.0..0.01).contains(&self.spike_probability) {
            return Err(Error::InvalidConfig(format!(
                "spike probability must lie in [0, 0.01), got {}",
                self.spike_probability
            )));
        }
        if !(self.spike_min >= 0.0
            && self.spike_max >= self.spike_min
            && self.spike_max.is_finite())
        {
            return Err(Error::InvalidConfig(
                "spike range must satisfy 0 <= min <= max".into(),
            ));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "filter cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Per-sample attitude noise standard deviation in degrees.
    pub fn noise_std(&self) -> f64 {
        let gyro = self.gyro_rms_dps / self.sample_rate_hz;
        (self.attitude_noise_std.powi(2) + gyro * gyro).sqrt()
    }

    /// Smoothing coefficient of the first-order low-pass.
    pub fn filter_coefficient(&self) -> f64 {
        1.0 - (-2.0 * std::f64::consts::PI * self.cutoff_hz / self.sample_rate_hz).exp()
    }

    /// Filter time constant in seconds.
    pub fn time_constant(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.cutoff_hz)
    }
}

/// Causal first-order IIR `y += a (x - y)`, unit DC gain.
#[derive(Clone, Copy, Debug)]
pub struct LowPass {
    coefficient: f64,
    output: f64,
}

impl LowPass {
    pub fn new(coefficient: f64) -> Self {
        Self {
            coefficient,
            output: 0.0,
        }
    }

    pub fn update(&mut self, input: f64) -> f64 {
        self.output += self.coefficient * (input - self.output);
        self.output
    }

    pub fn output(&self) -> f64 {
        self.output
    }
}

/// Noisy, spiky, low-passed attitude sensor sampled on the control grid.
#[derive(Clone, Debug)]
pub struct Sensor {
    params: SensorParams,
    noise: Option<Normal<f64>>,
    filter: LowPass,
    rng: ChaCha8Rng,
    spikes: usize,
}

impl Sensor {
    pub fn new(params: SensorParams) -> Result<Self> {
        params.validate()?;
        let std = params.noise_std();
        let noise = (std > 0.0)
            .then(|| Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string())))
            .transpose()?;
        Ok(Self {
            filter: LowPass::new(params.filter_coefficient()),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            noise,
            params,
            spikes: 0,
        })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    /// Number of spikes injected so far.
    pub fn spike_count(&self) -> usize {
        self.spikes
    }

    /// Raw reading before filtering.
    fn raw(&mut self, true_theta: f64) -> f64 {
        let mut reading = true_theta;
        if let Some(noise) = &self.noise {
            reading += noise.sample(&mut self.rng);
        }
        if self.params.spike_probability > 0.0
            && self.rng.random::<f64>() < self.params.spike_probability
        {
            let magnitude = self
                .rng
                .random_range(self.params.spike_min..=self.params.spike_max);
            let sign = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
            reading += sign * magnitude;
            self.spikes += 1;
        }
        reading
    }

    /// Filtered attitude sample in degrees.
    pub fn sense(&mut self, true_theta: f64) -> f64 {
        let raw = self.raw(true_theta);
        self.filter.update(raw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    RandomJerk,
    Pulse,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceProfile {
    pub start: f64,
    pub duration: f64,
    /// N m.
    pub amplitude: f64,
    pub waveform: Waveform,
}

impl Default for DisturbanceProfile {
    fn default() -> Self {
        Self::none()
    }
}

impl DisturbanceProfile {
    pub fn none() -> Self {
        Self {
            start: 0.0,
            duration: 0.0,
            amplitude: 0.0,
            waveform: Waveform::None,
        }
    }

    /// Ten seconds of random jerking starting at 120 s.
    pub fn gust() -> Self {
        Self {
            start: 120.0,
            duration: 10.0,
            amplitude: 1.5,
            waveform: Waveform::RandomJerk,
        }
    }

    pub fn is_active(&self) -> bool {
        self.waveform != Waveform::None && self.duration > 0.0 && self.amplitude != 0.0
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.start, self.duration, self.amplitude]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "disturbance parameters must be finite".into(),
            ));
        }
        if self.duration < 0.0 {
            return Err(Error::InvalidConfig(
                "disturbance duration must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end()
    }
}

/// Disturbance torque at `t`; zero outside the active window.
pub fn disturbance_torque<R: Rng + ?Sized>(
    profile: &DisturbanceProfile,
    t: f64,
    rng: &mut R,
) -> f64 {
    if !profile.contains(t) {
        return 0.0;
    }
    match profile.waveform {
        Waveform::None => 0.0,
        Waveform::Pulse => profile.amplitude,
        Waveform::RandomJerk => {
            let a = profile.amplitude.abs();
            if a == 0.0 {
                0.0
            } else {
                rng.random_range(-a..=a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equilibrium_is_fixed() {
        for trim in [0.0, 7.5] {
            let p = PlantParams {
                trim,
                ..PlantParams::default()
            };
            let s = PlantState {
                theta: trim,
                theta_dot: 0.0,
            };
            let next = advance(&p, s, 0.0, 0.0, 1.0, 200).unwrap();
            assert_abs_diff_eq!(next.theta, trim, epsilon = 1e-12);
            assert_abs_diff_eq!(next.theta_dot, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn double_integrator_matches_closed_form() {
        let p = PlantParams {
            damping: 0.0,
            stiffness: 0.0,
            nonlinear: false,
            ..PlantParams::default()
        };
        let u = 0.3;
        let accel = (p.torque_gain * u / p.inertia).to_degrees();
        let dt = 0.005;
        let one = plant_step(&p, PlantState::default(), u, 0.0, dt).unwrap();
        assert_abs_diff_eq!(one.theta_dot, accel * dt, epsilon = 1e-10);
        let s0 = PlantState {
            theta: 1.0,
            theta_dot: -2.0,
        };
        let t = 2.0;
        let s = advance(&p, s0, u, 0.0, t, 400).unwrap();
        assert_abs_diff_eq!(s.theta_dot, -2.0 + accel * t, epsilon = 1e-9);
        assert_abs_diff_eq!(s.theta, 1.0 - 2.0 * t + 0.5 * accel * t * t, epsilon = 1e-9);
    }

    #[test]
    fn small_angle_sin_and_linear_agree() {
        let sin_mode = PlantParams::default();
        let lin_mode = PlantParams {
            nonlinear: false,
            ..sin_mode
        };
        let s0 = PlantState {
            theta: 4.0,
            theta_dot: 0.0,
        };
        let (mut a, mut b) = (s0, s0);
        for _ in 0..200 {
            a = plant_step(&sin_mode, a, 0.0, 0.0, 0.005).unwrap();
            b = plant_step(&lin_mode, b, 0.0, 0.0, 0.005).unwrap();
            assert!((a.theta - b.theta).abs() <= 0.01 * 4.0);
        }
    }

    #[test]
    fn non_finite_inputs_fault() {
        let p = PlantParams::default();
        assert!(plant_step(&p, PlantState::default(), f64::NAN, 0.0, 0.01).is_err());
        let bad = PlantState {
            theta: f64::INFINITY,
            theta_dot: 0.0,
        };
        assert!(plant_step(&p, bad, 0.0, 0.0, 0.01).is_err());
        assert!(plant_step(&p, PlantState::default(), 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_energy_decays_open_loop() {
        let p = PlantParams {
            nonlinear: false,
            ..PlantParams::default()
        };
        for theta in [-60.0, -20.0, 5.0, 60.0] {
            let mut s = PlantState {
                theta,
                theta_dot: 10.0,
            };
            let mut energy = linear_energy(&p, s);
            for _ in 0..2000 {
                s = plant_step(&p, s, 0.0, 0.0, 0.005).unwrap();
                let e = linear_energy(&p, s);
                assert!(e <= energy + 1e-12);
                energy = e;
            }
            assert!(s.theta.abs() < 1.0);
        }
    }

    #[test]
    fn nonlinear_open_loop_decays() {
        let p = PlantParams::default();
        let mut s = PlantState {
            theta: 60.0,
            theta_dot: 0.0,
        };
        s = advance(&p, s, 0.0, 0.0, 20.0, 4000).unwrap();
        assert!(s.theta.abs() < 0.5);
    }

    #[test]
    fn sensor_rejects_bad_params() {
        let bad_cutoff = SensorParams {
            cutoff_hz: 250.0,
            ..SensorParams::default()
        };
        assert!(Sensor::new(bad_cutoff).is_err());
        let bad_spikes = SensorParams {
            spike_probability: 0.05,
            ..SensorParams::default()
        };
        assert!(Sensor::new(bad_spikes).is_err());
    }

    #[test]
    fn ideal_sensor_converges_to_constant() {
        let params = SensorParams::ideal();
        let mut sensor = Sensor::new(params).unwrap();
        let settle = (5.0 * params.time_constant() * params.sample_rate_hz).ceil() as usize;
        let mut y = 0.0;
        for _ in 0..settle {
            y = sensor.sense(10.0);
        }
        assert!((y - 10.0).abs() < 10.0 * (-5.0f64).exp() + 1e-12);
    }

    #[test]
    fn near_nyquist_filter_tracks_input() {
        let params = SensorParams {
            cutoff_hz: 9.9,
            ..SensorParams::ideal()
        };
        let mut sensor = Sensor::new(params).unwrap();
        let a = params.filter_coefficient();
        let dt = params.sample_period();
        let rate = 2.0;
        for k in 0..400 {
            let x = rate * k as f64 * dt;
            let y = sensor.sense(x);
            // A ramp through y += a (x - y) lags by rate * dt * (1 - a) / a.
            if k > 20 {
                assert_abs_diff_eq!(x - y, rate * dt * (1.0 - a) / a, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn low_pass_is_causal_with_unit_dc_gain() {
        let mut f = LowPass::new(0.3);
        assert_eq!(f.update(0.0), 0.0);
        let impulse = f.update(1.0);
        assert_eq!(impulse, 0.3);
        let mut f = LowPass::new(0.3);
        for _ in 0..500 {
            f.update(-4.0);
        }
        assert_abs_diff_eq!(f.output(), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn sensor_is_deterministic_under_seed() {
        let params = SensorParams::default();
        let mut a = Sensor::new(params).unwrap();
        let mut b = Sensor::new(params).unwrap();
        for k in 0..1000 {
            let t = k as f64 * 0.05;
            assert_eq!(a.sense(t.sin()).to_bits(), b.sense(t.sin()).to_bits());
        }
    }

    #[test]
    fn spike_rate_matches_binomial_expectation() {
        // 150 s at 20 Hz with p = 0.002: mean 6, sd ~2.45 per run.
        let samples = 3000;
        let runs = 200;
        let mut total = 0usize;
        for seed in 0..runs {
            let mut s = Sensor::new(SensorParams {
                seed,
                ..SensorParams::default()
            })
            .unwrap();
            for _ in 0..samples {
                s.sense(0.0);
            }
            total += s.spike_count();
        }
        let mean = total as f64 / runs as f64;
        // Standard error of the mean is ~0.17.
        assert!((mean - 6.0).abs() < 0.7, "mean spike count {mean}");
    }

    #[test]
    fn disturbance_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pulse = DisturbanceProfile {
            start: 2.0,
            duration: 1.0,
            amplitude: 0.7,
            waveform: Waveform::Pulse,
        };
        assert_eq!(disturbance_torque(&pulse, 1.99, &mut rng), 0.0);
        assert_eq!(disturbance_torque(&pulse, 2.5, &mut rng), 0.7);
        assert_eq!(disturbance_torque(&pulse, 3.01, &mut rng), 0.0);
        assert_eq!(
            disturbance_torque(&DisturbanceProfile::none(), 2.5, &mut rng),
            0.0
        );
        assert!(DisturbanceProfile {
            duration: -1.0,
            ..pulse
        }
        .validate()
        .is_err());
    }

    #[test]
    fn random_jerk_is_zero_mean_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let profile = DisturbanceProfile::gust();
        let samples: Vec<f64> = (0..200)
            .map(|k| disturbance_torque(&profile, 120.0 + k as f64 * 0.05, &mut rng))
            .collect();
        assert!(samples.iter().all(|d| d.abs() <= profile.amplitude));
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 0.1 * profile.amplitude, "mean {mean}");
    }
}
