//! Reference trajectories and the feature vectors fed to the two learners.
//!
//! Tracking features are built from a short history of raw tracking errors
//! `e = theta_meas - theta_ref`; stabilizing features from the last three
//! filtered attitude samples. All angles are in degrees and derivatives are
//! backward finite differences over the control period.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Control/sampling period of the loop, 20 Hz.
pub const DEFAULT_SAMPLE_PERIOD: f64 = 0.05;

/// Moving-average window in samples (1 s at 20 Hz).
pub const DEFAULT_WINDOW: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Sinusoid,
    Step,
    Constant,
}

/// Desired pitch attitude as a function of time in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSignal {
    /// Degrees.
    pub amplitude: f64,
    /// Radians per second; only used by `Sinusoid`.
    pub angular_rate: f64,
    pub kind: ReferenceKind,
    /// Switching time of a `Step`, seconds.
    #[serde(default)]
    pub onset: f64,
}

impl ReferenceSignal {
    /// `20 sin(0.132 pi t)` degrees.
    pub fn nominal() -> Self {
        Self::sinusoid(20.0, 0.132 * PI)
    }

    pub fn sinusoid(amplitude: f64, angular_rate: f64) -> Self {
        Self {
            amplitude,
            angular_rate,
            kind: ReferenceKind::Sinusoid,
            onset: 0.0,
        }
    }

    pub fn step(amplitude: f64, onset: f64) -> Self {
        Self {
            amplitude,
            angular_rate: 0.0,
            kind: ReferenceKind::Step,
            onset,
        }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self {
            amplitude,
            angular_rate: 0.0,
            kind: ReferenceKind::Constant,
            onset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("reference amplitude", self.amplitude)?;
        ensure_finite("reference angular rate", self.angular_rate)?;
        ensure_finite("reference onset", self.onset)?;
        Ok(())
    }

    /// Reference angle in degrees at `t` seconds.
    pub fn at(&self, t: f64) -> f64 {
        match self.kind {
            ReferenceKind::Sinusoid => self.amplitude * (self.angular_rate * t).sin(),
            ReferenceKind::Step => {
                if t >= self.onset {
                    self.amplitude
                } else {
                    0.0
                }
            }
            ReferenceKind::Constant => self.amplitude,
        }
    }
}

/// Tracking feature vector `[e, e_prev, e_v, e_v_prev, e_s, e_s_prev]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorVector {
    pub e: f64,
    pub e_prev: f64,
    pub e_v: f64,
    pub e_v_prev: f64,
    pub e_s: f64,
    pub e_s_prev: f64,
}

impl ErrorVector {
    pub const DIM: usize = 6;

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.e,
            self.e_prev,
            self.e_v,
            self.e_v_prev,
            self.e_s,
            self.e_s_prev,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Stabilizing feature vector `[theta, theta_v, theta_a]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PitchState {
    pub theta: f64,
    pub theta_v: f64,
    pub theta_a: f64,
}

impl PitchState {
    pub const DIM: usize = 3;

    pub fn to_array(&self) -> [f64; 3] {
        [self.theta, self.theta_v, self.theta_a]
    }
}

/// Ring buffer of the last `N + 2` raw tracking errors.
#[derive(Clone, Debug)]
pub struct ErrorHistory {
    errors: VecDeque<f64>,
    times: VecDeque<f64>,
    dt: f64,
    window: usize,
}

impl ErrorHistory {
    pub fn new(dt: f64, window: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sample period must be positive, got {dt}"
            )));
        }
        if window < 1 {
            return Err(Error::InvalidConfig(
                "moving-average window must be at least 1 sample".into(),
            ));
        }
        Ok(Self {
            errors: VecDeque::with_capacity(window + 2),
            times: VecDeque::with_capacity(window + 2),
            dt,
            window,
        })
    }

    pub fn capacity(&self) -> usize {
        self.window + 2
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn sample_period(&self) -> f64 {
        self.dt
    }

    /// Stored errors, oldest first.
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.errors.iter().copied()
    }

    pub fn newest_time(&self) -> Option<f64> {
        self.times.back().copied()
    }

    /// Appends a raw error; the timestamp defaults to one period after the
    /// newest stored sample.
    pub fn push(&mut self, e_raw: f64) -> Result<()> {
        let t = self.times.back().map_or(0.0, |t| t + self.dt);
        self.push_at(t, e_raw)
    }

    pub fn push_at(&mut self, t: f64, e_raw: f64) -> Result<()> {
        ensure_finite("tracking error", e_raw)?;
        if self.errors.len() == self.capacity() {
            self.errors.pop_front();
            self.times.pop_front();
        }
        self.errors.push_back(e_raw);
        self.times.push_back(t);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.errors.clear();
        self.times.clear();
    }

    /// Full `N + 2` window, oldest first. Missing leading entries repeat the
    /// oldest stored sample; an empty history reads as zeros.
    fn padded(&self) -> Vec<f64> {
        let cap = self.capacity();
        let fill = self.errors.front().copied().unwrap_or(0.0);
        let mut out = Vec::with_capacity(cap);
        out.extend(std::iter::repeat_n(fill, cap - self.errors.len()));
        out.extend(self.errors.iter().copied());
        out
    }

    pub fn error_vector(&self) -> ErrorVector {
        let b = self.padded();
        let n = self.window;
        let newest = n + 1;
        let norm = n as f64;
        ErrorVector {
            e: b[newest],
            e_prev: b[newest - 1],
            e_v: (b[newest] - b[newest - 1]) / self.dt,
            e_v_prev: (b[newest - 1] - b[newest - 2]) / self.dt,
            // N + 1 terms over a 1/N normalizer.
            e_s: b[1..=newest].iter().sum::<f64>() / norm,
            e_s_prev: b[0..newest].iter().sum::<f64>() / norm,
        }
    }
}

/// Builds the pitch state from `[theta_{l-2}, theta_{l-1}, theta_l]`.
pub fn build_pitch_state(samples: [f64; 3], dt: f64) -> Result<PitchState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sample period must be positive, got {dt}"
        )));
    }
    for s in samples {
        ensure_finite("attitude sample", s)?;
    }
    let [a, b, c] = samples;
    Ok(PitchState {
        theta: c,
        theta_v: (c - b) / dt,
        theta_a: (c - 2.0 * b + a) / (dt * dt),
    })
}

/// Last three attitude samples with the same warm-up padding as
/// [`ErrorHistory`].
#[derive(Clone, Debug, Default)]
pub struct AttitudeHistory {
    samples: VecDeque<f64>,
}

impl AttitudeHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, theta: f64) -> Result<()> {
        ensure_finite("attitude sample", theta)?;
        if self.samples.len() == 3 {
            self.samples.pop_front();
        }
        self.samples.push_back(theta);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn window(&self) -> [f64; 3] {
        let fill = self.samples.front().copied().unwrap_or(0.0);
        let mut out = [fill; 3];
        let offset = 3 - self.samples.len();
        for (slot, s) in out[offset..].iter_mut().zip(&self.samples) {
            *slot = *s;
        }
        out
    }

    pub fn pitch_state(&self, dt: f64) -> Result<PitchState> {
        build_pitch_state(self.window(), dt)
    }
}
