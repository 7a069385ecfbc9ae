//! Closed-loop experiment harness: configuration, simulation, telemetry
//! export and summary metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{
    convergence_check, Controller, ControllerConfig, ControllerMode, ConvergenceCriteria,
    StepRecord,
};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::plant::{
    advance, disturbance_torque, DisturbanceProfile, PlantParams, PlantState, Sensor, SensorParams,
};
use crate::signals::{ReferenceSignal, DEFAULT_WINDOW};
use crate::snapshot::WeightSnapshot;

/// Column order of the telemetry CSV.
pub const TELEMETRY_HEADER: &str =
    "t,theta_ref,theta_meas,e,e_v,e_s,theta_v,theta_a,u_e,u_x,u_f,f_fore,f_aft,V_E,V_X";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum ScenarioKind {
    NominalLearning,
    DisturbanceRejection,
    FrozenPolicy,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NominalLearning => "nominal_learning",
            Self::DisturbanceRejection => "disturbance_rejection",
            Self::FrozenPolicy => "frozen_policy",
        }
    }
}

/// Serializable form of a [`LearnerConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSettings {
    /// Row-major weighting matrix.
    pub q: Vec<Vec<f64>>,
    pub r: f64,
    pub guide: Vec<f64>,
    pub alpha_critic: f64,
    pub alpha_actor: f64,
}

impl From<&LearnerConfig> for LearnerSettings {
    fn from(c: &LearnerConfig) -> Self {
        Self {
            q: c.q
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            r: c.r,
            guide: c.guide.iter().copied().collect(),
            alpha_critic: c.alpha_critic,
            alpha_actor: c.alpha_actor,
        }
    }
}

impl LearnerSettings {
    pub fn to_config(&self) -> Result<LearnerConfig> {
        let d = self.guide.len();
        if self.q.len() != d || self.q.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidConfig(format!("q must be a {d}x{d} matrix")));
        }
        let flat: Vec<f64> = self.q.iter().flatten().copied().collect();
        LearnerConfig::new(
            DMatrix::from_row_slice(d, d, &flat),
            self.r,
            DVector::from_column_slice(&self.guide),
            self.alpha_critic,
            self.alpha_actor,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSwitch {
    /// Seconds.
    pub at: f64,
    pub mode: ControllerMode,
}

/// Everything needed to run one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    /// Episode length, seconds.
    pub duration: f64,
    pub seed: u64,
    /// Initial span excluded from the error metrics, seconds.
    pub warm_up: f64,
    /// RK4 steps per control period.
    pub physics_substeps: usize,
    /// Moving-average window of the tracking features, samples.
    pub window: usize,
    /// Weight snapshot to start from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    /// Mode changes, applied once `t >= at`; the controller starts in
    /// `learning` unless a switch at `t = 0` says otherwise.
    #[serde(default)]
    pub mode_schedule: Vec<ModeSwitch>,
    pub reference: ReferenceSignal,
    pub tracking: LearnerSettings,
    pub stabilizing: LearnerSettings,
    pub plant: PlantParams,
    pub sensor: SensorParams,
    pub disturbance: DisturbanceProfile,
    pub convergence: ConvergenceCriteria,
}

impl ScenarioSpec {
    pub fn default_for(kind: ScenarioKind) -> Self {
        let (disturbance, schedule) = match kind {
            ScenarioKind::NominalLearning => (DisturbanceProfile::none(), vec![]),
            ScenarioKind::DisturbanceRejection => (DisturbanceProfile::gust(), vec![]),
            ScenarioKind::FrozenPolicy => (
                DisturbanceProfile::none(),
                vec![ModeSwitch {
                    at: 0.0,
                    mode: ControllerMode::FullyFrozen,
                }],
            ),
        };
        Self {
            name: kind,
            duration: 150.0,
            seed: 1,
            warm_up: 2.0,
            physics_substeps: 10,
            window: DEFAULT_WINDOW,
            snapshot: None,
            mode_schedule: schedule,
            reference: ReferenceSignal::nominal(),
            tracking: (&LearnerConfig::tracking_default()).into(),
            stabilizing: (&LearnerConfig::stabilizing_default()).into(),
            plant: PlantParams::default(),
            sensor: SensorParams::default(),
            disturbance,
            convergence: ConvergenceCriteria::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn sample_period(&self) -> f64 {
        self.sensor.sample_period()
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.sample_period()).round() as usize
    }

    /// Checks every invariant the run relies on. `has_snapshot` reports
    /// whether starting weights are available from outside the spec.
    pub fn validate(&self, has_snapshot: bool) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        if !(self.warm_up >= 0.0 && self.warm_up < self.duration) {
            return Err(Error::InvalidConfig(
                "warm_up must lie in [0, duration)".into(),
            ));
        }
        if self.physics_substeps == 0 {
            return Err(Error::InvalidConfig(
                "physics_substeps must be at least 1".into(),
            ));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig(
                "window must be at least 1 sample".into(),
            ));
        }
        if self
            .mode_schedule
            .iter()
            .any(|s| s.at.is_nan() || s.at < 0.0)
        {
            return Err(Error::InvalidConfig(
                "mode switch times must be non-negative".into(),
            ));
        }
        self.reference.validate()?;
        self.tracking.to_config()?;
        self.stabilizing.to_config()?;
        self.plant.validate()?;
        self.sensor.validate()?;
        self.disturbance.validate()?;
        match self.name {
            ScenarioKind::FrozenPolicy if self.snapshot.is_none() && !has_snapshot => Err(
                Error::InvalidConfig("frozen_policy requires a weight snapshot".into()),
            ),
            ScenarioKind::DisturbanceRejection if !self.disturbance.is_active() => {
                Err(Error::InvalidConfig(
                    "disturbance_rejection requires an active disturbance profile".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    fn controller_config(&self) -> Result<ControllerConfig> {
        Ok(ControllerConfig {
            tracking: self.tracking.to_config()?,
            stabilizing: self.stabilizing.to_config()?,
            reference: self.reference,
            sample_period: self.sample_period(),
            window: self.window,
            snapshot_every: None,
        })
    }
}

/// One CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub theta_ref: f64,
    pub theta_meas: f64,
    pub e: f64,
    pub e_v: f64,
    pub e_s: f64,
    pub theta_v: f64,
    pub theta_a: f64,
    pub u_e: f64,
    pub u_x: f64,
    pub u_f: f64,
    pub f_fore: f64,
    pub f_aft: f64,
    pub v_e: f64,
    pub v_x: f64,
}

impl TelemetryRow {
    pub const COLUMNS: usize = 15;

    pub fn to_array(&self) -> [f64; Self::COLUMNS] {
        [
            self.t,
            self.theta_ref,
            self.theta_meas,
            self.e,
            self.e_v,
            self.e_s,
            self.theta_v,
            self.theta_a,
            self.u_e,
            self.u_x,
            self.u_f,
            self.f_fore,
            self.f_aft,
            self.v_e,
            self.v_x,
        ]
    }

    pub fn from_array(v: [f64; Self::COLUMNS]) -> Self {
        let [t, theta_ref, theta_meas, e, e_v, e_s, theta_v, theta_a, u_e, u_x, u_f, f_fore, f_aft, v_e, v_x] =
            v;
        Self {
            t,
            theta_ref,
            theta_meas,
            e,
            e_v,
            e_s,
            theta_v,
            theta_a,
            u_e,
            u_x,
            u_f,
            f_fore,
            f_aft,
            v_e,
            v_x,
        }
    }
}

impl From<&StepRecord> for TelemetryRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            t: r.time,
            theta_ref: r.theta_ref,
            theta_meas: r.theta_meas,
            e: r.error.e,
            e_v: r.error.e_v,
            e_s: r.error.e_s,
            theta_v: r.pitch.theta_v,
            theta_a: r.pitch.theta_a,
            u_e: r.control.u_e,
            u_x: r.control.u_x,
            u_f: r.control.u_f,
            f_fore: r.winch.fore,
            f_aft: r.winch.aft,
            v_e: r.value_tracking,
            v_x: r.value_stabilizing,
        }
    }
}

pub fn telemetry_to_csv(rows: &[TelemetryRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    out.push_str(TELEMETRY_HEADER);
    out.push('\n');
    for row in rows {
        for (i, v) in row.to_array().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn telemetry_from_csv(text: &str, path: &Path) -> Result<Vec<TelemetryRow>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TELEMETRY_HEADER => {}
        Some((_, h)) => return Err(parse_err(1, format!("unexpected header `{h}`"))),
        None => return Err(Error::EmptyTelemetry),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = [0.0; TelemetryRow::COLUMNS];
        let mut n = 0;
        for tok in line.split(',') {
            if n == TelemetryRow::COLUMNS {
                return Err(parse_err(i + 1, "too many columns".into()));
            }
            vals[n] = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad number `{tok}`")))?;
            n += 1;
        }
        if n != TelemetryRow::COLUMNS {
            return Err(parse_err(
                i + 1,
                format!("expected {} columns, got {n}", TelemetryRow::COLUMNS),
            ));
        }
        rows.push(TelemetryRow::from_array(vals));
    }
    Ok(rows)
}

pub fn export_telemetry(rows: &[TelemetryRow], path: &Path) -> Result<()> {
    std::fs::write(path, telemetry_to_csv(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    telemetry_from_csv(&text, path)
}

/// Error statistics and value series derivable from telemetry alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean of `|theta_ref - theta_meas|` after warm-up, degrees.
    pub abs_avg_error: f64,
    pub max_abs_error: f64,
    /// Rows contributing to the averages.
    pub samples: usize,
    pub warm_up: f64,
    #[serde(skip)]
    pub value_tracking: Vec<f64>,
    #[serde(skip)]
    pub value_stabilizing: Vec<f64>,
}

/// Rows before `warm_up` seconds and rows with a non-finite measurement are
/// excluded from the error statistics. If no row is left the average is NaN
/// and `samples` is zero.
pub fn compute_metrics(rows: &[TelemetryRow], warm_up: f64) -> Result<Metrics> {
    if rows.is_empty() {
        return Err(Error::EmptyTelemetry);
    }
    let errors: Vec<f64> = rows
        .iter()
        .filter(|r| r.t >= warm_up && r.theta_meas.is_finite())
        .map(|r| (r.theta_ref - r.theta_meas).abs())
        .collect();
    Ok(Metrics {
        abs_avg_error: if errors.is_empty() {
            f64::NAN
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        },
        max_abs_error: errors.iter().copied().fold(0.0, f64::max),
        samples: errors.len(),
        warm_up,
        value_tracking: rows.iter().map(|r| r.v_e).collect(),
        value_stabilizing: rows.iter().map(|r| r.v_x).collect(),
    })
}

/// Trailing moving average of `|theta_ref - theta_meas|` over `window`
/// samples, one value per row (shorter windows at the start).
pub fn moving_abs_error(rows: &[TelemetryRow], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let abs: Vec<f64> = rows
        .iter()
        .map(|r| (r.theta_ref - r.theta_meas).abs())
        .collect();
    let mut out = Vec::with_capacity(abs.len());
    let mut sum = 0.0;
    for i in 0..abs.len() {
        sum += abs[i];
        if i >= w {
            sum -= abs[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub scenario: ScenarioKind,
    pub metrics: Metrics,
    pub converged: bool,
    /// First time the convergence check held, seconds.
    pub convergence_time: Option<f64>,
    pub final_snapshot: WeightSnapshot,
    pub faults: u64,
    pub spikes: usize,
    pub max_critic_asymmetry: f64,
    pub max_abs_control: f64,
    pub weights_finite: bool,
    /// Set when a learner update went non-finite and the run stopped early.
    pub halt: Option<Halt>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Halt {
    pub time: f64,
    pub reason: String,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        self.halt.is_none()
    }
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = \"{}\"", self.scenario.as_str());
        let _ = writeln!(s, "abs_avg_error_deg = {:?}", self.metrics.abs_avg_error);
        let _ = writeln!(s, "max_abs_error_deg = {:?}", self.metrics.max_abs_error);
        let _ = writeln!(s, "samples = {}", self.metrics.samples);
        let _ = writeln!(s, "warm_up_excluded_s = {:?}", self.metrics.warm_up);
        let _ = writeln!(s, "converged = {}", self.converged);
        match self.convergence_time {
            Some(t) => {
                let _ = writeln!(s, "convergence_time_s = {t:?}");
            }
            None => {
                let _ = writeln!(s, "# convergence_time_s: never");
            }
        }
        let _ = writeln!(s, "measurement_faults = {}", self.faults);
        let _ = writeln!(s, "sensor_spikes = {}", self.spikes);
        let _ = writeln!(s, "max_critic_asymmetry = {:?}", self.max_critic_asymmetry);
        let _ = writeln!(s, "max_abs_u_f = {:?}", self.max_abs_control);
        let _ = writeln!(s, "weights_finite = {}", self.weights_finite);
        let _ = writeln!(s, "completed = {}", self.completed());
        if let Some(h) = &self.halt {
            let _ = writeln!(s, "halted_at_s = {:?}", h.time);
            let _ = writeln!(s, "halt_reason = {:?}", h.reason);
        }
        let _ = writeln!(
            s,
            "final_value_tracking = {:?}",
            self.metrics.value_tracking.last().copied().unwrap_or(0.0)
        );
        let _ = writeln!(
            s,
            "final_value_stabilizing = {:?}",
            self.metrics
                .value_stabilizing
                .last()
                .copied()
                .unwrap_or(0.0)
        );
        s
    }
}

pub struct ScenarioRun {
    pub records: Vec<StepRecord>,
    pub rows: Vec<TelemetryRow>,
    pub summary: RunSummary,
}

/// Loads the snapshot named in the spec, if any, and runs it.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioRun> {
    spec.validate(false)?;
    let snapshot = spec
        .snapshot
        .as_deref()
        .map(WeightSnapshot::load)
        .transpose()?;
    run_with_snapshot(spec, snapshot.as_ref())
}

/// Runs the closed loop, starting from `snapshot` when given.
pub fn run_with_snapshot(
    spec: &ScenarioSpec,
    snapshot: Option<&WeightSnapshot>,
) -> Result<ScenarioRun> {
    spec.validate(snapshot.is_some())?;
    let started = std::time::Instant::now();
    let dt = spec.sample_period();
    let cfg = spec.controller_config()?;
    let mut controller = match snapshot {
        Some(s) => Controller::from_snapshot(cfg, s)?,
        None => Controller::new(cfg)?,
    };
    let mut schedule = spec.mode_schedule.clone();
    schedule.sort_by(|a, b| a.at.total_cmp(&b.at));
    let mut schedule = schedule.into_iter().peekable();

    let mut sensor = Sensor::new(SensorParams {
        seed: spec.seed,
        ..spec.sensor
    })?;
    let mut disturbance_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut plant = PlantState {
        theta: spec.plant.trim,
        theta_dot: 0.0,
    };

    let n = spec.steps();
    let mut records = Vec::with_capacity(n);
    let mut max_asym: f64 = 0.0;
    let mut halt = None;
    for k in 0..n {
        let t = k as f64 * dt;
        while let Some(switch) = schedule.next_if(|s| s.at <= t + 1e-9) {
            controller.set_mode(switch.mode);
        }
        let measured = sensor.sense(plant.theta);
        let (control, record) = match controller.step(measured) {
            Ok(out) => out,
            Err(err @ Error::NonFinite { .. }) => {
                halt = Some(Halt {
                    time: t,
                    reason: err.to_string(),
                });
                break;
            }
            Err(err) => return Err(err),
        };
        max_asym = max_asym
            .max(controller.tracking().critic.asymmetry())
            .max(controller.stabilizing().critic.asymmetry());
        let torque = disturbance_torque(&spec.disturbance, t, &mut disturbance_rng);
        plant = advance(
            &spec.plant,
            plant,
            control.u_f,
            torque,
            dt,
            spec.physics_substeps,
        )?;
        records.push(record);
    }

    let rows: Vec<TelemetryRow> = records.iter().map(TelemetryRow::from).collect();
    let metrics = compute_metrics(&rows, spec.warm_up)?;
    let convergence_time = first_convergence(&records, &spec.convergence);
    let final_snapshot = controller.snapshot();
    let summary = RunSummary {
        scenario: spec.name,
        converged: convergence_time.is_some(),
        convergence_time,
        weights_finite: halt.is_none() && final_snapshot.is_finite(),
        halt,
        final_snapshot,
        metrics,
        faults: controller.faults(),
        spikes: sensor.spike_count(),
        max_critic_asymmetry: max_asym,
        max_abs_control: rows.iter().map(|r| r.u_f.abs()).fold(0.0, f64::max),
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    Ok(ScenarioRun {
        records,
        rows,
        summary,
    })
}

fn first_convergence(records: &[StepRecord], criteria: &ConvergenceCriteria) -> Option<f64> {
    let abs: Vec<f64> = records
        .iter()
        .map(|r| (r.theta_ref - r.theta_meas).abs())
        .collect();
    let steps: Vec<f64> = records
        .iter()
        .map(|r| r.critic_step_tracking.max(r.critic_step_stabilizing))
        .collect();
    let w = criteria.window.max(2);
    (w..=records.len())
        .find(|&end| convergence_check(&abs[..end], &steps[..end], criteria))
        .map(|end| records[end - 1].time)
}

/// Gnuplot script plotting attitude, forces and value metrics from
/// `telemetry.csv` in the same directory.
pub fn gnuplot_script(csv_name: &str) -> String {
    format!(
        r#"set datafile separator ","
set key autotitle columnhead
set terminal pngcairo size 1000,900
set output "telemetry.png"
set multiplot layout 3,1
set ylabel "pitch (deg)"
plot "{csv}" using 1:2 with lines title "reference", "" using 1:3 with lines title "measured"
set ylabel "normalized force"
plot "{csv}" using 1:12 with lines title "f_fore", "" using 1:13 with lines title "f_aft"
set ylabel "value"
set xlabel "time (s)"
plot "{csv}" using 1:14 with lines title "V_E", "" using 1:15 with lines title "V_X"
unset multiplot
"#,
        csv = csv_name
    )
}

/// Writes `telemetry.csv`, `summary.toml` and `weights.txt` (plus
/// `plot.gp` when asked) into `dir`.
pub fn write_outputs(run: &ScenarioRun, dir: &Path, gnuplot: bool) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    export_telemetry(&run.rows, &dir.join("telemetry.csv"))?;
    let summary = dir.join("summary.toml");
    std::fs::write(&summary, run.summary.to_text()).map_err(io(&summary))?;
    run.summary.final_snapshot.save(&dir.join("weights.txt"))?;
    if gnuplot {
        let plot = dir.join("plot.gp");
        std::fs::write(&plot, gnuplot_script("telemetry.csv")).map_err(io(&plot))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, theta_ref: f64, theta_meas: f64) -> TelemetryRow {
        TelemetryRow::from_array([
            t, theta_ref, theta_meas, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ])
    }

    #[test]
    fn metrics_examples() {
        let perfect: Vec<_> = (0..10).map(|k| row(k as f64, 3.0, 3.0)).collect();
        assert_eq!(compute_metrics(&perfect, 0.0).unwrap().abs_avg_error, 0.0);
        let offset: Vec<_> = (0..10).map(|k| row(k as f64, 3.0, 2.0)).collect();
        assert_eq!(compute_metrics(&offset, 0.0).unwrap().abs_avg_error, 1.0);
        let alternating: Vec<_> = (0..10)
            .map(|k| row(k as f64, 0.0, if k % 2 == 0 { 2.0 } else { -2.0 }))
            .collect();
        assert_eq!(
            compute_metrics(&alternating, 0.0).unwrap().abs_avg_error,
            2.0
        );
        assert!(matches!(
            compute_metrics(&[], 0.0),
            Err(Error::EmptyTelemetry)
        ));
    }

    #[test]
    fn metrics_skip_warm_up_and_faults() {
        let mut rows: Vec<_> = (0..10)
            .map(|k| row(k as f64, 0.0, if k < 2 { 50.0 } else { 1.0 }))
            .collect();
        rows[5].theta_meas = f64::NAN;
        let m = compute_metrics(&rows, 2.0).unwrap();
        assert_eq!(m.samples, 7);
        assert_eq!(m.abs_avg_error, 1.0);
    }

    #[test]
    fn csv_line_count_and_round_trip() {
        let rows: Vec<_> = (0..3)
            .map(|k| row(k as f64 * 0.05, 1.0 / 3.0, -2.5e-9))
            .collect();
        let text = telemetry_to_csv(&rows);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), TELEMETRY_HEADER);
        let back = telemetry_from_csv(&text, Path::new("mem.csv")).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn csv_parse_errors() {
        let p = Path::new("x.csv");
        assert!(matches!(
            telemetry_from_csv("", p),
            Err(Error::EmptyTelemetry)
        ));
        assert!(telemetry_from_csv("a,b\n", p).is_err());
        let bad = format!("{TELEMETRY_HEADER}\n1,2,3\n");
        assert!(matches!(
            telemetry_from_csv(&bad, p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn moving_average_window() {
        let rows: Vec<_> = (0..6).map(|k| row(k as f64, 0.0, k as f64)).collect();
        let m = moving_abs_error(&rows, 2);
        assert_eq!(m, vec![0.0, 0.5, 1.5, 2.5, 3.5, 4.5]);
    }

    #[test]
    fn default_configs_round_trip_through_toml() {
        for kind in [
            ScenarioKind::NominalLearning,
            ScenarioKind::DisturbanceRejection,
            ScenarioKind::FrozenPolicy,
        ] {
            let spec = ScenarioSpec::default_for(kind);
            let back = ScenarioSpec::from_toml(&spec.to_toml()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn spec_validation() {
        let frozen = ScenarioSpec::default_for(ScenarioKind::FrozenPolicy);
        assert!(frozen.validate(false).is_err());
        assert!(frozen.validate(true).is_ok());
        let mut dist = ScenarioSpec::default_for(ScenarioKind::DisturbanceRejection);
        assert!(dist.validate(false).is_ok());
        dist.disturbance = DisturbanceProfile::none();
        assert!(dist.validate(false).is_err());
        let mut bad = ScenarioSpec::default_for(ScenarioKind::NominalLearning);
        bad.tracking.alpha_critic = 2.0;
        assert!(bad.validate(false).is_err());
        let mut bad = ScenarioSpec::default_for(ScenarioKind::NominalLearning);
        bad.sensor.cutoff_hz = 250.0;
        assert!(bad.validate(false).is_err());
        assert!(ScenarioSpec::from_toml("name = \"nope\"").is_err());
    }

    #[test]
    fn frozen_scenario_without_snapshot_fails_before_running() {
        let spec = ScenarioSpec::default_for(ScenarioKind::FrozenPolicy);
        assert!(matches!(run_scenario(&spec), Err(Error::InvalidConfig(_))));
    }
}
