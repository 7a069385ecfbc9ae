use proptest::prelude::*;

use wingpitch::controller::WinchForces;
use wingpitch::scenario::{
    compute_metrics, moving_abs_error, run_with_snapshot, telemetry_from_csv, telemetry_to_csv,
    ModeSwitch, ScenarioKind, ScenarioSpec,
};
use wingpitch::{Controller, ControllerConfig, ControllerMode};

fn frozen(kind: ScenarioKind, duration: f64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::default_for(kind);
    spec.duration = duration;
    spec.mode_schedule = vec![ModeSwitch {
        at: 0.0,
        mode: ControllerMode::FullyFrozen,
    }];
    spec
}

#[test]
fn summary_recomputes_exactly_from_csv() {
    let run = run_with_snapshot(&frozen(ScenarioKind::NominalLearning, 150.0), None).unwrap();
    let csv = telemetry_to_csv(&run.rows);
    let parsed = telemetry_from_csv(&csv, std::path::Path::new("mem.csv")).unwrap();
    assert_eq!(parsed.len(), 3000);
    let m = compute_metrics(&parsed, 2.0).unwrap();
    assert_eq!(
        m.abs_avg_error.to_bits(),
        run.summary.metrics.abs_avg_error.to_bits()
    );
    assert_eq!(
        m.max_abs_error.to_bits(),
        run.summary.metrics.max_abs_error.to_bits()
    );
    assert_eq!(m.samples, run.summary.metrics.samples);
    assert_eq!(m.value_tracking, run.summary.metrics.value_tracking);
}

#[test]
fn full_episode_is_fast() {
    let run = run_with_snapshot(&frozen(ScenarioKind::NominalLearning, 150.0), None).unwrap();
    assert!(run.summary.completed());
    assert!(
        run.summary.wall_clock_s < 60.0,
        "{}",
        run.summary.wall_clock_s
    );
}

#[test]
fn gust_raises_error_inside_its_window_only() {
    let calm = run_with_snapshot(&frozen(ScenarioKind::NominalLearning, 150.0), None).unwrap();
    let mut spec = frozen(ScenarioKind::DisturbanceRejection, 150.0);
    spec.seed = ScenarioSpec::default_for(ScenarioKind::NominalLearning).seed;
    let gust = run_with_snapshot(&spec, None).unwrap();
    let window = |rows: &[wingpitch::scenario::TelemetryRow], a: f64, b: f64| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.t >= a && r.t < b)
            .map(|r| (r.theta_ref - r.theta_meas).abs())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(window(&gust.rows, 120.0, 130.0) > window(&calm.rows, 120.0, 130.0));
    // Identical sensor noise, no torque yet: the first 120 s match exactly.
    let before = |rows: &[wingpitch::scenario::TelemetryRow]| {
        telemetry_to_csv(
            &rows
                .iter()
                .filter(|r| r.t < 120.0)
                .cloned()
                .collect::<Vec<_>>(),
        )
    };
    assert_eq!(before(&calm.rows), before(&gust.rows));
}

#[test]
fn moving_average_of_a_constant_offset() {
    let run = run_with_snapshot(&frozen(ScenarioKind::NominalLearning, 5.0), None).unwrap();
    let mut rows = run.rows.clone();
    for r in &mut rows {
        r.theta_meas = r.theta_ref + 0.5;
    }
    let avg = moving_abs_error(&rows, 200);
    assert!(avg.iter().all(|a| (a - 0.5).abs() < 1e-12));
}

#[test]
fn snapshot_start_matches_continuing_run() {
    let spec = frozen(ScenarioKind::NominalLearning, 20.0);
    let first = run_with_snapshot(&spec, None).unwrap();
    let again = run_with_snapshot(&spec, Some(&first.summary.final_snapshot)).unwrap();
    assert_eq!(telemetry_to_csv(&first.rows), telemetry_to_csv(&again.rows));
}

#[test]
fn halted_runs_report_where_they_stopped() {
    let mut spec = ScenarioSpec::default_for(ScenarioKind::NominalLearning);
    spec.duration = 10.0;
    let run = run_with_snapshot(&spec, None).unwrap();
    if let Some(h) = &run.summary.halt {
        assert_eq!(run.rows.len(), (h.time / 0.05).round() as usize);
        assert!(!run.summary.weights_finite);
        assert!(run.summary.final_snapshot.is_finite());
        assert!(run.summary.to_text().contains("completed = false"));
    } else {
        assert_eq!(run.rows.len(), 200);
    }
}

#[test]
fn invalid_specs_fail_before_simulating() {
    let mut spec = ScenarioSpec::default_for(ScenarioKind::DisturbanceRejection);
    spec.disturbance = wingpitch::plant::DisturbanceProfile::none();
    assert!(run_with_snapshot(&spec, None).is_err());
    let spec = ScenarioSpec::default_for(ScenarioKind::FrozenPolicy);
    assert!(run_with_snapshot(&spec, None).is_err());
    let mut spec = ScenarioSpec::default_for(ScenarioKind::NominalLearning);
    spec.sensor.cutoff_hz = 12.0;
    assert!(run_with_snapshot(&spec, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combined_control_is_saturated_and_pull_only(
        samples in proptest::collection::vec(-90.0f64..90.0, 1..120)
    ) {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        c.set_mode(ControllerMode::FullyFrozen);
        let mut last = f64::NEG_INFINITY;
        for y in samples {
            let (u, rec) = c.step(y).unwrap();
            prop_assert!(u.u_f.abs() <= 1.0);
            prop_assert_eq!(u.u_f, (u.u_e + u.u_x).clamp(-1.0, 1.0));
            let w = WinchForces::from_control(u.u_f);
            prop_assert_eq!(w.fore * w.aft, 0.0);
            prop_assert!(rec.time > last);
            last = rec.time;
        }
    }

    #[test]
    fn nan_samples_never_reach_the_weights(mask in proptest::collection::vec(proptest::bool::weighted(0.2), 1..80)) {
        let cfg = ControllerConfig {
            reference: wingpitch::signals::ReferenceSignal::constant(0.0),
            ..ControllerConfig::default()
        };
        let mut c = Controller::new(cfg).unwrap();
        let mut nans = 0;
        for (k, dropped) in mask.into_iter().enumerate() {
            let t = k as f64 * 0.05;
            let y = if dropped { f64::NAN } else { 0.05 * (0.7 * t).sin() };
            nans += dropped as u64;
            let (_, rec) = c.step(y).unwrap();
            prop_assert_eq!(rec.fault, dropped);
            prop_assert!(c.snapshot().is_finite());
        }
        prop_assert_eq!(c.faults(), nans);
    }
}
