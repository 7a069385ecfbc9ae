//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;

use wingpitch::checks;
use wingpitch::controller::WinchForces;
use wingpitch::scenario::{
    moving_abs_error, run_with_snapshot, telemetry_to_csv, ScenarioKind, ScenarioRun, ScenarioSpec,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn describe(run: &ScenarioRun) -> String {
    let s = &run.summary;
    match &s.halt {
        Some(h) => format!("stopped at t = {:.2} s ({})", h.time, h.reason),
        None => format!(
            "abs avg error {:.4} deg over {} samples",
            s.metrics.abs_avg_error, s.metrics.samples
        ),
    }
}

fn nominal_tracking(nominal: &ScenarioRun) -> Verdict {
    let s = &nominal.summary;
    let passed = s.completed() && s.metrics.abs_avg_error <= 1.0 && s.wall_clock_s < 60.0;
    verdict(
        passed,
        format!(
            "{}, wall clock {:.2} s (need <= 1.0 deg, < 60 s)",
            describe(nominal),
            s.wall_clock_s
        ),
    )
}

fn frozen_validity(nominal: &ScenarioRun) -> Verdict {
    let mut spec = ScenarioSpec::default_for(ScenarioKind::FrozenPolicy);
    spec.seed = 2;
    let frozen = match run_with_snapshot(&spec, Some(&nominal.summary.final_snapshot)) {
        Ok(run) => run,
        Err(e) => return verdict(false, format!("frozen run failed: {e}")),
    };
    let ratio = frozen.summary.metrics.abs_avg_error / nominal.summary.metrics.abs_avg_error;
    let passed = nominal.summary.completed() && frozen.summary.completed() && ratio <= 2.5;
    verdict(
        passed,
        format!(
            "nominal: {}; frozen: {}; ratio {ratio:.3} (need <= 2.5 with a completed nominal run)",
            describe(nominal),
            describe(&frozen)
        ),
    )
}

fn disturbance_rejection() -> Verdict {
    let spec = ScenarioSpec::default_for(ScenarioKind::DisturbanceRejection);
    let run = match run_with_snapshot(&spec, None) {
        Ok(run) => run,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let end = spec.disturbance.end();
    let window = (10.0 / spec.sample_period()).round() as usize;
    let avg = moving_abs_error(&run.rows, window);
    let recovered_at = run
        .rows
        .iter()
        .zip(&avg)
        .find(|(r, a)| r.t >= end && r.t <= end + 15.0 && **a < 1.0)
        .map(|(r, _)| r.t);
    let finite = run.summary.weights_finite;
    let passed = run.summary.completed() && finite && recovered_at.is_some();
    verdict(
        passed,
        format!(
            "{}; weights finite: {finite}; 10 s average below 1 deg after {end} s: {}",
            describe(&run),
            recovered_at.map_or("never".to_string(), |t| format!("at {t:.2} s"))
        ),
    )
}

fn from_report(r: wingpitch::Result<checks::CheckReport>) -> Verdict {
    match r {
        Ok(r) => verdict(r.passed, r.detail),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn structural(runs: &[&ScenarioRun]) -> Verdict {
    let mut asym: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    let mut winch_overlap = 0usize;
    let mut rows = 0usize;
    for run in runs {
        asym = asym.max(run.summary.max_critic_asymmetry);
        for r in &run.rows {
            rows += 1;
            worst_u = worst_u.max(r.u_f.abs());
            let w = WinchForces::from_control(r.u_f);
            if r.f_fore * r.f_aft != 0.0 || w.fore != r.f_fore || w.aft != r.f_aft {
                winch_overlap += 1;
            }
        }
    }
    let learner = checks::structural_check(2000, 5);
    let (learner_ok, learner_detail) = match learner {
        Ok(r) => (r.passed, r.detail),
        Err(e) => (false, e.to_string()),
    };
    let passed = asym < 1e-12 && worst_u <= 1.0 && winch_overlap == 0 && learner_ok;
    verdict(
        passed,
        format!(
            "{rows} telemetry rows: max |u_f| {worst_u}, winch overlaps {winch_overlap}, \
             run asymmetry {asym:.1e}; {learner_detail}"
        ),
    )
}

fn determinism() -> Verdict {
    let mut identical = true;
    let mut lines = 0;
    for kind in [
        ScenarioKind::NominalLearning,
        ScenarioKind::DisturbanceRejection,
    ] {
        let spec = ScenarioSpec {
            seed: 42,
            ..ScenarioSpec::default_for(kind)
        };
        let a = run_with_snapshot(&spec, None).map(|r| telemetry_to_csv(&r.rows));
        let b = run_with_snapshot(&spec, None).map(|r| telemetry_to_csv(&r.rows));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                identical &= a == b;
                lines += a.lines().count();
            }
            _ => identical = false,
        }
    }
    let mut frozen = ScenarioSpec::default_for(ScenarioKind::NominalLearning);
    frozen.mode_schedule = vec![wingpitch::scenario::ModeSwitch {
        at: 0.0,
        mode: wingpitch::ControllerMode::FullyFrozen,
    }];
    let a = run_with_snapshot(&frozen, None).map(|r| telemetry_to_csv(&r.rows));
    let b = run_with_snapshot(&frozen, None).map(|r| telemetry_to_csv(&r.rows));
    match (a, b) {
        (Ok(a), Ok(b)) => {
            identical &= a == b;
            lines += a.lines().count();
        }
        _ => identical = false,
    }
    verdict(
        identical,
        format!("three scenario pairs, {lines} CSV lines per copy, byte-identical: {identical}"),
    )
}

fn main() -> ExitCode {
    let nominal = run_with_snapshot(
        &ScenarioSpec::default_for(ScenarioKind::NominalLearning),
        None,
    )
    .expect("nominal scenario is well formed");
    let mut frozen_spec = ScenarioSpec::default_for(ScenarioKind::NominalLearning);
    frozen_spec.mode_schedule = vec![wingpitch::scenario::ModeSwitch {
        at: 0.0,
        mode: wingpitch::ControllerMode::FullyFrozen,
    }];
    let frozen_initial =
        run_with_snapshot(&frozen_spec, None).expect("frozen scenario is well formed");

    let results = [
        ("1 nominal tracking", nominal_tracking(&nominal)),
        ("2 frozen-policy validity", frozen_validity(&nominal)),
        ("3 disturbance rejection", disturbance_rejection()),
        (
            "4 monotone bounded values",
            from_report(checks::monotone_values_check()),
        ),
        (
            "5 oracle equivalence",
            from_report(checks::oracle_equivalence_check(2000, 7)),
        ),
        (
            "6 gradient checks",
            from_report(checks::gradient_check(100, 11)),
        ),
        (
            "7 structural invariants",
            structural(&[&nominal, &frozen_initial]),
        ),
        ("8 determinism", determinism()),
        (
            "9 integrator order",
            from_report(checks::integrator_check()),
        ),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!(
            "{} criterion {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
