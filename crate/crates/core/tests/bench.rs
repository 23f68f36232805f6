use mvalse::bench::{run_monte_carlo, run_monte_carlo_detailed, Preset, ScenarioConfig, Sweep, SweepVariable};
use mvalse::Executor;

fn small() -> ScenarioConfig {
    ScenarioConfig {
        trials: 12,
        rng_seed: 3,
        ..ScenarioConfig::default()
    }
}

#[test]
fn rows_follow_the_sweep_and_agree_with_their_trials() {
    let sweep = Sweep::single(SweepVariable::SnrDb, vec![0.0, 10.0]).then(SweepVariable::Snapshots, vec![2.0, 4.0]);
    let points = run_monte_carlo_detailed(&small(), &sweep, &Executor::new(3).unwrap(), false).unwrap();
    assert_eq!(points.len(), 4);
    let order: Vec<(f64, f64)> = points.iter().map(|p| (p.row.point[0].1, p.row.point[1].1)).collect();
    assert_eq!(order, vec![(0.0, 2.0), (0.0, 4.0), (10.0, 2.0), (10.0, 4.0)]);
    for p in &points {
        assert_eq!(p.config.snapshots as f64, p.row.point[1].1);
        assert_eq!(p.trials.len(), 12);
        let mean_db = |v: Vec<f64>| 10.0 * (v.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() / v.len() as f64).log10();
        let x: Vec<f64> = p.trials.iter().filter_map(|t| t.nmse_x_db).collect();
        assert!((p.row.nmse_x_db.unwrap() - mean_db(x)).abs() < 1e-9);
        let correct = p.trials.iter().filter(|t| t.k_hat == t.k).count() as f64 / 12.0;
        assert_eq!(p.row.p_correct, correct);
        let over = p.trials.iter().filter(|t| t.k_hat > t.k).count() as f64 / 12.0;
        assert_eq!(p.row.p_over, over);
        assert_eq!(p.row.runtime_seconds, 0.0);
    }
}

#[test]
fn sweep_points_share_their_frequencies() {
    let sweep = Sweep::single(SweepVariable::SnrDb, vec![-5.0, 5.0, 15.0]);
    let points = run_monte_carlo_detailed(&small(), &sweep, &Executor::sequential(), false).unwrap();
    for t in 0..12 {
        assert_eq!(points[0].trials[t].true_thetas, points[2].trials[t].true_thetas);
    }
}

#[test]
fn error_falls_with_snr() {
    let sweep = Sweep::single(SweepVariable::SnrDb, vec![0.0, 10.0, 20.0]);
    let rows = run_monte_carlo(&small(), &sweep, &Executor::sequential(), false).unwrap();
    let x: Vec<f64> = rows.iter().map(|r| r.nmse_x_db.unwrap()).collect();
    assert!(x[0] > x[1] && x[1] > x[2], "{x:?}");
}

#[test]
fn empty_axis_gives_no_rows() {
    let sweep = Sweep::single(SweepVariable::SnrDb, vec![]);
    assert!(run_monte_carlo(&small(), &sweep, &Executor::sequential(), false).unwrap().is_empty());
}

#[test]
fn bad_sweep_value_is_rejected() {
    let sweep = Sweep::single(SweepVariable::Snapshots, vec![0.0]);
    assert!(run_monte_carlo(&small(), &sweep, &Executor::sequential(), false).is_err());
}

#[test]
fn preset_names_round_trip() {
    for p in Preset::ALL {
        assert_eq!(Preset::parse(p.name()).unwrap(), p);
        assert!(p.scenario().validate().is_ok());
        assert!(!p.sweep().points().is_empty());
    }
    assert!(Preset::parse("nope").is_err());
    for v in [SweepVariable::SnrDb, SweepVariable::Groups, SweepVariable::PriorKappa0] {
        assert_eq!(SweepVariable::parse(v.name()).unwrap(), v);
    }
}
