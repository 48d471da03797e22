use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use spinorbit::capture::CaptureReport;
use spinorbit::integrators::IterationCounts;
use spinorbit::montecarlo::{confidence_half_width, summarize, Checkpoint, TrajectoryOutcome};
use spinorbit::{
    run_campaign, sample_initial, CampaignConfig, CaptureConfig, Dynamics, MapMode, Model,
};

fn dynamics() -> &'static Dynamics {
    static CELL: OnceLock<Dynamics> = OnceLock::new();
    CELL.get_or_init(|| Dynamics::with_defaults(Model::mercury().unwrap()).unwrap())
}

// Loose thresholds so short runs finish with a mix of captured and
// uncaptured outcomes.
fn quick(trajectories: u64, workers: usize) -> CampaignConfig {
    CampaignConfig {
        trajectories,
        seed: 17,
        workers,
        capture: CaptureConfig {
            block_len: 40,
            blocks: 2,
            eps_mean: 0.05,
            eps_slope: 2e-3,
            max_iterations: 400,
        },
        calibration_terms: 10_000,
        recalibrate: false,
        checkpoint_every: 1,
    }
}

fn keys(outcomes: &[TrajectoryOutcome]) -> Vec<(u64, u64, u64, Option<i64>, u64)> {
    outcomes
        .iter()
        .map(TrajectoryOutcome::outcome_key)
        .collect()
}

#[test]
fn worker_count_does_not_change_outcomes() {
    let d = dynamics();
    let one = run_campaign(d, MapMode::default(), &quick(12, 1), Vec::new(), None).unwrap();
    let eight = run_campaign(d, MapMode::default(), &quick(12, 8), Vec::new(), None).unwrap();
    assert_eq!(keys(&one), keys(&eight));
    let counts = |o: &[TrajectoryOutcome]| o.iter().map(|t| t.counts).collect::<Vec<_>>();
    assert_eq!(counts(&one), counts(&eight));
    assert!(one.iter().all(|o| o.error.is_none()));
    let report = summarize(&one);
    let captured: u64 = report.attractors.iter().map(|r| r.count).sum();
    assert_eq!(captured + report.uncaptured + report.failed, 12);
}

#[test]
fn resumed_campaign_matches_uninterrupted_run() {
    let d = dynamics();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.checkpoint.jsonl");
    let cfg = quick(8, 2);
    let full = {
        let cp = Checkpoint::open(&path, 1).unwrap();
        run_campaign(d, MapMode::default(), &cfg, Vec::new(), Some(&cp)).unwrap()
    };
    assert_eq!(Checkpoint::load(&path).unwrap().len(), 8);

    // Keep three records and a torn fourth line, as after a crash.
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let torn = format!(
        "{}\n{}",
        lines[..3].join("\n"),
        &lines[3][..lines[3].len() / 2]
    );
    std::fs::write(&path, torn).unwrap();
    let done = Checkpoint::load(&path).unwrap();
    assert_eq!(done.len(), 3);

    let resumed = run_campaign(d, MapMode::default(), &cfg, done, None).unwrap();
    assert_eq!(keys(&resumed), keys(&full));
}

#[test]
fn draws_cover_the_domain_with_uniform_moments() {
    let n = 26.0879;
    let draws = 100_000u64;
    let (mut sum_theta, mut sum_rate) = (0.0, 0.0);
    for i in 0..draws {
        let s = sample_initial(5, i, n);
        assert!((0.0..=PI).contains(&s.theta) && (0.0..=5.0 * n).contains(&s.theta_dot));
        assert_eq!(s.t, 0.0);
        sum_theta += s.theta;
        sum_rate += s.theta_dot;
    }
    let m = draws as f64;
    let sd_theta = PI / 12f64.sqrt() / m.sqrt();
    let sd_rate = 5.0 * n / 12f64.sqrt() / m.sqrt();
    assert!((sum_theta / m - PI / 2.0).abs() <= 3.0 * sd_theta);
    assert!((sum_rate / m - 2.5 * n).abs() <= 3.0 * sd_rate);
}

#[test]
fn rate_marginal_passes_kolmogorov_smirnov() {
    let n = 26.0879;
    let draws = 20_000usize;
    // Asymptotic 1% critical value of the one-sample statistic.
    let critical = 1.628 / (draws as f64).sqrt();
    for seed in [3u64, 4, 99] {
        let mut u: Vec<f64> = (0..draws as u64)
            .map(|i| sample_initial(seed, i, n).theta_dot / (5.0 * n))
            .collect();
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / draws as f64 - x).max(x - i as f64 / draws as f64))
            .fold(0.0, f64::max);
        assert!(d < critical, "seed {seed}: {d}");
    }
}

fn synthetic(index: u64, attractor: Option<i64>, failed: bool) -> TrajectoryOutcome {
    TrajectoryOutcome {
        index,
        theta0: 0.1 * index as f64,
        theta_dot0: 1.0,
        capture: CaptureReport {
            captured: attractor.is_some(),
            attractor_2p: attractor,
            capture_iteration: 80_000,
            blocks_processed: 8,
            cpu_seconds: attractor.map(|a| 100.0 * a as f64),
            last_mean: None,
            last_slope: None,
        },
        counts: IterationCounts {
            h_iterations: 9,
            n_iterations: 1,
            ..Default::default()
        },
        cpu_seconds: 1.0,
        error: failed.then(|| "integration failed".to_string()),
    }
}

#[test]
fn single_trajectory_report_is_degenerate() {
    let report = summarize(&[synthetic(0, Some(3), false)]);
    assert_eq!(report.attractors.len(), 1);
    let row = &report.attractors[0];
    assert_eq!(
        (row.attractor_2p, row.count, row.p_hat, row.delta_p),
        (3, 1, 1.0, 0.0)
    );
    assert_eq!(row.ratio, 1.5);
    assert_eq!(report.uncaptured_fraction, 0.0);
    let t = report.timing.unwrap();
    assert_eq!((t.mean, t.sd, t.min, t.max), (300.0, 0.0, 300.0, 300.0));
}

#[test]
fn interval_half_width_matches_quoted_value() {
    assert!((confidence_half_width(0.5, 57_600) - 0.0041).abs() < 5e-5);
}

#[test]
fn failures_leave_the_denominator() {
    let outcomes = vec![
        synthetic(0, Some(3), false),
        synthetic(1, Some(2), false),
        synthetic(2, None, true),
        synthetic(3, None, false),
    ];
    let report = summarize(&outcomes);
    assert_eq!(
        (report.trajectories, report.failed, report.uncaptured),
        (4, 1, 1)
    );
    assert!(report
        .attractors
        .iter()
        .all(|r| (r.p_hat - 1.0 / 3.0).abs() < 1e-15));
    assert_eq!(report.iterations.h_iterations, 27);
}

#[test]
fn invalid_campaigns_are_rejected() {
    let d = dynamics();
    for cfg in [
        CampaignConfig {
            trajectories: 0,
            ..quick(1, 1)
        },
        CampaignConfig {
            workers: 0,
            ..quick(1, 1)
        },
    ] {
        assert!(run_campaign(d, MapMode::default(), &cfg, Vec::new(), None).is_err());
    }
}

proptest! {
    #[test]
    fn probabilities_normalize_and_match_interval_formula(
        labels in prop::collection::vec(prop::option::of(0i64..10), 1..200),
    ) {
        let outcomes: Vec<_> = labels
            .iter()
            .enumerate()
            .map(|(i, &a)| synthetic(i as u64, a, false))
            .collect();
        let report = summarize(&outcomes);
        let total: f64 = report.attractors.iter().map(|r| r.p_hat).sum::<f64>()
            + report.uncaptured_fraction;
        prop_assert!((total - 1.0).abs() < 1e-12);
        let count: u64 = report.attractors.iter().map(|r| r.count).sum::<u64>() + report.uncaptured;
        prop_assert_eq!(count, labels.len() as u64);
        for r in &report.attractors {
            let expect = 1.96 * (r.p_hat * (1.0 - r.p_hat) / labels.len() as f64).sqrt();
            prop_assert!((r.delta_p - expect).abs() <= 1e-15);
        }
        let mut reversed = outcomes.clone();
        reversed.reverse();
        prop_assert_eq!(summarize(&reversed), report);
    }
}
