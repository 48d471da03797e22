use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinorbit::fasteval::{
    EvalPath, FastTide, COEFF_DECAY, KINK_HALFWIDTH, MAX_ABS_ERROR, SMOOTH_DEGREE,
};
use spinorbit::Model;

fn shared() -> &'static (Model, FastTide) {
    static CELL: OnceLock<(Model, FastTide)> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = Model::mercury().unwrap();
        let fast = FastTide::build(&model).unwrap();
        (model, fast)
    })
}

#[test]
fn fast_tide_tracks_exact_sum() {
    let (model, fast) = shared();
    assert!(fast.verified_error() <= MAX_ABS_ERROR);
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let x = rng.gen_range(0.0..5.0 * n);
        let traced = fast.eval_traced(x);
        assert!(traced.fractional_powers <= 1);
        worst = worst.max((traced.value - model.accel_tide_exact(x)).abs());
    }
    assert!(worst <= MAX_ABS_ERROR, "{worst:e}");
}

#[test]
fn route_selection() {
    let (model, fast) = shared();
    let n = model.n();
    let near = fast.eval_traced(1.49 * n);
    assert_eq!(near.path, EvalPath::NearKink { q: 1 });
    assert_eq!(near.fractional_powers, 1);
    let smooth = fast.eval_traced(1.25 * n);
    assert_eq!(smooth.path, EvalPath::Smooth);
    assert_eq!(smooth.fractional_powers, 0);
    let outside = fast.eval_traced(7.0 * n);
    assert_eq!(outside.path, EvalPath::Exact);
}

#[test]
fn kink_centres_agree_with_exact() {
    let (model, fast) = shared();
    for j in 1..=9 {
        let x = 0.5 * j as f64 * model.n();
        let traced = fast.eval_traced(x);
        assert!(matches!(traced.path, EvalPath::NearKink { .. }));
        assert!((traced.value - model.accel_tide_exact(x)).abs() <= MAX_ABS_ERROR);
    }
}

#[test]
fn seams_between_routes_are_continuous() {
    let (model, fast) = shared();
    let n = model.n();
    for j in 1..=9 {
        for side in [-1.0, 1.0] {
            let x = 0.5 * (j as f64 + side * KINK_HALFWIDTH) * n;
            let (a, b) = (x * (1.0 - 1e-15), x * (1.0 + 1e-15));
            let (fa, fb) = (fast.eval_traced(a), fast.eval_traced(b));
            assert_ne!(fa.path, fb.path, "no route switch at {x}");
            assert!((fa.value - fb.value).abs() <= 8e-14, "seam {j} {side}");
        }
    }
}

#[test]
fn smooth_fit_coefficients_decay() {
    let (_, fast) = shared();
    for fit in fast.smooth_fits() {
        assert_eq!(fit.degree(), SMOOTH_DEGREE);
        let c = fit.coeffs();
        let top = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            c[SMOOTH_DEGREE].abs() <= COEFF_DECAY * top,
            "{:?}",
            fit.interval()
        );
    }
    for (_, fit) in fast.kink_fits() {
        assert_eq!(fit.degree(), 7);
    }
}

#[test]
fn cache_round_trip() {
    let (model, fast) = shared();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fits.bin");
    fast.save(&path).unwrap();
    let loaded = FastTide::load(model, &path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let x = rng.gen_range(-1.0..140.0);
        assert_eq!(fast.eval(x).to_bits(), loaded.eval(x).to_bits());
    }
    // A different model must not accept the file.
    let mut cfg = spinorbit::RunConfig::default();
    cfg.set("e", "0.3").unwrap();
    let other = cfg.build_model().unwrap();
    assert!(FastTide::load(&other, &path).is_err());
}
