//! Timing of the map in Taylor and numerical strips, in CPU-sec.

use std::hint::black_box;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::cpusec::{cpu_sec_calibrate_with, thread_cpu_time, CALIBRATION_TERMS};
use crate::error::Result;
use crate::integrators::{Dynamics, MapMode, Method, TideEval};
use crate::model::State;
use crate::strips::StripKind;

/// Iteration count the timings are quoted for.
pub const QUOTED_ITERATIONS: f64 = 1e5;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenchConfig {
    /// Starting states per measurement.
    pub samples: usize,
    /// Map iterations per Taylor-strip sample.
    pub taylor_iterations: u64,
    /// Map iterations per numerical-strip sample.
    pub rk_iterations: u64,
    /// Single tidal evaluations timed for the exact/fast ratio.
    pub tide_evaluations: usize,
    pub calibration_terms: u64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            samples: 20,
            taylor_iterations: 2000,
            rk_iterations: 200,
            tide_evaluations: 200_000,
            calibration_terms: CALIBRATION_TERMS,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub strip: StripKind,
    /// Mean CPU-sec for `QUOTED_ITERATIONS` iterations.
    pub cpu_sec: f64,
    pub samples_used: usize,
    pub samples_rejected: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    /// Thread seconds per CPU-sec, two consecutive calibrations.
    pub calibration: [f64; 2],
    pub rows: Vec<BenchRow>,
    pub taylor_vs_rk_fast: f64,
    pub rk_exact_vs_fast: f64,
    /// Exact over fast single tidal evaluation time.
    pub tide_exact_vs_fast: f64,
}

fn time_rows(
    dynamics: &Dynamics,
    mode: MapMode,
    kind: StripKind,
    iterations: u64,
    starts: &[State],
    unit: f64,
) -> Result<(f64, usize, usize)> {
    let layout = dynamics.layout();
    let mut total = 0.0;
    let (mut used, mut rejected) = (0, 0);
    for &start in starts {
        let mut prop = dynamics.propagator(mode);
        let mut state = start;
        let mut stayed = true;
        let t0 = thread_cpu_time();
        for _ in 0..iterations {
            state = prop.map(state)?;
            // Runs that change strip type are discarded, so keep checking.
            match layout.locate(state.theta_dot) {
                Some(i) if layout.get(i).kind == kind => {}
                _ => stayed = false,
            }
        }
        let elapsed = thread_cpu_time() - t0;
        if stayed {
            total += elapsed / iterations as f64;
            used += 1;
        } else {
            rejected += 1;
        }
    }
    let mean = if used > 0 {
        total / used as f64
    } else {
        f64::NAN
    };
    Ok((mean * QUOTED_ITERATIONS / unit, used, rejected))
}

fn starts_in(
    dynamics: &Dynamics,
    kind: StripKind,
    count: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<State> {
    let n = dynamics.model().n();
    let strips: Vec<_> = dynamics
        .layout()
        .strips()
        .iter()
        .filter(|s| s.kind == kind)
        .collect();
    let measure: f64 = strips.iter().map(|s| s.width()).sum();
    (0..count)
        .map(|_| {
            // Uniform over the union of strips of this kind, kept off the edges.
            let mut u = rng.gen::<f64>() * measure;
            let mut chosen = strips[strips.len() - 1];
            for s in &strips {
                if u < s.width() {
                    chosen = s;
                    break;
                }
                u -= s.width();
            }
            let (lo, hi) = chosen.range();
            let margin = 0.2 * (hi - lo);
            let ratio = rng.gen_range(lo + margin..hi - margin);
            State::new(rng.gen::<f64>() * std::f64::consts::PI, ratio * n, 0.0)
        })
        .collect()
}

pub fn run_bench(dynamics: &Dynamics, cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let first = cpu_sec_calibrate_with(cfg.calibration_terms);
    let taylor_starts = starts_in(dynamics, StripKind::H, cfg.samples, &mut rng);
    let rk_starts = starts_in(dynamics, StripKind::N, cfg.samples, &mut rng);

    let hybrid = MapMode::default();
    let exact = MapMode {
        method: Method::Hybrid,
        tide: TideEval::Exact,
    };
    let (taylor, tu, tr) = time_rows(
        dynamics,
        hybrid,
        StripKind::H,
        cfg.taylor_iterations,
        &taylor_starts,
        first,
    )?;
    let (rk_fast, fu, fr) = time_rows(
        dynamics,
        hybrid,
        StripKind::N,
        cfg.rk_iterations,
        &rk_starts,
        first,
    )?;
    let (rk_exact, eu, er) = time_rows(
        dynamics,
        exact,
        StripKind::N,
        cfg.rk_iterations,
        &rk_starts,
        first,
    )?;

    let n = dynamics.model().n();
    let points: Vec<f64> = (0..cfg.tide_evaluations)
        .map(|_| rng.gen_range(0.0..5.0 * n))
        .collect();
    let model = dynamics.model();
    let fast = dynamics.fast_tide();
    let t0 = thread_cpu_time();
    let mut acc = 0.0;
    for &x in &points {
        acc += model.accel_tide_exact(black_box(x));
    }
    black_box(acc);
    let exact_time = thread_cpu_time() - t0;
    let t0 = thread_cpu_time();
    let mut acc = 0.0;
    for &x in &points {
        acc += fast.eval(black_box(x));
    }
    black_box(acc);
    let fast_time = thread_cpu_time() - t0;

    let second = cpu_sec_calibrate_with(cfg.calibration_terms);
    let row = |label: &str, strip, cpu_sec, used, rejected| BenchRow {
        label: label.to_string(),
        strip,
        cpu_sec,
        samples_used: used,
        samples_rejected: rejected,
    };
    Ok(BenchReport {
        calibration: [first, second],
        taylor_vs_rk_fast: rk_fast / taylor,
        rk_exact_vs_fast: rk_exact / rk_fast,
        tide_exact_vs_fast: exact_time / fast_time,
        rows: vec![
            row("Runge-Kutta, exact tide", StripKind::N, rk_exact, eu, er),
            row("Runge-Kutta, fast tide", StripKind::N, rk_fast, fu, fr),
            row("Taylor", StripKind::H, taylor, tu, tr),
        ],
    })
}
