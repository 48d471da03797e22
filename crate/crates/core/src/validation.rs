//! Self-checks comparing the fast paths against slower references.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fasteval::{FastTide, MAX_ABS_ERROR};
use crate::hansen::{g20_quadrature, HansenTable, REQUIRED_Q};
use crate::integrators::{reference_map, Dynamics, MapMode};
use crate::model::{Model, State};

/// Bounds on `|P_taylor - P_reference|` per component.
pub const HEM_THETA_BOUND: f64 = 3e-13;
pub const HEM_RATE_BOUND: f64 = 1.4e-12;
/// Tolerance of the reference Runge-Kutta run.
pub const REFERENCE_TOL: f64 = 1e-15;
/// Agreement required between the series and quadrature Hansen values.
pub const HANSEN_BOUND: f64 = 1e-12;
const QUADRATURE_POINTS: usize = 4096;

/// Angle difference folded into `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StripGate {
    pub strip: usize,
    pub lo: f64,
    pub hi: f64,
    pub theta_error: f64,
    pub rate_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HemGate {
    pub points_per_strip: usize,
    pub strips: Vec<StripGate>,
    pub worst_theta: f64,
    pub worst_rate: f64,
    pub pass: bool,
}

/// Compare one hybrid map iteration against the tight reference for
/// `points` uniform states in each Taylor strip.
pub fn hem_gate(dynamics: &Dynamics, points: usize, seed: u64) -> Result<HemGate> {
    let n = dynamics.model().n();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut prop = dynamics.propagator(MapMode::default());
    let mut strips = Vec::new();
    for (idx, strip) in dynamics.layout().strips().iter().enumerate() {
        if !strip.is_h() {
            continue;
        }
        let (lo, hi) = strip.range();
        let (mut theta_error, mut rate_error) = (0.0f64, 0.0f64);
        for _ in 0..points {
            let state = State::new(rng.gen::<f64>() * PI, rng.gen_range(lo..hi) * n, 0.0);
            let fast = prop.map_unreduced(state)?;
            let reference = reference_map(dynamics, state, REFERENCE_TOL)?;
            theta_error = theta_error.max(angle_diff(fast.theta, reference.theta).abs());
            rate_error = rate_error.max((fast.theta_dot - reference.theta_dot).abs());
        }
        strips.push(StripGate {
            strip: idx,
            lo,
            hi,
            theta_error,
            rate_error,
            pass: theta_error <= HEM_THETA_BOUND && rate_error <= HEM_RATE_BOUND,
        });
    }
    let worst_theta = strips.iter().map(|s| s.theta_error).fold(0.0, f64::max);
    let worst_rate = strips.iter().map(|s| s.rate_error).fold(0.0, f64::max);
    Ok(HemGate {
        points_per_strip: points,
        pass: strips.iter().all(|s| s.pass),
        strips,
        worst_theta,
        worst_rate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FastTideGate {
    pub samples: usize,
    pub max_error: f64,
    pub max_fractional_powers: u32,
    pub pass: bool,
}

/// Random comparison of the fast tidal path against the exact sum over
/// `[0, 5 n]`.
pub fn fast_tide_gate(model: &Model, fast: &FastTide, samples: usize, seed: u64) -> FastTideGate {
    let n = model.n();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut max_error: f64 = 0.0;
    let mut max_pows = 0;
    for _ in 0..samples {
        let x = rng.gen_range(0.0..=5.0 * n);
        let traced = fast.eval_traced(x);
        max_error = max_error.max((traced.value - model.accel_tide_exact(x)).abs());
        max_pows = max_pows.max(traced.fractional_powers);
    }
    FastTideGate {
        samples,
        max_error,
        max_fractional_powers: max_pows,
        pass: max_error <= MAX_ABS_ERROR && max_pows <= 1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HansenGate {
    pub e: f64,
    pub max_difference: f64,
    pub g_minus_2: f64,
    pub negative_indices: Vec<i32>,
    pub pass: bool,
}

/// Series Hansen coefficients against Kepler-equation quadrature for the
/// indices the model needs.
pub fn hansen_gate(table: &HansenTable) -> Result<HansenGate> {
    let e = table.eccentricity();
    let mut max_difference: f64 = 0.0;
    for q in REQUIRED_Q {
        let quad = g20_quadrature(e, q, QUADRATURE_POINTS)?;
        max_difference = max_difference.max((table.g20(q) - quad).abs());
    }
    let g_minus_2 = table.g20(-2);
    let negative_indices: Vec<i32> = table
        .negative_indices()
        .into_iter()
        .filter(|q| REQUIRED_Q.contains(q))
        .collect();
    let sign_ok = e == 0.0 || negative_indices == vec![-1];
    Ok(HansenGate {
        e,
        max_difference,
        g_minus_2,
        pass: max_difference <= HANSEN_BOUND && g_minus_2.abs() <= HANSEN_BOUND && sign_ok,
        negative_indices,
    })
}
