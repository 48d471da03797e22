//! Fixed-step Taylor series stepper for the Taylor (H) strips.
//!
//! Coefficients are propagated in the scaled form `y_k = theta^(k) h^k / k!`
//! over one sub-step of length `h`. The triaxial forcing enters through
//! precomputed expansions of `sum w cos(omega t)` and `sum w sin(omega t)`
//! at each sub-step start; the tidal term through a degree-25 polynomial in
//! `theta_dot` about the strip centre.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::strips::Strip;

use super::submap::SubstepMap;

/// Largest series degree the scratch buffers hold.
pub const MAX_SERIES_DEGREE: usize = 30;
const JET_LEN: usize = MAX_SERIES_DEGREE + 2;
// Tidal jet terms whose worst-case size falls below this are skipped.
const TIDE_JET_CUTOFF: f64 = 1e-20;

/// Expansions of the triaxial forcing at every sub-step start.
#[derive(Debug, Clone)]
pub struct Forcing {
    order: usize,
    // [substep][k] for the cosine and sine sums.
    cos_sum: Vec<f64>,
    sin_sum: Vec<f64>,
}

impl Forcing {
    pub fn new(model: &Model, substeps: usize, order: usize) -> Self {
        let period = model.params().period();
        let h = period / substeps as f64;
        let n = model.n();
        let mut cos_sum = vec![0.0; substeps * (order + 1)];
        let mut sin_sum = vec![0.0; substeps * (order + 1)];
        for i in 0..substeps {
            for term in model.tri_terms() {
                // Phase harmonic * n * i * h reduced exactly on the sub-step grid.
                let cycle = (term.harmonic as i64 * i as i64).rem_euclid(substeps as i64);
                let phase = 2.0 * PI * cycle as f64 / substeps as f64;
                let (s0, c0) = phase.sin_cos();
                let rate = term.harmonic as f64 * n * h;
                let mut scale = term.weight;
                for k in 0..=order {
                    if k > 0 {
                        scale *= rate / k as f64;
                    }
                    // k-th derivative shifts the phase by k pi / 2.
                    let (c, s) = match k % 4 {
                        0 => (c0, s0),
                        1 => (-s0, c0),
                        2 => (-c0, -s0),
                        _ => (s0, -c0),
                    };
                    cos_sum[i * (order + 1) + k] += scale * c;
                    sin_sum[i * (order + 1) + k] += scale * s;
                }
            }
        }
        Forcing {
            order,
            cos_sum,
            sin_sum,
        }
    }

    pub(crate) fn at(&self, substep: usize) -> (&[f64], &[f64]) {
        let lo = substep * (self.order + 1);
        let hi = lo + self.order + 1;
        (&self.cos_sum[lo..hi], &self.sin_sum[lo..hi])
    }
}

/// The same sums expanded about every sub-step midpoint, in the offset
/// from the midpoint over half a sub-step. Runge-Kutta stages inside a
/// sub-step read these instead of running the harmonic recurrence.
#[derive(Debug, Clone)]
pub(crate) struct MidForcing {
    order: usize,
    // [substep][k] as (cosine sum, sine sum).
    coeffs: Vec<(f64, f64)>,
}

impl MidForcing {
    pub(crate) fn new(model: &Model, substeps: usize) -> Self {
        let half = model.params().period() / substeps as f64 / 2.0;
        let n = model.n();
        let top = model
            .tri_terms()
            .iter()
            .map(|t| (t.harmonic as f64 * n * half).abs())
            .fold(0.0, f64::max);
        // Lowest order whose first dropped term is negligible at the ends.
        let mut order = 1;
        let mut bound = top;
        while order < 80 {
            bound *= top / (order + 1) as f64;
            if bound < 1e-19 {
                break;
            }
            order += 1;
        }
        let mut coeffs = vec![(0.0, 0.0); substeps * (order + 1)];
        let cycles = 2 * substeps as i64;
        for i in 0..substeps {
            for term in model.tri_terms() {
                let cycle = (term.harmonic as i64 * (2 * i as i64 + 1)).rem_euclid(cycles);
                let (s0, c0) = (2.0 * PI * cycle as f64 / cycles as f64).sin_cos();
                let rate = term.harmonic as f64 * n * half;
                let mut scale = term.weight;
                for k in 0..=order {
                    if k > 0 {
                        scale *= rate / k as f64;
                    }
                    let (c, s) = match k % 4 {
                        0 => (c0, s0),
                        1 => (-s0, c0),
                        2 => (-c0, -s0),
                        _ => (s0, -c0),
                    };
                    let slot = &mut coeffs[i * (order + 1) + k];
                    slot.0 += scale * c;
                    slot.1 += scale * s;
                }
            }
        }
        MidForcing { order, coeffs }
    }

    /// Cosine and sine sums at offset `u` in `[-1, 1]` of sub-step `substep`.
    #[inline]
    pub(crate) fn eval(&self, substep: usize, u: f64) -> (f64, f64) {
        let lo = substep * (self.order + 1);
        let (mut a, mut b) = (0.0, 0.0);
        for &(c, s) in self.coeffs[lo..=lo + self.order].iter().rev() {
            a = a * u + c;
            b = b * u + s;
        }
        (a, b)
    }
}

/// Per-strip data for the Taylor stepper.
#[derive(Debug, Clone)]
pub struct HemStrip {
    lo: f64,
    hi: f64,
    center: f64,
    series_degree: usize,
    // Tidal polynomial in theta_dot - center, pruned.
    tide: Vec<f64>,
    // Bound on |theta_dot - theta_dot_start| within one sub-step.
    drift: f64,
    maps: Vec<SubstepMap>,
}

impl HemStrip {
    pub fn new(model: &Model, strip: &Strip, h: f64, prune: f64) -> Result<Self> {
        let n = model.n();
        let (lo, hi) = strip.range();
        let series_degree = strip.series_degree.unwrap_or(0) as usize;
        let tide_degree = strip.tide_degree.unwrap_or(0);
        if series_degree < 1 || series_degree > MAX_SERIES_DEGREE {
            return Err(Error::Config(format!(
                "series degree {series_degree} outside 1..={MAX_SERIES_DEGREE}"
            )));
        }
        let center = strip.center() * n;
        let mut tide = model.tide_series(center, tide_degree + 1)?;
        let radius = 0.5 * (hi - lo) * n * 1.05;
        let mut reach = 0.0;
        for (m, c) in tide.iter_mut().enumerate() {
            let size = c.abs() * radius.powi(m as i32);
            if size < prune {
                *c = 0.0;
            } else {
                reach += size;
            }
        }
        while tide.len() > 1 && *tide.last().unwrap() == 0.0 {
            tide.pop();
        }
        let drift = 1.5 * (model.triax_bound() + reach) * h;
        Ok(HemStrip {
            lo: lo * n,
            hi: hi * n,
            center,
            series_degree,
            tide,
            drift,
            maps: Vec::new(),
        })
    }

    /// Compile the per-sub-step polynomial maps.
    pub fn compile(&mut self, forcing: &Forcing, substeps: usize, h: f64, prune: f64) {
        self.maps = (0..substeps)
            .map(|i| SubstepMap::build(self, forcing, i, h, prune))
            .collect();
    }

    pub fn maps(&self) -> &[SubstepMap] {
        &self.maps
    }

    /// Expansion point in rad/yr.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn series_degree(&self) -> usize {
        self.series_degree
    }

    pub fn tide_coeffs(&self) -> &[f64] {
        &self.tide
    }

    pub fn contains(&self, theta_dot: f64) -> bool {
        theta_dot >= self.lo && theta_dot <= self.hi
    }
}

/// Reusable buffers for one trajectory.
#[derive(Debug, Clone)]
pub struct HemScratch {
    y: [f64; JET_LEN],
    sin2: [f64; JET_LEN],
    cos2: [f64; JET_LEN],
    drift: [f64; JET_LEN],
    shifted: Vec<f64>,
    // powers[m - 1][k] = k-th coefficient of drift^m.
    powers: Vec<[f64; JET_LEN]>,
}

impl Default for HemScratch {
    fn default() -> Self {
        HemScratch {
            y: [0.0; JET_LEN],
            sin2: [0.0; JET_LEN],
            cos2: [0.0; JET_LEN],
            drift: [0.0; JET_LEN],
            shifted: Vec::with_capacity(32),
            powers: vec![[0.0; JET_LEN]; JET_LEN],
        }
    }
}

/// Advance `(theta, theta_dot)` by one sub-step of length `h` starting at
/// sub-step index `substep`, running the Taylor recursion directly.
pub fn jet_step(
    strip: &HemStrip,
    forcing: &Forcing,
    substep: usize,
    theta: f64,
    theta_dot: f64,
    h: f64,
    scratch: &mut HemScratch,
) -> (f64, f64) {
    let degree = strip.series_degree;
    debug_assert!(degree < forcing.order + 1);
    let (cos_sum, sin_sum) = forcing.at(substep);

    // Tidal polynomial re-centred at the starting rate.
    let b = &mut scratch.shifted;
    b.clear();
    b.extend_from_slice(&strip.tide);
    let shift = theta_dot - strip.center;
    let top = b.len() - 1;
    for i in 0..top {
        for j in (i..top).rev() {
            b[j] += shift * b[j + 1];
        }
    }
    let mut tide_order = 0;
    let mut reach = 1.0;
    for (m, c) in b.iter().enumerate().skip(1) {
        reach *= strip.drift;
        if c.abs() * reach >= TIDE_JET_CUTOFF {
            tide_order = m;
        }
    }
    let tide_order = tide_order.min(degree);

    let y = &mut scratch.y;
    let s = &mut scratch.sin2;
    let c = &mut scratch.cos2;
    let d = &mut scratch.drift;
    let pw = &mut scratch.powers;
    let h2 = h * h;
    let inv_h = 1.0 / h;

    y[0] = theta;
    y[1] = theta_dot * h;
    let (s0, c0) = (2.0 * theta).sin_cos();
    s[0] = s0;
    c[0] = c0;
    d[0] = 0.0;

    for k in 0..degree {
        if k > 0 {
            // Jets of sin(2 theta) and cos(2 theta).
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let w = (2 * j) as f64 * y[j];
                acc_s += w * c[k - j];
                acc_c -= w * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = acc_c / k as f64;

            d[k] = (k + 1) as f64 * y[k + 1] * inv_h;
            pw[0][k] = d[k];
            for m in 2..=tide_order.min(k) {
                let mut acc = 0.0;
                for j in 1..=(k + 1 - m) {
                    acc += d[j] * pw[m - 2][k - j];
                }
                pw[m - 1][k] = acc;
            }
        }

        let mut tri = 0.0;
        for j in 0..=k {
            tri += s[j] * cos_sum[k - j] - c[j] * sin_sum[k - j];
        }
        let mut tide = if k == 0 { b[0] } else { 0.0 };
        for m in 1..=tide_order.min(k) {
            tide += b[m] * pw[m - 1][k];
        }
        y[k + 2] = h2 * (tide - tri) / ((k + 1) * (k + 2)) as f64;
    }

    let mut theta_new = 0.0;
    for k in (0..=degree).rev() {
        theta_new += y[k];
    }
    let mut rate = 0.0;
    for k in (1..=degree + 1).rev() {
        rate += k as f64 * y[k];
    }
    (theta_new, rate * inv_h)
}
