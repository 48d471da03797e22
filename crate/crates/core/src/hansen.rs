//! Hansen coefficients `X_k^{n,m}(e)` and the `G_{20q}(e)` table shared by
//! the triaxial and tidal torques.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{bessel_j, binomial_ext};

/// Truncation of the outer series used for the `G_{20q}` table.
pub const DEFAULT_G_MAX: u32 = 120;

/// Indices `q` the torques need: the union of the triaxial and tidal sums.
pub const REQUIRED_Q: RangeInclusive<i32> = -4..=7;

const CONVERGENCE_FLOOR: f64 = 1e-16;

/// Hansen coefficient `X_k^{n,m}(e)` by the Bessel double series, truncated
/// after `g_max` outer terms.
pub fn hansen_x(k: i32, n: i32, m: i32, e: f64, g_max: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::domain("eccentricity", e));
    }
    if g_max < 1 {
        return Err(Error::Config("g_max must be at least 1".into()));
    }
    if e == 0.0 {
        // z = 0: only g = 0 survives and J_{k-m}(0) = delta_{km}.
        return Ok(if k == m { 1.0 } else { 0.0 });
    }
    let z = (1.0 - (1.0 - e * e).sqrt()) / e;
    let x = k as f64 * e;
    let upper = (n + 1 + m) as i64;
    let lower = (n + 1 - m) as i64;

    let mut sum = 0.0;
    let mut zpow = 1.0;
    let mut last_term = 0.0;
    for g in 0..=g_max as i64 {
        let mut inner = 0.0;
        for h in 0..=g {
            let c = binomial_ext(upper, g - h) * binomial_ext(lower, h);
            if c == 0.0 {
                continue;
            }
            let order = (k - m) as i64 + g - 2 * h;
            inner += c * bessel_j(order as i32, x)?;
        }
        last_term = zpow * inner;
        sum += last_term;
        zpow *= -z;
    }
    if last_term.abs() > CONVERGENCE_FLOOR {
        return Err(Error::NonConvergence { last_term });
    }
    Ok((1.0 + z * z).powi(-n - 1) * sum)
}

/// `G_{20q}(e) = X_{q+2}^{-3,2}(e)` over a contiguous range of `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HansenTable {
    e: f64,
    q_min: i32,
    values: Vec<f64>,
}

impl HansenTable {
    pub fn eccentricity(&self) -> f64 {
        self.e
    }

    pub fn q_range(&self) -> RangeInclusive<i32> {
        self.q_min..=self.q_min + self.values.len() as i32 - 1
    }

    pub fn covers(&self, q: &RangeInclusive<i32>) -> bool {
        let range = self.q_range();
        range.contains(q.start()) && range.contains(q.end())
    }

    /// `G_{20q}` or `None` outside the tabulated range.
    pub fn get(&self, q: i32) -> Option<f64> {
        let idx = q.checked_sub(self.q_min)?;
        self.values.get(usize::try_from(idx).ok()?).copied()
    }

    /// Like [`HansenTable::get`] but panics when `q` is not tabulated.
    pub fn g20(&self, q: i32) -> f64 {
        self.get(q)
            .unwrap_or_else(|| panic!("q = {q} outside Hansen table {:?}", self.q_range()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.q_min + i as i32, v))
    }

    /// Indices with strictly negative coefficients.
    pub fn negative_indices(&self) -> Vec<i32> {
        self.iter()
            .filter(|&(_, v)| v < 0.0)
            .map(|(q, _)| q)
            .collect()
    }
}

/// Tabulate `G_{20q}(e)` for every `q` in `q_range` with `g_max = 120`.
pub fn build_g20_table(e: f64, q_range: RangeInclusive<i32>) -> Result<HansenTable> {
    if q_range.start() > REQUIRED_Q.start() || q_range.end() < REQUIRED_Q.end() {
        return Err(Error::Config(format!(
            "Hansen table range {q_range:?} must include {REQUIRED_Q:?}"
        )));
    }
    let values = q_range
        .clone()
        .map(|q| hansen_x(q + 2, -3, 2, e, DEFAULT_G_MAX))
        .collect::<Result<Vec<_>>>()?;
    Ok(HansenTable {
        e,
        q_min: *q_range.start(),
        values,
    })
}

/// `G_{20q}(e)` by direct quadrature over the mean anomaly:
/// `(1/2 pi) int (a/r)^3 cos(2 f - (q+2) M) dM`, trapezoidal rule with
/// `samples` points after solving Kepler's equation at each node.
pub fn g20_quadrature(e: f64, q: i32, samples: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::domain("eccentricity", e));
    }
    let k = (q + 2) as f64;
    let root = ((1.0 + e) / (1.0 - e)).sqrt();
    let mut sum = 0.0;
    for i in 0..samples {
        let mean = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let mut ecc = if e > 0.8 { std::f64::consts::PI } else { mean };
        for _ in 0..100 {
            let step = (ecc - e * ecc.sin() - mean) / (1.0 - e * ecc.cos());
            ecc -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let ratio = 1.0 / (1.0 - e * ecc.cos());
        let f = 2.0 * (root * (0.5 * ecc).tan()).atan();
        sum += ratio.powi(3) * (2.0 * f - k * mean).cos();
    }
    Ok(sum / samples as f64)
}
