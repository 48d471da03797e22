//! Fast tidal acceleration from piecewise Chebyshev fits.
//!
//! Away from the kinks the whole tidal sum is replaced by a degree-25 fit.
//! Within `|2 theta_dot / n - j| < 0.08` of kink `j`, the kink's own term is
//! evaluated exactly and the remaining terms come from a degree-7 fit, so
//! at most one fractional power is taken per evaluation.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::Model;

pub const SMOOTH_DEGREE: usize = 25;
pub const KINK_DEGREE: usize = 7;
/// Half-width of the near-kink zone in units of `2 theta_dot / n`.
pub const KINK_HALFWIDTH: f64 = 0.08;
/// Bound on `|fast - exact|`.
pub const MAX_ABS_ERROR: f64 = 4e-14;
/// Default coverage in units of `theta_dot / n`.
pub const DEFAULT_DOMAIN: (f64, f64) = (-1.5, 5.5);

const VERIFY_POINTS: usize = 10_000;
// Sub-intervals are split until a cheap probe shows this much headroom.
const BUILD_TARGET: f64 = 1e-14;
const PROBE_POINTS: usize = 400;
const MAX_SPLIT_DEPTH: u32 = 12;
/// Smooth fits are also split until the last coefficient is this small
/// relative to the largest, so the degree is visibly sufficient.
pub const COEFF_DECAY: f64 = 1e-12;

/// Chebyshev expansion on `[lo, hi]` (in rad/yr).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebFit {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
    // Same series as low(u) + 2 T_m(u) high(u), two short independent
    // Clenshaw chains instead of one long one.
    #[serde(skip)]
    split: Option<(Vec<f64>, Vec<f64>)>,
}

const SPLIT_MIN_DEGREE: usize = 12;

impl ChebFit {
    /// Interpolate `f` at the `degree + 1` Chebyshev-Gauss nodes.
    pub fn fit(lo: f64, hi: f64, degree: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Config(format!(
                "degenerate fit interval [{lo}, {hi}]"
            )));
        }
        let count = degree + 1;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let samples: Vec<f64> = (0..count)
            .map(|j| f(mid + half * (PI * (j as f64 + 0.5) / count as f64).cos()))
            .collect();
        let coeffs = (0..count)
            .map(|k| {
                let sum: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(j, s)| s * (PI * k as f64 * (j as f64 + 0.5) / count as f64).cos())
                    .sum();
                let c = 2.0 * sum / count as f64;
                if k == 0 {
                    0.5 * c
                } else {
                    c
                }
            })
            .collect();
        Ok(ChebFit::from_coeffs(lo, hi, coeffs))
    }

    pub(crate) fn from_coeffs(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        let degree = coeffs.len() - 1;
        let split = (degree >= SPLIT_MIN_DEGREE).then(|| {
            // T_m T_k = (T_{m+k} + T_{|m-k|}) / 2 folds the top half onto T_m.
            let m = (degree + 1) / 2;
            let mut low = coeffs[..m].to_vec();
            let mut high = coeffs[m..].to_vec();
            high[0] *= 0.5;
            for k in 1..high.len() {
                low[m.abs_diff(k)] -= coeffs[m + k];
            }
            (low, high)
        });
        ChebFit {
            lo,
            hi,
            coeffs,
            split,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let u = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        match &self.split {
            None => clenshaw(&self.coeffs, u),
            Some((low, high)) => {
                let (mut t0, mut t1) = (1.0, u);
                for _ in 1..low.len() {
                    (t0, t1) = (t1, 2.0 * u * t1 - t0);
                }
                clenshaw(low, u) + 2.0 * t1 * clenshaw(high, u)
            }
        }
    }
}

#[inline]
fn clenshaw(coeffs: &[f64], u: f64) -> f64 {
    let two_u = 2.0 * u;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs[1..].iter().rev() {
        let b0 = two_u * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + coeffs[0]
}

const LOOKUP_CELLS: usize = 1024;
const ROUND_SHIFT: f64 = 1024.0;

// Uniform cells over `[lo, hi]`, each holding the first fit whose upper end
// reaches the cell's start.
fn cell_table(upper: &[f64], lo: f64, hi: f64) -> (Vec<u16>, f64) {
    let scale = LOOKUP_CELLS as f64 / (hi - lo);
    let cells = (0..LOOKUP_CELLS)
        .map(|c| {
            let start = lo + c as f64 / scale;
            upper.partition_point(|&u| u < start).min(upper.len() - 1) as u16
        })
        .collect();
    (cells, scale)
}

/// Which evaluation route a fast lookup took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    /// Smooth fit of the whole sum.
    Smooth,
    /// Exact own-kink term plus remainder fit; carries the kink's `q`.
    NearKink { q: i32 },
    /// Outside the covered domain: exact sum.
    Exact,
}

/// A traced evaluation: value, route and fractional powers taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedEval {
    pub value: f64,
    pub path: EvalPath,
    pub fractional_powers: u32,
}

#[derive(Debug, Clone)]
struct KinkZone {
    q: i32,
    remainder: ChebFit,
}

/// Piecewise Chebyshev representation of the tidal acceleration.
#[derive(Debug, Clone)]
pub struct FastTide {
    model: Model,
    inv_n: f64,
    domain: (f64, f64),
    smooth_fits: Vec<ChebFit>,
    // Upper ends of `smooth_fits`.
    smooth_upper: Vec<f64>,
    // First smooth fit reaching each cell of a uniform grid over the domain.
    cells: Vec<u16>,
    cell_scale: f64,
    // Indexed by j = 2 theta_dot / n rounded; `None` where no kink sits.
    zones: Vec<Option<KinkZone>>,
    zone_offset: i64,
    max_error: f64,
}

impl FastTide {
    /// Build the fits over the default domain and verify the error bound.
    pub fn build(model: &Model) -> Result<Self> {
        Self::build_on(model, DEFAULT_DOMAIN)
    }

    /// Build over `domain` (in units of `theta_dot / n`).
    pub fn build_on(model: &Model, domain: (f64, f64)) -> Result<Self> {
        let n = model.n();
        if !(domain.1 > domain.0 && domain.0 > -0.25 * ROUND_SHIFT && domain.1 < 0.25 * ROUND_SHIFT)
        {
            return Err(Error::Config(format!(
                "unsupported fast-tide domain {domain:?}"
            )));
        }
        // Everything below is in s = 2 theta_dot / n.
        let (s_lo, s_hi) = (2.0 * domain.0, 2.0 * domain.1);
        let kink_js: Vec<i64> = model
            .tide_terms()
            .iter()
            .map(|t| (t.q + 2) as i64)
            .filter(|&j| (j as f64) > s_lo && (j as f64) < s_hi)
            .collect();
        let to_rate = |s: f64| 0.5 * s * n;
        let exact = |x: f64| model.accel_tide_exact(x);

        let mut zones_raw = Vec::new();
        let mut smooth_regions = Vec::new();
        let mut cursor = s_lo;
        for &j in &kink_js {
            let zone_lo = (j as f64 - KINK_HALFWIDTH).max(s_lo);
            let zone_hi = (j as f64 + KINK_HALFWIDTH).min(s_hi);
            if zone_lo > cursor {
                smooth_regions.push((cursor, zone_lo));
            }
            zones_raw.push((j, zone_lo, zone_hi));
            cursor = zone_hi;
        }
        if s_hi > cursor {
            smooth_regions.push((cursor, s_hi));
        }

        let mut smooth_fits = Vec::new();
        for (lo, hi) in smooth_regions {
            fit_adaptive(
                to_rate(lo),
                to_rate(hi),
                SMOOTH_DEGREE,
                &exact,
                0,
                &mut smooth_fits,
            )?;
        }
        let smooth_upper: Vec<f64> = smooth_fits.iter().map(|f| f.hi).collect();
        let (cells, cell_scale) = cell_table(&smooth_upper, to_rate(s_lo), to_rate(s_hi));

        let zone_offset = kink_js.first().copied().unwrap_or(0);
        let span = kink_js
            .last()
            .map_or(0, |&last| (last - zone_offset + 1) as usize);
        let mut zones = vec![None; span];
        for (j, lo, hi) in zones_raw {
            let q = (j - 2) as i32;
            let remainder = ChebFit::fit(to_rate(lo), to_rate(hi), KINK_DEGREE, |x| {
                model.accel_tide_exact(x) - model.tide_term(q, x)
            })?;
            zones[(j - zone_offset) as usize] = Some(KinkZone { q, remainder });
        }

        let mut fast = FastTide {
            model: model.clone(),
            inv_n: 1.0 / n,
            domain: (to_rate(s_lo), to_rate(s_hi)),
            cells,
            cell_scale,
            smooth_fits,
            smooth_upper,
            zones,
            zone_offset,
            max_error: 0.0,
        };
        fast.max_error = fast.verify()?;
        Ok(fast)
    }

    // Dense-grid check of every piece against the exact sum.
    fn verify(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let pieces = self
            .smooth_fits
            .iter()
            .map(|f| f.interval())
            .chain(self.zones.iter().flatten().map(|z| z.remainder.interval()));
        for (lo, hi) in pieces {
            for i in 0..=VERIFY_POINTS {
                let x = lo + (hi - lo) * i as f64 / VERIFY_POINTS as f64;
                let err = (self.eval(x) - self.model.accel_tide_exact(x)).abs();
                if err > MAX_ABS_ERROR {
                    return Err(Error::FitBound {
                        error: err,
                        bound: MAX_ABS_ERROR,
                        theta_dot: x,
                    });
                }
                worst = worst.max(err);
            }
        }
        Ok(worst)
    }

    /// Largest error seen on the verification grid.
    pub fn verified_error(&self) -> f64 {
        self.max_error
    }

    /// Covered interval in rad/yr.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn smooth_fits(&self) -> &[ChebFit] {
        &self.smooth_fits
    }

    pub fn kink_fits(&self) -> impl Iterator<Item = (i32, &ChebFit)> {
        self.zones.iter().flatten().map(|z| (z.q, &z.remainder))
    }

    /// Fast tidal acceleration.
    #[inline]
    pub fn eval(&self, theta_dot: f64) -> f64 {
        let mut pows = 0;
        self.eval_counted(theta_dot, &mut pows).0
    }

    /// Fast evaluation reporting its route and fractional power count.
    pub fn eval_traced(&self, theta_dot: f64) -> TracedEval {
        let mut pows = 0;
        let (value, path) = self.eval_counted(theta_dot, &mut pows);
        TracedEval {
            value,
            path,
            fractional_powers: pows,
        }
    }

    #[inline]
    fn eval_counted(&self, theta_dot: f64, pows: &mut u32) -> (f64, EvalPath) {
        if !(theta_dot >= self.domain.0 && theta_dot <= self.domain.1) {
            return (
                self.model.accel_tide_exact_counted(theta_dot, pows),
                EvalPath::Exact,
            );
        }
        let s = 2.0 * theta_dot * self.inv_n;
        // Nearest integer by truncation; s + ROUND_SHIFT is positive on the domain.
        let j = (s + ROUND_SHIFT + 0.5) as i64 - ROUND_SHIFT as i64;
        if (s - j as f64).abs() < KINK_HALFWIDTH {
            let idx = j - self.zone_offset;
            if idx >= 0 {
                if let Some(Some(zone)) = self.zones.get(idx as usize) {
                    let own = self.model.tide_term_counted(zone.q, theta_dot, pows);
                    return (
                        own + zone.remainder.eval(theta_dot),
                        EvalPath::NearKink { q: zone.q },
                    );
                }
            }
        }
        let cell = ((theta_dot - self.domain.0) * self.cell_scale) as usize;
        let mut idx = self.cells[cell.min(self.cells.len() - 1)] as usize;
        while idx + 1 < self.smooth_fits.len() && self.smooth_upper[idx] < theta_dot {
            idx += 1;
        }
        (self.smooth_fits[idx].eval(theta_dot), EvalPath::Smooth)
    }

    /// Identity of the model these fits were built for.
    pub fn cache_key(model: &Model) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"fasttide-v1");
        let raw = model.params().raw();
        for v in [
            raw.a,
            raw.n,
            raw.radius,
            raw.xi,
            raw.triax,
            raw.m_planet,
            raw.mu,
            raw.e,
            raw.tau_a,
            raw.tau_m,
            raw.alpha,
            raw.m_star,
            raw.g,
        ] {
            hasher.update(v.to_le_bytes());
        }
        for q in [raw.q_tide.start(), raw.q_tide.end()] {
            hasher.update(q.to_le_bytes());
        }
        for (q, g) in model.table().iter() {
            hasher.update(q.to_le_bytes());
            hasher.update(g.to_le_bytes());
        }
        hasher.finalize().into()
    }

    /// Load fits from `path` if its key matches `model`, otherwise build and
    /// write them there.
    pub fn load_or_build(model: &Model, path: &Path) -> Result<Self> {
        if path.exists() {
            if let Ok(fast) = Self::load(model, path) {
                return Ok(fast);
            }
        }
        let fast = Self::build(model)?;
        fast.save(path)?;
        Ok(fast)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&Self::cache_key(&self.model));
        for v in [self.domain.0, self.domain.1, self.max_error] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let fits: Vec<(i32, &ChebFit)> = self
            .smooth_fits
            .iter()
            .map(|f| (i32::MIN, f))
            .chain(self.kink_fits())
            .collect();
        buf.extend_from_slice(&(fits.len() as u32).to_le_bytes());
        for (tag, fit) in fits {
            buf.extend_from_slice(&tag.to_le_bytes());
            buf.extend_from_slice(&(fit.coeffs.len() as u32).to_le_bytes());
            buf.extend_from_slice(&fit.lo.to_le_bytes());
            buf.extend_from_slice(&fit.hi.to_le_bytes());
            for c in &fit.coeffs {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(model: &Model, path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let bad = |reason: &str| Error::Cache {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut reader = ByteReader::new(&bytes);
        if reader
            .take(CACHE_MAGIC.len())
            .ok_or_else(|| bad("truncated"))?
            != CACHE_MAGIC
        {
            return Err(bad("bad magic"));
        }
        let key = reader.take(32).ok_or_else(|| bad("truncated"))?;
        if key != Self::cache_key(model) {
            return Err(bad("parameters changed"));
        }
        let f = |r: &mut ByteReader| r.f64().ok_or_else(|| bad("truncated"));
        let domain = (f(&mut reader)?, f(&mut reader)?);
        let max_error = f(&mut reader)?;
        let count = reader.u32().ok_or_else(|| bad("truncated"))?;
        let n = model.n();
        let mut smooth_fits = Vec::new();
        let mut kink = Vec::new();
        for _ in 0..count {
            let tag = reader.u32().ok_or_else(|| bad("truncated"))? as i32;
            let len = reader.u32().ok_or_else(|| bad("truncated"))? as usize;
            let lo = f(&mut reader)?;
            let hi = f(&mut reader)?;
            let coeffs = (0..len)
                .map(|_| f(&mut reader))
                .collect::<Result<Vec<_>>>()?;
            let fit = ChebFit::from_coeffs(lo, hi, coeffs);
            if tag == i32::MIN {
                smooth_fits.push(fit);
            } else {
                kink.push((tag, fit));
            }
        }
        if smooth_fits.is_empty() {
            return Err(bad("no smooth fits"));
        }
        let js: Vec<i64> = kink.iter().map(|(q, _)| (*q + 2) as i64).collect();
        let zone_offset = js.iter().copied().min().unwrap_or(0);
        let span = js
            .iter()
            .copied()
            .max()
            .map_or(0, |m| (m - zone_offset + 1) as usize);
        let mut zones = vec![None; span];
        for (q, remainder) in kink {
            zones[(q as i64 + 2 - zone_offset) as usize] = Some(KinkZone { q, remainder });
        }
        let smooth_upper: Vec<f64> = smooth_fits.iter().map(|f| f.hi).collect();
        let (cells, cell_scale) = cell_table(&smooth_upper, domain.0, domain.1);
        Ok(FastTide {
            model: model.clone(),
            inv_n: 1.0 / n,
            domain,
            cells,
            cell_scale,
            smooth_upper,
            smooth_fits,
            zones,
            zone_offset,
            max_error,
        })
    }
}

const CACHE_MAGIC: &[u8] = b"SOFASTv1";

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + len)?;
        self.pos += len;
        Some(out)
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
}

fn fit_adaptive(
    lo: f64,
    hi: f64,
    degree: usize,
    f: &impl Fn(f64) -> f64,
    depth: u32,
    out: &mut Vec<ChebFit>,
) -> Result<()> {
    let fit = ChebFit::fit(lo, hi, degree, f)?;
    let probe_err = (0..=PROBE_POINTS)
        .map(|i| {
            // Offset from the nodes so the probe sees interpolation error.
            let x = lo + (hi - lo) * (i as f64 + 0.37) / (PROBE_POINTS as f64 + 1.0);
            (fit.eval(x) - f(x)).abs()
        })
        .fold(0.0, f64::max);
    let top = fit.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let decayed = fit.coeffs[degree].abs() <= COEFF_DECAY * top;
    if (probe_err <= BUILD_TARGET && decayed) || depth >= MAX_SPLIT_DEPTH {
        out.push(fit);
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    fit_adaptive(lo, mid, degree, f, depth + 1, out)?;
    fit_adaptive(mid, hi, degree, f, depth + 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_reproduces_polynomials() {
        let fit = ChebFit::fit(-2.0, 3.0, 5, |x| {
            1.0 + x - 0.5 * x.powi(3) + 0.1 * x.powi(5)
        })
        .unwrap();
        for i in 0..=20 {
            let x = -2.0 + 0.25 * i as f64;
            let want = 1.0 + x - 0.5 * x.powi(3) + 0.1 * x.powi(5);
            assert!((fit.eval(x) - want).abs() < 1e-12);
        }
        assert_eq!(fit.degree(), 5);
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(ChebFit::fit(1.0, 1.0, 3, |x| x).is_err());
    }
}
