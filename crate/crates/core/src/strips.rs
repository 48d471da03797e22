//! Partition of `theta_dot / n` in `[0, 5]` into Taylor (H) and numerical
//! (N) strips, grouped into ten bands between consecutive kinks.
//!
//! Boundaries are stored as exact integers in thousandths of `n`; they are
//! only scaled by `n` when a lookup needs a rate.

use serde::Serialize;

/// Layout granularity: boundaries are integer multiples of `n / 1000`.
pub const MILLI: i32 = 1000;

/// Degree of the tidal Taylor polynomial used in every H strip.
pub const TIDE_TAYLOR_DEGREE: usize = 25;

/// Series truncation `D_s` per band.
pub const BAND_SERIES_DEGREE: [u32; 10] = [16, 15, 15, 14, 14, 14, 15, 16, 17, 17];

/// Half-width of the numerical strip around each kink, thousandths of `n`.
pub const KINK_STRIP_HALFWIDTH: i32 = 30;

// Band 0 H strips from 0 up to the first N strip.
const EDGE_BAND_H: [i32; 5] = [0, 200, 350, 430, 470];
// Interior band H-strip offsets from the end of the left N strip.
const INTERIOR_BAND_H: [i32; 6] = [0, 30, 90, 290, 410, 440];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StripKind {
    /// Taylor-series (HEM) strip.
    H,
    /// Numerical strip around a kink.
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strip {
    pub kind: StripKind,
    pub band: usize,
    /// Lower edge in thousandths of `n`.
    pub lo_milli: i32,
    /// Upper edge in thousandths of `n`.
    pub hi_milli: i32,
    /// Series truncation `D_s` (H strips only).
    pub series_degree: Option<u32>,
    /// Degree of the tidal Taylor polynomial (H strips only).
    pub tide_degree: Option<usize>,
}

impl Strip {
    /// `[lo, hi]` in units of `n`.
    pub fn range(&self) -> (f64, f64) {
        (
            self.lo_milli as f64 / MILLI as f64,
            self.hi_milli as f64 / MILLI as f64,
        )
    }

    /// Expansion point in units of `n` (the strip midpoint).
    pub fn center(&self) -> f64 {
        (self.lo_milli + self.hi_milli) as f64 / (2 * MILLI) as f64
    }

    pub fn width(&self) -> f64 {
        (self.hi_milli - self.lo_milli) as f64 / MILLI as f64
    }

    pub fn is_h(&self) -> bool {
        self.kind == StripKind::H
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StripLayout {
    strips: Vec<Strip>,
    n: f64,
    // Lower edges in rad/yr plus the final upper edge.
    #[serde(skip)]
    edges: Vec<f64>,
}

impl StripLayout {
    /// Build a layout from explicit strips. They must tile contiguously.
    pub fn from_strips(strips: Vec<Strip>, n: f64) -> Self {
        debug_assert!(strips.windows(2).all(|w| w[0].hi_milli == w[1].lo_milli));
        let mut edges: Vec<f64> = strips
            .iter()
            .map(|s| s.lo_milli as f64 * n / MILLI as f64)
            .collect();
        if let Some(last) = strips.last() {
            edges.push(last.hi_milli as f64 * n / MILLI as f64);
        }
        StripLayout { strips, n, edges }
    }

    pub fn strips(&self) -> &[Strip] {
        &self.strips
    }

    pub fn get(&self, idx: usize) -> &Strip {
        &self.strips[idx]
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// Strip index containing `theta_dot` (rad/yr), or `None` outside the
    /// layout. Strips are closed on the left and open on the right, except
    /// the last which is closed.
    pub fn locate(&self, theta_dot: f64) -> Option<usize> {
        let first = *self.edges.first()?;
        let last = *self.edges.last()?;
        if !(theta_dot >= first && theta_dot <= last) {
            return None;
        }
        let idx = self.edges.partition_point(|&edge| edge <= theta_dot);
        Some((idx - 1).min(self.strips.len() - 1))
    }

    /// Strip edges `[lo, hi]` in rad/yr.
    pub fn bounds(&self, idx: usize) -> (f64, f64) {
        (self.edges[idx], self.edges[idx + 1])
    }

    /// Total H-strip width in units of `n`.
    pub fn h_measure(&self) -> f64 {
        self.strips
            .iter()
            .filter(|s| s.is_h())
            .map(Strip::width)
            .sum()
    }

    /// Replace `D_s` in every H strip (used to probe the error gate).
    pub fn with_series_degree(mut self, degree: u32) -> Self {
        for s in self.strips.iter_mut().filter(|s| s.is_h()) {
            s.series_degree = Some(degree);
        }
        self
    }
}

fn h_strip(band: usize, lo: i32, hi: i32) -> Strip {
    Strip {
        kind: StripKind::H,
        band,
        lo_milli: lo,
        hi_milli: hi,
        series_degree: Some(BAND_SERIES_DEGREE[band]),
        tide_degree: Some(TIDE_TAYLOR_DEGREE),
    }
}

fn n_strip(band: usize, lo: i32, hi: i32) -> Strip {
    Strip {
        kind: StripKind::N,
        band,
        lo_milli: lo,
        hi_milli: hi,
        series_degree: None,
        tide_degree: None,
    }
}

/// The ten-band layout over `[0, 5n]`.
pub fn default_layout(n: f64) -> StripLayout {
    let mut strips = Vec::new();
    let half = MILLI / 2;
    let w = KINK_STRIP_HALFWIDTH;

    for pair in EDGE_BAND_H.windows(2) {
        strips.push(h_strip(0, pair[0], pair[1]));
    }
    strips.push(n_strip(0, half - w, half));

    for band in 1..=8 {
        let left_kink = band as i32 * half;
        let right_kink = left_kink + half;
        strips.push(n_strip(band, left_kink, left_kink + w));
        let base = left_kink + w;
        for pair in INTERIOR_BAND_H.windows(2) {
            strips.push(h_strip(band, base + pair[0], base + pair[1]));
        }
        strips.push(n_strip(band, right_kink - w, right_kink));
    }

    // Band 9 mirrors band 0 about the kink at 9/2.
    let kink = 9 * half;
    strips.push(n_strip(9, kink, kink + w));
    let top = 5 * MILLI;
    let mirrored: Vec<i32> = EDGE_BAND_H.iter().rev().map(|x| top - x).collect();
    for pair in mirrored.windows(2) {
        strips.push(h_strip(9, pair[0], pair[1]));
    }

    StripLayout::from_strips(strips, n)
}
