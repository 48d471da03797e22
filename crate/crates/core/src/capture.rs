//! Capture detection from the sequence of Poincaré-section rates.
//!
//! Samples are grouped into blocks of `L`. A block passes when twice its
//! mean `theta_dot / n` is within `eps_i` of an integer and its least
//! squares slope against the iteration index is below `eps_m`. Capture is
//! declared when `K` consecutive blocks pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureConfig {
    /// Block length `L`.
    pub block_len: usize,
    /// Consecutive passing blocks `K`.
    pub blocks: usize,
    /// Tolerance on `|2 mean - round(2 mean)|`.
    pub eps_mean: f64,
    /// Tolerance on the block slope, rad/yr per iteration.
    pub eps_slope: f64,
    /// Give up after this many map iterations.
    pub max_iterations: u64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            block_len: 10_000,
            blocks: 8,
            eps_mean: 1e-3,
            eps_slope: 3e-7,
            max_iterations: 20_000_000,
        }
    }
}

impl CaptureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_len < 2 {
            return Err(Error::Config(format!(
                "block length must be at least 2, got {}",
                self.block_len
            )));
        }
        if self.blocks < 1 {
            return Err(Error::Config("need at least one block".into()));
        }
        for (name, v) in [("eps_mean", self.eps_mean), ("eps_slope", self.eps_slope)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean of `theta_dot / n` and least squares slope of `theta_dot` against
/// the iteration index over one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockStats {
    pub mean: f64,
    pub slope: f64,
}

impl BlockStats {
    pub fn passes(&self, cfg: &CaptureConfig) -> bool {
        let twice = 2.0 * self.mean;
        (twice - twice.round()).abs() < cfg.eps_mean && self.slope.abs() < cfg.eps_slope
    }

    /// Twice the mean rounded to the nearest integer.
    pub fn attractor_2p(&self) -> i64 {
        (2.0 * self.mean).round() as i64
    }
}

// Running sums for one block, relative to its first sample.
#[derive(Debug, Clone, Default)]
struct BlockSums {
    count: usize,
    origin: f64,
    sum_y: f64,
    sum_xy: f64,
}

impl BlockSums {
    #[inline]
    fn push(&mut self, y: f64) {
        if self.count == 0 {
            self.origin = y;
        }
        let dy = y - self.origin;
        self.sum_y += dy;
        self.sum_xy += self.count as f64 * dy;
        self.count += 1;
    }

    fn finish(&self, n: f64) -> BlockStats {
        let len = self.count as f64;
        let sum_x = len * (len - 1.0) / 2.0;
        let sum_xx = (len - 1.0) * len * (2.0 * len - 1.0) / 6.0;
        let denom = len * sum_xx - sum_x * sum_x;
        let slope = (len * self.sum_xy - sum_x * self.sum_y) / denom;
        let mean = (self.origin + self.sum_y / len) / n;
        BlockStats { mean, slope }
    }
}

/// Statistics of a complete block of `theta_dot` samples (at least two).
pub fn block_stats(samples: &[f64], n: f64) -> BlockStats {
    let mut sums = BlockSums::default();
    for &y in samples {
        sums.push(y);
    }
    sums.finish(n)
}

/// Outcome of feeding one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureDecision {
    Continue,
    Captured { attractor_2p: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureReport {
    pub captured: bool,
    /// Nearest integer to twice the final block mean of `theta_dot / n`.
    pub attractor_2p: Option<i64>,
    /// Samples consumed when the last required block completed (or when
    /// the run stopped).
    pub capture_iteration: u64,
    pub blocks_processed: u64,
    /// Calibrated CPU-sec spent, when measured.
    pub cpu_seconds: Option<f64>,
    pub last_mean: Option<f64>,
    pub last_slope: Option<f64>,
}

/// Streaming detector holding only the current partial block.
#[derive(Debug, Clone)]
pub struct CaptureDetector {
    cfg: CaptureConfig,
    n: f64,
    sums: BlockSums,
    streak: usize,
    samples: u64,
    blocks: u64,
    last: Option<BlockStats>,
    captured: Option<i64>,
}

impl CaptureDetector {
    pub fn new(cfg: CaptureConfig, n: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(CaptureDetector {
            cfg,
            n,
            sums: BlockSums::default(),
            streak: 0,
            samples: 0,
            blocks: 0,
            last: None,
            captured: None,
        })
    }

    pub fn config(&self) -> &CaptureConfig {
        &self.cfg
    }

    /// Feed the next `theta_dot` sample.
    pub fn update(&mut self, theta_dot: f64) -> CaptureDecision {
        if let Some(attractor_2p) = self.captured {
            return CaptureDecision::Captured { attractor_2p };
        }
        self.sums.push(theta_dot);
        self.samples += 1;
        if self.sums.count < self.cfg.block_len {
            return CaptureDecision::Continue;
        }
        let stats = self.sums.finish(self.n);
        self.sums = BlockSums::default();
        self.blocks += 1;
        self.last = Some(stats);
        if stats.passes(&self.cfg) {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        if self.streak >= self.cfg.blocks {
            let attractor_2p = stats.attractor_2p();
            self.captured = Some(attractor_2p);
            CaptureDecision::Captured { attractor_2p }
        } else {
            CaptureDecision::Continue
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    pub fn last_block(&self) -> Option<BlockStats> {
        self.last
    }

    pub fn report(&self, cpu_seconds: Option<f64>) -> CaptureReport {
        CaptureReport {
            captured: self.captured.is_some(),
            attractor_2p: self.captured,
            capture_iteration: self.samples,
            blocks_processed: self.blocks,
            cpu_seconds,
            last_mean: self.last.map(|b| b.mean),
            last_slope: self.last.map(|b| b.slope),
        }
    }
}

/// Offline scan: statistics of every complete block and, if `K` consecutive
/// blocks pass, the index of the block completing the run and its
/// attractor.
pub fn scan_blocks(
    samples: &[f64],
    n: f64,
    cfg: &CaptureConfig,
) -> (Vec<BlockStats>, Option<(usize, i64)>) {
    let stats: Vec<BlockStats> = samples
        .chunks_exact(cfg.block_len)
        .map(|b| block_stats(b, n))
        .collect();
    let mut streak = 0;
    for (j, s) in stats.iter().enumerate() {
        if s.passes(cfg) {
            streak += 1;
            if streak >= cfg.blocks {
                return (stats.clone(), Some((j, s.attractor_2p())));
            }
        } else {
            streak = 0;
        }
    }
    (stats, None)
}
