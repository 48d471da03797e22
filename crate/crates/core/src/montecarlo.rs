//! Capture-probability campaigns over random initial conditions.
//!
//! Each trajectory's initial state depends only on `(seed, index)`, so the
//! outcome set is the same whatever the worker count or completion order.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::{CaptureConfig, CaptureDecision, CaptureDetector, CaptureReport};
use crate::cpusec::{thread_cpu_time, CpuSecClock, CALIBRATION_TERMS};
use crate::error::{Error, Result};
use crate::integrators::{Dynamics, IterationCounts, MapMode};
use crate::model::State;

/// Width of a timing histogram bin, CPU-sec.
pub const HISTOGRAM_BIN: f64 = 200.0;
/// Upper end of the binned range; longer runs go to the overflow count.
pub const HISTOGRAM_MAX: f64 = 5000.0;
const Z_95: f64 = 1.96;

/// Initial condition for trajectory `index`: uniform over
/// `[0, pi] x [0, 5 n]` at `t = 0`.
pub fn sample_initial(seed: u64, index: u64, n: f64) -> State {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let theta = rng.gen::<f64>() * PI;
    let theta_dot = rng.gen::<f64>() * 5.0 * n;
    State::new(theta, theta_dot, 0.0)
}

/// Half-width of the 95% normal-approximation interval for a proportion.
pub fn confidence_half_width(p_hat: f64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    Z_95 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub trajectories: u64,
    pub seed: u64,
    pub workers: usize,
    pub capture: CaptureConfig,
    /// Terms of the calibration sum; the unit is rescaled to `N_c`.
    pub calibration_terms: u64,
    /// Re-time the calibration sum after every capture.
    pub recalibrate: bool,
    /// Flush the checkpoint after this many completed trajectories.
    pub checkpoint_every: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            trajectories: 3200,
            seed: 1,
            workers: 1,
            capture: CaptureConfig::default(),
            calibration_terms: CALIBRATION_TERMS,
            recalibrate: true,
            checkpoint_every: 1,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::Config("need at least one trajectory".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        self.capture.validate()
    }
}

/// Result of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub index: u64,
    pub theta0: f64,
    pub theta_dot0: f64,
    pub capture: CaptureReport,
    pub counts: IterationCounts,
    /// Raw thread CPU seconds.
    pub cpu_seconds: f64,
    pub error: Option<String>,
}

impl TrajectoryOutcome {
    /// The part that must not depend on scheduling.
    pub fn outcome_key(&self) -> (u64, u64, u64, Option<i64>, u64) {
        (
            self.index,
            self.theta0.to_bits(),
            self.theta_dot0.to_bits(),
            self.capture.attractor_2p,
            self.capture.capture_iteration,
        )
    }
}

/// Iterate the map from `initial` until capture or the iteration cap.
pub fn run_trajectory(
    dynamics: &Dynamics,
    mode: MapMode,
    initial: State,
    capture: &CaptureConfig,
) -> Result<(CaptureReport, IterationCounts)> {
    let mut detector = CaptureDetector::new(*capture, dynamics.model().n())?;
    let mut prop = dynamics.propagator(mode);
    let mut state = initial;
    for _ in 0..capture.max_iterations {
        state = prop.map(state)?;
        if let CaptureDecision::Captured { .. } = detector.update(state.theta_dot) {
            break;
        }
    }
    Ok((detector.report(None), prop.counts()))
}

/// Per-attractor line of the probability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorRow {
    pub attractor_2p: i64,
    /// Resonance `theta_dot / n`.
    pub ratio: f64,
    pub count: u64,
    pub p_hat: f64,
    pub delta_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub trajectories: u64,
    pub attractors: Vec<AttractorRow>,
    pub uncaptured: u64,
    pub uncaptured_fraction: f64,
    pub failed: u64,
    /// Time to capture in CPU-sec, captured trajectories only.
    pub timing: Option<TimingSummary>,
    pub histogram: Histogram,
    pub iterations: IterationCounts,
}

/// Aggregate outcomes (order-independent). Failed trajectories are left out
/// of the probability denominator.
pub fn summarize(outcomes: &[TrajectoryOutcome]) -> ProbabilityReport {
    let mut sorted: Vec<&TrajectoryOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.index);
    let failed = sorted.iter().filter(|o| o.error.is_some()).count() as u64;
    let valid: Vec<&TrajectoryOutcome> = sorted
        .iter()
        .copied()
        .filter(|o| o.error.is_none())
        .collect();
    let denom = valid.len() as u64;

    let mut by_attractor: BTreeMap<i64, u64> = BTreeMap::new();
    let mut uncaptured = 0;
    let mut iterations = IterationCounts::default();
    let mut times = Vec::new();
    for o in &valid {
        iterations.merge(&o.counts);
        match (o.capture.captured, o.capture.attractor_2p) {
            (true, Some(a)) => {
                *by_attractor.entry(a).or_default() += 1;
                if let Some(t) = o.capture.cpu_seconds {
                    times.push(t);
                }
            }
            _ => uncaptured += 1,
        }
    }
    let fraction = |count: u64| {
        if denom == 0 {
            f64::NAN
        } else {
            count as f64 / denom as f64
        }
    };
    let attractors = by_attractor
        .into_iter()
        .map(|(a, count)| {
            let p_hat = fraction(count);
            AttractorRow {
                attractor_2p: a,
                ratio: a as f64 / 2.0,
                count,
                p_hat,
                delta_p: confidence_half_width(p_hat, denom),
            }
        })
        .collect();

    let bins = (HISTOGRAM_MAX / HISTOGRAM_BIN).round() as usize;
    let mut histogram = Histogram {
        bin_width: HISTOGRAM_BIN,
        counts: vec![0; bins],
        overflow: 0,
    };
    for &t in &times {
        let bin = (t / HISTOGRAM_BIN).floor();
        if bin >= 0.0 && (bin as usize) < bins {
            histogram.counts[bin as usize] += 1;
        } else {
            histogram.overflow += 1;
        }
    }
    let timing = if times.is_empty() {
        None
    } else {
        let count = times.len() as f64;
        let mean = times.iter().sum::<f64>() / count;
        let var = if times.len() > 1 {
            times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        Some(TimingSummary {
            mean,
            sd: var.sqrt(),
            min: times.iter().copied().fold(f64::INFINITY, f64::min),
            max: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    };

    ProbabilityReport {
        trajectories: sorted.len() as u64,
        attractors,
        uncaptured,
        uncaptured_fraction: fraction(uncaptured),
        failed,
        timing,
        histogram,
        iterations,
    }
}

/// Append-only JSON-lines log of finished trajectories.
pub struct Checkpoint {
    writer: Mutex<(BufWriter<File>, u64)>,
    every: u64,
}

impl Checkpoint {
    pub fn open(path: &Path, every: u64) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Checkpoint {
            writer: Mutex::new((BufWriter::new(file), 0)),
            every: every.max(1),
        })
    }

    /// Previously recorded outcomes; a torn final line is ignored.
    pub fn load(path: &Path) -> Result<Vec<TrajectoryOutcome>> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TrajectoryOutcome>(&line) {
                Ok(o) => out.push(o),
                Err(_) => break,
            }
        }
        Ok(out)
    }

    pub fn record(&self, outcome: &TrajectoryOutcome) -> Result<()> {
        let line = serde_json::to_string(outcome)?;
        let mut guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(guard.0, "{line}")?;
        guard.1 += 1;
        if guard.1 % self.every == 0 {
            guard.0.flush()?;
        }
        Ok(())
    }

    pub fn flush(&self) -> Result<()> {
        let mut guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        guard.0.flush()?;
        Ok(())
    }
}

fn run_one(
    dynamics: &Dynamics,
    mode: MapMode,
    cfg: &CampaignConfig,
    index: u64,
    clock: &mut Option<CpuSecClock>,
) -> TrajectoryOutcome {
    let initial = sample_initial(cfg.seed, index, dynamics.model().n());
    let start = thread_cpu_time();
    let result = run_trajectory(dynamics, mode, initial, &cfg.capture);
    let cpu_seconds = thread_cpu_time() - start;
    match result {
        Ok((mut capture, counts)) => {
            if capture.captured {
                let unit = match clock {
                    Some(c) if !cfg.recalibrate => *c,
                    _ => {
                        let c = CpuSecClock::new(cfg.calibration_terms);
                        *clock = Some(c);
                        c
                    }
                };
                capture.cpu_seconds = Some(unit.to_cpu_sec(cpu_seconds));
            }
            TrajectoryOutcome {
                index,
                theta0: initial.theta,
                theta_dot0: initial.theta_dot,
                capture,
                counts,
                cpu_seconds,
                error: None,
            }
        }
        Err(e) => TrajectoryOutcome {
            index,
            theta0: initial.theta,
            theta_dot0: initial.theta_dot,
            capture: CaptureReport {
                captured: false,
                attractor_2p: None,
                capture_iteration: 0,
                blocks_processed: 0,
                cpu_seconds: None,
                last_mean: None,
                last_slope: None,
            },
            counts: IterationCounts::default(),
            cpu_seconds,
            error: Some(e.to_string()),
        },
    }
}

/// Run every trajectory not already in `done`, on `cfg.workers` threads.
/// Returns all outcomes (including `done`) sorted by index.
pub fn run_campaign(
    dynamics: &Dynamics,
    mode: MapMode,
    cfg: &CampaignConfig,
    done: Vec<TrajectoryOutcome>,
    checkpoint: Option<&Checkpoint>,
) -> Result<Vec<TrajectoryOutcome>> {
    cfg.validate()?;
    let finished: BTreeSet<u64> = done.iter().map(|o| o.index).collect();
    let pending: Vec<u64> = (0..cfg.trajectories)
        .filter(|i| !finished.contains(i))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let fresh: Vec<TrajectoryOutcome> = pool.install(|| {
        pending
            .par_iter()
            .map_init(
                || None,
                |clock, &index| {
                    let outcome = run_one(dynamics, mode, cfg, index, clock);
                    if let Some(cp) = checkpoint {
                        // A failed checkpoint write only costs resumability.
                        let _ = cp.record(&outcome);
                    }
                    outcome
                },
            )
            .collect()
    });
    if let Some(cp) = checkpoint {
        cp.flush()?;
    }
    let mut all: Vec<TrajectoryOutcome> = done
        .into_iter()
        .filter(|o| o.index < cfg.trajectories)
        .chain(fresh)
        .collect();
    all.sort_by_key(|o| o.index);
    Ok(all)
}
