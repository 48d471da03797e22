//! Trajectory propagation: the Taylor stepper in H strips, DOP853 elsewhere,
//! and the one-period Poincaré map that composes them.

mod hem;
mod poincare;
mod rk;
mod submap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hem::{Forcing, HemScratch, HemStrip, MAX_SERIES_DEGREE};
pub use poincare::{
    reference_map, Dynamics, IterationCounts, MapMode, Method, Propagator, TideEval,
    REFERENCE_STEP_FRACTION,
};
pub use rk::Dop853;
pub use submap::SubstepMap;

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    /// Sub-steps per forcing period; the Taylor step is `T0 / substeps`.
    pub substeps: usize,
    pub rk_abs_tol: f64,
    pub rk_rel_tol: f64,
    /// Largest Runge-Kutta step as a fraction of a sub-step. The embedded
    /// error estimate can pass whole sub-steps that miss the tolerance by
    /// two orders near the kinks.
    pub rk_max_step_fraction: f64,
    /// Tidal Taylor coefficients whose largest contribution over the strip
    /// falls below this are dropped.
    pub prune_threshold: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            substeps: 24,
            rk_abs_tol: 2e-14,
            rk_rel_tol: 2e-14,
            rk_max_step_fraction: 0.5,
            prune_threshold: 1e-16,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        for (name, v) in [
            ("rk_abs_tol", self.rk_abs_tol),
            ("rk_rel_tol", self.rk_rel_tol),
            ("rk_max_step_fraction", self.rk_max_step_fraction),
            ("prune_threshold", self.prune_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Sub-step length for a forcing period.
    pub fn step(&self, period: f64) -> f64 {
        period / self.substeps as f64
    }
}
