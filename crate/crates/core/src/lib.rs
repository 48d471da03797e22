//! Spin-orbit evolution of a triaxial planet under Andrade-rheology tides:
//! Hansen coefficients, accelerations, Taylor/Runge-Kutta Poincaré maps,
//! capture detection and Monte Carlo capture-probability campaigns.

pub mod bench;
pub mod capture;
pub mod cli;
pub mod config;
pub mod cpusec;
pub mod error;
pub mod fasteval;
pub mod hansen;
pub mod integrators;
pub mod manifest;
pub mod model;
pub mod montecarlo;
mod series;
pub mod specfun;
pub mod strips;
pub mod validation;

pub use capture::{CaptureConfig, CaptureDecision, CaptureDetector, CaptureReport};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use fasteval::FastTide;
pub use hansen::{build_g20_table, hansen_x, HansenTable};
pub use integrators::{Dynamics, MapMode, Method, Propagator, StepperConfig, TideEval};
pub use manifest::RunManifest;
pub use model::{Model, ModelParams, PhysicalConstants, State};
pub use montecarlo::{run_campaign, sample_initial, CampaignConfig, ProbabilityReport};
pub use strips::{default_layout, Strip, StripKind, StripLayout};
