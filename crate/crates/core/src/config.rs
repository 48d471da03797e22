//! Flat `key = value` run configuration.
//!
//! Physical keys use the parameter-table names (`a`, `n`, `R`, `xi`,
//! `triax`, `M_planet`, `mu`, `e`, `tau_A`, `tau_M`, `alpha`, `M_star`, `G`,
//! `Q_TRI`, `Q_TIDE`); index ranges are written `lo..hi`. Capture and
//! stepping keys are `L`, `K`, `eps_i`, `eps_m`, `max_iters`, `substeps`,
//! `rk_tol`, `prune`, and campaign keys `seed`, `workers`, `I`.

use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::Serialize;

use crate::capture::CaptureConfig;
use crate::error::{Error, Result};
use crate::hansen::build_g20_table;
use crate::integrators::StepperConfig;
use crate::model::{Model, ModelParams, PhysicalConstants};
use crate::montecarlo::CampaignConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub constants: PhysicalConstants,
    pub capture: CaptureConfig,
    pub stepper: StepperConfig,
    pub seed: u64,
    pub workers: usize,
    pub trajectories: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            constants: PhysicalConstants::default(),
            capture: CaptureConfig::default(),
            stepper: StepperConfig::default(),
            seed: 1,
            workers: 1,
            trajectories: 3200,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn range(key: &str, value: &str) -> Result<RangeInclusive<i32>> {
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("{key}: expected lo..hi, got '{value}'")))?;
    let lo: i32 = number(key, lo)?;
    let hi: i32 = number(key, hi.trim_start_matches('='))?;
    if lo > hi {
        return Err(Error::Config(format!("{key}: empty range {lo}..{hi}")));
    }
    Ok(lo..=hi)
}

impl RunConfig {
    /// Model with a Hansen table covering both index ranges.
    pub fn build_model(&self) -> Result<Model> {
        let params = ModelParams::new(self.constants.clone())?;
        let (tri, tide) = (params.q_tri(), params.q_tide());
        let lo = *tri.start().min(tide.start());
        let hi = *tri.end().max(tide.end());
        let table = build_g20_table(params.e(), lo..=hi)?;
        Model::new(params, table)
    }

    pub fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            trajectories: self.trajectories,
            seed: self.seed,
            workers: self.workers,
            capture: self.capture,
            ..CampaignConfig::default()
        }
    }

    /// Set one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.constants;
        let key = key.trim();
        match key {
            "a" => c.a = number(key, value)?,
            "n" => c.n = number(key, value)?,
            "R" | "radius" => c.radius = number(key, value)?,
            "xi" => c.xi = number(key, value)?,
            "triax" | "triaxiality" => c.triax = number(key, value)?,
            "M_planet" | "m_planet" => c.m_planet = number(key, value)?,
            "mu" => c.mu = number(key, value)?,
            "e" => c.e = number(key, value)?,
            "tau_A" | "tau_a" => c.tau_a = number(key, value)?,
            "tau_M" | "tau_m" => c.tau_m = number(key, value)?,
            "alpha" => c.alpha = number(key, value)?,
            "M_star" | "m_star" => c.m_star = number(key, value)?,
            "G" | "g" => c.g = number(key, value)?,
            "Q_TRI" | "q_tri" => c.q_tri = range(key, value)?,
            "Q_TIDE" | "q_tide" => c.q_tide = range(key, value)?,
            "L" => self.capture.block_len = number(key, value)?,
            "K" => self.capture.blocks = number(key, value)?,
            "eps_i" => self.capture.eps_mean = number(key, value)?,
            "eps_m" => self.capture.eps_slope = number(key, value)?,
            "max_iters" => self.capture.max_iterations = number(key, value)?,
            "substeps" => self.stepper.substeps = number(key, value)?,
            "rk_tol" => {
                let tol: f64 = number(key, value)?;
                self.stepper.rk_abs_tol = tol;
                self.stepper.rk_rel_tol = tol;
            }
            "prune" => self.stepper.prune_threshold = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "workers" => self.workers = number(key, value)?,
            "I" => self.trajectories = number(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{pair}'")))?;
        self.set(key, value)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Every setting as `key=value`, in a fixed order, full precision.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let c = &self.constants;
        let f = |v: f64| format!("{v:e}");
        let r = |q: &RangeInclusive<i32>| format!("{}..{}", q.start(), q.end());
        vec![
            ("a".into(), f(c.a)),
            ("n".into(), f(c.n)),
            ("R".into(), f(c.radius)),
            ("xi".into(), f(c.xi)),
            ("triax".into(), f(c.triax)),
            ("M_planet".into(), f(c.m_planet)),
            ("mu".into(), f(c.mu)),
            ("e".into(), f(c.e)),
            ("tau_A".into(), f(c.tau_a)),
            ("tau_M".into(), f(c.tau_m)),
            ("alpha".into(), f(c.alpha)),
            ("M_star".into(), f(c.m_star)),
            ("G".into(), f(c.g)),
            ("Q_TRI".into(), r(&c.q_tri)),
            ("Q_TIDE".into(), r(&c.q_tide)),
            ("L".into(), self.capture.block_len.to_string()),
            ("K".into(), self.capture.blocks.to_string()),
            ("eps_i".into(), f(self.capture.eps_mean)),
            ("eps_m".into(), f(self.capture.eps_slope)),
            ("max_iters".into(), self.capture.max_iterations.to_string()),
            ("substeps".into(), self.stepper.substeps.to_string()),
            ("rk_tol".into(), f(self.stepper.rk_abs_tol)),
            ("prune".into(), f(self.stepper.prune_threshold)),
            ("seed".into(), self.seed.to_string()),
            ("workers".into(), self.workers.to_string()),
            ("I".into(), self.trajectories.to_string()),
        ]
    }
}
