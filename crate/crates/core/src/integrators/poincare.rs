use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hem::{self, Forcing, HemScratch, HemStrip, MidForcing, MAX_SERIES_DEGREE};
use super::rk::Dop853;
use super::StepperConfig;
use crate::error::{Error, Result};
use crate::fasteval::FastTide;
use crate::model::{Model, State};
use crate::strips::{default_layout, StripLayout};

/// Tidal evaluation used by the Runge-Kutta right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TideEval {
    Fast,
    Exact,
}

/// Which integrator handles the H strips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Taylor stepper in H strips, Runge-Kutta elsewhere.
    Hybrid,
    /// Runge-Kutta everywhere.
    RkOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapMode {
    pub method: Method,
    pub tide: TideEval,
}

impl Default for MapMode {
    fn default() -> Self {
        MapMode {
            method: Method::Hybrid,
            tide: TideEval::Fast,
        }
    }
}

/// Map iterations classified by the strip holding the starting state, and
/// sub-steps by the integrator that took them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub h_iterations: u64,
    pub n_iterations: u64,
    pub outside_iterations: u64,
    pub taylor_substeps: u64,
    pub rk_substeps: u64,
}

impl IterationCounts {
    pub fn total(&self) -> u64 {
        self.h_iterations + self.n_iterations + self.outside_iterations
    }

    pub fn merge(&mut self, other: &IterationCounts) {
        self.h_iterations += other.h_iterations;
        self.n_iterations += other.n_iterations;
        self.outside_iterations += other.outside_iterations;
        self.taylor_substeps += other.taylor_substeps;
        self.rk_substeps += other.rk_substeps;
    }
}

/// Everything the map needs that is shared between trajectories.
#[derive(Debug, Clone)]
pub struct Dynamics {
    model: Model,
    fast: FastTide,
    layout: StripLayout,
    cfg: StepperConfig,
    hem: Vec<Option<HemStrip>>,
    forcing: Forcing,
    mid_forcing: MidForcing,
    period: f64,
    h: f64,
}

impl Dynamics {
    pub fn new(
        model: Model,
        fast: FastTide,
        layout: StripLayout,
        cfg: StepperConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if (layout.n() - model.n()).abs() > 0.0 {
            return Err(Error::Config("strip layout built for a different n".into()));
        }
        let period = model.params().period();
        let h = cfg.step(period);
        let forcing = Forcing::new(&model, cfg.substeps, MAX_SERIES_DEGREE);
        let mid_forcing = MidForcing::new(&model, cfg.substeps);
        let hem = layout
            .strips()
            .par_iter()
            .map(|s| {
                if s.is_h() {
                    let mut strip = HemStrip::new(&model, s, h, cfg.prune_threshold)?;
                    strip.compile(&forcing, cfg.substeps, h, cfg.prune_threshold);
                    Ok(Some(strip))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dynamics {
            model,
            fast,
            layout,
            cfg,
            hem,
            forcing,
            mid_forcing,
            period,
            h,
        })
    }

    /// Default layout and step control for `model`, building the fast tide.
    pub fn with_defaults(model: Model) -> Result<Self> {
        let fast = FastTide::build(&model)?;
        let layout = default_layout(model.n());
        Dynamics::new(model, fast, layout, StepperConfig::default())
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn fast_tide(&self) -> &FastTide {
        &self.fast
    }

    pub fn layout(&self) -> &StripLayout {
        &self.layout
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Sub-step length.
    pub fn substep(&self) -> f64 {
        self.h
    }

    pub fn hem_strip(&self, idx: usize) -> Option<&HemStrip> {
        self.hem.get(idx).and_then(Option::as_ref)
    }

    /// `theta_ddot` at local time `t` within the current period.
    #[inline]
    pub fn accel(&self, tide: TideEval, t: f64, theta: f64, theta_dot: f64) -> f64 {
        let tidal = match tide {
            TideEval::Fast => self.fast.eval(theta_dot),
            TideEval::Exact => self.model.accel_tide_exact(theta_dot),
        };
        self.model.accel_tri_fast(theta, t) + tidal
    }

    /// As [`Dynamics::accel`] for local time `t` inside sub-step `substep`,
    /// reading the triaxial sums from the midpoint expansions.
    #[inline]
    pub(crate) fn accel_in_substep(
        &self,
        tide: TideEval,
        substep: usize,
        t: f64,
        theta: f64,
        theta_dot: f64,
    ) -> f64 {
        let tidal = match tide {
            TideEval::Fast => self.fast.eval(theta_dot),
            TideEval::Exact => self.model.accel_tide_exact(theta_dot),
        };
        let half = 0.5 * self.h;
        let u = (t - (substep as f64 * self.h + half)) / half;
        let (a, b) = self.mid_forcing.eval(substep, u);
        let (s2, c2) = (2.0 * theta).sin_cos();
        c2 * b - s2 * a + tidal
    }

    pub fn propagator(&self, mode: MapMode) -> Propagator<'_> {
        Propagator {
            dynamics: self,
            mode,
            rk: Dop853::new(
                self.cfg.rk_abs_tol,
                self.cfg.rk_rel_tol,
                self.cfg.rk_max_step_fraction * self.h,
            ),
            scratch: HemScratch::default(),
            counts: IterationCounts::default(),
        }
    }
}

/// Per-trajectory stepping state.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    dynamics: &'a Dynamics,
    mode: MapMode,
    rk: Dop853,
    scratch: HemScratch,
    counts: IterationCounts,
}

impl<'a> Propagator<'a> {
    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn counts(&self) -> IterationCounts {
        self.counts
    }

    pub fn rk(&self) -> &Dop853 {
        &self.rk
    }

    /// One Taylor sub-step from sub-step boundary `substep` in strip `strip`.
    pub fn hem_step(&mut self, state: State, strip: usize, substep: usize) -> Result<State> {
        let dynamics = self.dynamics;
        let hem = dynamics
            .hem_strip(strip)
            .ok_or_else(|| Error::Config(format!("strip {strip} is not a Taylor strip")))?;
        if !hem.contains(state.theta_dot) {
            let (lo, hi) = dynamics.layout.bounds(strip);
            return Err(Error::OutsideStrip {
                theta_dot: state.theta_dot,
                lo,
                hi,
            });
        }
        let (theta, theta_dot) =
            hem.maps()[substep % dynamics.cfg.substeps].apply(state.theta, state.theta_dot);
        Ok(State::new(theta, theta_dot, state.t + dynamics.h))
    }

    /// As [`Propagator::hem_step`] but running the Taylor recursion at run
    /// time instead of the compiled map.
    pub fn jet_step(&mut self, state: State, strip: usize, substep: usize) -> Result<State> {
        let dynamics = self.dynamics;
        let hem = dynamics
            .hem_strip(strip)
            .ok_or_else(|| Error::Config(format!("strip {strip} is not a Taylor strip")))?;
        let (theta, theta_dot) = hem::jet_step(
            hem,
            &dynamics.forcing,
            substep % dynamics.cfg.substeps,
            state.theta,
            state.theta_dot,
            dynamics.h,
            &mut self.scratch,
        );
        Ok(State::new(theta, theta_dot, state.t + dynamics.h))
    }

    /// Runge-Kutta from `state` to `t_target`, both measured as local time
    /// within the current period.
    pub fn rk_step_to(&mut self, state: State, t_target: f64) -> Result<State> {
        let dynamics = self.dynamics;
        let tide = self.mode.tide;
        let y0 = [state.theta, state.theta_dot];
        // Within one sub-step the midpoint expansions replace the recurrence.
        let slot = (state.t / dynamics.h + 1e-9).floor();
        let inside = slot >= 0.0
            && (slot as usize) < dynamics.cfg.substeps
            && t_target >= state.t
            && t_target <= (slot + 1.0) * dynamics.h * (1.0 + 1e-12);
        let y = if inside {
            let i = slot as usize;
            let mut f = |t: f64, x: f64, v: f64| dynamics.accel_in_substep(tide, i, t, x, v);
            self.rk.integrate(&mut f, state.t, y0, t_target)?
        } else {
            let mut f = |t: f64, x: f64, v: f64| dynamics.accel(tide, t, x, v);
            self.rk.integrate(&mut f, state.t, y0, t_target)?
        };
        Ok(State::new(y[0], y[1], t_target))
    }

    /// One Poincaré map iteration. `state.t` is taken to be a multiple of
    /// the period; `theta` is reduced to `[0, 2 pi)` on output.
    pub fn map(&mut self, state: State) -> Result<State> {
        let out = self.map_unreduced(state)?;
        Ok(State::new(out.theta.rem_euclid(TAU), out.theta_dot, out.t))
    }

    /// As [`Propagator::map`] without reducing `theta`.
    pub fn map_unreduced(&mut self, state: State) -> Result<State> {
        let dynamics = self.dynamics;
        let substeps = dynamics.cfg.substeps;
        let h = dynamics.h;
        self.rk.reset();

        let mut local = State::new(state.theta, state.theta_dot, 0.0);
        let mut prev = dynamics.layout.locate(local.theta_dot);
        match prev {
            Some(i) if dynamics.layout.get(i).is_h() => self.counts.h_iterations += 1,
            Some(_) => self.counts.n_iterations += 1,
            None => self.counts.outside_iterations += 1,
        }

        for i in 0..substeps {
            let strip = if i == 0 {
                prev
            } else {
                let here = dynamics.layout.locate(local.theta_dot);
                if let (Some(a), Some(b)) = (prev, here) {
                    if a.abs_diff(b) > 1 {
                        return Err(Error::IntegrationFailure {
                            t: state.t + local.t,
                            theta: local.theta,
                            theta_dot: local.theta_dot,
                            reason: format!("sub-step crossed from strip {a} past strip {b}"),
                        });
                    }
                }
                prev = here;
                here
            };
            let taylor = self.mode.method == Method::Hybrid
                && strip.is_some_and(|s| dynamics.hem[s].is_some());
            let t_next = if i + 1 == substeps {
                dynamics.period
            } else {
                (i + 1) as f64 * h
            };
            local = if taylor {
                self.counts.taylor_substeps += 1;
                let mut next = self.hem_step(local, strip.unwrap(), i)?;
                next.t = t_next;
                next
            } else {
                self.counts.rk_substeps += 1;
                self.rk_step_to(local, t_next)?
            };
            if !(local.theta.is_finite() && local.theta_dot.is_finite()) {
                return Err(Error::IntegrationFailure {
                    t: state.t + local.t,
                    theta: local.theta,
                    theta_dot: local.theta_dot,
                    reason: "non-finite state".into(),
                });
            }
        }
        Ok(State::new(
            local.theta,
            local.theta_dot,
            state.t + dynamics.period,
        ))
    }

    /// Apply the map `count` times.
    pub fn iterate(&mut self, mut state: State, count: u64) -> Result<State> {
        for _ in 0..count {
            state = self.map(state)?;
        }
        Ok(state)
    }
}

/// Steps of the reference integrator are capped at this fraction of a
/// sub-step. A full sub-step can pass the embedded error test while
/// missing by a hundred times the tolerance near the kinks.
pub const REFERENCE_STEP_FRACTION: f64 = 0.125;

/// One period of Runge-Kutta at tolerance `tol` with the exact tidal sum,
/// `theta` left unreduced.
pub fn reference_map(dynamics: &Dynamics, state: State, tol: f64) -> Result<State> {
    let mut rk = Dop853::new(tol, tol, REFERENCE_STEP_FRACTION * dynamics.substep());
    let mut f = |t: f64, x: f64, v: f64| dynamics.accel(TideEval::Exact, t, x, v);
    let y = rk.integrate(
        &mut f,
        0.0,
        [state.theta, state.theta_dot],
        dynamics.period(),
    )?;
    Ok(State::new(y[0], y[1], state.t + dynamics.period()))
}
