//! Physical parameters and the triaxial and tidal angular accelerations.
//!
//! Units are kg, km and years throughout. The tidal acceleration is the
//! secular `l = m = 2, p = 0` sum over the modes `omega_q = (q+2)n - 2 theta_dot`.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hansen::HansenTable;
use crate::series;
use crate::specfun::gamma_fn;

/// Raw physical constants (Sun/Mercury defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Semi-major axis, km.
    pub a: f64,
    /// Mean motion, rad/yr.
    pub n: f64,
    /// Planetary radius, km.
    pub radius: f64,
    /// Dimensionless moment of inertia `C / (M R^2)`.
    pub xi: f64,
    /// Triaxiality `(B - A) / C`.
    pub triax: f64,
    /// Planetary mass, kg.
    pub m_planet: f64,
    /// Unrelaxed rigidity, kg km^-1 yr^-2.
    pub mu: f64,
    /// Orbital eccentricity.
    pub e: f64,
    /// Andrade time, yr.
    pub tau_a: f64,
    /// Maxwell time, yr.
    pub tau_m: f64,
    /// Andrade exponent.
    pub alpha: f64,
    /// Stellar mass, kg.
    pub m_star: f64,
    /// Gravitational constant, kg^-1 km^3 yr^-2.
    pub g: f64,
    pub q_tri: RangeInclusive<i32>,
    pub q_tide: RangeInclusive<i32>,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            a: 5.791e7,
            n: 26.0879,
            radius: 2.44e3,
            xi: 0.346,
            triax: 9.350e-5,
            m_planet: 3.301e23,
            mu: 7.967e28,
            e: 0.2056,
            tau_a: 500.0,
            tau_m: 500.0,
            alpha: 0.2,
            m_star: 1.989e30,
            g: 6.646e-5,
            q_tri: -4..=6,
            q_tide: -1..=7,
        }
    }
}

/// Validated parameters with the derived acceleration constants frozen at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    raw: PhysicalConstants,
    zeta: f64,
    eta: f64,
    a2: f64,
    // Andrade factors tau_A^-alpha Gamma(alpha+1) {cos, sin}(alpha pi / 2).
    andrade_re: f64,
    andrade_im: f64,
}

impl ModelParams {
    pub fn new(raw: PhysicalConstants) -> Result<Self> {
        let positive = [
            ("a", raw.a),
            ("n", raw.n),
            ("R", raw.radius),
            ("xi", raw.xi),
            ("M_planet", raw.m_planet),
            ("tau_A", raw.tau_a),
            ("tau_M", raw.tau_m),
            ("M_star", raw.m_star),
            ("G", raw.g),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("triax", raw.triax), ("mu", raw.mu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(raw.alpha > 0.0 && raw.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                raw.alpha
            )));
        }
        if !(0.0..1.0).contains(&raw.e) {
            return Err(Error::domain("eccentricity", raw.e));
        }
        if raw.q_tri.is_empty() || raw.q_tide.is_empty() {
            return Err(Error::Config("empty Q_TRI or Q_TIDE".into()));
        }

        let zeta = 1.5 * raw.triax * raw.n * raw.n;
        let l = 2.0;
        let shape = 2.0 * l * l + 4.0 * l + 3.0;
        let eta =
            3.0 * PI * shape / (l * (l - 1.0)) * raw.mu * raw.m_star.powi(2) * raw.radius.powi(7)
                / (raw.xi * raw.m_planet.powi(3) * raw.a.powi(6));
        let a2 = 4.0 * PI * shape * raw.mu * raw.radius.powi(4)
            / (3.0 * l * raw.g * raw.m_planet.powi(2));
        let scale = raw.tau_a.powf(-raw.alpha) * gamma_fn(raw.alpha + 1.0)?;
        let andrade_re = scale * (raw.alpha * PI / 2.0).cos();
        let andrade_im = scale * (raw.alpha * PI / 2.0).sin();
        Ok(ModelParams {
            raw,
            zeta,
            eta,
            a2,
            andrade_re,
            andrade_im,
        })
    }

    pub fn raw(&self) -> &PhysicalConstants {
        &self.raw
    }

    /// Triaxial acceleration constant, yr^-2.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Tidal acceleration constant, yr^-2.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The dimensionless rigidity factor `A_2`.
    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn n(&self) -> f64 {
        self.raw.n
    }

    pub fn e(&self) -> f64 {
        self.raw.e
    }

    /// Forcing period `T_0 = 2 pi / n`, yr.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.raw.n
    }

    pub fn q_tri(&self) -> RangeInclusive<i32> {
        self.raw.q_tri.clone()
    }

    pub fn q_tide(&self) -> RangeInclusive<i32> {
        self.raw.q_tide.clone()
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::new(PhysicalConstants::default()).expect("default constants are valid")
    }
}

/// Phase point `(theta, theta_dot)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub theta: f64,
    pub theta_dot: f64,
    pub t: f64,
}

impl State {
    pub fn new(theta: f64, theta_dot: f64, t: f64) -> Self {
        State {
            theta,
            theta_dot,
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.theta_dot.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TriTerm {
    /// Harmonic `q + 2` of the mean anomaly.
    pub harmonic: i32,
    /// `zeta G_{20q}`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TideTerm {
    pub q: i32,
    /// `(q + 2) n`, rad/yr.
    pub mode_offset: f64,
    /// `eta G_{20q}^2`.
    pub weight: f64,
}

/// Parameters and Hansen table bound together with the per-term weights the
/// acceleration sums use.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    table: HansenTable,
    tri: Vec<TriTerm>,
    tide: Vec<TideTerm>,
    // Triaxial weights indexed by harmonic + 2 for the recurrence evaluator.
    tri_dense: Vec<f64>,
    tri_min_harmonic: i32,
}

impl Model {
    pub fn new(params: ModelParams, table: HansenTable) -> Result<Self> {
        if table.eccentricity() != params.e() {
            return Err(Error::Config(format!(
                "Hansen table built for e = {} but parameters use e = {}",
                table.eccentricity(),
                params.e()
            )));
        }
        for (name, range) in [("Q_TRI", params.q_tri()), ("Q_TIDE", params.q_tide())] {
            if !table.covers(&range) {
                return Err(Error::Config(format!(
                    "Hansen table {:?} does not cover {name} = {range:?}",
                    table.q_range()
                )));
            }
        }
        let tri: Vec<TriTerm> = params
            .q_tri()
            .map(|q| TriTerm {
                harmonic: q + 2,
                weight: params.zeta() * table.g20(q),
            })
            .collect();
        let tide = params
            .q_tide()
            .map(|q| {
                let g = table.g20(q);
                TideTerm {
                    q,
                    mode_offset: (q + 2) as f64 * params.n(),
                    weight: params.eta() * g * g,
                }
            })
            .collect();
        let tri_min_harmonic = tri.iter().map(|t| t.harmonic).min().unwrap_or(0);
        let tri_max_harmonic = tri.iter().map(|t| t.harmonic).max().unwrap_or(0);
        let mut tri_dense = vec![0.0; (tri_max_harmonic - tri_min_harmonic + 1) as usize];
        for term in &tri {
            tri_dense[(term.harmonic - tri_min_harmonic) as usize] = term.weight;
        }
        Ok(Model {
            params,
            table,
            tri,
            tide,
            tri_dense,
            tri_min_harmonic,
        })
    }

    /// Default Sun/Mercury model with a `q` range of -12..=12.
    pub fn mercury() -> Result<Self> {
        let params = ModelParams::default();
        let table = crate::hansen::build_g20_table(params.e(), -12..=12)?;
        Model::new(params, table)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn table(&self) -> &HansenTable {
        &self.table
    }

    pub fn n(&self) -> f64 {
        self.params.n()
    }

    pub(crate) fn tri_terms(&self) -> &[TriTerm] {
        &self.tri
    }

    pub(crate) fn tide_terms(&self) -> &[TideTerm] {
        &self.tide
    }

    /// Bound `D(e) = zeta sum_{Q_TRI} |G_{20q}|` on the triaxial acceleration.
    pub fn triax_bound(&self) -> f64 {
        self.tri.iter().map(|t| t.weight.abs()).sum()
    }

    /// Triaxial acceleration `-zeta sum G_{20q} sin(2 theta - (q+2) n t)`,
    /// one sine per term.
    pub fn accel_tri(&self, theta: f64, t: f64) -> f64 {
        let n = self.params.n();
        -self
            .tri
            .iter()
            .map(|term| term.weight * (2.0 * theta - term.harmonic as f64 * n * t).sin())
            .sum::<f64>()
    }

    /// Same sum as [`Model::accel_tri`] from two sine/cosine pairs, building
    /// the harmonics of `n t` by complex multiplication. `t` should be a
    /// phase within the current forcing period.
    pub fn accel_tri_fast(&self, theta: f64, t: f64) -> f64 {
        let (s2, c2) = (2.0 * theta).sin_cos();
        let (s1, c1) = (self.params.n() * t).sin_cos();
        let (mut a, mut b) = (0.0, 0.0);
        // Harmonic h contributes G (S cos(h phi) - C sin(h phi)).
        let mut cos_h = 1.0;
        let mut sin_h = 0.0;
        for h in 0.. {
            let idx = h - self.tri_min_harmonic;
            if idx >= self.tri_dense.len() as i32 {
                break;
            }
            if idx >= 0 {
                let w = self.tri_dense[idx as usize];
                a += w * cos_h;
                b += w * sin_h;
            }
            let next_cos = cos_h * c1 - sin_h * s1;
            sin_h = sin_h * c1 + cos_h * s1;
            cos_h = next_cos;
        }
        let (mut cos_h, mut sin_h) = (c1, -s1);
        for h in (self.tri_min_harmonic..0).rev() {
            let w = self.tri_dense[(h - self.tri_min_harmonic) as usize];
            a += w * cos_h;
            b += w * sin_h;
            let next_cos = cos_h * c1 + sin_h * s1;
            sin_h = sin_h * c1 - cos_h * s1;
            cos_h = next_cos;
        }
        -(s2 * a - c2 * b)
    }

    /// `P_2(chi)`: the Andrade-model core of the quality function, with one
    /// fractional power. Counts the power evaluation into `pows`.
    #[inline]
    pub(crate) fn p2(&self, chi: f64, pows: &mut u32) -> f64 {
        if chi == 0.0 {
            return 0.0;
        }
        *pows += 1;
        let frac = chi.powf(1.0 - self.params.raw.alpha);
        let re = chi + frac * self.params.andrade_re;
        let im = -1.0 / self.params.raw.tau_m - frac * self.params.andrade_im;
        let den = re + self.params.a2 * chi;
        im * chi / (den * den + im * im)
    }

    /// `dP_2/dchi` for `chi > 0`.
    pub(crate) fn p2_deriv(&self, chi: f64) -> f64 {
        let alpha = self.params.raw.alpha;
        let frac = chi.powf(1.0 - alpha);
        let dfrac = (1.0 - alpha) * frac / chi;
        let re = chi + frac * self.params.andrade_re + self.params.a2 * chi;
        let dre = 1.0 + dfrac * self.params.andrade_re + self.params.a2;
        let im = -1.0 / self.params.raw.tau_m - frac * self.params.andrade_im;
        let dim = -dfrac * self.params.andrade_im;
        let num = im * chi;
        let dnum = dim * chi + im;
        let den = re * re + im * im;
        let dden = 2.0 * (re * dre + im * dim);
        (dnum * den - num * dden) / (den * den)
    }

    /// One term `G^2 P_2(|omega|) sgn(omega)` of the tidal sum as an odd
    /// function of its mode, without the `-eta` prefactor.
    #[inline]
    pub(crate) fn tide_mode(&self, omega: f64, pows: &mut u32) -> f64 {
        if omega > 0.0 {
            self.p2(omega, pows)
        } else if omega < 0.0 {
            -self.p2(-omega, pows)
        } else {
            0.0
        }
    }

    /// Contribution of the tidal term with index `q` (including `-eta G^2`).
    pub fn tide_term(&self, q: i32, theta_dot: f64) -> f64 {
        let mut pows = 0;
        self.tide_term_counted(q, theta_dot, &mut pows)
    }

    pub(crate) fn tide_term_counted(&self, q: i32, theta_dot: f64, pows: &mut u32) -> f64 {
        match self.tide.iter().find(|t| t.q == q) {
            Some(term) => -term.weight * self.tide_mode(term.mode_offset - 2.0 * theta_dot, pows),
            None => 0.0,
        }
    }

    /// Exact tidal acceleration, one fractional power per term.
    pub fn accel_tide_exact(&self, theta_dot: f64) -> f64 {
        let mut pows = 0;
        self.accel_tide_exact_counted(theta_dot, &mut pows)
    }

    pub(crate) fn accel_tide_exact_counted(&self, theta_dot: f64, pows: &mut u32) -> f64 {
        let mut sum = 0.0;
        for term in &self.tide {
            sum += term.weight * self.tide_mode(term.mode_offset - 2.0 * theta_dot, pows);
        }
        -sum
    }

    /// Analytic `d(theta_ddot_TIDE)/d(theta_dot)`. Refused exactly at a kink,
    /// where the one-sided slopes differ.
    pub fn accel_tide_deriv(&self, theta_dot: f64) -> Result<f64> {
        let mut sum = 0.0;
        for term in &self.tide {
            let omega = term.mode_offset - 2.0 * theta_dot;
            if omega == 0.0 {
                return Err(Error::SingularPoint {
                    ratio: theta_dot / self.params.n(),
                });
            }
            // d/d theta_dot [P2(|w|) sgn w] = P2'(|w|) * dw/d theta_dot.
            sum += term.weight * self.p2_deriv(omega.abs()) * -2.0;
        }
        Ok(-sum)
    }

    /// Taylor coefficients in `d = theta_dot - center` of the whole tidal
    /// sum, to `len` terms. No mode may vanish at `center`.
    pub(crate) fn tide_series(&self, center: f64, len: usize) -> Result<Vec<f64>> {
        let raw = &self.params.raw;
        let mut total = vec![0.0; len];
        for term in &self.tide {
            let omega = term.mode_offset - 2.0 * center;
            if omega == 0.0 {
                return Err(Error::SingularPoint {
                    ratio: center / self.params.n(),
                });
            }
            let sign = omega.signum();
            // chi = |omega| as a linear function of d.
            let mut chi = vec![0.0; len];
            chi[0] = omega.abs();
            if len > 1 {
                chi[1] = -2.0 * sign;
            }
            let frac = series::linear_pow(chi[0], chi[1], 1.0 - raw.alpha, len);
            let re: Vec<f64> = (0..len)
                .map(|k| (1.0 + self.params.a2) * chi[k] + self.params.andrade_re * frac[k])
                .collect();
            let im: Vec<f64> = (0..len)
                .map(|k| {
                    let c = if k == 0 { -1.0 / raw.tau_m } else { 0.0 };
                    c - self.params.andrade_im * frac[k]
                })
                .collect();
            let num = series::mul(&im, &chi, len);
            let re2 = series::mul(&re, &re, len);
            let im2 = series::mul(&im, &im, len);
            let den: Vec<f64> = re2.iter().zip(&im2).map(|(a, b)| a + b).collect();
            let p2 = series::div(&num, &den, len);
            for (slot, c) in total.iter_mut().zip(p2) {
                *slot -= term.weight * sign * c;
            }
        }
        Ok(total)
    }

    /// Kink locations `(q + 2) / 2` in units of `n`.
    pub fn kinks(&self) -> Vec<f64> {
        self.tide.iter().map(|t| (t.q + 2) as f64 / 2.0).collect()
    }

    /// Full right-hand side `theta_ddot(theta, theta_dot, t)` using the exact
    /// tidal sum.
    pub fn accel_total_exact(&self, theta: f64, theta_dot: f64, t: f64) -> f64 {
        self.accel_tri_fast(theta, t) + self.accel_tide_exact(theta_dot)
    }
}
