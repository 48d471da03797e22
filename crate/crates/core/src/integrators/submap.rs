//! Sub-step maps compiled ahead of time by jet transport.
//!
//! Within one Taylor strip the state after a sub-step is a polynomial in
//! `s = sin 2 theta`, `c = cos 2 theta` and `x = (theta_dot - centre) / r`
//! with `r` the strip half-width. The Taylor recursion is run once per
//! (strip, sub-step) with those polynomials as coefficients; terms below the
//! pruning threshold over the strip are dropped and the rest is evaluated in
//! Horner form at run time.

use super::hem::{Forcing, HemStrip};

/// Highest total degree in `s` and `c` kept.
const TRIG_DEGREE: usize = 4;
const BASIS: usize = 2 * TRIG_DEGREE + 1;
const XLEN: usize = 33;
// Intermediate coefficients below this are dropped while building.
const INNER_PRUNE: f64 = 1e-24;

/// Polynomial in `x` for each monomial `s^a` and `s^a c`.
#[derive(Clone)]
struct TrigPoly {
    c: [[f64; XLEN]; BASIS],
    len: [usize; BASIS],
}

fn basis_parts(i: usize) -> (usize, usize) {
    if i <= TRIG_DEGREE {
        (i, 0)
    } else {
        (i - TRIG_DEGREE - 1, 1)
    }
}

fn basis_index(a: usize, b: usize) -> Option<usize> {
    match b {
        0 if a <= TRIG_DEGREE => Some(a),
        1 if a < TRIG_DEGREE => Some(TRIG_DEGREE + 1 + a),
        _ => None,
    }
}

// Products of basis monomials as signed combinations, using c^2 = 1 - s^2.
fn product_table() -> Vec<Vec<(usize, f64)>> {
    let mut table = Vec::with_capacity(BASIS * BASIS);
    for i in 0..BASIS {
        for j in 0..BASIS {
            let (a1, b1) = basis_parts(i);
            let (a2, b2) = basis_parts(j);
            let (a, b) = (a1 + a2, b1 + b2);
            let mut out = Vec::new();
            if a + b <= TRIG_DEGREE {
                if b == 2 {
                    if let Some(k) = basis_index(a, 0) {
                        out.push((k, 1.0));
                    }
                    if let Some(k) = basis_index(a + 2, 0) {
                        out.push((k, -1.0));
                    }
                } else if let Some(k) = basis_index(a, b) {
                    out.push((k, 1.0));
                }
            }
            table.push(out);
        }
    }
    table
}

impl TrigPoly {
    fn zero() -> Self {
        TrigPoly {
            c: [[0.0; XLEN]; BASIS],
            len: [0; BASIS],
        }
    }

    fn monomial(basis: usize, coeffs: &[f64]) -> Self {
        let mut p = TrigPoly::zero();
        p.c[basis][..coeffs.len()].copy_from_slice(coeffs);
        p.len[basis] = coeffs.len();
        p.prune(0.0);
        p
    }

    fn is_zero(&self) -> bool {
        self.len.iter().all(|&l| l == 0)
    }

    fn add_scaled(&mut self, other: &TrigPoly, scale: f64) {
        for b in 0..BASIS {
            let l = other.len[b];
            for m in 0..l {
                self.c[b][m] += scale * other.c[b][m];
            }
            self.len[b] = self.len[b].max(l);
        }
    }

    // self += scale * a * b
    fn mul_acc(&mut self, a: &TrigPoly, b: &TrigPoly, scale: f64, table: &[Vec<(usize, f64)>]) {
        for i in 0..BASIS {
            let la = a.len[i];
            if la == 0 {
                continue;
            }
            for j in 0..BASIS {
                let lb = b.len[j];
                if lb == 0 {
                    continue;
                }
                for &(k, sign) in &table[i * BASIS + j] {
                    let f = scale * sign;
                    let top = (la + lb - 1).min(XLEN);
                    for p in 0..la {
                        let ap = f * a.c[i][p];
                        if ap == 0.0 {
                            continue;
                        }
                        for q in 0..lb.min(XLEN - p) {
                            self.c[k][p + q] += ap * b.c[j][q];
                        }
                    }
                    self.len[k] = self.len[k].max(top);
                }
            }
        }
    }

    fn prune(&mut self, tol: f64) {
        for b in 0..BASIS {
            let mut last = 0;
            for m in 0..self.len[b] {
                if self.c[b][m].abs() <= tol {
                    self.c[b][m] = 0.0;
                } else {
                    last = m + 1;
                }
            }
            self.len[b] = last;
        }
    }
}

/// Pruned polynomial ready for evaluation.
#[derive(Debug, Clone, Default)]
struct Compiled {
    // (basis, start, len) into `coeffs`.
    blocks: Vec<(u8, u32, u32)>,
    coeffs: Vec<f64>,
}

impl Compiled {
    fn from_poly(p: &TrigPoly, tol: f64) -> Self {
        let mut p = p.clone();
        p.prune(tol);
        let mut out = Compiled::default();
        for b in 0..BASIS {
            let l = p.len[b];
            if l == 0 {
                continue;
            }
            out.blocks
                .push((b as u8, out.coeffs.len() as u32, l as u32));
            out.coeffs.extend_from_slice(&p.c[b][..l]);
        }
        out
    }

    #[inline]
    fn eval(&self, mono: &[f64; BASIS], x: f64) -> f64 {
        let mut total = 0.0;
        for &(b, start, len) in &self.blocks {
            let coeffs = &self.coeffs[start as usize..(start + len) as usize];
            let mut acc = 0.0;
            for &c in coeffs.iter().rev() {
                acc = acc * x + c;
            }
            total += mono[b as usize] * acc;
        }
        total
    }

    fn terms(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != 0.0).count()
    }
}

/// Compiled map for one sub-step of one strip. Returns increments beyond
/// free rotation: `theta + h theta_dot + dtheta`, `theta_dot + drate`.
#[derive(Debug, Clone)]
pub struct SubstepMap {
    center: f64,
    inv_radius: f64,
    h: f64,
    dtheta: Compiled,
    drate: Compiled,
}

impl SubstepMap {
    pub(crate) fn build(
        strip: &HemStrip,
        forcing: &Forcing,
        substep: usize,
        h: f64,
        prune: f64,
    ) -> Self {
        let table = product_table();
        let degree = strip.series_degree();
        let center = strip.center();
        let radius = strip.half_width();
        let (cos_sum, sin_sum) = forcing.at(substep);

        // Tidal polynomial in x, re-expanded as Q_m(x) = P^(m)(r x) / m!.
        let a = strip.tide_coeffs();
        let tide_terms: Vec<TrigPoly> = (0..a.len())
            .map(|m| {
                let mut q = vec![0.0; a.len() - m];
                let mut binom = 1.0f64;
                for j in m..a.len() {
                    if j > m {
                        binom = binom * j as f64 / (j - m) as f64;
                    }
                    q[j - m] = binom * a[j] * radius.powi((j - m) as i32);
                }
                TrigPoly::monomial(0, &q)
            })
            .collect();

        let zero = TrigPoly::zero();
        let mut y = vec![zero.clone(); degree + 2];
        let mut sin2 = vec![zero.clone(); degree + 1];
        let mut cos2 = vec![zero.clone(); degree + 1];
        // Increment of theta_dot beyond its start, as a series in tau.
        let mut drift = vec![zero.clone(); degree + 1];
        // powers[m - 1][k]: k-th coefficient of drift^m.
        let mut powers: Vec<Vec<TrigPoly>> = Vec::new();

        y[1] = TrigPoly::monomial(0, &[h * center, h * radius]);
        sin2[0] = TrigPoly::monomial(basis_index(1, 0).unwrap(), &[1.0]);
        cos2[0] = TrigPoly::monomial(basis_index(0, 1).unwrap(), &[1.0]);

        for k in 0..degree {
            if k > 0 {
                let mut s = TrigPoly::zero();
                let mut c = TrigPoly::zero();
                for j in 1..=k {
                    let w = (2 * j) as f64 / k as f64;
                    s.mul_acc(&y[j], &cos2[k - j], w, &table);
                    c.mul_acc(&y[j], &sin2[k - j], -w, &table);
                }
                s.prune(INNER_PRUNE);
                c.prune(INNER_PRUNE);
                sin2[k] = s;
                cos2[k] = c;

                let mut d = y[k + 1].clone();
                for b in 0..BASIS {
                    for m in 0..d.len[b] {
                        d.c[b][m] *= (k + 1) as f64 / h;
                    }
                }
                drift[k] = d;
                // Extend every power of the drift to order k.
                let max_power = (tide_terms.len() - 1).min(k);
                while powers.len() < max_power {
                    powers.push(vec![zero.clone(); degree + 1]);
                }
                if max_power >= 1 {
                    powers[0][k] = drift[k].clone();
                }
                for m in 2..=max_power {
                    let mut acc = TrigPoly::zero();
                    for j in 1..=(k + 1 - m) {
                        acc.mul_acc(&drift[j], &powers[m - 2][k - j], 1.0, &table);
                    }
                    acc.prune(INNER_PRUNE);
                    powers[m - 1][k] = acc;
                }
            }

            let mut rhs = TrigPoly::zero();
            for j in 0..=k {
                rhs.add_scaled(&sin2[j], -cos_sum[k - j]);
                rhs.add_scaled(&cos2[j], sin_sum[k - j]);
            }
            if k == 0 {
                rhs.add_scaled(&tide_terms[0], 1.0);
            } else {
                for m in 1..=k.min(tide_terms.len() - 1) {
                    if powers[m - 1][k].is_zero() {
                        continue;
                    }
                    rhs.mul_acc(&tide_terms[m], &powers[m - 1][k], 1.0, &table);
                }
            }
            let scale = h * h / ((k + 1) * (k + 2)) as f64;
            let mut next = TrigPoly::zero();
            next.add_scaled(&rhs, scale);
            next.prune(INNER_PRUNE);
            y[k + 2] = next;
        }

        let mut dtheta = TrigPoly::zero();
        for yk in &y[2..=degree] {
            dtheta.add_scaled(yk, 1.0);
        }
        let mut drate = TrigPoly::zero();
        for (k, yk) in y.iter().enumerate().skip(2) {
            drate.add_scaled(yk, k as f64 / h);
        }
        SubstepMap {
            center,
            inv_radius: 1.0 / radius,
            h,
            dtheta: Compiled::from_poly(&dtheta, prune),
            drate: Compiled::from_poly(&drate, prune),
        }
    }

    /// Number of retained coefficients in the two components.
    pub fn terms(&self) -> (usize, usize) {
        (self.dtheta.terms(), self.drate.terms())
    }

    #[inline]
    pub fn apply(&self, theta: f64, theta_dot: f64) -> (f64, f64) {
        let (s, c) = (2.0 * theta).sin_cos();
        let mut mono = [0.0; BASIS];
        let mut p = 1.0;
        for a in 0..=TRIG_DEGREE {
            mono[a] = p;
            if a < TRIG_DEGREE {
                mono[TRIG_DEGREE + 1 + a] = p * c;
            }
            p *= s;
        }
        let x = (theta_dot - self.center) * self.inv_radius;
        let theta_new = theta + self.h * theta_dot + self.dtheta.eval(&mono, x);
        let rate_new = theta_dot + self.drate.eval(&mono, x);
        (theta_new, rate_new)
    }
}
