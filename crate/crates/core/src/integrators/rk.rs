//! Dormand-Prince 8(5,3) with Hairer's combined error estimate.

use crate::error::{Error, Result};

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const MAX_STEPS: u64 = 1_000_000;

type Vec2 = [f64; 2];

#[inline]
fn axpy(y: Vec2, terms: &[(f64, &Vec2)], h: f64) -> Vec2 {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Adaptive DOP853 for `theta'' = f(t, theta, theta_dot)`, written as a
/// first-order system in `(theta, theta_dot)`.
///
/// The last accepted step proposal is kept between calls.
#[derive(Debug, Clone)]
pub struct Dop853 {
    abs_tol: f64,
    rel_tol: f64,
    h: Option<f64>,
    // Bound on step size, also the first guess.
    h_max: f64,
    accepted: u64,
    rejected: u64,
    evals: u64,
}

impl Dop853 {
    pub fn new(abs_tol: f64, rel_tol: f64, h_max: f64) -> Self {
        Dop853 {
            abs_tol,
            rel_tol,
            h: None,
            h_max,
            accepted: 0,
            rejected: 0,
            evals: 0,
        }
    }

    /// Forget the step-size history.
    pub fn reset(&mut self) {
        self.h = None;
    }

    pub fn accepted_steps(&self) -> u64 {
        self.accepted
    }

    pub fn rejected_steps(&self) -> u64 {
        self.rejected
    }

    pub fn evaluations(&self) -> u64 {
        self.evals
    }

    /// Integrate from `(t0, y0)` to exactly `t1 > t0`.
    pub fn integrate<F>(&mut self, f: &mut F, t0: f64, y0: Vec2, t1: f64) -> Result<Vec2>
    where
        F: FnMut(f64, f64, f64) -> f64,
    {
        let mut t = t0;
        let mut y = y0;
        let mut rhs = |t: f64, y: &Vec2| -> Vec2 { [y[1], f(t, y[0], y[1])] };
        let mut k1 = rhs(t, &y);
        self.evals += 1;
        let mut h = self.h.unwrap_or(self.h_max).min(self.h_max);
        let mut last_rejected = false;
        let mut steps = 0u64;

        while t < t1 {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(failure(t, y, "step limit reached"));
            }
            if h <= 16.0 * f64::EPSILON * t.abs().max(t1 - t0) {
                return Err(failure(t, y, "step size underflow"));
            }
            // Stretch by up to 1% rather than leave a sliver before t1.
            let landing = t + 1.01 * h >= t1;
            let step = if landing { t1 - t } else { h };

            let k2 = rhs(t + C2 * step, &axpy(y, &[(A21, &k1)], step));
            let k3 = rhs(t + C3 * step, &axpy(y, &[(A31, &k1), (A32, &k2)], step));
            let k4 = rhs(t + C4 * step, &axpy(y, &[(A41, &k1), (A43, &k3)], step));
            let k5 = rhs(
                t + C5 * step,
                &axpy(y, &[(A51, &k1), (A53, &k3), (A54, &k4)], step),
            );
            let k6 = rhs(
                t + C6 * step,
                &axpy(y, &[(A61, &k1), (A64, &k4), (A65, &k5)], step),
            );
            let k7 = rhs(
                t + C7 * step,
                &axpy(y, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)], step),
            );
            let k8 = rhs(
                t + C8 * step,
                &axpy(
                    y,
                    &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
                    step,
                ),
            );
            let k9 = rhs(
                t + C9 * step,
                &axpy(
                    y,
                    &[
                        (A91, &k1),
                        (A94, &k4),
                        (A95, &k5),
                        (A96, &k6),
                        (A97, &k7),
                        (A98, &k8),
                    ],
                    step,
                ),
            );
            let k10 = rhs(
                t + C10 * step,
                &axpy(
                    y,
                    &[
                        (A101, &k1),
                        (A104, &k4),
                        (A105, &k5),
                        (A106, &k6),
                        (A107, &k7),
                        (A108, &k8),
                        (A109, &k9),
                    ],
                    step,
                ),
            );
            let k11 = rhs(
                t + C11 * step,
                &axpy(
                    y,
                    &[
                        (A111, &k1),
                        (A114, &k4),
                        (A115, &k5),
                        (A116, &k6),
                        (A117, &k7),
                        (A118, &k8),
                        (A119, &k9),
                        (A1110, &k10),
                    ],
                    step,
                ),
            );
            let t_new = if landing { t1 } else { t + step };
            let y12 = axpy(
                y,
                &[
                    (A121, &k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
                step,
            );
            let k12 = rhs(t_new, &y12);
            self.evals += 11;

            let mut slope = [0.0; 2];
            for i in 0..2 {
                slope[i] = B1 * k1[i]
                    + B6 * k6[i]
                    + B7 * k7[i]
                    + B8 * k8[i]
                    + B9 * k9[i]
                    + B10 * k10[i]
                    + B11 * k11[i]
                    + B12 * k12[i];
            }
            let y_new = [y[0] + step * slope[0], y[1] + step * slope[1]];

            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..2 {
                let sk = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
                let e2 = slope[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
                err2 += (e2 / sk).powi(2);
                let e = ER1 * k1[i]
                    + ER6 * k6[i]
                    + ER7 * k7[i]
                    + ER8 * k8[i]
                    + ER9 * k9[i]
                    + ER10 * k10[i]
                    + ER11 * k11[i]
                    + ER12 * k12[i];
                err += (e / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = step * err * (1.0 / (2.0 * deno)).sqrt();

            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (step / fac).min(self.h_max);

            if err <= 1.0 {
                self.accepted += 1;
                k1 = rhs(t_new, &y_new);
                self.evals += 1;
                y = y_new;
                t = t_new;
                if last_rejected {
                    h_new = h_new.min(step);
                }
                last_rejected = false;
                // A shortened landing step says nothing about the natural
                // size unless its own error was near the limit.
                if !landing {
                    h = h_new;
                } else if fac > 1.0 {
                    h = h.min(h_new);
                }
            } else {
                self.rejected += 1;
                last_rejected = true;
                h = step / (1.0 / FAC_MIN).min(fac11 / SAFE);
            }
        }
        self.h = Some(h);
        Ok(y)
    }
}

fn failure(t: f64, y: Vec2, reason: &str) -> Error {
    Error::IntegrationFailure {
        t,
        theta: y[0],
        theta_dot: y[1],
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_consistent() {
        let b = [B1, B6, B7, B8, B9, B10, B11, B12];
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let bhh = BHH1 + BHH2 + BHH3;
        assert!((bhh - 1.0).abs() < 1e-14);
        let er = [ER1, ER6, ER7, ER8, ER9, ER10, ER11, ER12];
        assert!(er.iter().sum::<f64>().abs() < 1e-14);
        // Row sums equal the nodes.
        let rows: [(f64, &[f64]); 10] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A43]),
            (C5, &[A51, A53, A54]),
            (C6, &[A61, A64, A65]),
            (C7, &[A71, A74, A75, A76]),
            (C8, &[A81, A84, A85, A86, A87]),
            (C9, &[A91, A94, A95, A96, A97, A98]),
            (C10, &[A101, A104, A105, A106, A107, A108, A109]),
            (C11, &[A111, A114, A115, A116, A117, A118, A119, A1110]),
        ];
        for (c, row) in rows {
            assert!((row.iter().sum::<f64>() - c).abs() < 1e-13, "node {c}");
        }
        let last = [A121, A124, A125, A126, A127, A128, A129, A1210, A1211];
        assert!((last.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn quadrature_orders() {
        // sum b_i c_i^(k-1) = 1/k for k = 1..8.
        let b = [B1, B6, B7, B8, B9, B10, B11, B12];
        let c = [0.0, C6, C7, C8, C9, C10, C11, 1.0];
        for k in 1..=8 {
            let s: f64 = b.iter().zip(c).map(|(b, c)| b * c.powi(k - 1)).sum();
            assert!((s - 1.0 / k as f64).abs() < 1e-13, "order {k}: {s}");
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let mut rk = Dop853::new(1e-14, 1e-14, 0.5);
        let mut f = |_t: f64, x: f64, _v: f64| -x;
        let y = rk.integrate(&mut f, 0.0, [1.0, 0.0], 10.0).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-12, "{}", y[0] - 10f64.cos());
        assert!((y[1] + 10f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn free_rotation_is_exact() {
        let mut rk = Dop853::new(2e-14, 2e-14, 0.05);
        let mut f = |_t: f64, _x: f64, _v: f64| 0.0;
        let y = rk.integrate(&mut f, 0.0, [0.3, 40.0], 1.7).unwrap();
        assert!((y[0] - (0.3 + 40.0 * 1.7)).abs() < 1e-13);
        assert_eq!(y[1], 40.0);
    }

    #[test]
    fn lands_on_target() {
        let mut rk = Dop853::new(1e-12, 1e-12, 0.3);
        let mut f = |t: f64, _x: f64, _v: f64| t;
        let y = rk.integrate(&mut f, 0.0, [0.0, 0.0], 1.0).unwrap();
        assert!((y[1] - 0.5).abs() < 1e-14);
        assert!((y[0] - 1.0 / 6.0).abs() < 1e-14);
    }
}
