//! Special functions used by the Hansen coefficient series and the
//! Andrade quality function.

use crate::error::{Error, Result};

/// Bessel function of the first kind of integer order `k`.
///
/// Negative orders and arguments are reduced with
/// `J_{-k}(x) = (-1)^k J_k(x)` and `J_k(-x) = (-1)^k J_k(x)`.
pub fn bessel_j(k: i32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("bessel_j argument", x));
    }
    let order = k.unsigned_abs();
    let mut sign = if k < 0 && order % 2 == 1 { -1.0 } else { 1.0 };
    if x < 0.0 && order % 2 == 1 {
        sign = -sign;
    }
    let ax = x.abs();
    let value = if ax == 0.0 {
        if order == 0 {
            1.0
        } else {
            0.0
        }
    } else if 0.25 * ax * ax <= order as f64 + 1.0 {
        ascending_series(order, ax)
    } else {
        miller(order, ax)
    };
    Ok(sign * value)
}

// Terms decrease monotonically when (x/2)^2 <= k + 1, so there is no
// cancellation to speak of.
fn ascending_series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for i in 1..=order {
        term *= half / i as f64;
        if term == 0.0 {
            return 0.0;
        }
    }
    let q = -half * half;
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= q / (m * (m + order as f64));
        sum += term;
        if term.abs() <= f64::EPSILON * 1e-2 * sum.abs() {
            break;
        }
        m += 1.0;
    }
    sum
}

// Backward recurrence normalised with J_0 + 2 sum J_{2j} = 1.
fn miller(order: u32, x: f64) -> f64 {
    const BIG: f64 = 1e150;
    let top = order.max(x.ceil() as u32);
    let mut start = top + 30 + (60.0 * top as f64).sqrt() as u32;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_x = 2.0 / x;
    let mut next = 0.0;
    let mut current = 1.0;
    let mut norm = 0.0;
    let mut result = 0.0;
    for j in (1..=start).rev() {
        let prev = j as f64 * two_over_x * current - next;
        next = current;
        current = prev;
        if current.abs() > BIG {
            current /= BIG;
            next /= BIG;
            result /= BIG;
            norm /= BIG;
        }
        // `current` now holds the unnormalised J_{j-1}.
        let idx = j - 1;
        if idx == order {
            result = current;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += current;
        }
    }
    norm = 2.0 * norm + current;
    result / norm
}

/// Binomial coefficient extended to all integer arguments:
/// zero for `m < 0`, one for `m = 0`, otherwise `l(l-1)...(l-m+1)/m!`.
pub fn binomial_ext(l: i64, m: i64) -> f64 {
    if m < 0 {
        return 0.0;
    }
    let mut exact: Option<i128> = Some(1);
    let mut approx = 1.0f64;
    for i in 0..m {
        // c * (l - i) / (i + 1) is always an integer.
        exact = exact
            .and_then(|c| c.checked_mul((l - i) as i128))
            .map(|c| c / (i as i128 + 1));
        approx = approx * (l - i) as f64 / (i + 1) as f64;
    }
    match exact {
        Some(c) => c as f64,
        None => approx,
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive real arguments (Lanczos approximation).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain("gamma_fn argument", x));
    }
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        let s = std::f64::consts::PI / (std::f64::consts::PI * x).sin();
        return Ok(s / gamma_fn(1.0 - x)?);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_trivial_values() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(-3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_rejects_non_finite() {
        assert!(matches!(bessel_j(1, f64::NAN), Err(Error::Domain { .. })));
        assert!(bessel_j(1, f64::INFINITY).is_err());
    }

    // Reference values from a 40-digit ascending-series evaluation.
    #[test]
    fn bessel_against_high_precision() {
        let cases = [
            (1, 1.0, 0.440_050_585_744_933_515_959_682_2),
            (0, 5.6, 0.026_970_884_685_114_476_355_723_36),
            (5, 2.5, 0.019_501_625_134_503_219_886_471_98),
            (10, 20.0, 0.186_482_558_023_945_083_214_108_3),
            (0, 20.0, 0.167_024_664_340_583_154_727_320_5),
            (3, -7.5, 0.258_060_913_193_460_311_662_659_3),
            (40, 20.0, 9.902_389_413_744_686_136_413_101e-10),
            (25, 1.3, 1.333_917_058_729_727_844_598_072e-30),
            (1, 0.5, 0.242_268_457_674_873_886_383_954_6),
        ];
        for (k, x, want) in cases {
            let got = bessel_j(k, x).unwrap();
            assert!(
                (got - want).abs() <= 1e-15,
                "J_{k}({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_ext(3, 2), 3.0);
        assert_eq!(binomial_ext(-3, 2), 6.0);
        assert_eq!(binomial_ext(-4, 3), -20.0);
        assert_eq!(binomial_ext(0, 1), 0.0);
        for l in -5..5 {
            assert_eq!(binomial_ext(l, -1), 0.0);
            assert_eq!(binomial_ext(l, 0), 1.0);
        }
    }

    #[test]
    fn binomial_matches_pascal_triangle() {
        let mut row = vec![1u64];
        for l in 0..=12i64 {
            for (m, &want) in row.iter().enumerate() {
                assert_eq!(binomial_ext(l, m as i64), want as f64);
            }
            let mut next = vec![1u64; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma_fn(2.0).unwrap() - 1.0).abs() < 1e-15);
        let cases = [
            (1.2, 0.918_168_742_399_760_610_640_951_655_185_8),
            (1.5, 0.886_226_925_452_758_013_649_083_741_670_6),
            (1.75, 0.919_062_526_848_883_233_846_823_727_522_2),
        ];
        for (x, want) in cases {
            let got = gamma_fn(x).unwrap();
            assert!(((got - want) / want).abs() <= 1e-14, "Gamma({x}) = {got}");
        }
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.0).is_err());
    }
}
