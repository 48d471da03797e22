//! Truncated power series arithmetic in one variable.

/// Cauchy product truncated to `len` coefficients.
pub(crate) fn mul(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..=k {
            if let (Some(x), Some(y)) = (a.get(j), b.get(k - j)) {
                acc += x * y;
            }
        }
        *slot = acc;
    }
    out
}

/// `num / den`, requires `den[0] != 0`.
pub(crate) fn div(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for k in 0..len {
        let mut acc = num.get(k).copied().unwrap_or(0.0);
        for j in 1..=k {
            if let Some(d) = den.get(j) {
                acc -= d * out[k - j];
            }
        }
        out[k] = acc / den[0];
    }
    out
}

/// Series of `(x0 + slope * d)^p` in `d`, for `x0 > 0`.
pub(crate) fn linear_pow(x0: f64, slope: f64, p: f64, len: usize) -> Vec<f64> {
    let ratio = slope / x0;
    let mut out = Vec::with_capacity(len);
    let mut binom = 1.0;
    let mut scale = x0.powf(p);
    for m in 0..len {
        if m > 0 {
            binom *= (p - (m as f64 - 1.0)) / m as f64;
            scale *= ratio;
        }
        out.push(binom * scale);
    }
    out
}

/// Evaluate a polynomial with coefficients in ascending order.
#[cfg(test)]
#[inline]
pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
