//! Scalar statistics: chi-squared quantiles, empirical quantiles and
//! percentile ranks.

use crate::error::{Result, ShapeError};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper tail `Q(a, x)` by the modified Lentz continued fraction.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

pub fn chi2_cdf(x: f64, dof: usize) -> f64 {
    regularized_gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// Quantile of the chi-squared distribution with `dof` degrees of freedom,
/// found by safeguarded Newton iteration on the regularized incomplete gamma.
pub fn chi2_quantile(prob: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(ShapeError::InvalidArgument(
            "chi-squared degrees of freedom must be positive".into(),
        ));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(ShapeError::InvalidArgument(format!(
            "probability {prob} outside (0, 1)"
        )));
    }
    let k = dof as f64;
    let a = k / 2.0;
    let log_norm = ln_gamma(a) + a * 2f64.ln();
    let density = |x: f64| ((a - 1.0) * x.ln() - x / 2.0 - log_norm).exp();

    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while chi2_cdf(hi, dof) < prob {
        lo = hi;
        hi *= 2.0;
    }
    // Wilson-Hilferty start, clipped into the bracket.
    let z = normal_quantile_approx(prob);
    let h = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = chi2_cdf(x, dof) - prob;
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / density(x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Acklam-style rational approximation, only used for starting values.
fn normal_quantile_approx(p: f64) -> f64 {
    let t = if p < 0.5 { p } else { 1.0 - p };
    let s = (-2.0 * t.ln()).sqrt();
    let z = s - (2.515_517 + 0.802_853 * s + 0.010_328 * s * s)
        / (1.0 + 1.432_788 * s + 0.189_269 * s * s + 0.001_308 * s * s * s);
    if p < 0.5 {
        -z
    } else {
        z
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n - 1) * prob` in the sorted sample).
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, prob)
}

pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = prob.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    let frac = pos - i as f64;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Percentile (0..=100) of `x` within `sample`: the inverse of [`quantile`].
/// Ties resolve to the highest matching order statistic.
pub fn percentile_rank(sample: &[f64], x: f64) -> f64 {
    assert!(!sample.is_empty());
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 1 {
        return if x < sorted[0] { 0.0 } else { 100.0 };
    }
    if x <= sorted[0] {
        return if x == sorted[0] && sorted[1] == sorted[0] {
            let last = sorted.iter().rposition(|&v| v == x).unwrap_or(0);
            100.0 * last as f64 / (n - 1) as f64
        } else {
            0.0
        };
    }
    if x >= sorted[n - 1] {
        return 100.0;
    }
    // last index with sorted[i] <= x
    let i = sorted.partition_point(|&v| v <= x) - 1;
    let frac = if sorted[i + 1] > sorted[i] {
        (x - sorted[i]) / (sorted[i + 1] - sorted[i])
    } else {
        0.0
    };
    100.0 * (i as f64 + frac) / (n - 1) as f64
}
