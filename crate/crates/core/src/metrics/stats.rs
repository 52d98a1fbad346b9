//! Significance tests and agreement statistics.

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast only below the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let odd = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Two-sided paired t-test on `a[i] - b[i]`.
///
/// Zero variance is resolved without dividing by zero: a zero mean
/// difference gives statistic 0 and p = 1, any other mean gives an infinite
/// statistic (signed like the mean) and p = 0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        let (statistic, p_value) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(TestResult {
            statistic,
            p_value,
            n,
        });
    }
    let statistic = mean / (var / n as f64).sqrt();
    Ok(TestResult {
        statistic,
        p_value: student_t_two_sided(statistic, (n - 1) as f64),
        n,
    })
}

fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    let (k, n) = (k as f64, n as f64);
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
        + k * p.ln()
        + (n - k) * (1.0 - p).ln()
}

/// Exact two-sided binomial test of `successes` out of
/// `successes + failures` against p = 0.5.
///
/// The p-value sums the probabilities of every outcome no more likely than
/// the observed one. The statistic is the observed success proportion.
pub fn binomial_test(successes: u64, failures: u64) -> Result<TestResult, MetricsError> {
    let n = successes + failures;
    if n == 0 {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
    }
    let p0 = 0.5;
    let observed = ln_binomial_pmf(successes, n, p0);
    // relative slack for floating-point equality of tail probabilities
    let threshold = observed + (1e-7f64).ln_1p();
    let p_value = (0..=n)
        .map(|k| ln_binomial_pmf(k, n, p0))
        .filter(|&lp| lp <= threshold)
        .map(f64::exp)
        .sum::<f64>()
        .min(1.0);
    Ok(TestResult {
        statistic: successes as f64 / n as f64,
        p_value,
        n: n as usize,
    })
}

/// Fleiss' kappa for an items × categories matrix of rater counts.
///
/// Every row must sum to the same number of raters (at least 2). When all
/// ratings fall in a single category the chance agreement is 1 and kappa is
/// defined as 1.
pub fn fleiss_kappa(ratings: &[Vec<u32>]) -> Result<f64, MetricsError> {
    let items = ratings.len();
    if items == 0 {
        return Err(MetricsError::RaggedMatrix("no items".into()));
    }
    let categories = ratings[0].len();
    let raters: u32 = ratings[0].iter().sum();
    if raters < 2 {
        return Err(MetricsError::RaggedMatrix(format!(
            "need at least 2 raters per item, got {raters}"
        )));
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != categories {
            return Err(MetricsError::RaggedMatrix(format!(
                "item {i} has {} categories, expected {categories}",
                row.len()
            )));
        }
        let sum: u32 = row.iter().sum();
        if sum != raters {
            return Err(MetricsError::RaggedMatrix(format!(
                "item {i} has {sum} ratings, expected {raters}"
            )));
        }
    }
    let r = raters as f64;
    let n = items as f64;
    let p_bar = ratings
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
            (sq - r) / (r * (r - 1.0))
        })
        .sum::<f64>()
        / n;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let pj = ratings.iter().map(|row| row[j] as f64).sum::<f64>() / (n * r);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
