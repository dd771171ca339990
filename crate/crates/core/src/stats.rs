//! Statistical verification helpers: Kolmogorov–Smirnov tests and the few
//! scalar summaries the test suites lean on.

/// Complementary error function (Chebyshev fit, absolute error < 1.2e-7,
/// plenty for test thresholds).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z
        - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277))))))));
    let v = t * poly.exp();
    if x >= 0.0 {
        v
    } else {
        2.0 - v
    }
}

/// CDF of the standard normal distribution.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

/// One column of a sample matrix.
pub fn column(samples: &[Vec<f64>], j: usize) -> Vec<f64> {
    samples.iter().map(|r| r[j]).collect()
}

/// One-sample KS statistic sup |F_n − F| against a reference CDF.
pub fn ks_statistic_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut worst = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((f - i as f64 / n).abs());
        worst = worst.max(((i + 1) as f64 / n - f).abs());
    }
    worst
}

/// Two-sample KS statistic sup |F_m − G_n|; tie-safe by evaluating both
/// empirical CDFs at every pooled point.
pub fn ks_statistic_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (m, n) = (a.len() as f64, b.len() as f64);
    let cdf = |sorted: &[f64], v: f64| sorted.partition_point(|&s| s <= v) as f64;
    let mut worst = 0.0_f64;
    for &v in a.iter().chain(b.iter()) {
        let fa = cdf(&a, v) / m;
        let fb = cdf(&b, v) / n;
        worst = worst.max((fa - fb).abs());
    }
    worst
}

fn kolmogorov_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Asymptotic rejection threshold for the one-sample KS statistic.
pub fn ks_one_sample_threshold(n: usize, alpha: f64) -> f64 {
    kolmogorov_coefficient(alpha) / (n as f64).sqrt()
}

/// Asymptotic rejection threshold for the two-sample KS statistic.
pub fn ks_two_sample_threshold(m: usize, n: usize, alpha: f64) -> f64 {
    kolmogorov_coefficient(alpha) * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}
