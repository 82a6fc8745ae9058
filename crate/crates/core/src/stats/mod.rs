//! One-tailed t-tests, a skew/kurtosis normality screen, and simple OLS
//! regression. All sums accumulate in f64, left to right.

pub mod special;

use serde::Serialize;

use crate::error::{Error, Result};

pub use special::{inc_beta_reg, ln_gamma, student_t_sf};

/// Significance thresholds reported as stars: ***p<0.01, **p<0.05, *p<0.1.
pub const SIGNIFICANCE_LEVELS: [f64; 3] = [0.01, 0.05, 0.1];

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        "ns"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    pub mean: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
    /// Subset of {0.01, 0.05, 0.1} at which the result is significant.
    pub significant_at: Vec<f64>,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    for &v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for &v in values {
        ss += (v - mean) * (v - mean);
    }
    (mean, (ss / (n - 1.0)).sqrt())
}

fn build_result(mean: f64, t: f64, df: usize) -> TTestResult {
    let p = student_t_sf(t, df as f64);
    TTestResult {
        mean,
        t_statistic: t,
        p_value: p,
        df,
        significant_at: SIGNIFICANCE_LEVELS
            .iter()
            .copied()
            .filter(|&alpha| p < alpha)
            .collect(),
    }
}

/// One-sample one-tailed t-test of H1: mean > null.
pub fn one_tailed_ttest_greater(values: &[f64], null: f64) -> Result<TTestResult> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            need: 2,
            got: values.len(),
        });
    }
    let (mean, sd) = mean_and_sd(values);
    if sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let n = values.len() as f64;
    let t = (mean - null) / (sd / n.sqrt());
    Ok(build_result(mean, t, values.len() - 1))
}

/// One-tailed test of H1: mean(a) - mean(b) > 0.
///
/// The paired variant is exactly the one-sample test over elementwise
/// differences. The unpaired variant uses the pooled-variance two-sample
/// statistic with df = n_a + n_b - 2.
pub fn mean_difference_test(a: &[f64], b: &[f64], paired: bool) -> Result<TTestResult> {
    if paired {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        let diffs: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
        return one_tailed_ttest_greater(&diffs, 0.0);
    }
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewValues {
            need: 2,
            got: a.len().min(b.len()),
        });
    }
    let (mean_a, sd_a) = mean_and_sd(a);
    let (mean_b, sd_b) = mean_and_sd(b);
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let df = a.len() + b.len() - 2;
    let pooled = ((na - 1.0) * sd_a * sd_a + (nb - 1.0) * sd_b * sd_b) / df as f64;
    if pooled == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = (mean_a - mean_b) / (pooled.sqrt() * (1.0 / na + 1.0 / nb).sqrt());
    Ok(build_result(mean_a - mean_b, t, df))
}

/// Moment-based normality screen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityScreen {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// true iff |skewness| < 2 and |excess kurtosis| < 7.
    pub pass: bool,
}

pub fn normality_screen(values: &[f64]) -> Result<NormalityScreen> {
    if values.len() < 8 {
        return Err(Error::TooFewValues {
            need: 8,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mut sum = 0.0;
    for &v in values {
        sum += v;
    }
    let mean = sum / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    Ok(NormalityScreen {
        skewness,
        excess_kurtosis,
        pass: skewness.abs() < 2.0 && excess_kurtosis.abs() < 7.0,
    })
}

/// Closed-form simple least squares with coefficient standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Two-sided p-values on the coefficients (df = n - 2).
    pub slope_p: f64,
    pub intercept_p: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub residual_se: f64,
    pub n: usize,
}

pub fn ols_simple(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            a: x.len(),
            b: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewValues {
            need: 3,
            got: x.len(),
        });
    }
    let n = x.len();
    let nf = n as f64;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for i in 0..n {
        sum_x += x[i];
        sum_y += y[i];
    }
    let mean_x = sum_x / nf;
    let mean_y = sum_y / nf;
    let (mut sxx, mut sxy, mut sst) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        sst += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ssr = 0.0;
    for i in 0..n {
        let r = y[i] - (intercept + slope * x[i]);
        ssr += r * r;
    }
    // Constant y with varying x: zero residuals around a flat line.
    let r_squared = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    let df = n - 2;
    let residual_se = (ssr / df as f64).sqrt();
    let slope_se = residual_se / sxx.sqrt();
    let intercept_se = residual_se * (1.0 / nf + mean_x * mean_x / sxx).sqrt();
    let t_slope = if slope_se == 0.0 {
        f64::INFINITY
    } else {
        slope / slope_se
    };
    let t_intercept = if intercept_se == 0.0 {
        f64::INFINITY
    } else {
        intercept / intercept_se
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_se,
        intercept_se,
        slope_p: 2.0 * student_t_sf(t_slope.abs(), df as f64),
        intercept_p: 2.0 * student_t_sf(t_intercept.abs(), df as f64),
        r_squared,
        adj_r_squared: 1.0 - (1.0 - r_squared) * (nf - 1.0) / (df as f64),
        f_statistic: t_slope * t_slope,
        residual_se,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_mean_gives_half_p() {
        let r = one_tailed_ttest_greater(&[1.0, -1.0], 0.0).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert!(close(r.p_value, 0.5, 1e-15));
        assert_eq!(r.df, 1);
        assert!(r.significant_at.is_empty());
    }

    #[test]
    fn synthetic_ttest_matches_frozen_golden() {
        // {0.1, 0.2, 0.3, 0.4}: t and p frozen from a 60-digit computation.
        let r = one_tailed_ttest_greater(&[0.1, 0.2, 0.3, 0.4], 0.0).unwrap();
        assert!(close(r.t_statistic, 3.8729833462074169, 1e-12), "t={}", r.t_statistic);
        assert!(close(r.p_value, 0.015233145831085496, 1e-13), "p={}", r.p_value);
        assert_eq!(r.df, 3);
        assert_eq!(r.significant_at, vec![0.05, 0.1]);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(
            one_tailed_ttest_greater(&[1.0], 0.0),
            Err(Error::TooFewValues { .. })
        ));
        assert!(matches!(
            one_tailed_ttest_greater(&[2.0, 2.0, 2.0], 0.0),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn paired_equal_samples_is_zero_variance() {
        let a = [0.3, 0.4, 0.5];
        assert!(matches!(
            mean_difference_test(&a, &a, true),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn paired_test_reduces_to_one_sample_bitwise() {
        let a = [0.35, 0.41, 0.29, 0.57, 0.44];
        let b = [0.30, 0.37, 0.33, 0.41, 0.40];
        let paired = mean_difference_test(&a, &b, true).unwrap();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let one_sample = one_tailed_ttest_greater(&diffs, 0.0).unwrap();
        assert_eq!(paired, one_sample);
    }

    #[test]
    fn paired_length_mismatch() {
        assert!(matches!(
            mean_difference_test(&[1.0, 2.0], &[1.0], true),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn shift_invariance() {
        let values = [0.3, -0.1, 0.8, 0.2, 0.5];
        let base = one_tailed_ttest_greater(&values, 0.1).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + 5.0).collect();
        let moved = one_tailed_ttest_greater(&shifted, 5.1).unwrap();
        assert!(close(base.t_statistic, moved.t_statistic, 1e-9));
        assert_eq!(base.df, moved.df);
    }

    #[test]
    fn scale_invariance() {
        let values = [0.3, -0.1, 0.8, 0.2, 0.5];
        let base = one_tailed_ttest_greater(&values, 0.0).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * 7.0).collect();
        let big = one_tailed_ttest_greater(&scaled, 0.0).unwrap();
        assert!(close(base.t_statistic, big.t_statistic, 1e-12));
        assert!(close(base.p_value, big.p_value, 1e-14));
        assert_eq!(base.df, big.df);
    }

    #[test]
    fn normality_alternating_signs_has_zero_skew() {
        let values: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let screen = normality_screen(&values).unwrap();
        assert!(close(screen.skewness, 0.0, 1e-12));
        // Two-point distribution has excess kurtosis -2.
        assert!(close(screen.excess_kurtosis, -2.0, 1e-12));
        assert!(screen.pass);
    }

    #[test]
    fn normality_outlier_fails_on_kurtosis() {
        // 100 mild values and one enormous outlier; kurtosis explodes.
        let mut values: Vec<f64> = (0..100).map(|i| ((i % 7) as f64 - 3.0) * 0.1).collect();
        values.push(1e6);
        let screen = normality_screen(&values).unwrap();
        // Hand check: with one dominant value d among n points, m4/m2^2
        // approaches n - 2 + 1/(n-1) >> 7.
        assert!(screen.excess_kurtosis > 90.0);
        assert!(!screen.pass);
    }

    #[test]
    fn normality_golden_standard_normal() {
        // 10,000 seeded standard normals; skew/kurtosis computed once and
        // frozen.
        let mut rng = crate::rng::Xoshiro256StarStar::new(2024);
        let values: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        let screen = normality_screen(&values).unwrap();
        assert!(screen.pass);
        assert!(close(screen.skewness, -2.60753276993027326e-3, 1e-6));
        assert!(close(screen.excess_kurtosis, 1.01546219728576581e-2, 1e-6));
    }

    #[test]
    fn normality_needs_eight_values() {
        assert!(matches!(
            normality_screen(&[1.0; 7]),
            Err(Error::TooFewValues { need: 8, .. })
        ));
    }

    #[test]
    fn ols_perfect_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = ols_simple(&x, &y).unwrap();
        assert!(close(r.slope, 2.0, 1e-12));
        assert!(close(r.intercept, 1.0, 1e-12));
        assert!(close(r.r_squared, 1.0, 1e-12));
    }

    #[test]
    fn ols_matches_frozen_golden() {
        // 10-point dataset with every field frozen from a 60-digit
        // normal-equations computation.
        let x = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
        let y = [1.1, 1.9, 3.2, 3.8, 5.3, 5.9, 7.1, 7.8, 9.2, 9.9];
        let r = ols_simple(&x, &y).unwrap();
        assert!(close(r.slope, 1.9854545454545455, 1e-9));
        assert!(close(r.intercept, 0.060000000000000000, 1e-9));
        assert!(close(r.slope_se, 0.042041564111574850, 1e-9));
        assert!(close(r.intercept_se, 0.13043052254791135, 1e-9));
        assert!(close(r.r_squared, 0.99642584975199319, 1e-9));
        assert!(close(r.adj_r_squared, 0.99597908097099234, 1e-9));
        assert!((r.f_statistic - 2230.2942643391521).abs() / 2230.2942643391521 < 1e-9);
        assert!(close(r.residual_se, 0.19093073470383299, 1e-9));
        assert!((r.slope_p - 4.4685964276551473e-11).abs() / 4.4685964276551473e-11 < 1e-6);
        assert!(close(r.intercept_p, 0.65774973827978180, 1e-9));
        assert_eq!(r.n, 10);
    }

    #[test]
    fn ols_f_equals_t_squared() {
        let x = [0.1, 0.5, 0.9, 1.7, 2.2, 3.1];
        let y = [0.3, 0.2, 1.1, 1.4, 2.6, 2.9];
        let r = ols_simple(&x, &y).unwrap();
        let t = r.slope / r.slope_se;
        assert!((r.f_statistic - t * t).abs() < 1e-6);
    }

    #[test]
    fn ols_r_squared_symmetric_in_swap() {
        let x = [0.1, 0.5, 0.9, 1.7, 2.2, 3.1];
        let y = [0.3, 0.2, 1.1, 1.4, 2.6, 2.9];
        let fwd = ols_simple(&x, &y).unwrap();
        let rev = ols_simple(&y, &x).unwrap();
        assert!(close(fwd.r_squared, rev.r_squared, 1e-12));
    }

    #[test]
    fn ols_degenerate_x() {
        assert!(matches!(
            ols_simple(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateRegressor)
        ));
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(stars(0.001), "***");
        assert_eq!(stars(0.02), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.5), "ns");
    }
}
