//! Two-sided paired Student's t-test with Bonferroni correction.
//!
//! The t CDF is computed from the regularized incomplete beta function,
//! `P(|T| ≥ t) = I_{ν/(ν+t²)}(ν/2, 1/2)`, evaluated with the modified
//! Lentz continued fraction and a Lanczos log-gamma; both are accurate to
//! well below 1e-10 in the ranges used here.

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    /// Mean of `a − b`.
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub raw_p: f64,
    pub corrected_p: f64,
    pub significant: bool,
}

/// Paired test of `a` against `b` (same query order). The corrected p is
/// `min(1, raw_p · num_comparisons)`; significance is `corrected_p < 0.001`.
pub fn paired_ttest_bonferroni(a: &[f64], b: &[f64], num_comparisons: usize) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least 2 pairs"));
    }
    if num_comparisons == 0 {
        return Err(Error::invalid("number of comparisons must be at least 1"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::numerical("non-finite per-query value"));
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = diffs.len() - 1;

    if var == 0.0 {
        if diffs.iter().all(|&d| d == 0.0) {
            return Ok(PairedTTest {
                mean_diff: 0.0,
                t: 0.0,
                df,
                raw_p: 1.0,
                corrected_p: 1.0,
                significant: false,
            });
        }
        return Err(Error::numerical(
            "differences are constant and nonzero; t statistic is undefined",
        ));
    }

    let t = mean / (var / n).sqrt();
    let raw_p = two_sided_p(t, df as f64);
    let corrected_p = (raw_p * num_comparisons as f64).min(1.0);
    Ok(PairedTTest {
        mean_diff: mean,
        t,
        df,
        raw_p,
        corrected_p,
        significant: corrected_p < SIGNIFICANCE_LEVEL,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, n = 9).
pub(crate) fn ln_gamma(x: f64) -> f64 {
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
        // Reflection.
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

/// Regularized incomplete beta `I_x(a, b)`.
pub(crate) fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // The continued fraction converges fast only below the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
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
        // Even step.
        let aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
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

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn identical_lists_not_significant() {
        let a = [0.3, 0.5, 0.9];
        let r = paired_ttest_bonferroni(&a, &a, 2).unwrap();
        assert_eq!(r.raw_p, 1.0);
        assert_eq!(r.corrected_p, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        let err = paired_ttest_bonferroni(&[1.0, 2.0], &[0.5, 1.5], 1).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn near_constant_differences_give_extreme_t() {
        // d = 0.1 (×49) and 0.1001: mean 0.100002, sd √2e-10, t = 50001.
        let mut d = vec![0.1; 49];
        d.push(0.1001);
        let zeros = vec![0.0; 50];
        let r = paired_ttest_bonferroni(&d, &zeros, 1).unwrap();
        assert!((r.t - 50001.0).abs() / 50001.0 < 1e-6, "{}", r.t);
        assert_eq!(r.df, 49);
        assert!(r.raw_p < 1e-100);
        assert!(r.significant);
    }

    #[test]
    fn bonferroni_multiplication() {
        // Choose data whose raw p is small, then check the correction rule.
        let a = [0.9, 0.8, 0.85, 0.95, 0.7, 0.88];
        let b = [0.5, 0.45, 0.6, 0.5, 0.4, 0.55];
        let r1 = paired_ttest_bonferroni(&a, &b, 1).unwrap();
        let r3 = paired_ttest_bonferroni(&a, &b, 3).unwrap();
        assert_eq!(r3.corrected_p, (r1.raw_p * 3.0).min(1.0));
        let r_many = paired_ttest_bonferroni(&a, &b, 1_000_000_000).unwrap();
        assert_eq!(r_many.corrected_p, 1.0);
    }

    #[test]
    fn significance_uses_corrected_p() {
        // raw 0.0005 · 3 = 0.0015 ≥ 0.001.
        let raw = 0.0005;
        let corrected = (raw * 3.0f64).min(1.0);
        assert!((corrected - 0.0015).abs() < 1e-15);
        assert!(!(corrected < SIGNIFICANCE_LEVEL));
    }

    #[test]
    fn input_validation() {
        assert!(paired_ttest_bonferroni(&[1.0], &[0.0], 1).is_err());
        assert!(paired_ttest_bonferroni(&[1.0, 2.0], &[0.0], 1).is_err());
        assert!(paired_ttest_bonferroni(&[1.0, 2.0], &[0.0, 0.5], 0).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn p_matches_reference_cdf() {
        for &df in &[1.0, 2.0, 5.0, 19.0, 49.0, 200.0] {
            let reference = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[0.0, 0.1, 0.5, 1.0, 2.0, 3.5, 6.0, 12.0] {
                let expected = 2.0 * (1.0 - reference.cdf(t));
                let got = two_sided_p(t, df);
                assert!((got - expected).abs() < 1e-10, "df={df} t={t}: {got} vs {expected}");
            }
        }
    }
}
