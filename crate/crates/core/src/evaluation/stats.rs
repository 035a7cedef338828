//! Paired t-test and paired Cohen's d (d_z).
//!
//! Differences are taken as `b - a`. The two-sided p-value comes from the
//! Student-t distribution through the regularized incomplete beta function:
//! `p = I_{v/(v+t^2)}(v/2, 1/2)` with `v = n - 1` degrees of freedom.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("differences have zero variance but non-zero mean {mean}")]
    DegenerateVariance { mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub t: f64,
    pub p_value: f64,
    pub dof: usize,
}

struct DiffSummary {
    n: usize,
    mean: f64,
    sd: f64,
}

// Relative size below which the spread of the differences counts as zero.
// Adding a constant to each element can leave last-bit noise in `b - a`.
const ZERO_SPREAD: f64 = 1e-12;

fn summarize(a: &[f64], b: &[f64]) -> Result<DiffSummary, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let scale = diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let sd = if var.sqrt() <= ZERO_SPREAD * scale {
        0.0
    } else {
        var.sqrt()
    };
    Ok(DiffSummary { n, mean, sd })
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, StatsError> {
    let s = summarize(a, b)?;
    let dof = s.n - 1;
    if s.sd == 0.0 {
        let scale = a.iter().chain(b).fold(0.0_f64, |m, x| m.max(x.abs()));
        if s.mean.abs() <= ZERO_SPREAD * scale.max(f64::MIN_POSITIVE) {
            return Ok(PairedTTest {
                t: 0.0,
                p_value: 1.0,
                dof,
            });
        }
        return Err(StatsError::DegenerateVariance { mean: s.mean });
    }
    let t = s.mean / (s.sd / (s.n as f64).sqrt());
    Ok(PairedTTest {
        t,
        p_value: student_t_two_sided(t, dof as f64),
        dof,
    })
}

pub fn cohens_d_paired(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let s = summarize(a, b)?;
    if s.sd == 0.0 {
        let scale = a.iter().chain(b).fold(0.0_f64, |m, x| m.max(x.abs()));
        if s.mean.abs() <= ZERO_SPREAD * scale.max(f64::MIN_POSITIVE) {
            return Ok(0.0);
        }
        return Err(StatsError::DegenerateVariance { mean: s.mean });
    }
    Ok(s.mean / s.sd)
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(x, dof / 2.0, 0.5).clamp(0.0, 1.0)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
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
    let mut sum = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// `I_x(a, b)`, evaluated with a modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
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
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
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
    use approx::assert_abs_diff_eq;

    #[test]
    fn equal_samples_give_zero() {
        let a = [0.1, 0.5, 0.9, 0.3];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p_value, r.dof), (0.0, 1.0, 3));
        assert_eq!(cohens_d_paired(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let a = [0.1, 0.2, 0.7];
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        assert!(matches!(
            cohens_d_paired(&a, &b),
            Err(StatsError::DegenerateVariance { .. })
        ));
        assert!(matches!(
            paired_t_test(&a, &b),
            Err(StatsError::DegenerateVariance { .. })
        ));
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            paired_t_test(&[1.0], &[2.0]).unwrap_err(),
            StatsError::TooFewPairs(1)
        );
        assert_eq!(
            paired_t_test(&[1.0, 2.0], &[2.0]).unwrap_err(),
            StatsError::LengthMismatch { a: 2, b: 1 }
        );
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(10.0), (362_880.0_f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn incomplete_beta_symmetry_and_closed_form() {
        // I_x(1, b) = 1 - (1 - x)^b
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.99] {
            assert_abs_diff_eq!(
                regularized_incomplete_beta(x, 1.0, 3.5),
                1.0 - (1.0 - x).powf(3.5),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                regularized_incomplete_beta(x, 2.5, 0.5),
                1.0 - regularized_incomplete_beta(1.0 - x, 0.5, 2.5),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn t_tail_matches_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &dof in &[1.0, 2.0, 5.0, 11.0, 29.0] {
            let dist = StudentsT::new(0.0, 1.0, dof).unwrap();
            for &t in &[0.1, 0.7, 1.96, 3.0, 8.5] {
                let expected = 2.0 * (1.0 - dist.cdf(t));
                assert_abs_diff_eq!(student_t_two_sided(t, dof), expected, epsilon = 1e-10);
                assert_abs_diff_eq!(student_t_two_sided(-t, dof), expected, epsilon = 1e-10);
            }
        }
    }
}
