//! Run comparison: Welch's unpaired t-test and Cohen's d.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::train::EvalPoint;
use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub cohens_d: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<(), LearnerError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(LearnerError::Degenerate("need at least two samples per side".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(LearnerError::Degenerate("samples must be finite".into()));
    }
    if variance(a) == 0.0 && variance(b) == 0.0 {
        return Err(LearnerError::Degenerate("both samples have zero variance".into()));
    }
    Ok(())
}

/// Welch's t statistic, Welch–Satterthwaite degrees of freedom and the
/// two-sided p-value.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64), LearnerError> {
    check(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (variance(a) / na, variance(b) / nb);
    let se2 = sa + sb;
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| LearnerError::Degenerate(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok((t, df, p))
}

/// Mean difference over the pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, LearnerError> {
    check(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    Ok((mean(a) - mean(b)) / pooled)
}

pub fn compare_runs(a: &[f64], b: &[f64]) -> Result<Comparison, LearnerError> {
    let (t, df, p) = welch_t_test(a, b)?;
    Ok(Comparison { t, df, p, cohens_d: cohens_d(a, b)?, mean_a: mean(a), mean_b: mean(b) })
}

/// First evaluated episode whose success rate reaches `threshold`, or
/// `censor_at` if none does.
pub fn episodes_to_threshold(points: &[EvalPoint], threshold: f64, censor_at: u64) -> u64 {
    points.iter().find(|p| p.success_rate >= threshold).map_or(censor_at, |p| p.episode)
}
