//! Descriptive statistics and the hypothesis tests used to compare
//! conditions: one-way ANOVA and the two-tailed paired t-test.
//!
//! Tail probabilities come from the regularized incomplete beta function in
//! [`special`].

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degrees of freedom of a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dof {
    T(f64),
    F(f64, f64),
}

/// Something unusual about how a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFlag {
    /// Zero within-sample variance with a nonzero effect: the statistic is
    /// infinite and p is reported as 0.
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: Dof,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<TestFlag>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (n − 1 denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

fn sorted_finite(values: &[f64], what: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput(format!("{what} of an empty list")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain(format!("{what} of a list containing NaN")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Median; the mean of the two central values for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    let sorted = sorted_finite(values, "median")?;
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Quantile with linear interpolation between order statistics
/// (`q·(n − 1)` positioning).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile {q} outside [0, 1]")));
    }
    let sorted = sorted_finite(values, "quantile")?;
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// One-way analysis of variance across `groups`.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::Validation(format!(
            "ANOVA needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(Error::Validation(format!(
            "ANOVA group {i} has {} sample(s), needs at least 2",
            g.len()
        )));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("ANOVA samples must be finite".into()));
    }
    let k = groups.len() as f64;
    let n: usize = groups.iter().map(Vec::len).sum();
    let n = n as f64;
    let grand = groups.iter().flatten().sum::<f64>() / n;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let (df1, df2) = (k - 1.0, n - k);
    let ms_between = ss_between / df1;
    let ms_within = ss_within / df2;
    let dof = Dof::F(df1, df2);

    // Equal means up to rounding of the grand mean.
    let scale = groups.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let between_is_zero = ms_between <= (scale * 1e-12).powi(2);
    if between_is_zero {
        return Ok(TestResult {
            statistic: 0.0,
            dof,
            p_value: 1.0,
            flag: None,
        });
    }
    if ms_within == 0.0 {
        return Ok(TestResult {
            statistic: f64::INFINITY,
            dof,
            p_value: 0.0,
            flag: Some(TestFlag::ZeroVariance),
        });
    }
    let f = ms_between / ms_within;
    Ok(TestResult {
        statistic: f,
        dof,
        p_value: special::f_sf(f, df1, df2),
        flag: None,
    })
}

/// Two-tailed paired Student's t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired t-test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Validation(format!(
            "paired t-test needs at least 2 pairs, got {}",
            a.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("paired samples must be finite".into()));
    }
    let n = diffs.len() as f64;
    let dof = Dof::T(n - 1.0);
    let m = mean(&diffs);
    let sd = sample_std(&diffs);
    if sd == 0.0 {
        return Ok(if m == 0.0 {
            TestResult {
                statistic: 0.0,
                dof,
                p_value: 1.0,
                flag: None,
            }
        } else {
            TestResult {
                statistic: f64::INFINITY.copysign(m),
                dof,
                p_value: 0.0,
                flag: Some(TestFlag::ZeroVariance),
            }
        });
    }
    let t = m / (sd / n.sqrt());
    Ok(TestResult {
        statistic: t,
        dof,
        p_value: special::t_two_tailed(t, n - 1.0),
        flag: None,
    })
}
