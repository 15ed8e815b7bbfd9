//! Localization error statistics and offline survey-time arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Percentile by linear interpolation between order statistics at rank
/// `q * (n - 1)`, `q` in `[0, 1]`.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    percentile_sorted(&s, q)
}

fn percentile_sorted(s: &[f64], q: f64) -> f64 {
    let rank = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (rank - lo as f64)
}

/// Median (the 50th percentile under the same rule).
pub fn median(xs: &[f64]) -> f64 {
    percentile(xs, 0.5)
}

/// Empirical CDF as `(error, fraction <= error)` pairs.
pub fn empirical_cdf(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, e)| (*e, (i + 1) as f64 / n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub errors_m: Vec<f64>,
    pub mean_m: f64,
    pub std_m: f64,
    pub p90_m: f64,
    pub cdf: Vec<(f64, f64)>,
    #[serde(default)]
    pub step_ms: Vec<f64>,
    #[serde(default)]
    pub median_step_ms: Option<f64>,
    #[serde(default)]
    pub degenerate_steps: usize,
    #[serde(default)]
    pub survey_minutes: Option<f64>,
}

impl MetricsReport {
    pub fn from_errors(method: impl Into<String>, errors_m: Vec<f64>) -> Result<Self> {
        if errors_m.is_empty() {
            return Err(Error::InvalidParameter("no localization errors to summarize".into()));
        }
        if errors_m.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidParameter("errors must be finite and non-negative".into()));
        }
        Ok(Self {
            method: method.into(),
            mean_m: mean(&errors_m),
            std_m: std_dev(&errors_m),
            p90_m: percentile(&errors_m, 0.9),
            cdf: empirical_cdf(&errors_m),
            errors_m,
            step_ms: Vec::new(),
            median_step_ms: None,
            degenerate_steps: 0,
            survey_minutes: None,
        })
    }

    pub fn with_timing(mut self, step_ms: Vec<f64>) -> Self {
        self.median_step_ms = (!step_ms.is_empty()).then(|| median(&step_ms));
        self.step_ms = step_ms;
        self
    }

    /// True when mean, SD, p90 and CDF match a recomputation from `errors_m`.
    pub fn is_consistent(&self) -> bool {
        let again = match Self::from_errors(self.method.clone(), self.errors_m.clone()) {
            Ok(r) => r,
            Err(_) => return false,
        };
        again.mean_m == self.mean_m
            && again.std_m == self.std_m
            && again.p90_m == self.p90_m
            && again.cdf == self.cdf
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
    }
    Ok(())
}

/// Room-landmark survey: `I` instances at `rate_hz`, plus the ranging
/// calibration time, in minutes.
pub fn pfml_survey_minutes(instances: f64, rate_hz: f64, ranging_minutes: f64) -> Result<f64> {
    check_non_negative("instances", instances)?;
    check_non_negative("ranging time", ranging_minutes)?;
    if !(rate_hz > 0.0) {
        return Err(Error::InvalidParameter("rate must be positive".into()));
    }
    Ok(instances / rate_hz / 60.0 + ranging_minutes)
}

/// Point-survey fingerprinting: `Sp` survey points, each costing `t_sp`
/// seconds of sampling and `t_sw` seconds of switching, plus `I` instances at
/// `rate_hz`, in minutes.
pub fn knn_survey_minutes(
    survey_points: f64,
    t_sp_s: f64,
    t_sw_s: f64,
    instances: f64,
    rate_hz: f64,
) -> Result<f64> {
    for (n, v) in [
        ("survey points", survey_points),
        ("t_sp", t_sp_s),
        ("t_sw", t_sw_s),
        ("instances", instances),
    ] {
        check_non_negative(n, v)?;
    }
    if !(rate_hz > 0.0) {
        return Err(Error::InvalidParameter("rate must be positive".into()));
    }
    Ok((survey_points * (t_sp_s + t_sw_s) + instances / rate_hz) / 60.0)
}
