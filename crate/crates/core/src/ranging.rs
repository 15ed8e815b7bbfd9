//! RSSI to distance conversion: log-distance path loss (LDPL), exponential
//! regression (NLR) and the hybrid that switches between them at the
//! line-of-sight power threshold.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};
use crate::sensing::{RSSI_MAX, RSSI_MIN};

/// Default distance below which propagation is treated as line of sight.
pub const DEFAULT_LOS_THRESHOLD_M: f64 = 5.0;

/// Propagation constants of one anchor. Reference distance is 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorRanging<T> {
    /// NLR scale, meters.
    pub alpha: T,
    /// NLR rate, per dBm (negative).
    pub beta: T,
    /// Path-loss exponent.
    pub gamma: T,
    /// Received power at 1 m, dBm.
    pub p_r0: T,
}

impl<T: Real> AnchorRanging<T> {
    pub fn new(alpha: T, beta: T, gamma: T, p_r0: T) -> Result<Self> {
        let a = Self {
            alpha,
            beta,
            gamma,
            p_r0,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > T::zero()
            && self.beta < T::zero()
            && self.gamma > T::zero()
            && self.p_r0 >= lit(RSSI_MIN)
            && self.p_r0 <= lit(RSSI_MAX);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "ranging constants out of domain: {self:?}"
            )))
        }
    }

    /// Received power at which the LDPL model predicts `los_threshold_m`.
    pub fn los_power(&self, los_threshold_m: T) -> T {
        self.p_r0 - lit::<T>(10.0) * self.gamma * los_threshold_m.log10()
    }
}

fn clamp_power<T: Real>(p: T) -> T {
    p.max(lit(RSSI_MIN)).min(lit(RSSI_MAX))
}

/// Noiseless LDPL forward model: power received at `r` meters.
pub fn forward_ldpl_power<T: Real>(r: T, a: &AnchorRanging<T>) -> T {
    a.p_r0 - lit::<T>(10.0) * a.gamma * r.log10()
}

/// LDPL inversion, `10^((p_r0 - p) / (10 gamma))`.
pub fn ldpl_range<T: Real>(p: T, a: &AnchorRanging<T>) -> T {
    let p = clamp_power(p);
    lit::<T>(10.0).powf((a.p_r0 - p) / (lit::<T>(10.0) * a.gamma))
}

/// NLR model, `alpha * exp(beta * p)`.
pub fn nlr_range<T: Real>(p: T, a: &AnchorRanging<T>) -> T {
    let p = clamp_power(p);
    a.alpha * (a.beta * p).exp()
}

/// LDPL strictly above the line-of-sight power, NLR at or below it.
pub fn hybrid_range<T: Real>(p: T, a: &AnchorRanging<T>, los_threshold_m: T) -> T {
    let p = clamp_power(p);
    if p > a.los_power(los_threshold_m) {
        ldpl_range(p, a)
    } else {
        nlr_range(p, a)
    }
}

/// Least-squares fit of `ln r = ln alpha + beta * p`; returns `(alpha, beta)`.
pub fn fit_nlr<T: Real>(reference: &[(T, T)]) -> Result<(T, T)> {
    if reference.iter().any(|(r, _)| !(*r > T::zero())) {
        return Err(Error::InvalidParameter(
            "reference distances must be positive".to_string(),
        ));
    }
    let pts: Vec<(T, T)> = reference.iter().map(|&(r, p)| (p, r.ln())).collect();
    let (intercept, slope) = linear_fit(&pts)?;
    Ok((intercept.exp(), slope))
}

/// Least-squares fit of `p = p_r0 - 10 gamma log10 r`; returns `(p_r0, gamma)`.
pub fn fit_ldpl<T: Real>(reference: &[(T, T)]) -> Result<(T, T)> {
    if reference.iter().any(|(r, _)| !(*r > T::zero())) {
        return Err(Error::InvalidParameter(
            "reference distances must be positive".to_string(),
        ));
    }
    let pts: Vec<(T, T)> = reference
        .iter()
        .map(|&(r, p)| (lit::<T>(10.0) * r.log10(), p))
        .collect();
    let (intercept, slope) = linear_fit(&pts)?;
    Ok((intercept, -slope))
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
fn linear_fit<T: Real>(pts: &[(T, T)]) -> Result<(T, T)> {
    if pts.len() < 2 {
        return Err(Error::UnderdeterminedFit);
    }
    let n = count::<T>(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::UnderdeterminedFit);
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Per-anchor constants plus the shared line-of-sight threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RangingParams<T> {
    pub anchors: BTreeMap<String, AnchorRanging<T>>,
    pub los_threshold_m: T,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ParamsRow<T> {
    an_id: String,
    alpha: T,
    beta: T,
    gamma: T,
    p_r0: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReferencePoint<T> {
    pub an_id: String,
    pub true_distance_m: T,
    pub rssi_dbm: T,
}

impl<T: Real> Default for RangingParams<T> {
    fn default() -> Self {
        Self {
            anchors: BTreeMap::new(),
            los_threshold_m: lit(DEFAULT_LOS_THRESHOLD_M),
        }
    }
}

impl<T: Real> RangingParams<T> {
    pub fn get(&self, an_id: &str) -> Result<&AnchorRanging<T>> {
        self.anchors
            .get(an_id)
            .ok_or_else(|| Error::UnknownAnchor(an_id.to_string()))
    }

    /// Hybrid range estimate for one anchor.
    pub fn range(&self, an_id: &str, p: T) -> Result<T> {
        Ok(hybrid_range(p, self.get(an_id)?, self.los_threshold_m))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        for (id, a) in &self.anchors {
            out.serialize(ParamsRow {
                an_id: id.clone(),
                alpha: a.alpha,
                beta: a.beta,
                gamma: a.gamma,
                p_r0: a.p_r0,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut params = Self::default();
        let mut rdr = csv::Reader::from_reader(r);
        for row in rdr.deserialize::<ParamsRow<T>>() {
            let row = row?;
            let a = AnchorRanging::new(row.alpha, row.beta, row.gamma, row.p_r0)?;
            params.anchors.insert(row.an_id, a);
        }
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Fits every anchor found in `refs`: NLR from all points, LDPL from the
    /// points within the line-of-sight threshold (all points when fewer than two).
    pub fn fit(refs: &[ReferencePoint<T>], los_threshold_m: T) -> Result<Self> {
        let mut grouped: BTreeMap<&str, Vec<(T, T)>> = BTreeMap::new();
        for r in refs {
            grouped
                .entry(r.an_id.as_str())
                .or_default()
                .push((r.true_distance_m, clamp_power(r.rssi_dbm)));
        }
        let mut params = Self {
            anchors: BTreeMap::new(),
            los_threshold_m,
        };
        for (id, pts) in grouped {
            let (alpha, beta) = fit_nlr(&pts)?;
            let los: Vec<(T, T)> = pts
                .iter()
                .copied()
                .filter(|(r, _)| *r <= los_threshold_m)
                .collect();
            let ldpl_pts = if los.len() >= 2 { &los } else { &pts };
            let (p_r0, gamma) = fit_ldpl(ldpl_pts)?;
            let a = AnchorRanging::new(alpha, beta, gamma, p_r0).map_err(|e| {
                Error::InvalidParameter(format!("fit for anchor `{id}` failed: {e}"))
            })?;
            params.anchors.insert(id.to_string(), a);
        }
        Ok(params)
    }
}

pub fn read_reference_points<T: Real, R: Read>(r: R) -> Result<Vec<ReferencePoint<T>>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_reference_points<T: Real, W: Write>(w: W, refs: &[ReferencePoint<T>]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for r in refs {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn an1() -> AnchorRanging<f64> {
        AnchorRanging::new(1.264, -0.03614, 2.7, -30.0).unwrap()
    }

    fn an3() -> AnchorRanging<f64> {
        AnchorRanging::new(0.3701, -0.05153, 2.7, -30.0).unwrap()
    }

    #[test]
    fn ldpl_examples() {
        let a = an1();
        assert!((ldpl_range(-30.0, &a) - 1.0).abs() < 1e-12);
        assert!((ldpl_range(-57.0, &a) - 10.0).abs() < 1e-12);
        let oracle = 10f64.powf(13.5 / 27.0);
        assert!((ldpl_range(-43.5, &a) - oracle).abs() < 1e-12);
        assert!((oracle - 3.162).abs() < 1e-3);
    }

    #[test]
    fn nlr_examples() {
        let unit = AnchorRanging::<f64>::new(1.0, -0.05, 2.7, -30.0).unwrap();
        assert!((nlr_range(0.0, &unit) - 1.0).abs() < 1e-15);
        let r = nlr_range(-60.0, &an1());
        assert!((r - 1.264 * (0.03614f64 * 60.0).exp()).abs() < 1e-12);
        assert!((r - 11.05).abs() < 5e-3);
        let r = nlr_range(-30.0, &an3());
        assert!((r - 1.736).abs() < 1e-3);
    }

    #[test]
    fn hybrid_branches() {
        let a = an1();
        let p5 = a.los_power(5.0);
        assert!((p5 - (-30.0 - 27.0 * 5f64.log10())).abs() < 1e-12);
        assert!((p5 - -48.872).abs() < 1e-3);
        assert_eq!(hybrid_range(-40.0, &a, 5.0), ldpl_range(-40.0, &a));
        assert_eq!(hybrid_range(-60.0, &a, 5.0), nlr_range(-60.0, &a));
        // exactly at the threshold selects NLR
        assert_eq!(hybrid_range(p5, &a, 5.0), nlr_range(p5, &a));
    }

    #[test]
    fn out_of_range_power_clamped() {
        let a = an1();
        assert_eq!(ldpl_range(20.0, &a), ldpl_range(0.0, &a));
        assert_eq!(nlr_range(-500.0, &a), nlr_range(-120.0, &a));
        assert!(nlr_range(-1e308, &a).is_finite());
    }

    #[test]
    fn invalid_constants_rejected() {
        assert!(AnchorRanging::new(-1.0, -0.03, 2.7, -30.0).is_err());
        assert!(AnchorRanging::new(1.0, 0.03, 2.7, -30.0).is_err());
        assert!(AnchorRanging::new(1.0, -0.03, 0.0, -30.0).is_err());
        assert!(AnchorRanging::new(1.0, -0.03, 2.7, 5.0).is_err());
    }

    #[test]
    fn fit_recovers_exact_parameters() {
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let p = -20.0 - i as f64;
                (2.0 * (-0.04 * p).exp(), p)
            })
            .collect();
        let (alpha, beta) = fit_nlr(&pts).unwrap();
        assert!((alpha - 2.0).abs() < 1e-9);
        assert!((beta + 0.04).abs() < 1e-9);
    }

    #[test]
    fn fit_two_points_by_hand() {
        // ln 1 = ln a + 0 b, ln e = ln a - 25 b  =>  a = 1, b = -1/25
        let (alpha, beta) = fit_nlr(&[(1.0, 0.0), (std::f64::consts::E, -25.0)]).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12);
        assert!((beta + 0.04).abs() < 1e-12);
    }

    #[test]
    fn fit_underdetermined() {
        assert!(matches!(fit_nlr(&[(1.0, -40.0)]), Err(Error::UnderdeterminedFit)));
        assert!(matches!(
            fit_nlr(&[(1.0, -40.0), (2.0, -40.0)]),
            Err(Error::UnderdeterminedFit)
        ));
        assert!(fit_nlr::<f64>(&[]).is_err());
    }

    #[test]
    fn fit_noisy_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let pts: Vec<(f64, f64)> = (0..100)
            .map(|_| {
                let p: f64 = rng.random_range(-90.0..-30.0);
                let lnr = 2f64.ln() - 0.04 * p + noise.sample(&mut rng);
                (lnr.exp(), p)
            })
            .collect();
        let (_, beta) = fit_nlr(&pts).unwrap();
        assert!((beta + 0.04).abs() < 0.004);
    }

    #[test]
    fn ldpl_fit_recovers_constants() {
        let a = an1();
        let pts: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 3.5, 5.0]
            .iter()
            .map(|&r| (r, forward_ldpl_power(r, &a)))
            .collect();
        let (p_r0, gamma) = fit_ldpl(&pts).unwrap();
        assert!((p_r0 + 30.0).abs() < 1e-9 && (gamma - 2.7).abs() < 1e-9);
    }

    #[test]
    fn params_csv_and_fit() {
        let mut params = RangingParams::default();
        params.anchors.insert("AN1".to_string(), an1());
        params.anchors.insert("AN3".to_string(), an3());
        let mut buf = Vec::new();
        params.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("an_id,alpha,beta,gamma,p_r0\nAN1,1.264,-0.03614,2.7,-30"));
        assert_eq!(RangingParams::<f64>::read_csv(&buf[..]).unwrap(), params);
        assert!((params.range("AN1", -60.0).unwrap() - nlr_range(-60.0, &an1())).abs() < 1e-15);
        assert!(params.range("AN9", -60.0).is_err());

        let bad = "an_id,alpha,beta,gamma,p_r0\nAN1,1.0,0.5,2.7,-30\n";
        assert!(RangingParams::<f64>::read_csv(bad.as_bytes()).is_err());

        let refs: Vec<ReferencePoint<f64>> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&r| ReferencePoint {
                an_id: "AN1".into(),
                true_distance_m: r,
                rssi_dbm: forward_ldpl_power(r, &an1()),
            })
            .collect();
        let mut buf = Vec::new();
        write_reference_points(&mut buf, &refs).unwrap();
        let back: Vec<ReferencePoint<f64>> = read_reference_points(&buf[..]).unwrap();
        assert_eq!(back, refs);
        let fitted = RangingParams::fit(&back, 5.0).unwrap();
        let a = fitted.get("AN1").unwrap();
        assert!((a.gamma - 2.7).abs() < 1e-9 && (a.p_r0 + 30.0).abs() < 1e-9);
        // LDPL is exactly exponential in power, so NLR reproduces it too
        assert!((a.beta + 10f64.ln() / 27.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn ranges_monotone_in_power(p in -120.0..0.0f64, dp in 0.0..30.0f64) {
            let a = an1();
            let q = (p + dp).min(0.0);
            prop_assert!(ldpl_range(q, &a) <= ldpl_range(p, &a));
            prop_assert!(nlr_range(q, &a) <= nlr_range(p, &a));
        }

        #[test]
        fn hybrid_branch_pointwise(p in -120.0..0.0f64) {
            let a = an3();
            let h = hybrid_range(p, &a, 5.0);
            if p > a.los_power(5.0) {
                prop_assert_eq!(h, ldpl_range(p, &a));
            } else {
                prop_assert_eq!(h, nlr_range(p, &a));
            }
        }

        #[test]
        fn ldpl_round_trip(r in 0.1..100.0f64) {
            let a = an1();
            let back = ldpl_range(forward_ldpl_power(r, &a), &a);
            prop_assert!((back - r).abs() <= 1e-12 * r.max(1.0));
        }
    }
}
