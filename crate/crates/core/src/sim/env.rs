use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::ranging::AnchorRanging;
use crate::scalar::{lit, Real};
use crate::sensing::{MagneticSignature, RSSI_MAX, RSSI_MIN};
use crate::state_space::FloorPlan;

/// Anchors quieter than this (noiseless) are missing from a scan.
pub const AUDIBILITY_DBM: f64 = -95.0;
/// Distances below this are clamped before the path-loss log.
pub const MIN_RANGE_M: f64 = 0.1;

/// Ground-truth propagation for one anchor. `position` supplies the true
/// location of anchors whose coordinates the localizer is not given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TruthAnchor<T> {
    pub p_r0: T,
    pub gamma: T,
    #[serde(default)]
    pub position: Option<[T; 2]>,
}

/// Smooth per-region field: `base + amplitude * s(x, y)` with
/// `s_v = sin(wx + phase) cos(wy + phase)` and `s_h = cos(wx + phase) sin(wy + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MfRoom<T> {
    pub base_v: T,
    pub base_h: T,
    #[serde(default)]
    pub amplitude: T,
    #[serde(default)]
    pub phase: T,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: T,
}

fn default_wavelength<T: Real>() -> T {
    lit(4.0)
}

impl<T: Real> MfRoom<T> {
    pub fn flat(base_v: T, base_h: T) -> Self {
        Self {
            base_v,
            base_h,
            amplitude: T::zero(),
            phase: T::zero(),
            wavelength_m: default_wavelength(),
        }
    }

    pub fn at(&self, p: Point2<T>) -> MagneticSignature<T> {
        let w = lit::<T>(2.0) * T::PI() / self.wavelength_m;
        let (ax, ay) = (w * p.x + self.phase, w * p.y + self.phase);
        MagneticSignature {
            mf_v: self.base_v + self.amplitude * ax.sin() * ay.cos(),
            mf_h: (self.base_h + self.amplitude * ax.cos() * ay.sin()).max(T::zero()),
        }
    }
}

/// Floor plan plus the ground-truth sensor models used to synthesize data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnvironmentModel<T> {
    #[serde(flatten)]
    pub plan: FloorPlan<T>,
    pub truth_ranging: BTreeMap<String, TruthAnchor<T>>,
    #[serde(default)]
    pub shadowing_sigma_db: T,
    pub mf_rooms: BTreeMap<String, MfRoom<T>>,
    #[serde(default)]
    pub mf_noise_sigma: T,
}

pub(crate) fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, sigma: T) -> T {
    let z: f64 = StandardNormal.sample(rng);
    sigma * lit::<T>(z)
}

impl<T: Real> EnvironmentModel<T> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let env: Self = serde_json::from_str(s)?;
        env.validate()?;
        Ok(env)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        if !(self.shadowing_sigma_db >= T::zero()) || !(self.mf_noise_sigma >= T::zero()) {
            return Err(Error::InvalidParameter("noise sigmas must be non-negative".into()));
        }
        let registry = self.plan.anchor_ids();
        for (id, a) in &self.truth_ranging {
            if !registry.contains(id) {
                return Err(Error::UnknownAnchor(id.clone()));
            }
            if !(a.gamma > T::zero()) {
                return Err(Error::InvalidParameter(format!("gamma of `{id}` must be positive")));
            }
        }
        self.truth_positions()?;
        for r in self.plan.walkable() {
            if !self.mf_rooms.contains_key(&r.id) {
                return Err(Error::InvalidParameter(format!(
                    "no magnetic field model for region `{}`",
                    r.id
                )));
            }
        }
        Ok(())
    }

    /// True coordinates of every simulated anchor.
    pub fn truth_positions(&self) -> Result<BTreeMap<String, Point2<T>>> {
        let known = self.plan.anchor_positions();
        self.truth_ranging
            .iter()
            .map(|(id, a)| {
                let p = a
                    .position
                    .map(|[x, y]| Point2::new(x, y))
                    .or_else(|| known.get(id).copied())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("anchor `{id}` has no true position"))
                    })?;
                Ok((id.clone(), p))
            })
            .collect()
    }

    /// Anchor ids in scan order.
    pub fn ap_list(&self) -> Vec<String> {
        self.truth_ranging.keys().cloned().collect()
    }

    /// Truth parameters in ranging-model form (`alpha`, `beta` set to the
    /// LDPL-equivalent exponential).
    pub fn truth_ranging_model(&self, id: &str) -> Result<AnchorRanging<T>> {
        let a = self
            .truth_ranging
            .get(id)
            .ok_or_else(|| Error::UnknownAnchor(id.to_string()))?;
        let ten = lit::<T>(10.0);
        // r = 10^((p_r0 - p) / 10 gamma) = alpha * exp(beta * p)
        let beta = -ten.ln() / (ten * a.gamma);
        let alpha = (ten.ln() * a.p_r0 / (ten * a.gamma)).exp();
        AnchorRanging::new(alpha, beta, a.gamma, a.p_r0)
    }

    fn anchor(&self, id: &str) -> Result<(&TruthAnchor<T>, Point2<T>)> {
        let a = self
            .truth_ranging
            .get(id)
            .ok_or_else(|| Error::UnknownAnchor(id.to_string()))?;
        let p = match a.position {
            Some([x, y]) => Point2::new(x, y),
            None => self
                .plan
                .anchor_positions()
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownAnchor(id.to_string()))?,
        };
        Ok((a, p))
    }

    /// Path-loss power at `position` without shadowing, clamped to the RSSI range.
    pub fn noiseless_rssi(&self, an_id: &str, position: Point2<T>) -> Result<T> {
        let (a, at) = self.anchor(an_id)?;
        Ok(noiseless_power(a, at, position))
    }

    /// Path-loss power plus Gaussian shadowing, clamped to `[-120, 0]` dBm.
    pub fn forward_rssi<R: Rng + ?Sized>(
        &self,
        an_id: &str,
        position: Point2<T>,
        rng: &mut R,
    ) -> Result<T> {
        let (a, at) = self.anchor(an_id)?;
        let p = raw_power(a, at, position) + gaussian(rng, self.shadowing_sigma_db);
        Ok(clamp_rssi(p))
    }

    /// Noiseless field value at `position`.
    pub fn mf_field(&self, position: Point2<T>) -> Result<MagneticSignature<T>> {
        let region = self.plan.region_at(position).ok_or(Error::RestrictedArea {
            x: crate::scalar::to_f64(position.x),
            y: crate::scalar::to_f64(position.y),
        })?;
        let room = self.mf_rooms.get(region).ok_or_else(|| {
            Error::InvalidParameter(format!("no magnetic field model for region `{region}`"))
        })?;
        Ok(room.at(position))
    }

    /// Field value plus Gaussian noise on each component; `mf_h` stays non-negative.
    pub fn forward_mf<R: Rng + ?Sized>(
        &self,
        position: Point2<T>,
        rng: &mut R,
    ) -> Result<MagneticSignature<T>> {
        let f = self.mf_field(position)?;
        Ok(MagneticSignature {
            mf_v: f.mf_v + gaussian(rng, self.mf_noise_sigma),
            mf_h: (f.mf_h + gaussian(rng, self.mf_noise_sigma)).max(T::zero()),
        })
    }
}

fn raw_power<T: Real>(a: &TruthAnchor<T>, at: Point2<T>, p: Point2<T>) -> T {
    let r = at.distance(&p).max(lit(MIN_RANGE_M));
    a.p_r0 - lit::<T>(10.0) * a.gamma * r.log10()
}

fn noiseless_power<T: Real>(a: &TruthAnchor<T>, at: Point2<T>, p: Point2<T>) -> T {
    clamp_rssi(raw_power(a, at, p))
}

fn clamp_rssi<T: Real>(p: T) -> T {
    p.max(lit(RSSI_MIN)).min(lit(RSSI_MAX))
}

/// True when the noiseless power clears the audibility threshold.
pub fn audible<T: Real>(power: T) -> bool {
    power >= lit(AUDIBILITY_DBM)
}
