use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_within_union, Point2};
use crate::scalar::{count, lit, to_f64, Real};
use crate::state_space::FloorPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TracePoint<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    pub room: String,
}

impl<T: Real> TracePoint<T> {
    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

/// Timed ground-truth positions, one per sensor sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthTrace<T> {
    pub points: Vec<TracePoint<T>>,
}

/// Sampling settings for [`gen_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceSpec<T> {
    pub speed_mps: T,
    pub rate_hz: T,
    /// Time spent at the final waypoint after the walk ends.
    #[serde(default)]
    pub dwell_s: T,
}

impl<T: Real> TraceSpec<T> {
    pub fn walking(speed_mps: T, rate_hz: T) -> Self {
        Self {
            speed_mps,
            rate_hz,
            dwell_s: T::zero(),
        }
    }

    pub fn stationary(rate_hz: T, dwell_s: T) -> Self {
        Self {
            speed_mps: T::one(),
            rate_hz,
            dwell_s,
        }
    }
}

fn position_along<T: Real>(waypoints: &[Point2<T>], cumulative: &[T], s: T) -> Point2<T> {
    let leg = cumulative
        .windows(2)
        .position(|w| s <= w[1])
        .unwrap_or(cumulative.len().saturating_sub(2));
    if waypoints.len() == 1 {
        return waypoints[0];
    }
    let (a, b) = (waypoints[leg], waypoints[leg + 1]);
    let len = cumulative[leg + 1] - cumulative[leg];
    if !(len > T::zero()) {
        return b;
    }
    let f = ((s - cumulative[leg]) / len).max(T::zero()).min(T::one());
    Point2::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
}

/// Piecewise-linear walk through `waypoints` at constant speed, sampled at
/// `t = k / rate` while `t <= walk time` or `t < walk time + dwell`.
pub fn gen_trace<T: Real>(
    plan: &FloorPlan<T>,
    waypoints: &[Point2<T>],
    spec: &TraceSpec<T>,
) -> Result<GroundTruthTrace<T>> {
    if waypoints.is_empty() {
        return Err(Error::InvalidParameter("trace needs at least one waypoint".into()));
    }
    if !(spec.speed_mps > T::zero()) || !(spec.rate_hz > T::zero()) || spec.dwell_s < T::zero() {
        return Err(Error::InvalidParameter(
            "speed and rate must be positive, dwell non-negative".into(),
        ));
    }
    for w in waypoints {
        if !plan.is_walkable(*w) {
            return Err(Error::RestrictedArea {
                x: to_f64(w.x),
                y: to_f64(w.y),
            });
        }
    }
    let polys: Vec<_> = plan.walkable().map(|r| &r.polygon).collect();
    let mut cumulative = vec![T::zero()];
    for pair in waypoints.windows(2) {
        if !segment_within_union(pair[0], pair[1], &polys) {
            return Err(Error::InvalidParameter(format!(
                "leg ({}, {}) -> ({}, {}) crosses a restricted area",
                pair[0].x, pair[0].y, pair[1].x, pair[1].y
            )));
        }
        let last = *cumulative.last().unwrap();
        cumulative.push(last + pair[0].distance(&pair[1]));
    }
    let total = *cumulative.last().unwrap();
    let walk_time = total / spec.speed_mps;
    let eps = lit::<T>(1e-9);
    let mut points = Vec::new();
    for k in 0usize.. {
        let t = count::<T>(k) / spec.rate_hz;
        let walking = t <= walk_time + eps;
        if !walking && !(t < walk_time + spec.dwell_s - eps) {
            break;
        }
        let s = (t * spec.speed_mps).min(total);
        let p = position_along(waypoints, &cumulative, s);
        let room = plan
            .region_at(p)
            .ok_or(Error::RestrictedArea {
                x: to_f64(p.x),
                y: to_f64(p.y),
            })?
            .to_string();
        points.push(TracePoint { t, x: p.x, y: p.y, room });
    }
    Ok(GroundTruthTrace { points })
}

impl<T: Real> GroundTruthTrace<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends `other` with its timestamps shifted to start `gap` after the
    /// last point of `self`.
    pub fn append_shifted(&mut self, other: &Self, gap: T) {
        let start = self.points.last().map(|p| p.t + gap).unwrap_or(T::zero());
        for p in &other.points {
            self.points.push(TracePoint {
                t: p.t + start,
                ..p.clone()
            });
        }
    }

    /// Largest speed between consecutive points, m/s.
    pub fn max_speed(&self) -> T {
        self.points
            .windows(2)
            .filter(|w| w[1].t > w[0].t)
            .map(|w| w[0].position().distance(&w[1].position()) / (w[1].t - w[0].t))
            .fold(T::zero(), T::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["t", "x", "y", "room"])?;
        for p in &self.points {
            out.write_record([p.t.to_string(), p.x.to_string(), p.y.to_string(), p.room.clone()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != ["t", "x", "y", "room"] {
            return Err(Error::Parse {
                line: 1,
                message: "expected header t,x,y,room".into(),
            });
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.deserialize::<TracePoint<T>>().enumerate() {
            points.push(rec.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        Ok(Self { points })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
