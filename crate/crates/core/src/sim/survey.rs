use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::CoordFingerprintDatabase;
use crate::error::{Error, Result};
use crate::geometry::{segment_within_union, Point2, Polygon};
use crate::ranging::ReferencePoint;
use crate::scalar::{count, lit, Real};
use crate::sensing::{FingerprintDatabase, ObservationFrame, Vec3};

use super::env::{audible, gaussian, EnvironmentModel};
use super::trace::{gen_trace, GroundTruthTrace, TraceSpec};

pub const GRAVITY: f64 = 9.81;

/// One frame per trace point: a shadowed RSSI sample for every audible
/// anchor, then the magnetic field rendered under a random yaw.
pub fn gen_observations<T: Real>(
    env: &EnvironmentModel<T>,
    trace: &GroundTruthTrace<T>,
    seed: u64,
) -> Result<Vec<ObservationFrame<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    trace
        .points
        .iter()
        .map(|p| observe(env, p.t, p.position(), &mut rng))
        .collect()
}

/// Synthesizes a single frame at `position`.
pub fn observe<T: Real, R: Rng + ?Sized>(
    env: &EnvironmentModel<T>,
    t: T,
    position: Point2<T>,
    rng: &mut R,
) -> Result<ObservationFrame<T>> {
    let mut rssi = BTreeMap::new();
    for id in env.truth_ranging.keys() {
        if audible(env.noiseless_rssi(id, position)?) {
            rssi.insert(id.clone(), env.forward_rssi(id, position, rng)?);
        }
    }
    let sig = env.forward_mf(position, rng)?;
    let yaw = lit::<T>(rng.random::<f64>()) * lit::<T>(2.0) * T::PI();
    let mf = Vec3::new(sig.mf_h * yaw.cos(), sig.mf_h * yaw.sin(), sig.mf_v);
    let gravity = Vec3::new(T::zero(), T::zero(), lit(GRAVITY));
    ObservationFrame::new(t, rssi, mf, gravity)
}

/// Random-walk survey settings: instances wanted per room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SurveySpec<T> {
    pub instances_per_room: BTreeMap<String, usize>,
    #[serde(default = "default_speed")]
    pub speed_mps: T,
    #[serde(default = "default_rate")]
    pub rate_hz: T,
}

fn default_speed<T: Real>() -> T {
    T::one()
}

fn default_rate<T: Real>() -> T {
    lit(3.0)
}

impl<T: Real> SurveySpec<T> {
    /// The same count for every room of the plan.
    pub fn uniform(env: &EnvironmentModel<T>, per_room: usize) -> Self {
        Self {
            instances_per_room: env
                .plan
                .room_ids()
                .into_iter()
                .map(|r| (r, per_room))
                .collect(),
            speed_mps: default_speed(),
            rate_hz: default_rate(),
        }
    }

    pub fn total(&self) -> usize {
        self.instances_per_room.values().sum()
    }
}

/// Uniform point inside `poly` by rejection from its bounding box.
pub fn sample_in_polygon<T: Real, R: Rng + ?Sized>(poly: &Polygon<T>, rng: &mut R) -> Point2<T> {
    let (lo, hi) = poly.bbox();
    loop {
        let x = lo.x + (hi.x - lo.x) * lit::<T>(rng.random::<f64>());
        let y = lo.y + (hi.y - lo.y) * lit::<T>(rng.random::<f64>());
        let p = Point2::new(x, y);
        if poly.contains_interior(p) {
            return p;
        }
    }
}

/// Random waypoint walk confined to `room` until `n` samples are collected.
pub fn room_walk<T: Real, R: Rng + ?Sized>(
    env: &EnvironmentModel<T>,
    room: &str,
    n: usize,
    spec: &SurveySpec<T>,
    rng: &mut R,
) -> Result<GroundTruthTrace<T>> {
    let region = env
        .plan
        .rooms
        .iter()
        .find(|r| r.id == room)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown room `{room}`")))?;
    let poly = &region.polygon;
    let mut waypoints = vec![sample_in_polygon(poly, rng)];
    let needed = count::<T>(n) / spec.rate_hz * spec.speed_mps;
    let mut length = T::zero();
    // enough path for n samples plus one spare leg
    while length <= needed {
        let last = *waypoints.last().unwrap();
        let next = sample_in_polygon(poly, rng);
        if segment_within_union(last, next, &[poly]) {
            length += last.distance(&next);
            waypoints.push(next);
        }
    }
    let mut trace = gen_trace(&env.plan, &waypoints, &TraceSpec::walking(spec.speed_mps, spec.rate_hz))?;
    trace.points.truncate(n);
    for p in &mut trace.points {
        // boundary samples may resolve to a neighbour; the label is the walked room
        p.room = room.to_string();
    }
    Ok(trace)
}

/// Walks every listed room and labels each frame with the room walked.
pub fn build_survey_db<T: Real>(
    env: &EnvironmentModel<T>,
    spec: &SurveySpec<T>,
    seed: u64,
) -> Result<FingerprintDatabase<T>> {
    let missing: Vec<String> = env
        .plan
        .room_ids()
        .into_iter()
        .filter(|r| spec.instances_per_room.get(r).copied().unwrap_or(0) == 0)
        .collect();
    if !missing.is_empty() {
        return Err(Error::UncoveredRooms(missing));
    }
    let mut db = FingerprintDatabase::new(env.ap_list(), lit(crate::sensing::DEFAULT_MISSING_FILL));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = T::zero();
    for (room, &n) in &spec.instances_per_room {
        let trace = room_walk(env, room, n, spec, &mut rng)?;
        for p in &trace.points {
            let frame = observe(env, clock + p.t, p.position(), &mut rng)?;
            db.push_frame(&frame, room.clone());
        }
        clock += count::<T>(n) / spec.rate_hz + T::one();
    }
    Ok(db)
}

/// Survey points on a `spacing` lattice strictly inside rooms, offset by half
/// a cell.
pub fn survey_grid<T: Real>(env: &EnvironmentModel<T>, spacing: T) -> Vec<Point2<T>> {
    let half = spacing * lit(0.5);
    let nx = (env.plan.bounds[0] / spacing).floor().to_usize().unwrap_or(0);
    let ny = (env.plan.bounds[1] / spacing).floor().to_usize().unwrap_or(0);
    let mut pts = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = Point2::new(half + count::<T>(i) * spacing, half + count::<T>(j) * spacing);
            if env.plan.rooms.iter().any(|r| r.polygon.contains_interior(p)) {
                pts.push(p);
            }
        }
    }
    pts
}

/// Coordinate-labelled database: `samples` stationary frames at every survey point.
pub fn build_coord_survey<T: Real>(
    env: &EnvironmentModel<T>,
    points: &[Point2<T>],
    samples: usize,
    seed: u64,
) -> Result<CoordFingerprintDatabase<T>> {
    let mut db = CoordFingerprintDatabase::new(env.ap_list(), lit(crate::sensing::DEFAULT_MISSING_FILL));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (k, p) in points.iter().enumerate() {
        for s in 0..samples {
            let t = count::<T>(k * samples + s) / lit(3.0);
            let frame = observe(env, t, *p, &mut rng)?;
            db.push_frame(*p, &frame);
        }
    }
    Ok(db)
}

/// Calibration measurements: `samples` shadowed readings at each distance
/// for each anchor, drawn from the truth path-loss model.
pub fn gen_reference_points<T: Real>(
    env: &EnvironmentModel<T>,
    an_ids: &[String],
    distances: &[T],
    samples: usize,
    seed: u64,
) -> Result<Vec<ReferencePoint<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for id in an_ids {
        let a = env
            .truth_ranging
            .get(id)
            .ok_or_else(|| Error::UnknownAnchor(id.clone()))?;
        for &d in distances {
            let r = d.max(lit(super::env::MIN_RANGE_M));
            let mean = a.p_r0 - lit::<T>(10.0) * a.gamma * r.log10();
            for _ in 0..samples {
                let p = (mean + gaussian(&mut rng, env.shadowing_sigma_db))
                    .max(lit(crate::sensing::RSSI_MIN))
                    .min(lit(crate::sensing::RSSI_MAX));
                out.push(ReferencePoint {
                    an_id: id.clone(),
                    true_distance_m: d,
                    rssi_dbm: p,
                });
            }
        }
    }
    Ok(out)
}
