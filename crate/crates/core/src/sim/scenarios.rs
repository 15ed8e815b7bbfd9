//! Ready-made environments.

use std::collections::BTreeMap;

use crate::geometry::{Point2, Polygon};
use crate::scalar::{lit, Real};
use crate::state_space::{Anchor, FloorPlan, Region};

use super::env::{EnvironmentModel, MfRoom, TruthAnchor};

const COLUMNS: [f64; 4] = [0.0, 6.0, 12.0, 18.0];
const ROWS: [f64; 4] = [0.0, 5.5, 10.5, 16.0];

/// `(id, x, y, p_r0, position known to the localizer)`.
const OFFICE_ANCHORS: [(&str, f64, f64, f64, bool); 8] = [
    ("AN1", 1.0, 1.0, -30.0, true),
    ("AN2", 9.0, 0.5, -32.0, true),
    ("AN3", 17.0, 1.0, -30.0, true),
    ("AN4", 1.0, 15.0, -31.0, true),
    ("AN5", 9.0, 15.5, -30.0, true),
    ("AN6", 17.0, 15.0, -30.0, true),
    ("AN7", 5.0, 8.0, -30.0, false),
    ("AN8", 13.0, 8.0, -30.0, false),
];

/// `(base_v, base_h)` per room, µT.
const OFFICE_MF: [(f64, f64); 9] = [
    (-38.0, 22.0),
    (-31.0, 27.0),
    (-42.0, 17.0),
    (-27.0, 19.0),
    (-45.0, 25.0),
    (-34.0, 14.0),
    (-40.0, 30.0),
    (-29.0, 23.0),
    (-36.0, 11.0),
];

pub const PATH_LOSS_EXPONENT: f64 = 2.7;

fn rect<T: Real>(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon<T> {
    Polygon::rect(lit(x0), lit(y0), lit(x1), lit(y1))
}

/// 18 x 16 m office tiled by nine rooms in a 3 x 3 layout (`room1` bottom
/// left, row-major), six ranging anchors along the outer walls and two
/// landmark-only anchors whose positions are not published to the localizer.
pub fn office<T: Real>(shadowing_sigma_db: f64, mf_noise_sigma: f64) -> EnvironmentModel<T> {
    let mut rooms = Vec::new();
    let mut mf_rooms = BTreeMap::new();
    for r in 0..3 {
        for c in 0..3 {
            let k = r * 3 + c;
            let id = format!("room{}", k + 1);
            rooms.push(Region::new(
                id.clone(),
                rect(COLUMNS[c], ROWS[r], COLUMNS[c + 1], ROWS[r + 1]),
            ));
            let (v, h) = OFFICE_MF[k];
            mf_rooms.insert(
                id,
                MfRoom {
                    base_v: lit(v),
                    base_h: lit(h),
                    amplitude: lit(1.5),
                    phase: lit(0.7 * k as f64),
                    wavelength_m: lit(4.0),
                },
            );
        }
    }
    let mut anchors = Vec::new();
    let mut truth = BTreeMap::new();
    for (id, x, y, p0, known) in OFFICE_ANCHORS {
        anchors.push(if known {
            Anchor::known(id, lit(x), lit(y))
        } else {
            Anchor::unknown(id)
        });
        truth.insert(
            id.to_string(),
            TruthAnchor {
                p_r0: lit(p0),
                gamma: lit(PATH_LOSS_EXPONENT),
                position: (!known).then(|| [lit(x), lit(y)]),
            },
        );
    }
    EnvironmentModel {
        plan: FloorPlan {
            bounds: [lit(18.0), lit(16.0)],
            rooms,
            corridors: vec![],
            anchors,
            grid_spacing_m: lit(0.25),
        },
        truth_ranging: truth,
        shadowing_sigma_db: lit(shadowing_sigma_db),
        mf_rooms,
        mf_noise_sigma: lit(mf_noise_sigma),
    }
}

/// Office restricted to the six ranging anchors.
pub fn office_ranging_only<T: Real>(shadowing_sigma_db: f64, mf_noise_sigma: f64) -> EnvironmentModel<T> {
    let mut env = office(shadowing_sigma_db, mf_noise_sigma);
    env.truth_ranging.retain(|id, _| id != "AN7" && id != "AN8");
    env.plan.anchors.retain(|a| a.id != "AN7" && a.id != "AN8");
    env
}

/// Twenty stationary evaluation positions spread over the office rooms.
pub fn office_test_points<T: Real>() -> Vec<Point2<T>> {
    [
        (2.0, 2.5), (4.5, 4.0), (8.0, 2.0), (10.5, 4.5), (14.0, 3.0),
        (16.5, 1.5), (1.5, 7.0), (4.0, 9.5), (7.5, 8.0), (10.0, 6.5),
        (13.5, 9.0), (16.0, 7.5), (2.5, 12.0), (5.0, 14.5), (7.0, 13.0),
        (11.0, 14.0), (9.0, 11.5), (13.0, 12.5), (15.5, 14.0), (17.0, 11.0),
    ]
    .into_iter()
    .map(|(x, y)| Point2::new(lit(x), lit(y)))
    .collect()
}

/// One 4 x 4 m room with three anchors on its corners.
pub fn single_room<T: Real>(shadowing_sigma_db: f64) -> EnvironmentModel<T> {
    let ids = [("AN1", 0.0, 0.0), ("AN2", 4.0, 0.0), ("AN3", 2.0, 4.0)];
    let mut mf_rooms = BTreeMap::new();
    mf_rooms.insert("r1".to_string(), MfRoom::flat(lit(-40.0), lit(20.0)));
    EnvironmentModel {
        plan: FloorPlan {
            bounds: [lit(4.0), lit(4.0)],
            rooms: vec![Region::new("r1", rect(0.0, 0.0, 4.0, 4.0))],
            corridors: vec![],
            anchors: ids.iter().map(|(id, x, y)| Anchor::known(*id, lit(*x), lit(*y))).collect(),
            grid_spacing_m: lit(0.25),
        },
        truth_ranging: ids
            .iter()
            .map(|(id, _, _)| {
                (
                    id.to_string(),
                    TruthAnchor { p_r0: lit(-30.0), gamma: lit(PATH_LOSS_EXPONENT), position: None },
                )
            })
            .collect(),
        shadowing_sigma_db: lit(shadowing_sigma_db),
        mf_rooms,
        mf_noise_sigma: T::zero(),
    }
}

/// Two 4 x 4 m rooms mirrored about `y = 5`, with both anchors on the mirror
/// line so their Wi-Fi distributions coincide. The rooms' vertical field
/// bases differ by `mf_gap` µT.
pub fn mirrored_rooms<T: Real>(shadowing_sigma_db: f64, mf_gap: f64, mf_noise_sigma: f64) -> EnvironmentModel<T> {
    let ids = [("AN1", 0.0, 5.0), ("AN2", 4.0, 5.0)];
    let mut mf_rooms = BTreeMap::new();
    mf_rooms.insert("north".to_string(), MfRoom::flat(lit(-40.0 + mf_gap), lit(20.0)));
    mf_rooms.insert("south".to_string(), MfRoom::flat(lit(-40.0), lit(20.0)));
    EnvironmentModel {
        plan: FloorPlan {
            bounds: [lit(4.0), lit(10.0)],
            rooms: vec![
                Region::new("south", rect(0.0, 0.0, 4.0, 4.0)),
                Region::new("north", rect(0.0, 6.0, 4.0, 10.0)),
            ],
            corridors: vec![],
            anchors: ids.iter().map(|(id, x, y)| Anchor::known(*id, lit(*x), lit(*y))).collect(),
            grid_spacing_m: lit(0.25),
        },
        truth_ranging: ids
            .iter()
            .map(|(id, _, _)| {
                (
                    id.to_string(),
                    TruthAnchor { p_r0: lit(-30.0), gamma: lit(PATH_LOSS_EXPONENT), position: None },
                )
            })
            .collect(),
        shadowing_sigma_db: lit(shadowing_sigma_db),
        mf_rooms,
        mf_noise_sigma: lit(mf_noise_sigma),
    }
}
