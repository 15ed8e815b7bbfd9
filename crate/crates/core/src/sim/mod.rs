//! Synthetic environments and forward sensor models.
//!
//! RSSI follows log-distance path loss with Gaussian shadowing in dB; the
//! magnetic field is a per-room base value with a gentle sinusoidal ripple.
//! Every generator takes an explicit seed.

mod env;
pub mod scenarios;
mod survey;
mod trace;

pub use env::{audible, EnvironmentModel, MfRoom, TruthAnchor, AUDIBILITY_DBM, MIN_RANGE_M};
pub use survey::{
    build_coord_survey, build_survey_db, gen_observations, gen_reference_points, observe,
    room_walk, sample_in_polygon, survey_grid, SurveySpec, GRAVITY,
};
pub use trace::{gen_trace, GroundTruthTrace, TracePoint, TraceSpec};
