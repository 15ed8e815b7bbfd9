//! Indoor localization by fusing Wi-Fi ranging, room-level landmark
//! detection and a floor-plan graph in a particle filter.
//!
//! Every numeric type is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod baselines;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod landmark;
pub mod metrics;
pub mod pipeline;
pub mod ranging;
pub mod scalar;
pub mod sensing;
pub mod sim;
pub mod state_space;

pub use error::{Error, Result};

pub type Point2 = geometry::Point2<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type FloorPlan = state_space::FloorPlan<f64>;
pub type FloorPlanGraph = state_space::FloorPlanGraph<f64>;
pub type ObservationFrame = sensing::ObservationFrame<f64>;
pub type FingerprintDatabase = sensing::FingerprintDatabase<f64>;
pub type Dataset = sensing::Dataset<f64>;
pub type RoomPosterior = landmark::RoomPosterior<f64>;
pub type Classifier = landmark::Classifier<f64>;
pub type AnchorRanging = ranging::AnchorRanging<f64>;
pub type RangingParams = ranging::RangingParams<f64>;
pub type ReferencePoint = ranging::ReferencePoint<f64>;
pub type ParticleSet = filter::ParticleSet<f64>;
pub type ObservationBundle = filter::ObservationBundle<f64>;
pub type ParticleFilter<'g> = filter::ParticleFilter<'g, f64>;
pub type CoordFingerprintDatabase = baselines::CoordFingerprintDatabase<f64>;
pub type EnvironmentModel = sim::EnvironmentModel<f64>;
pub type GroundTruthTrace = sim::GroundTruthTrace<f64>;
pub type Localizer = pipeline::Localizer<f64>;
