//! Frame-to-estimate plumbing shared by the command line and the benchmarks.

use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Instant;

use crate::baselines::{knn_locate, nlst_locate, CoordFingerprintDatabase, NlstSolution};
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, ObservationBundle, ParticleFilter};
use crate::geometry::Point2;
use crate::landmark::{Classifier, ClassifierSpec, RoomPosterior};
use crate::ranging::RangingParams;
use crate::scalar::{to_f64, Real};
use crate::sensing::{frame_to_features, FeatureSet, FingerprintDatabase, ObservationFrame};
use crate::state_space::{FloorPlan, FloorPlanGraph};

/// Trained models needed to turn a frame into filter observations.
#[derive(Debug, Clone)]
pub struct Localizer<T> {
    classifier: Classifier<T>,
    ap_list: Vec<String>,
    columns: Vec<usize>,
    missing_fill: T,
    ranging: RangingParams<T>,
    anchors: BTreeMap<String, Point2<T>>,
}

impl<T: Real> Localizer<T> {
    /// Trains the room classifier on `db` restricted to `features` and keeps
    /// the ranging model plus the known anchor coordinates of `plan`.
    pub fn train(
        db: &FingerprintDatabase<T>,
        spec: &ClassifierSpec,
        features: &FeatureSet,
        ranging: RangingParams<T>,
        plan: &FloorPlan<T>,
    ) -> Result<Self> {
        let columns = db.column_indices(features)?;
        let classifier = spec.train(&db.to_dataset(features)?)?;
        Ok(Self {
            classifier,
            ap_list: db.ap_list.clone(),
            columns,
            missing_fill: db.missing_fill,
            ranging,
            anchors: plan.anchor_positions(),
        })
    }

    pub fn anchors(&self) -> &BTreeMap<String, Point2<T>> {
        &self.anchors
    }

    pub fn ranging(&self) -> &RangingParams<T> {
        &self.ranging
    }

    pub fn room_posterior(&self, frame: &ObservationFrame<T>) -> Result<RoomPosterior<T>> {
        let all = frame_to_features(frame, &self.ap_list, self.missing_fill);
        let picked: Vec<T> = self.columns.iter().map(|&c| all[c]).collect();
        self.classifier.predict(&picked)
    }

    /// Ranges to every heard anchor that has both a position and a ranging model.
    pub fn ranges(&self, frame: &ObservationFrame<T>) -> Result<BTreeMap<String, T>> {
        let mut out = BTreeMap::new();
        for (id, p) in frame.rssi() {
            if self.anchors.contains_key(id) && self.ranging.anchors.contains_key(id) {
                out.insert(id.clone(), self.ranging.range(id, *p)?);
            }
        }
        Ok(out)
    }

    pub fn bundle(&self, frame: &ObservationFrame<T>, config: &FilterConfig) -> Result<ObservationBundle<T>> {
        ObservationBundle::with_noise_model(self.ranges(frame)?, config, self.room_posterior(frame)?)
    }

    pub fn nlst(&self, frame: &ObservationFrame<T>) -> Result<NlstSolution<T>> {
        nlst_locate(&self.ranges(frame)?, &self.anchors, None)
    }

    /// Runs a fresh particle filter over `frames`, one step per frame.
    pub fn track(
        &self,
        graph: &FloorPlanGraph<T>,
        config: &FilterConfig,
        frames: &[ObservationFrame<T>],
    ) -> Result<Vec<StepRecord<T>>> {
        let mut pf = ParticleFilter::new(graph, self.anchors.clone(), *config)?;
        frames
            .iter()
            .map(|f| {
                let bundle = self.bundle(f, config)?;
                let start = Instant::now();
                let out = pf.step(&bundle)?;
                Ok(StepRecord {
                    t: f.timestamp(),
                    estimate: out.estimate,
                    degenerate: out.degenerate,
                    step_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub t: T,
    pub estimate: Point2<T>,
    pub degenerate: bool,
    pub step_ms: f64,
}

/// Splits a frame stream wherever consecutive timestamps are more than
/// `gap_s` apart.
pub fn split_segments<T: Real>(frames: &[ObservationFrame<T>], gap_s: T) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..frames.len() {
        if frames[i].timestamp() - frames[i - 1].timestamp() > gap_s {
            out.push(start..i);
            start = i;
        }
    }
    if start < frames.len() {
        out.push(start..frames.len());
    }
    out
}

/// KNN coordinate regression on one frame.
pub fn knn_frame<T: Real>(
    db: &CoordFingerprintDatabase<T>,
    frame: &ObservationFrame<T>,
    k: usize,
) -> Result<Point2<T>> {
    knn_locate(db, &frame_to_features(frame, &db.ap_list, db.missing_fill), k)
}

/// Euclidean errors between estimates and ground truth, in meters.
pub fn errors_against<T: Real>(estimates: &[Point2<T>], truth: &[Point2<T>]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "{} estimates for {} ground-truth points",
            estimates.len(),
            truth.len()
        )));
    }
    Ok(estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| to_f64(e.distance(t)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranging::DEFAULT_LOS_THRESHOLD_M;
    use crate::sim::{build_survey_db, gen_observations, gen_reference_points, gen_trace, scenarios, SurveySpec, TraceSpec};
    use crate::state_space::build_grid;

    fn fitted(env: &crate::sim::EnvironmentModel<f64>) -> RangingParams<f64> {
        let ids: Vec<String> = env.plan.anchor_positions().keys().cloned().collect();
        let d: Vec<f64> = (1..=30).map(|i| i as f64 * 0.5).collect();
        let refs = gen_reference_points(env, &ids, &d, 3, 1).unwrap();
        RangingParams::fit(&refs, DEFAULT_LOS_THRESHOLD_M).unwrap()
    }

    #[test]
    fn noiseless_stationary_pfml_is_accurate() {
        let env = scenarios::single_room::<f64>(0.0);
        let db = build_survey_db(&env, &SurveySpec::uniform(&env, 30), 3).unwrap();
        let loc = Localizer::train(&db, &ClassifierSpec::default(), &FeatureSet::all(), fitted(&env), &env.plan).unwrap();
        let g = build_grid(&env.plan, 0.25).unwrap();
        let truth = Point2::new(1.3, 2.6);
        let trace = gen_trace(&env.plan, &[truth], &TraceSpec::stationary(3.0, 10.0)).unwrap();
        let frames = gen_observations(&env, &trace, 0).unwrap();
        let steps = loc.track(&g, &FilterConfig { particles: 1000, ..Default::default() }, &frames).unwrap();
        let last = steps.last().unwrap().estimate;
        assert!(last.distance(&truth) <= 0.5, "{last:?}");
        let nl = loc.nlst(&frames[0]).unwrap();
        assert!(nl.position.distance(&truth) < 1e-6);
    }

    #[test]
    fn segments_split_on_gaps() {
        let env = scenarios::single_room::<f64>(0.0);
        let mut trace = gen_trace(&env.plan, &[Point2::new(1.0, 1.0)], &TraceSpec::stationary(3.0, 2.0)).unwrap();
        let second = trace.clone();
        trace.append_shifted(&second, 10.0);
        let frames = gen_observations(&env, &trace, 0).unwrap();
        let segs = split_segments(&frames, 5.0);
        assert_eq!(segs, vec![0..6, 6..12]);
    }

    #[test]
    fn error_lengths_checked() {
        assert!(errors_against(&[Point2::new(0.0, 0.0)], &[]).is_err());
        let e = errors_against(&[Point2::new(3.0, 4.0)], &[Point2::new(0.0, 0.0)]).unwrap();
        assert_eq!(e, vec![5.0]);
    }
}
