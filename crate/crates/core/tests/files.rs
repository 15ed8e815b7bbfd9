use indoorloc::baselines::CoordFingerprintDatabase;
use indoorloc::geometry::Point2;
use indoorloc::ranging::{read_reference_points, RangingParams, DEFAULT_LOS_THRESHOLD_M};
use indoorloc::sensing::{read_observations, write_observations, FingerprintDatabase, DEFAULT_MISSING_FILL};
use indoorloc::sim::{
    build_coord_survey, build_survey_db, gen_observations, gen_reference_points, gen_trace, scenarios,
    EnvironmentModel, GroundTruthTrace, SurveySpec, TraceSpec,
};
use indoorloc::state_space::FloorPlan;

#[test]
fn artifacts_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let env = scenarios::office::<f64>(3.0, 0.5);

    let env_path = dir.path().join("env.json");
    env.save(&env_path).unwrap();
    assert_eq!(EnvironmentModel::<f64>::load(&env_path).unwrap(), env);
    // the environment file is also a valid floor plan
    assert_eq!(FloorPlan::<f64>::load(&env_path).unwrap(), env.plan);

    let db = build_survey_db(&env, &SurveySpec::uniform(&env, 12), 1).unwrap();
    let db_path = dir.path().join("survey.csv");
    db.save(&db_path).unwrap();
    let rooms = env.plan.room_ids();
    let back = FingerprintDatabase::load(&db_path, Some(&rooms), DEFAULT_MISSING_FILL).unwrap();
    assert_eq!(back, db);

    let trace = gen_trace(&env.plan, &[Point2::new(2.0, 2.0), Point2::new(4.0, 3.0)], &TraceSpec::walking(1.0, 3.0)).unwrap();
    let trace_path = dir.path().join("trace.csv");
    trace.save(&trace_path).unwrap();
    assert_eq!(GroundTruthTrace::load(&trace_path).unwrap(), trace);

    let frames = gen_observations(&env, &trace, 3).unwrap();
    let mut buf = Vec::new();
    write_observations(&mut buf, &env.ap_list(), &frames).unwrap();
    let (aps, again) = read_observations::<f64, _>(&buf[..]).unwrap();
    assert_eq!(aps, env.ap_list());
    assert_eq!(again.len(), frames.len());
    let mut buf2 = Vec::new();
    write_observations(&mut buf2, &aps, &again).unwrap();
    assert_eq!(buf, buf2);

    let ids: Vec<String> = env.plan.anchor_positions().keys().cloned().collect();
    let refs = gen_reference_points(&env, &ids, &[1.0, 2.0, 4.0, 8.0], 3, 2).unwrap();
    let mut rbuf = Vec::new();
    indoorloc::ranging::write_reference_points(&mut rbuf, &refs).unwrap();
    assert_eq!(read_reference_points::<f64, _>(&rbuf[..]).unwrap(), refs);
    let params = RangingParams::fit(&refs, DEFAULT_LOS_THRESHOLD_M).unwrap();
    let rp = dir.path().join("ranging.csv");
    params.save(&rp).unwrap();
    let loaded = RangingParams::<f64>::load(&rp).unwrap();
    assert_eq!(loaded.anchors.keys().collect::<Vec<_>>(), params.anchors.keys().collect::<Vec<_>>());

    let coords = build_coord_survey(&env, &[Point2::new(1.5, 1.5), Point2::new(7.5, 2.5)], 2, 4).unwrap();
    let cp = dir.path().join("coords.csv");
    coords.save(&cp).unwrap();
    assert_eq!(CoordFingerprintDatabase::load(&cp, DEFAULT_MISSING_FILL).unwrap(), coords);
}
