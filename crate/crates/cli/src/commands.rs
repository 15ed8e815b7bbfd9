use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use indoorloc::baselines::{anchor_centroid, nlst_locate};
use indoorloc::landmark::{cross_validate, ClassifierSpec, DEFAULT_BLEND, DEFAULT_K};
use indoorloc::metrics::{knn_survey_minutes, pfml_survey_minutes, MetricsReport};
use indoorloc::pipeline::{errors_against, knn_frame, split_segments, Localizer};
use indoorloc::ranging::{read_reference_points, write_reference_points, DEFAULT_LOS_THRESHOLD_M};
use indoorloc::sensing::{read_observations, write_observations, FeatureSet, DEFAULT_MISSING_FILL};
use indoorloc::sim::{
    build_coord_survey, build_survey_db, gen_observations, gen_reference_points, gen_trace, scenarios,
    survey_grid, SurveySpec, TraceSpec,
};
use indoorloc::state_space::build_grid;
use indoorloc::{
    CoordFingerprintDatabase, EnvironmentModel, FingerprintDatabase, GroundTruthTrace, ObservationFrame, Point2,
    RangingParams, ReferencePoint,
};

use crate::config::{Features, Method, RangingSource, RunConfig, SurveyTimeConfig};
use crate::Degenerate;

const ENVIRONMENT: &str = "environment.json";
const SURVEY: &str = "survey.csv";
const COORD_SURVEY: &str = "coord_survey.csv";
const REFERENCE: &str = "reference_points.csv";
const RANGING: &str = "ranging.csv";
const TRACE: &str = "trace.csv";
const OBSERVATIONS: &str = "observations.csv";

fn existing(path: PathBuf, what: &str) -> Result<PathBuf> {
    ensure!(path.is_file(), "{what} not found at {}", path.display());
    Ok(path)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn load_env(cfg: &RunConfig) -> Result<EnvironmentModel> {
    let p = existing(cfg.input_or(&cfg.environment, ENVIRONMENT), "environment")?;
    EnvironmentModel::load(&p).with_context(|| format!("loading {}", p.display()))
}

fn features(cfg: &RunConfig) -> FeatureSet {
    match cfg.features {
        Features::Wifi => FeatureSet::wifi_only(),
        Features::WifiMf => FeatureSet::all(),
    }
}

fn room_db(cfg: &RunConfig, env: Option<&EnvironmentModel>) -> Result<FingerprintDatabase> {
    let p = existing(cfg.input_or(&cfg.survey_db, SURVEY), "survey DB")?;
    let rooms = env.map(|e| e.plan.room_ids());
    FingerprintDatabase::load(&p, rooms.as_deref(), DEFAULT_MISSING_FILL)
        .with_context(|| format!("loading {}", p.display()))
}

fn scenario(cfg: &RunConfig) -> Result<EnvironmentModel> {
    let s = &cfg.simulate;
    Ok(match s.scenario.as_str() {
        "office" => scenarios::office(s.shadowing_sigma_db, s.mf_noise_sigma),
        "single-room" => {
            let mut env = scenarios::single_room(s.shadowing_sigma_db);
            env.mf_noise_sigma = s.mf_noise_sigma;
            env
        }
        "mirrored" => scenarios::mirrored_rooms(s.shadowing_sigma_db, s.mf_gap, s.mf_noise_sigma),
        other => bail!("unknown scenario `{other}` (office, single-room, mirrored)"),
    })
}

fn test_points(cfg: &RunConfig, env: &EnvironmentModel) -> Vec<Point2> {
    if let Some(pts) = &cfg.simulate.test_points {
        return pts.iter().map(|p| Point2::new(p[0], p[1])).collect();
    }
    if cfg.simulate.scenario == "office" && cfg.environment.is_none() {
        return scenarios::office_test_points();
    }
    env.plan.rooms.iter().map(|r| r.polygon.centroid()).collect()
}

fn check_simulate(cfg: &RunConfig) -> Result<()> {
    let s = &cfg.simulate;
    ensure!(s.instances_per_room > 0, "simulate.instances_per_room must be positive");
    ensure!(s.reference_samples > 0, "simulate.reference_samples must be positive");
    ensure!(s.coord_samples > 0, "simulate.coord_samples must be positive");
    ensure!(s.rate_hz > 0.0, "simulate.rate_hz must be positive");
    ensure!(s.dwell_s >= 0.0 && s.point_gap_s >= 0.0, "simulate durations must be non-negative");
    ensure!(s.coord_grid_m > 0.0, "simulate.coord_grid_m must be positive");
    ensure!(
        s.shadowing_sigma_db >= 0.0 && s.mf_noise_sigma >= 0.0,
        "simulate noise levels must be non-negative"
    );
    ensure!(
        s.reference_distances_m.iter().all(|d| *d > 0.0),
        "simulate.reference_distances_m must be positive"
    );
    Ok(())
}

fn write_surveys(cfg: &RunConfig, env: &EnvironmentModel, dir: &Path) -> Result<()> {
    let s = &cfg.simulate;
    let db = build_survey_db(env, &SurveySpec::uniform(env, s.instances_per_room), cfg.seed)?;
    db.save(dir.join(SURVEY))?;
    let grid = survey_grid(env, s.coord_grid_m);
    ensure!(!grid.is_empty(), "coordinate survey grid is empty; reduce simulate.coord_grid_m");
    let coord = build_coord_survey(env, &grid, s.coord_samples, cfg.seed + 1)?;
    coord.save(dir.join(COORD_SURVEY))?;
    println!(
        "survey: {} room instances, {} coordinate samples at {} points",
        db.len(),
        coord.len(),
        grid.len()
    );
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    check_simulate(cfg)?;
    let env = match &cfg.environment {
        Some(p) => EnvironmentModel::load(existing(p.clone(), "environment")?)?,
        None => scenario(cfg)?,
    };
    env.validate()?;
    let s = &cfg.simulate;
    let dir = out_dir(cfg)?;
    env.save(dir.join(ENVIRONMENT))?;
    write_surveys(cfg, &env, &dir)?;

    let ids: Vec<String> = env.plan.anchor_positions().into_keys().collect();
    let refs = gen_reference_points(&env, &ids, &s.reference_distances_m, s.reference_samples, cfg.seed + 2)?;
    write_reference_points(fs::File::create(dir.join(REFERENCE))?, &refs)?;

    let points = test_points(cfg, &env);
    ensure!(!points.is_empty(), "no test points");
    let spec = TraceSpec::stationary(s.rate_hz, s.dwell_s);
    let mut trace = GroundTruthTrace { points: Vec::new() };
    for p in &points {
        let leg = gen_trace(&env.plan, &[*p], &spec).with_context(|| format!("test point ({}, {})", p.x, p.y))?;
        if trace.points.is_empty() {
            trace = leg;
        } else {
            trace.append_shifted(&leg, s.point_gap_s);
        }
    }
    trace.save(dir.join(TRACE))?;
    let frames = gen_observations(&env, &trace, cfg.seed + 3)?;
    write_observations(fs::File::create(dir.join(OBSERVATIONS))?, &env.ap_list(), &frames)?;
    println!(
        "simulate: {} rooms, {} anchors, {} reference readings, {} frames over {} test points -> {}",
        env.plan.rooms.len(),
        env.ap_list().len(),
        refs.len(),
        frames.len(),
        points.len(),
        dir.display()
    );
    Ok(())
}

pub fn survey(cfg: &RunConfig) -> Result<()> {
    check_simulate(cfg)?;
    let env = load_env(cfg)?;
    let dir = out_dir(cfg)?;
    write_surveys(cfg, &env, &dir)
}

fn load_refs(path: &Path) -> Result<Vec<ReferencePoint>> {
    let p = existing(path.to_path_buf(), "reference points")?;
    let refs = read_reference_points(fs::File::open(&p)?).with_context(|| format!("loading {}", p.display()))?;
    ensure!(!refs.is_empty(), "{} has no reference points", p.display());
    Ok(refs)
}

fn ranging(cfg: &RunConfig) -> Result<RangingParams> {
    match &cfg.ranging {
        Some(RangingSource::File(p)) => {
            let p = existing(p.clone(), "ranging params")?;
            Ok(RangingParams::load(&p).with_context(|| format!("loading {}", p.display()))?)
        }
        Some(RangingSource::Fit { fit }) => Ok(RangingParams::fit(&load_refs(fit)?, DEFAULT_LOS_THRESHOLD_M)?),
        None => {
            let p = existing(cfg.out_dir().join(RANGING), "ranging params (run fit-ranging or set `ranging`)")?;
            Ok(RangingParams::load(&p)?)
        }
    }
}

pub fn fit_ranging(cfg: &RunConfig) -> Result<()> {
    let path = match &cfg.ranging {
        Some(RangingSource::Fit { fit }) => fit.clone(),
        _ => cfg.input_or(&cfg.reference_points, REFERENCE),
    };
    let params = RangingParams::fit(&load_refs(&path)?, DEFAULT_LOS_THRESHOLD_M)?;
    let dir = out_dir(cfg)?;
    params.save(dir.join(RANGING))?;
    for (id, a) in &params.anchors {
        println!(
            "{id}: alpha {:.4} beta {:.4} gamma {:.3} p_r0 {:.2} dBm",
            a.alpha, a.beta, a.gamma, a.p_r0
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AccuracyRow {
    classifier: String,
    features: String,
    ap_count: usize,
    folds: usize,
    accuracy_pct: f64,
    stratified: bool,
}

pub fn evaluate_landmark(cfg: &RunConfig) -> Result<()> {
    let env = cfg
        .input_or(&cfg.environment, ENVIRONMENT)
        .is_file()
        .then(|| load_env(cfg))
        .transpose()?;
    let db = room_db(cfg, env.as_ref())?;
    ensure!(!db.is_empty(), "survey DB is empty");
    let (blend, k) = match cfg.classifier {
        ClassifierSpec::Kstar { blend } => (blend, DEFAULT_K),
        ClassifierSpec::Knn { k } => (DEFAULT_BLEND, k),
    };
    let specs = [ClassifierSpec::Kstar { blend }, ClassifierSpec::Knn { k }];
    let n_aps = db.ap_list.len();
    let mut rows = Vec::new();
    let mut eval = |spec: &ClassifierSpec, name: &str, set: FeatureSet, aps: usize| -> Result<()> {
        let r = cross_validate(&db.to_dataset(&set)?, spec, cfg.folds, cfg.seed)?;
        rows.push(AccuracyRow {
            classifier: spec.name().into(),
            features: name.into(),
            ap_count: aps,
            folds: r.folds,
            accuracy_pct: r.accuracy_pct,
            stratified: r.stratified,
        });
        Ok(())
    };
    for spec in &specs {
        eval(spec, "wifi", FeatureSet::wifi_only(), n_aps)?;
        eval(spec, "wifi+mf", FeatureSet::all(), n_aps)?;
    }
    // anchor-count ablation, anchors taken in list order
    for n in (6.min(n_aps)..n_aps).chain(std::iter::once(n_aps)) {
        let set = FeatureSet {
            aps: Some(db.ap_list[..n].to_vec()),
            include_mf: cfg.features == Features::WifiMf,
        };
        let name = if set.include_mf { "wifi+mf" } else { "wifi" };
        eval(&cfg.classifier, &format!("{name} ablation"), set, n)?;
    }
    let mut text = String::from("classifier,features,ap_count,folds,accuracy_pct,stratified\n");
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.classifier, r.features, r.ap_count, r.folds, r.accuracy_pct, r.stratified
        )?;
        println!(
            "{:<6} {:<17} {} APs  {:>7.3}%{}",
            r.classifier,
            r.features,
            r.ap_count,
            r.accuracy_pct,
            if r.stratified { "" } else { "  (unstratified)" }
        );
    }
    let dir = out_dir(cfg)?;
    fs::write(dir.join("landmark_accuracy.csv"), text)?;
    Ok(())
}

struct Estimate {
    t: f64,
    position: Point2,
    degenerate: bool,
    step_ms: f64,
}

fn nlst_run(
    frames: &[ObservationFrame],
    segments: &[std::ops::Range<usize>],
    ranging: &RangingParams,
    anchors: &BTreeMap<String, Point2>,
) -> Vec<Estimate> {
    let all_ids: BTreeMap<String, f64> = anchors.keys().map(|k| (k.clone(), 0.0)).collect();
    let fallback = anchor_centroid(&all_ids, anchors).unwrap_or_else(|| Point2::new(0.0, 0.0));
    let mut out = Vec::with_capacity(frames.len());
    for seg in segments {
        let mut last = fallback;
        for f in &frames[seg.clone()] {
            let start = Instant::now();
            let ranges: BTreeMap<String, f64> = f
                .rssi()
                .iter()
                .filter(|(id, _)| anchors.contains_key(*id))
                .filter_map(|(id, p)| ranging.range(id, *p).ok().map(|r| (id.clone(), r)))
                .collect();
            let (position, degenerate) = match nlst_locate(&ranges, anchors, None) {
                Ok(s) if s.converged => (s.position, false),
                Ok(s) => (s.position, true),
                Err(_) => (last, true),
            };
            last = position;
            out.push(Estimate {
                t: f.timestamp(),
                position,
                degenerate,
                step_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct Timing {
    method: &'static str,
    step_ms: Vec<f64>,
    median_step_ms: Option<f64>,
}

pub fn localize(cfg: &RunConfig) -> Result<()> {
    let env = load_env(cfg)?;
    let obs = existing(cfg.input_or(&cfg.observations, OBSERVATIONS), "observations")?;
    let (_, frames) = read_observations::<f64, _>(fs::File::open(&obs)?)
        .with_context(|| format!("loading {}", obs.display()))?;
    let tp = existing(cfg.input_or(&cfg.trace, TRACE), "ground-truth trace")?;
    let trace = GroundTruthTrace::load(&tp).with_context(|| format!("loading {}", tp.display()))?;
    ensure!(!frames.is_empty(), "no observation frames");
    ensure!(
        frames.len() == trace.len(),
        "{} frames but {} trace points",
        frames.len(),
        trace.len()
    );
    let segments = split_segments(&frames, cfg.segment_gap_s);

    let (name, estimates) = match cfg.method {
        Method::Pfml => {
            let db = room_db(cfg, Some(&env))?;
            let loc = Localizer::train(&db, &cfg.classifier, &features(cfg), ranging(cfg)?, &env.plan)?;
            let graph = build_grid(&env.plan, env.plan.grid_spacing_m)?;
            let mut est = Vec::with_capacity(frames.len());
            for seg in &segments {
                for s in loc.track(&graph, &cfg.filter, &frames[seg.clone()])? {
                    est.push(Estimate {
                        t: s.t,
                        position: s.estimate,
                        degenerate: s.degenerate,
                        step_ms: s.step_ms,
                    });
                }
            }
            ("pfml", est)
        }
        Method::Nlst => ("nlst", nlst_run(&frames, &segments, &ranging(cfg)?, &env.plan.anchor_positions())),
        Method::Knn => {
            let p = existing(cfg.input_or(&cfg.coord_db, COORD_SURVEY), "coordinate DB (required by knn)")?;
            let db = CoordFingerprintDatabase::load(&p, DEFAULT_MISSING_FILL)
                .with_context(|| format!("loading {}", p.display()))?;
            let est = frames
                .iter()
                .map(|f| {
                    let start = Instant::now();
                    let position = knn_frame(&db, f, cfg.knn_k)?;
                    Ok(Estimate {
                        t: f.timestamp(),
                        position,
                        degenerate: false,
                        step_ms: start.elapsed().as_secs_f64() * 1e3,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ("knn", est)
        }
    };

    let truth: Vec<Point2> = trace.points.iter().map(|p| p.position()).collect();
    let positions: Vec<Point2> = estimates.iter().map(|e| e.position).collect();
    let errors = errors_against(&positions, &truth)?;
    let mut report = MetricsReport::from_errors(name, errors.clone())?;
    report.degenerate_steps = estimates.iter().filter(|e| e.degenerate).count();
    report.survey_minutes = cfg.survey_time.map(survey_minutes).transpose()?;

    let dir = out_dir(cfg)?;
    let mut csv = String::from("t,x,y,true_x,true_y,error_m,degenerate\n");
    for ((e, t), err) in estimates.iter().zip(&truth).zip(&errors) {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            e.t, e.position.x, e.position.y, t.x, t.y, err, e.degenerate
        )?;
    }
    fs::write(dir.join("estimates.csv"), csv)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let step_ms: Vec<f64> = estimates.iter().map(|e| e.step_ms).collect();
    let timed = report.clone().with_timing(step_ms);
    let timing = Timing {
        method: name,
        median_step_ms: timed.median_step_ms,
        step_ms: timed.step_ms,
    };
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)?)?;
    println!(
        "{name}: {} steps in {} segments, mean {:.3} m, sd {:.3} m, p90 {:.3} m, {} degenerate, median step {:.3} ms",
        errors.len(),
        segments.len(),
        report.mean_m,
        report.std_m,
        report.p90_m,
        report.degenerate_steps,
        timing.median_step_ms.unwrap_or(0.0)
    );
    if report.degenerate_steps == estimates.len() {
        return Err(Degenerate(format!("every {name} step was degenerate")).into());
    }
    Ok(())
}

fn survey_minutes(s: SurveyTimeConfig) -> Result<f64> {
    Ok(match s {
        SurveyTimeConfig::Pfml {
            instances,
            rate_hz,
            ranging_minutes,
        } => pfml_survey_minutes(instances, rate_hz, ranging_minutes)?,
        SurveyTimeConfig::Knn {
            survey_points,
            t_sp_s,
            t_sw_s,
            instances,
            rate_hz,
        } => knn_survey_minutes(survey_points, t_sp_s, t_sw_s, instances, rate_hz)?,
    })
}

pub fn survey_time(cfg: &RunConfig) -> Result<()> {
    let Some(s) = cfg.survey_time else {
        bail!("config has no `survey_time` block");
    };
    let minutes = survey_minutes(s)?;
    let method = match s {
        SurveyTimeConfig::Pfml { .. } => "pfml",
        SurveyTimeConfig::Knn { .. } => "knn",
    };
    let dir = out_dir(cfg)?;
    fs::write(
        dir.join("survey_time.json"),
        serde_json::to_string_pretty(&serde_json::json!({ "method": method, "minutes": minutes }))?,
    )?;
    println!("{method} offline survey: {minutes:.2} min (~{} min)", minutes.round());
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let p = existing(cfg.out_dir().join("report.json"), "report (run localize first)")?;
    let report: MetricsReport = serde_json::from_str(&fs::read_to_string(&p)?)
        .with_context(|| format!("parsing {}", p.display()))?;
    ensure!(report.is_consistent(), "{} does not match its own errors", p.display());
    let mut csv = String::from("error_m,fraction\n");
    for (e, f) in &report.cdf {
        writeln!(csv, "{e},{f}")?;
    }
    fs::write(cfg.out_dir().join("error_cdf.csv"), csv)?;
    println!(
        "{}: n {}  mean {:.3} m  sd {:.3} m  p90 {:.3} m  max {:.3} m  degenerate {}",
        report.method,
        report.errors_m.len(),
        report.mean_m,
        report.std_m,
        report.p90_m,
        report.cdf.last().map(|c| c.0).unwrap_or(0.0),
        report.degenerate_steps
    );
    if let Some(m) = report.survey_minutes {
        println!("survey time {m:.2} min");
    }
    Ok(())
}
