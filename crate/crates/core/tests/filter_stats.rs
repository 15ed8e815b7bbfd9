use indoorloc::filter::{FilterConfig, ObservationBundle, Particle, ParticleFilter, ParticleSet};
use indoorloc::geometry::{Point2, Polygon};
use indoorloc::landmark::RoomPosterior;
use indoorloc::state_space::{build_grid, FloorPlan, Region};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

fn unit_room() -> indoorloc::FloorPlanGraph {
    let plan = FloorPlan {
        bounds: [1.0, 1.0],
        rooms: vec![Region::new("r1", Polygon::rect(0.0, 0.0, 1.0, 1.0))],
        corridors: vec![],
        anchors: vec![],
        grid_spacing_m: 0.25,
    };
    build_grid(&plan, 0.25).unwrap()
}

#[test]
fn init_is_uniform_over_nodes() {
    let g = unit_room();
    assert_eq!(g.len(), 25);
    let n = 1_000_000;
    let ps = ParticleSet::init(&g, n, 2024).unwrap();
    let h = ps.node_histogram();
    let expected = n as f64 / 25.0;
    let stat: f64 = (0..25)
        .map(|i| {
            let o = *h.get(&i).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0 - ChiSquared::new(24.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p = {p}");
}

#[test]
fn redistribution_is_uniform() {
    let g = unit_room();
    let parts = vec![Particle { node: 12, weight: 1.0 }; 250_000];
    let mut ps = ParticleSet::from_particles(parts, 8).unwrap();
    ps.sample(&g, 100.0).unwrap();
    let h = ps.node_histogram();
    let expected = 250_000.0 / 25.0;
    let stat: f64 = (0..25)
        .map(|i| (*h.get(&i).unwrap_or(&0) as f64 - expected).powi(2) / expected)
        .sum();
    assert!(1.0 - ChiSquared::new(24.0).unwrap().cdf(stat) > 0.01);
}

#[test]
fn hop_choice_is_uniform_over_closed_neighbourhood() {
    let g = unit_room();
    // node 12 is interior: stay plus four neighbours
    let parts = vec![Particle { node: 12, weight: 1.0 }; 100_000];
    let mut ps = ParticleSet::from_particles(parts, 3).unwrap();
    ps.sample(&g, 0.0).unwrap();
    let h = ps.node_histogram();
    let cells = [12usize, 7, 11, 13, 17];
    assert_eq!(h.keys().copied().collect::<Vec<_>>(), {
        let mut c = cells.to_vec();
        c.sort();
        c
    });
    let expected = 100_000.0 / 5.0;
    let stat: f64 = cells
        .iter()
        .map(|c| (h[c] as f64 - expected).powi(2) / expected)
        .sum();
    assert!(1.0 - ChiSquared::new(4.0).unwrap().cdf(stat) > 0.01);
}

#[test]
fn systematic_resampling_is_unbiased() {
    let weights = [0.1, 0.0, 0.37, 0.03, 0.25, 0.25];
    let n = weights.len();
    let runs = 20_000;
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for seed in 0..runs {
        let parts = weights
            .iter()
            .enumerate()
            .map(|(i, w)| Particle { node: i, weight: *w })
            .collect();
        let mut ps = ParticleSet::<f64>::from_particles(parts, seed).unwrap();
        ps.resample();
        assert_eq!(ps.len(), n);
        let h = ps.node_histogram();
        for i in 0..n {
            let c = *h.get(&i).unwrap_or(&0) as f64;
            sum[i] += c;
            sq[i] += c * c;
        }
    }
    for i in 0..n {
        let m = sum[i] / runs as f64;
        let se = ((sq[i] / runs as f64 - m * m).max(0.0) / runs as f64).sqrt();
        assert!((m - n as f64 * weights[i]).abs() <= 3.0 * se + 1e-12, "particle {i}: {m}");
    }
}

#[test]
fn gated_estimate_stays_in_room_hull() {
    let plan = FloorPlan {
        bounds: [8.0, 4.0],
        rooms: vec![
            Region::new("a", Polygon::rect(0.0, 0.0, 4.0, 4.0)),
            Region::new("b", Polygon::rect(4.0, 0.0, 8.0, 4.0)),
        ],
        corridors: vec![],
        anchors: vec![],
        grid_spacing_m: 0.25,
    };
    let g = build_grid(&plan, 0.25).unwrap();
    let anchors: BTreeMap<String, Point2<f64>> =
        [("A".to_string(), Point2::new(0.0, 0.0)), ("B".to_string(), Point2::new(8.0, 4.0))]
            .into_iter()
            .collect();
    // ranges point at room b, the posterior insists on room a
    let ranges = [("A".to_string(), 6.7), ("B".to_string(), 2.3)].into_iter().collect();
    let cfg = FilterConfig { particles: 800, ..Default::default() };
    let b = ObservationBundle::with_noise_model(ranges, &cfg, RoomPosterior::certain("a")).unwrap();
    let mut pf = ParticleFilter::new(&g, anchors, cfg).unwrap();
    for _ in 0..10 {
        let e = pf.step(&b).unwrap().estimate;
        assert!(e.x <= 4.0 + 1e-12 && e.x >= 0.0 && e.y >= 0.0 && e.y <= 4.0, "{e:?}");
    }
}
