//! The particle filter over the floor-plan graph.
//!
//! Each step runs four phases in order:
//!
//! 1. **sample**: particles are sorted by weight; the lowest `n_prime` percent
//!    are redrawn uniformly over all nodes and every other particle stays put
//!    or hops to a neighbour, uniformly over its closed neighbourhood.
//! 2. **update**: weights are multiplied by the range likelihood (Gaussian per
//!    anchor, raised to an exponent inversely proportional to the measured
//!    range) and by the room-landmark probability of the particle's room.
//! 3. **resample**: systematic resampling back to uniform weights.
//! 4. **estimate**: weighted centroid of the particles.
//!
//! All randomness comes from one seeded stream per [`ParticleSet`], consumed
//! in a fixed order: redistribution targets, neighbour moves, resampling offset.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::landmark::RoomPosterior;
use crate::scalar::{count, lit, to_f64, Real};
use crate::state_space::FloorPlanGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle<T> {
    pub node: usize,
    pub weight: T,
}

/// Run-config block for the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub particles: usize,
    pub n_prime_pct: f64,
    pub sigma_base_m: f64,
    pub sigma_per_m: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 2500,
            n_prime_pct: 10.0,
            sigma_base_m: 1.0,
            sigma_per_m: 0.25,
            seed: 42,
        }
    }
}

impl FilterConfig {
    /// Range noise model, `sigma_base_m + sigma_per_m * d`.
    pub fn sigma_for<T: Real>(&self, range: T) -> T {
        lit::<T>(self.sigma_base_m) + lit::<T>(self.sigma_per_m) * range
    }
}

/// Observations for one update.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBundle<T> {
    ranges: BTreeMap<String, T>,
    sigma: BTreeMap<String, T>,
    room_posterior: RoomPosterior<T>,
}

impl<T: Real> ObservationBundle<T> {
    pub fn new(
        ranges: BTreeMap<String, T>,
        sigma: BTreeMap<String, T>,
        room_posterior: RoomPosterior<T>,
    ) -> Result<Self> {
        for (id, d) in &ranges {
            if !(*d > T::zero()) || !d.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "range to `{id}` must be positive, got {d}"
                )));
            }
            match sigma.get(id) {
                Some(s) if *s > T::zero() && s.is_finite() => {}
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "sigma for `{id}` missing or not positive"
                    )))
                }
            }
        }
        Ok(Self {
            ranges,
            sigma,
            room_posterior,
        })
    }

    /// Builds the sigma map from the config's range-proportional noise model.
    pub fn with_noise_model(
        ranges: BTreeMap<String, T>,
        config: &FilterConfig,
        room_posterior: RoomPosterior<T>,
    ) -> Result<Self> {
        let sigma = ranges
            .iter()
            .map(|(k, d)| (k.clone(), config.sigma_for(*d)))
            .collect();
        Self::new(ranges, sigma, room_posterior)
    }

    pub fn ranges(&self) -> &BTreeMap<String, T> {
        &self.ranges
    }

    pub fn sigma(&self) -> &BTreeMap<String, T> {
        &self.sigma
    }

    pub fn room_posterior(&self) -> &RoomPosterior<T> {
        &self.room_posterior
    }

    /// Likelihood exponents `m_j = (1/d_j) / sum_n (1/d_n)`, in anchor-id order.
    pub fn exponents(&self) -> Vec<(String, T)> {
        range_exponents(&self.ranges)
    }
}

/// Exponents inversely proportional to the measured ranges, summing to one.
pub fn range_exponents<T: Real>(ranges: &BTreeMap<String, T>) -> Vec<(String, T)> {
    let total: T = ranges.values().map(|d| T::one() / *d).sum();
    ranges
        .iter()
        .map(|(k, d)| (k.clone(), (T::one() / *d) / total))
        .collect()
}

struct RangeTerm<T> {
    anchor: Point2<T>,
    range: T,
    exponent: T,
    log_norm: T,
    inv_two_var: T,
}

fn range_terms<T: Real>(
    bundle: &ObservationBundle<T>,
    anchors: &BTreeMap<String, Point2<T>>,
) -> Result<Vec<RangeTerm<T>>> {
    let sqrt_two_pi = (lit::<T>(2.0) * T::PI()).sqrt();
    bundle
        .exponents()
        .into_iter()
        .map(|(id, m)| {
            let anchor = *anchors
                .get(&id)
                .ok_or_else(|| Error::UnknownAnchor(id.clone()))?;
            let s = bundle.sigma[&id];
            Ok(RangeTerm {
                anchor,
                range: bundle.ranges[&id],
                exponent: m,
                log_norm: -(s * sqrt_two_pi).ln(),
                inv_two_var: T::one() / (lit::<T>(2.0) * s * s),
            })
        })
        .collect()
}

fn log_likelihood_at<T: Real>(terms: &[RangeTerm<T>], p: Point2<T>) -> T {
    terms
        .iter()
        .map(|t| {
            let r = t.range - p.distance(&t.anchor);
            t.exponent * (t.log_norm - r * r * t.inv_two_var)
        })
        .sum()
}

/// Log of the exponent-weighted range likelihood `prod_j p(d_j | x)^{m_j}` at `p`.
pub fn ranging_log_likelihood<T: Real>(
    bundle: &ObservationBundle<T>,
    anchors: &BTreeMap<String, Point2<T>>,
    p: Point2<T>,
) -> Result<T> {
    Ok(log_likelihood_at(&range_terms(bundle, anchors)?, p))
}

/// Weighted particle cloud with its own deterministic random stream.
#[derive(Debug, Clone)]
pub struct ParticleSet<T> {
    particles: Vec<Particle<T>>,
    rng: ChaCha8Rng,
}

impl<T: Real> PartialEq for ParticleSet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.particles == other.particles
    }
}

impl<T: Real> ParticleSet<T> {
    /// `n` particles drawn uniformly (with replacement) over the graph nodes,
    /// each with weight `1/n`.
    pub fn init(g: &FloorPlanGraph<T>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("particle count must be positive".into()));
        }
        if g.is_empty() {
            return Err(Error::NoNodes);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = T::one() / count::<T>(n);
        let particles = (0..n)
            .map(|_| Particle {
                node: rng.random_range(0..g.len()),
                weight: w,
            })
            .collect();
        Ok(Self { particles, rng })
    }

    /// Builds a set from explicit particles (weights are normalized).
    pub fn from_particles(particles: Vec<Particle<T>>, seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidParameter("particle count must be positive".into()));
        }
        let mut ps = Self {
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        if !ps.normalize() {
            return Err(Error::InvalidParameter("particle weights sum to zero".into()));
        }
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn total_weight(&self) -> T {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Sequential-order normalization; false if the total is not positive.
    fn normalize(&mut self) -> bool {
        let total = self.total_weight();
        if !(total > T::zero()) || !total.is_finite() {
            return false;
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        true
    }

    fn reset_uniform(&mut self) {
        let w = T::one() / count::<T>(self.len());
        for p in &mut self.particles {
            p.weight = w;
        }
    }

    /// Redistributes the lowest-weight `n_prime_pct` percent uniformly and
    /// moves the rest by at most one hop. Weights are carried over.
    pub fn sample(&mut self, g: &FloorPlanGraph<T>, n_prime_pct: f64) -> Result<()> {
        if !(0.0..=100.0).contains(&n_prime_pct) {
            return Err(Error::InvalidParameter(format!(
                "n_prime must lie in [0, 100], got {n_prime_pct}"
            )));
        }
        // stable: ties keep particle order
        self.particles
            .sort_by(|a, b| a.weight.partial_cmp(&b.weight).expect("finite weights"));
        let n = self.len();
        let spread = redistributed_count(n, n_prime_pct);
        for p in &mut self.particles[..spread] {
            p.node = self.rng.random_range(0..g.len());
        }
        for p in &mut self.particles[spread..] {
            let adj = g.neighbors(p.node)?;
            let choice = self.rng.random_range(0..=adj.len());
            if choice > 0 {
                p.node = adj[choice - 1];
            }
        }
        Ok(())
    }

    /// Multiplies weights by the range and landmark likelihoods and
    /// renormalizes. Returns `true` when every weight vanished and the set
    /// was reset to uniform weights.
    pub fn update_weights(
        &mut self,
        bundle: &ObservationBundle<T>,
        anchors: &BTreeMap<String, Point2<T>>,
        g: &FloorPlanGraph<T>,
    ) -> Result<bool> {
        let terms = range_terms(bundle, anchors)?;
        let room_prob: Vec<T> = g
            .room_ids()
            .iter()
            .map(|r| bundle.room_posterior.get(r))
            .collect();

        let mut log_l = Vec::with_capacity(self.len());
        let mut peak = T::neg_infinity();
        for p in &self.particles {
            let node = g.node(p.node)?;
            let ll = log_likelihood_at(&terms, node.position());
            if p.weight * room_prob[node.room] > T::zero() && ll > peak {
                peak = ll;
            }
            log_l.push(ll);
        }
        if !peak.is_finite() {
            self.reset_uniform();
            return Ok(true);
        }
        for (p, ll) in self.particles.iter_mut().zip(log_l) {
            let room = g.nodes()[p.node].room;
            p.weight = p.weight * (ll - peak).exp() * room_prob[room];
        }
        if !self.normalize() {
            self.reset_uniform();
            return Ok(true);
        }
        Ok(false)
    }

    /// Systematic resampling with one offset `u` in `[0, 1/N)`.
    pub fn resample(&mut self) {
        let n = self.len();
        let nt = count::<T>(n);
        let step = T::one() / nt;
        let u: T = lit::<T>(self.rng.random::<f64>()) * step;
        let mut offspring = Vec::with_capacity(n);
        let mut cumulative = self.particles[0].weight;
        let mut i = 0;
        for k in 0..n {
            let target = u + count::<T>(k) * step;
            while target >= cumulative && i + 1 < n {
                i += 1;
                cumulative += self.particles[i].weight;
            }
            offspring.push(Particle {
                node: self.particles[i].node,
                weight: step,
            });
        }
        self.particles = offspring;
    }

    /// Weighted centroid `(sum w x, sum w y)`.
    pub fn estimate(&self, g: &FloorPlanGraph<T>) -> Point2<T> {
        let (mut x, mut y) = (T::zero(), T::zero());
        for p in &self.particles {
            let n = &g.nodes()[p.node];
            x += p.weight * n.x;
            y += p.weight * n.y;
        }
        Point2::new(x, y)
    }

    /// Offspring count per node, for diagnostics.
    pub fn node_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for p in &self.particles {
            *h.entry(p.node).or_insert(0) += 1;
        }
        h
    }
}

/// Number of particles redrawn uniformly, `floor(n_prime * N / 100)`.
pub fn redistributed_count(n: usize, n_prime_pct: f64) -> usize {
    ((n_prime_pct * n as f64 / 100.0) + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput<T> {
    pub estimate: Point2<T>,
    pub degenerate: bool,
}

/// A tracking session: graph, anchor map, configuration and particle state.
#[derive(Debug, Clone)]
pub struct ParticleFilter<'g, T> {
    graph: &'g FloorPlanGraph<T>,
    anchors: BTreeMap<String, Point2<T>>,
    config: FilterConfig,
    set: ParticleSet<T>,
}

impl<'g, T: Real> ParticleFilter<'g, T> {
    pub fn new(
        graph: &'g FloorPlanGraph<T>,
        anchors: BTreeMap<String, Point2<T>>,
        config: FilterConfig,
    ) -> Result<Self> {
        let set = ParticleSet::init(graph, config.particles, config.seed)?;
        Ok(Self {
            graph,
            anchors,
            config,
            set,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn particles(&self) -> &ParticleSet<T> {
        &self.set
    }

    pub fn anchors(&self) -> &BTreeMap<String, Point2<T>> {
        &self.anchors
    }

    /// sample, update, resample, estimate.
    pub fn step(&mut self, bundle: &ObservationBundle<T>) -> Result<StepOutput<T>> {
        self.set.sample(self.graph, self.config.n_prime_pct)?;
        let degenerate = self.set.update_weights(bundle, &self.anchors, self.graph)?;
        self.set.resample();
        Ok(StepOutput {
            estimate: self.set.estimate(self.graph),
            degenerate,
        })
    }

    /// Same as [`step`](Self::step) but exposes the post-update weights
    /// through `inspect` before resampling.
    pub fn step_inspect(
        &mut self,
        bundle: &ObservationBundle<T>,
        mut inspect: impl FnMut(&ParticleSet<T>),
    ) -> Result<StepOutput<T>> {
        self.set.sample(self.graph, self.config.n_prime_pct)?;
        let degenerate = self.set.update_weights(bundle, &self.anchors, self.graph)?;
        inspect(&self.set);
        self.set.resample();
        Ok(StepOutput {
            estimate: self.set.estimate(self.graph),
            degenerate,
        })
    }
}

/// Mean squared distance of the particle cloud to `p`, in m².
pub fn spread_about<T: Real>(set: &ParticleSet<T>, g: &FloorPlanGraph<T>, p: Point2<T>) -> f64 {
    set.particles()
        .iter()
        .map(|q| to_f64(q.weight) * to_f64(g.nodes()[q.node].position().distance(&p)).powi(2))
        .sum()
}
