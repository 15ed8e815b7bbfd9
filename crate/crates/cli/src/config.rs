use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use indoorloc::filter::FilterConfig;
use indoorloc::landmark::ClassifierSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Pfml,
    Nlst,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Features {
    Wifi,
    #[default]
    WifiMf,
}

/// Where the ranging model comes from: a parameter CSV or a fit over
/// reference measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangingSource {
    File(PathBuf),
    Fit { fit: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// `office`, `single-room` or `mirrored`; ignored when `environment` exists.
    pub scenario: String,
    pub shadowing_sigma_db: f64,
    pub mf_noise_sigma: f64,
    pub instances_per_room: usize,
    pub reference_distances_m: Vec<f64>,
    pub reference_samples: usize,
    pub test_points: Option<Vec<[f64; 2]>>,
    pub dwell_s: f64,
    pub rate_hz: f64,
    /// Idle time inserted between consecutive test points in the trace.
    pub point_gap_s: f64,
    pub coord_grid_m: f64,
    pub coord_samples: usize,
    /// Vertical field offset between the two `mirrored` rooms, µT.
    pub mf_gap: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            scenario: "office".into(),
            shadowing_sigma_db: 3.0,
            mf_noise_sigma: 0.5,
            instances_per_room: 400,
            reference_distances_m: (1..=36).map(|i| i as f64 * 0.5).collect(),
            reference_samples: 5,
            test_points: None,
            dwell_s: 10.0,
            rate_hz: 3.0,
            point_gap_s: 10.0,
            coord_grid_m: 1.0,
            coord_samples: 10,
            mf_gap: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum SurveyTimeConfig {
    Pfml {
        instances: f64,
        #[serde(default = "default_rate")]
        rate_hz: f64,
        ranging_minutes: f64,
    },
    Knn {
        survey_points: f64,
        t_sp_s: f64,
        t_sw_s: f64,
        instances: f64,
        #[serde(default = "default_rate")]
        rate_hz: f64,
    },
}

fn default_rate() -> f64 {
    3.0
}

fn default_gap() -> f64 {
    5.0
}

fn default_k() -> usize {
    3
}

fn default_folds() -> usize {
    10
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: Option<PathBuf>,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub features: Features,
    #[serde(default)]
    pub filter: FilterConfig,
    pub ranging: Option<RangingSource>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    pub survey_db: Option<PathBuf>,
    pub coord_db: Option<PathBuf>,
    pub reference_points: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Frame-timestamp gap that starts a new tracking session.
    #[serde(default = "default_gap")]
    pub segment_gap_s: f64,
    #[serde(default)]
    pub simulate: SimulateConfig,
    pub survey_time: Option<SurveyTimeConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut self.environment);
        fix(&mut self.survey_db);
        fix(&mut self.coord_db);
        fix(&mut self.reference_points);
        fix(&mut self.observations);
        fix(&mut self.trace);
        fix(&mut self.out);
        match &mut self.ranging {
            Some(RangingSource::File(p)) | Some(RangingSource::Fit { fit: p }) if p.is_relative() => {
                *p = base.join(&*p);
            }
            _ => {}
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// `path` if set, else `default` inside the output directory.
    pub fn input_or(&self, path: &Option<PathBuf>, default: &str) -> PathBuf {
        path.clone().unwrap_or_else(|| self.out_dir().join(default))
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter.particles == 0 {
            bail!("filter.particles must be positive");
        }
        if !(0.0..=100.0).contains(&self.filter.n_prime_pct) {
            bail!("filter.n_prime_pct must lie in [0, 100]");
        }
        if !(self.filter.sigma_base_m > 0.0) || self.filter.sigma_per_m < 0.0 {
            bail!("filter sigma model must be positive");
        }
        if self.knn_k == 0 {
            bail!("knn_k must be positive");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2");
        }
        if !(self.segment_gap_s > 0.0) {
            bail!("segment_gap_s must be positive");
        }
        Ok(())
    }
}
