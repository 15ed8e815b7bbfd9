//! Room-level landmark detection. Classifiers map a fingerprint to a
//! [`RoomPosterior`], which the particle filter uses as the landmark likelihood.

mod cv;
mod kstar;
mod knn;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};
use crate::sensing::Dataset;

pub use cv::{cross_validate, CvResult};
pub use kstar::{kstar_train, KStarModel, DEFAULT_BLEND};
pub use knn::{knn_predict, nearest_neighbors, KnnModel, DEFAULT_K};

/// Probability over room ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomPosterior<T> {
    probs: BTreeMap<String, T>,
}

impl<T: Real> RoomPosterior<T> {
    /// Normalizes non-negative scores; an all-zero score vector yields uniform mass.
    pub fn from_scores(scores: BTreeMap<String, T>) -> Self {
        let total: T = scores.values().copied().sum();
        let n = count::<T>(scores.len().max(1));
        let probs = scores
            .into_iter()
            .map(|(k, v)| {
                let p = if total > T::zero() { v / total } else { T::one() / n };
                (k, p)
            })
            .collect();
        Self { probs }
    }

    pub fn uniform<S: AsRef<str>>(rooms: &[S]) -> Self {
        Self::from_scores(rooms.iter().map(|r| (r.as_ref().to_string(), T::one())).collect())
    }

    /// All mass on `room`.
    pub fn certain(room: &str) -> Self {
        Self {
            probs: [(room.to_string(), T::one())].into_iter().collect(),
        }
    }

    /// Probability of `room`; zero outside the support.
    pub fn get(&self, room: &str) -> T {
        self.probs.get(room).copied().unwrap_or(T::zero())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most probable room; ties go to the lexicographically smallest id.
    pub fn argmax(&self) -> Option<&str> {
        let mut best: Option<(&str, T)> = None;
        for (k, v) in self.iter() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    }

    pub fn total(&self) -> T {
        self.probs.values().copied().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.probs.values().all(|v| *v >= T::zero())
            && (self.total() - T::one()).abs() <= lit(1e-9)
    }
}

/// Classifier configuration as written in run configs,
/// `{"type": "kstar", "blend": 30}` or `{"type": "knn", "k": 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Kstar {
        #[serde(default = "default_blend")]
        blend: f64,
    },
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_blend() -> f64 {
    DEFAULT_BLEND
}

fn default_k() -> usize {
    DEFAULT_K
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Kstar {
            blend: DEFAULT_BLEND,
        }
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Kstar { .. } => "kstar",
            ClassifierSpec::Knn { .. } => "knn",
        }
    }

    pub fn train<T: Real>(&self, data: &Dataset<T>) -> Result<Classifier<T>> {
        match *self {
            ClassifierSpec::Kstar { blend } => Ok(Classifier::KStar(kstar_train(data, lit(blend))?)),
            ClassifierSpec::Knn { k } => Ok(Classifier::Knn(KnnModel::new(data.clone(), k)?)),
        }
    }
}

/// A trained landmark classifier.
#[derive(Debug, Clone)]
pub enum Classifier<T> {
    KStar(KStarModel<T>),
    Knn(KnnModel<T>),
}

impl<T: Real> Classifier<T> {
    pub fn predict(&self, features: &[T]) -> Result<RoomPosterior<T>> {
        match self {
            Classifier::KStar(m) => m.predict(features),
            Classifier::Knn(m) => m.predict(features),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Classifier::KStar(m) => m.width(),
            Classifier::Knn(m) => m.width(),
        }
    }
}

fn check_width(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::WidthMismatch { expected, got })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_basics() {
        let p = RoomPosterior::<f64>::from_scores(
            [("b".to_string(), 1.0), ("a".to_string(), 1.0), ("c".to_string(), 0.5)]
                .into_iter()
                .collect(),
        );
        assert!(p.is_normalized());
        assert_eq!(p.argmax(), Some("a"));
        assert_eq!(p.get("zzz"), 0.0);
        assert!((p.get("c") - 0.2).abs() < 1e-15);
        let u = RoomPosterior::<f64>::uniform(&["x", "y"]);
        assert_eq!(u.get("x"), 0.5);
        assert_eq!(RoomPosterior::<f64>::certain("x").get("x"), 1.0);
    }

    #[test]
    fn spec_json() {
        let k: ClassifierSpec = serde_json::from_str(r#"{"type": "kstar", "blend": 30}"#).unwrap();
        assert_eq!(k, ClassifierSpec::Kstar { blend: 30.0 });
        let n: ClassifierSpec = serde_json::from_str(r#"{"type": "knn", "k": 3}"#).unwrap();
        assert_eq!(n, ClassifierSpec::Knn { k: 3 });
        assert_eq!(ClassifierSpec::default(), ClassifierSpec::Kstar { blend: 30.0 });
    }
}
