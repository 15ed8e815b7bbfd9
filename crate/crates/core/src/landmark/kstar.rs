//! K* instance-based classifier for real-valued attributes.
//!
//! The transformation probability of attribute value `b` into `a` follows an
//! exponential density `exp(-|a - b| / x0)`. For each query and attribute the
//! scale `x0` is chosen by bisection so that the effective number of
//! instances `(sum p)^2 / sum p^2` equals `1 + blend/100 * (N - 1)`. The
//! per-instance probability is the product over attributes and a class score
//! is the sum over its instances. Everything runs in the log domain.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};
use crate::sensing::Dataset;

use super::{check_width, RoomPosterior};

/// Global blend used for room detection, percent.
pub const DEFAULT_BLEND: f64 = 30.0;

const NEFF_TOLERANCE: f64 = 1e-3;
const MAX_BISECTIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct KStarModel<T> {
    /// Column-major training values: `columns[attr][instance]`.
    columns: Vec<Vec<T>>,
    labels: Vec<usize>,
    classes: Vec<String>,
    blend: T,
}

/// Stores the training set; scales are resolved per query.
pub fn kstar_train<T: Real>(data: &Dataset<T>, blend: T) -> Result<KStarModel<T>> {
    if !(blend > T::zero() && blend <= lit(100.0)) {
        return Err(Error::InvalidParameter(format!(
            "blend must lie in (0, 100], got {blend}"
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let width = data.width();
    if let Some(row) = data.features.iter().find(|f| f.len() != width) {
        return Err(Error::WidthMismatch {
            expected: width,
            got: row.len(),
        });
    }
    let mut classes: Vec<String> = data.labels.clone();
    classes.sort();
    classes.dedup();
    let labels = data
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let columns = (0..width)
        .map(|a| data.features.iter().map(|f| f[a]).collect())
        .collect();
    Ok(KStarModel {
        columns,
        labels,
        classes,
        blend,
    })
}

impl<T: Real> KStarModel<T> {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn blend(&self) -> T {
        self.blend
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Instance counts per class, in `classes()` order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Target effective instance count for the current blend.
    pub fn target_sphere(&self) -> T {
        let n = count::<T>(self.len());
        T::one() + self.blend / lit(100.0) * (n - T::one())
    }

    pub fn predict(&self, features: &[T]) -> Result<RoomPosterior<T>> {
        check_width(self.width(), features.len())?;
        let n = self.len();
        let target = self.target_sphere();
        let mut log_p = vec![T::zero(); n];
        let mut dist = vec![T::zero(); n];
        for (column, &q) in self.columns.iter().zip(features) {
            for (d, &v) in dist.iter_mut().zip(column) {
                *d = (v - q).abs();
            }
            if let Some(scale) = select_scale(&dist, target) {
                let inv = T::one() / scale;
                for (lp, &d) in log_p.iter_mut().zip(&dist) {
                    *lp -= d * inv;
                }
            }
        }

        let peak = log_p
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let mut scores = vec![T::zero(); self.classes.len()];
        for (&lp, &c) in log_p.iter().zip(&self.labels) {
            scores[c] += (lp - peak).exp();
        }
        Ok(RoomPosterior::from_scores(
            self.classes
                .iter()
                .cloned()
                .zip(scores)
                .collect::<BTreeMap<_, _>>(),
        ))
    }
}

/// Effective number of instances for distances shifted to a zero minimum.
fn sphere_size<T: Real>(shifted: &[T], scale: T) -> T {
    let inv = T::one() / scale;
    let (mut s1, mut s2) = (T::zero(), T::zero());
    for &e in shifted {
        let p = (-e * inv).exp();
        s1 += p;
        s2 += p * p;
    }
    s1 * s1 / s2
}

/// Scale `x0` whose effective instance count matches `target`;
/// `None` when every distance is equal (the attribute cannot discriminate).
pub(crate) fn select_scale<T: Real>(dist: &[T], target: T) -> Option<T> {
    let dmin = dist.iter().copied().fold(T::infinity(), T::min);
    // sorted so the sums, and hence the bisection path, ignore instance order
    let mut shifted: Vec<T> = dist.iter().map(|&d| d - dmin).collect();
    shifted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let emax = shifted.iter().copied().fold(T::zero(), T::max);
    if !(emax > T::zero()) {
        return None;
    }
    let gap = shifted
        .iter()
        .copied()
        .filter(|&e| e > T::zero())
        .fold(T::infinity(), T::min);
    let tol = lit::<T>(NEFF_TOLERANCE);
    let mut lo = (gap * lit(1e-3)).ln();
    let mut hi = (emax * lit(1e6)).ln();
    if sphere_size(&shifted, lo.exp()) >= target {
        return Some(lo.exp());
    }
    if sphere_size(&shifted, hi.exp()) <= target {
        return Some(hi.exp());
    }
    let half = lit::<T>(0.5);
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo + hi) * half;
        let size = sphere_size(&shifted, mid.exp());
        if (size - target).abs() <= tol {
            return Some(mid.exp());
        }
        if size < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(((lo + hi) * half).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(rows: &[(&[f64], &str)]) -> Dataset<f64> {
        Dataset {
            features: rows.iter().map(|(f, _)| f.to_vec()).collect(),
            labels: rows.iter().map(|(_, l)| l.to_string()).collect(),
        }
    }

    #[test]
    fn single_instance_is_certain() {
        let m = kstar_train(&data(&[(&[-50.0, 20.0, 30.0], "r1")]), 30.0).unwrap();
        let p = m.predict(&[-70.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.get("r1"), 1.0);
    }

    #[test]
    fn identical_query_in_single_class_db() {
        let m = kstar_train(
            &data(&[(&[-50.0, 20.0, 30.0], "r1"), (&[-55.0, 22.0, 31.0], "r1")]),
            30.0,
        )
        .unwrap();
        let p = m.predict(&[-50.0, 20.0, 30.0]).unwrap();
        assert_eq!(p.argmax(), Some("r1"));
        assert_eq!(p.get("r1"), 1.0);
    }

    #[test]
    fn class_priors_recoverable() {
        let m = kstar_train(
            &data(&[(&[0.0], "a"), (&[1.0], "b"), (&[2.0], "a"), (&[3.0], "a")]),
            30.0,
        )
        .unwrap();
        assert_eq!(m.classes(), &["a".to_string(), "b".to_string()]);
        assert_eq!(m.class_counts(), vec![3, 1]);
    }

    #[test]
    fn training_errors() {
        assert!(matches!(
            kstar_train(&Dataset::<f64> { features: vec![], labels: vec![] }, 30.0),
            Err(Error::EmptyTrainingSet)
        ));
        let d = data(&[(&[0.0], "a")]);
        assert!(kstar_train(&d, 0.0).is_err());
        assert!(kstar_train(&d, 120.0).is_err());
        assert!(kstar_train(&d, 100.0).is_ok());
        let m = kstar_train(&d, 30.0).unwrap();
        assert!(matches!(
            m.predict(&[0.0, 1.0]),
            Err(Error::WidthMismatch { expected: 1, got: 2 })
        ));
    }

    /// Closed form for two instances at distances 0 and D on each attribute:
    /// with q = exp(-D / x0), (1 + q)^2 / (1 + q^2) = 1.3 gives
    /// 0.3 q^2 - 2 q + 0.3 = 0.
    fn two_point_transfer_ratio() -> f64 {
        (2.0 - (4.0f64 - 4.0 * 0.3 * 0.3).sqrt()) / (2.0 * 0.3)
    }

    #[test]
    fn far_class_is_suppressed() {
        let q = two_point_transfer_ratio();
        let oracle = 1.0 / (1.0 + q.powi(3));
        let m = kstar_train(
            &data(&[(&[0.0, 0.0, 0.0], "A"), (&[100.0, 100.0, 100.0], "B")]),
            30.0,
        )
        .unwrap();
        let p = m.predict(&[0.0, 0.0, 0.0]).unwrap();
        assert!(p.get("A") > 0.99);
        assert!((p.get("A") - oracle).abs() < 1e-3, "{} vs {oracle}", p.get("A"));

        // one attribute: oracle value is well below certainty
        let m1 = kstar_train(&data(&[(&[0.0], "A"), (&[100.0], "B")]), 30.0).unwrap();
        let p1 = m1.predict(&[0.0]).unwrap();
        assert!((p1.get("A") - 1.0 / (1.0 + q)).abs() < 1e-3);
    }

    #[test]
    fn midway_query_is_even() {
        let m = kstar_train(
            &data(&[(&[0.0, 10.0], "A"), (&[100.0, 30.0], "B")]),
            30.0,
        )
        .unwrap();
        let p = m.predict(&[50.0, 20.0]).unwrap();
        assert!((p.get("A") - 0.5).abs() < 1e-9);
        assert!((p.get("B") - 0.5).abs() < 1e-9);
    }

    #[test]
    fn scale_matches_target_sphere() {
        let dist: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin().abs() * 20.0).collect();
        let target = 1.0 + 0.3 * 199.0;
        let x0 = select_scale(&dist, target).unwrap();
        let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = dist.iter().map(|d| d - dmin).collect();
        assert!((sphere_size(&shifted, x0) - target).abs() <= 1e-3);
        assert!(select_scale(&[3.0, 3.0, 3.0], 1.6).is_none());
    }

    #[test]
    fn f32_model() {
        let d = Dataset::<f32> {
            features: vec![vec![0.0, 0.0, 0.0], vec![100.0, 100.0, 100.0]],
            labels: vec!["A".into(), "B".into()],
        };
        let m = kstar_train(&d, 30.0f32).unwrap();
        assert!(m.predict(&[0.0, 0.0, 0.0]).unwrap().get("A") > 0.99);
    }

    proptest! {
        #[test]
        fn posterior_normalized_and_order_independent(
            rows in prop::collection::vec(
                (prop::collection::vec(-100.0..0.0f64, 3), 0usize..3), 2..25),
            query in prop::collection::vec(-100.0..0.0f64, 3),
            rot in 0usize..25,
        ) {
            let d = Dataset {
                features: rows.iter().map(|r| r.0.clone()).collect(),
                labels: rows.iter().map(|r| format!("c{}", r.1)).collect(),
            };
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.rotate_left(rot % d.len());
            idx.reverse();
            let shuffled = d.subset(&idx);
            let a = kstar_train(&d, 30.0).unwrap().predict(&query).unwrap();
            let b = kstar_train(&shuffled, 30.0).unwrap().predict(&query).unwrap();
            prop_assert!(a.is_normalized());
            for (room, p) in a.iter() {
                prop_assert!((p - b.get(room)).abs() <= 1e-9);
            }
        }
    }
}
