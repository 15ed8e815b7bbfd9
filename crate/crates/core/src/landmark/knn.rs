//! k-nearest-neighbour room classification in fingerprint space.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{count, Real};
use crate::sensing::Dataset;

use super::{check_width, RoomPosterior};

pub const DEFAULT_K: usize = 3;

/// Indices of the `k` nearest rows of `rows` (Euclidean), nearest first;
/// equal distances keep the lower index first.
pub fn nearest_neighbors<T: Real>(rows: &[Vec<T>], query: &[T], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > rows.len() {
        return Err(Error::KOutOfRange { k, n: rows.len() });
    }
    let mut d: Vec<(T, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            check_width(r.len(), query.len())?;
            let s: T = r.iter().zip(query).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            Ok((s, i))
        })
        .collect::<Result<_>>()?;
    let by_distance = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.cmp(&b.1))
    };
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance);
        d.truncate(k);
    }
    d.sort_by(by_distance);
    Ok(d.into_iter().map(|(_, i)| i).collect())
}

/// Class frequencies among the `k` nearest instances.
pub fn knn_predict<T: Real>(data: &Dataset<T>, features: &[T], k: usize) -> Result<RoomPosterior<T>> {
    let nn = nearest_neighbors(&data.features, features, k)?;
    let mut votes: BTreeMap<String, T> = BTreeMap::new();
    for i in nn {
        *votes.entry(data.labels[i].clone()).or_insert(T::zero()) += T::one();
    }
    let kk = count::<T>(k);
    Ok(RoomPosterior::from_scores(
        votes.into_iter().map(|(c, v)| (c, v / kk)).collect(),
    ))
}

#[derive(Debug, Clone)]
pub struct KnnModel<T> {
    data: Dataset<T>,
    k: usize,
}

impl<T: Real> KnnModel<T> {
    pub fn new(data: Dataset<T>, k: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if k == 0 || k > data.len() {
            return Err(Error::KOutOfRange { k, n: data.len() });
        }
        Ok(Self { data, k })
    }

    pub fn width(&self) -> usize {
        self.data.width()
    }

    pub fn predict(&self, features: &[T]) -> Result<RoomPosterior<T>> {
        knn_predict(&self.data, features, self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> Dataset<f64> {
        Dataset {
            features: vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![10.0, 10.0],
                vec![11.0, 10.0],
            ],
            labels: ["A", "A", "B", "B", "C"].map(String::from).to_vec(),
        }
    }

    #[test]
    fn exact_match_k1() {
        let p = knn_predict(&db(), &[10.0, 10.0], 1).unwrap();
        assert_eq!(p.get("B"), 1.0);
    }

    #[test]
    fn vote_fractions() {
        let p = knn_predict(&db(), &[0.2, 0.1], 3).unwrap();
        assert!((p.get("A") - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.get("B") - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k_equal_n_gives_class_frequencies() {
        let p = knn_predict(&db(), &[5.0, 5.0], 5).unwrap();
        assert!((p.get("A") - 0.4).abs() < 1e-15);
        assert!((p.get("B") - 0.4).abs() < 1e-15);
        assert!((p.get("C") - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_index() {
        // (1,0) and (0,1) are equidistant from the origin-adjacent query
        let nn = nearest_neighbors(&db().features, &[0.5, 0.5], 3).unwrap();
        assert_eq!(nn, vec![0, 1, 2]);
        let nn = nearest_neighbors(&db().features, &[0.5, 0.5], 2).unwrap();
        assert_eq!(nn, vec![0, 1]);
    }

    #[test]
    fn k_out_of_range() {
        assert!(matches!(
            knn_predict(&db(), &[0.0, 0.0], 0),
            Err(Error::KOutOfRange { k: 0, n: 5 })
        ));
        assert!(knn_predict(&db(), &[0.0, 0.0], 6).is_err());
        assert!(knn_predict(&db(), &[0.0], 1).is_err());
    }
}
