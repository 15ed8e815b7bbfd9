//! Stratified k-fold cross-validation of landmark classifiers.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sensing::Dataset;

use super::ClassifierSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Percentage of correctly classified instances.
    pub accuracy_pct: f64,
    pub correct: usize,
    pub total: usize,
    pub folds: usize,
    /// False when some class had fewer instances than folds and the split
    /// fell back to plain shuffled folds.
    pub stratified: bool,
}

/// Assigns a fold to every instance.
fn fold_assignment(labels: &[String], folds: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let stratified = by_class.values().all(|v| v.len() >= folds);
    let mut fold_of = vec![0; labels.len()];
    if stratified {
        let mut next = 0;
        for members in by_class.values_mut() {
            members.shuffle(rng);
            for &i in members.iter() {
                fold_of[i] = next % folds;
                next += 1;
            }
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(rng);
        for (pos, &i) in all.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    (fold_of, stratified)
}

/// Trains on `folds - 1` folds and scores the held-out one, for every fold.
/// The predicted room is the posterior argmax.
pub fn cross_validate<T: Real>(
    data: &Dataset<T>,
    spec: &ClassifierSpec,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if data.len() < folds {
        return Err(Error::InvalidParameter(format!(
            "{} instances cannot fill {folds} folds",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fold_of, stratified) = fold_assignment(&data.labels, folds, &mut rng);

    let mut correct = 0;
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| fold_of[i] == fold);
        let model = spec.train(&data.subset(&train))?;
        for &i in &test {
            let post = model.predict(&data.features[i])?;
            if post.argmax() == Some(data.labels[i].as_str()) {
                correct += 1;
            }
        }
    }
    Ok(CvResult {
        accuracy_pct: 100.0 * correct as f64 / data.len() as f64,
        correct,
        total: data.len(),
        folds,
        stratified,
    })
}
