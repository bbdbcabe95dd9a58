use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_and_score, Classifier, EvalReport, N_CLASSES};
use crate::dataio::EpochDataset;
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, fingerprint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<EvalReport>,
    pub pooled: EvalReport,
}

/// Fold index of every epoch. Each class is shuffled with a seed-derived
/// permutation and dealt round-robin, so fold sizes per class differ by at
/// most one.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold needs k ≥ 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("folds-k{k}")));
    let mut fold = vec![0; labels.len()];
    for c in 0..N_CLASSES {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {} has {} epochs, fewer than k={k}",
                crate::Letter::from_index(c).map_or("?", |l| l.as_str()),
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold[i] = j % k;
        }
    }
    Ok(fold)
}

/// Class-stratified k-fold cross-validation.
pub fn kfold_cv<C: Classifier>(dataset: &EpochDataset, k: usize, clf: &C, seed: u64) -> Result<CvResult> {
    if dataset.len() < k {
        return Err(Error::InsufficientData(format!("{} epochs for {k} folds", dataset.len())));
    }
    let labels: Vec<usize> = dataset.labels().iter().map(|l| l.index()).collect();
    let fold = stratified_folds(&labels, k, seed)?;
    let fp = fingerprint(&serde_json::json!({"protocol": "kfold_cv", "k": k, "seed": seed, "classifier": clf.settings()}));
    let folds = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
            fit_and_score(
                clf,
                &dataset.subset(&train),
                &dataset.subset(&test),
                derive_seed(seed, &format!("cv-fold-{f}")),
                format!("cv-fold-{f}"),
                &fp,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled = EvalReport::pooled("cv-pooled".into(), &folds, seed, &fp);
    Ok(CvResult { folds, pooled })
}

#[cfg(test)]
mod tests {
    use super::super::testing::{planted, Constant, Oracle};
    use super::*;

    #[test]
    fn hundred_epochs_five_folds() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let fold = stratified_folds(&labels, 5, 0).unwrap();
        for f in 0..5 {
            let members: Vec<usize> = (0..100).filter(|&i| fold[i] == f).collect();
            assert_eq!(members.len(), 20);
            for c in 0..4 {
                assert_eq!(members.iter().filter(|&&i| labels[i] == c).count(), 5);
            }
        }
        assert_eq!(fold, stratified_folds(&labels, 5, 0).unwrap());
        assert_ne!(fold, stratified_folds(&labels, 5, 1).unwrap());
    }

    #[test]
    fn small_class_is_rejected() {
        let labels = [0, 1, 2, 3, 0, 1, 2, 3, 0];
        assert!(stratified_folds(&labels, 3, 0).is_err());
    }

    #[test]
    fn oracle_and_constant_classifiers() {
        let ds = planted(100);
        let o = kfold_cv(&ds, 5, &Oracle, 0).unwrap();
        assert_eq!(o.pooled.accuracy, 1.0);
        assert_eq!(o.pooled.n_test, 100);
        let c = kfold_cv(&ds, 5, &Constant, 0).unwrap();
        assert_eq!(c.pooled.accuracy, 0.25);
        assert_eq!(c.pooled.class_counts(), [25; 4]);
        assert_ne!(o.pooled.fingerprint, c.pooled.fingerprint);
    }
}
