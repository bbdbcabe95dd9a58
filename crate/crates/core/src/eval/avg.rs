use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_epoch, stratified_folds, Classifier, EvalReport, N_CLASSES};
use crate::dataio::EpochDataset;
use crate::decoder::argmax;
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, fingerprint};

pub const DEFAULT_K_VALUES: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub k: usize,
    pub report: EvalReport,
}

/// Disjoint groups of `k` same-label epochs, chronological within each
/// letter, remainders dropped. Returns the groups and the dropped count.
pub fn group_partition(labels: &[usize], k: usize) -> Result<(Vec<Vec<usize>>, usize)> {
    if k == 0 {
        return Err(Error::InvalidArgument("group size must be at least 1".into()));
    }
    let mut groups = Vec::new();
    let mut dropped = 0;
    for c in 0..N_CLASSES {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < k {
            return Err(Error::InsufficientData(format!(
                "k={k} exceeds the {} test epochs of class {}",
                idx.len(),
                crate::Letter::from_index(c).map_or("?", |l| l.as_str())
            )));
        }
        let chunks = idx.chunks_exact(k);
        dropped += chunks.remainder().len();
        groups.extend(chunks.map(<[usize]>::to_vec));
    }
    Ok((groups, dropped))
}

fn score_groups<C: Classifier>(
    clf: &C,
    model: &C::Model,
    test: &EpochDataset,
    k: usize,
    seed: u64,
    job: String,
    fp: &str,
) -> Result<EvalReport> {
    let labels: Vec<usize> = test.labels().iter().map(|l| l.index()).collect();
    let (groups, dropped) = group_partition(&labels, k)?;
    let means = groups
        .iter()
        .map(|g| mean_epoch(&g.iter().map(|&i| &test.epochs()[i].data).collect::<Vec<_>>()))
        .collect::<Result<Vec<Array2<f32>>>>()?;
    let probs = clf.predict_proba(model, &means.iter().collect::<Vec<_>>())?;
    let truth: Vec<usize> = groups.iter().map(|g| labels[g[0]]).collect();
    let pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let mut r = EvalReport::from_predictions(job, &truth, &pred, seed, fp);
    r.dropped = dropped;
    Ok(r)
}

/// Scores a trained model on `test` after averaging groups of `k` trials.
pub fn snr_boosted_eval<C: Classifier>(
    clf: &C,
    model: &C::Model,
    test: &EpochDataset,
    k_values: &[usize],
    seed: u64,
) -> Result<Vec<AveragingReport>> {
    let fp = fingerprint(&serde_json::json!({
        "protocol": "snr_boosted_eval", "k_values": k_values, "seed": seed, "classifier": clf.settings()
    }));
    k_values
        .iter()
        .map(|&k| Ok(AveragingReport { k, report: score_groups(clf, model, test, k, seed, format!("avg-k{k}"), &fp)? }))
        .collect()
}

/// Trial averaging inside k-fold CV: each fold trains on single trials and
/// its test fold is scored at every group size; reports are pooled over
/// folds.
pub fn kfold_snr_boosted<C: Classifier>(
    dataset: &EpochDataset,
    folds: usize,
    k_values: &[usize],
    clf: &C,
    seed: u64,
) -> Result<Vec<AveragingReport>> {
    let labels: Vec<usize> = dataset.labels().iter().map(|l| l.index()).collect();
    let fold = stratified_folds(&labels, folds, seed)?;
    let fp = fingerprint(&serde_json::json!({
        "protocol": "kfold_snr_boosted", "folds": folds, "k_values": k_values, "seed": seed, "classifier": clf.settings()
    }));
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
            let test = dataset.subset(&test);
            let job_seed = derive_seed(seed, &format!("cv-fold-{f}"));
            let model = clf.fit(&dataset.subset(&train), job_seed)?;
            k_values
                .iter()
                .map(|&k| score_groups(clf, &model, &test, k, job_seed, format!("avg-k{k}-fold-{f}"), &fp))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(k_values
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let parts: Vec<EvalReport> = per_fold.iter().map(|r| r[j].clone()).collect();
            AveragingReport { k, report: EvalReport::pooled(format!("avg-k{k}"), &parts, seed, &fp) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::testing::{planted, Oracle};
    use super::*;

    #[test]
    fn forty_per_class_in_groups_of_eight() {
        let labels: Vec<usize> = (0..160).map(|i| i % 4).collect();
        let (groups, dropped) = group_partition(&labels, 8).unwrap();
        assert_eq!(groups.len(), 20);
        assert_eq!(dropped, 0);
        let mut seen: Vec<usize> = groups.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 160);
        assert_eq!(groups[0], vec![0, 4, 8, 12, 16, 20, 24, 28]);
    }

    #[test]
    fn remainder_is_dropped_and_oversized_k_rejected() {
        let labels: Vec<usize> = (0..44).map(|i| i % 4).collect();
        let (groups, dropped) = group_partition(&labels, 4).unwrap();
        assert_eq!((groups.len(), dropped), (8, 12));
        assert!(group_partition(&labels, 12).is_err());
    }

    #[test]
    fn k_one_equals_plain_scoring() {
        let ds = planted(40);
        let r = snr_boosted_eval(&Oracle, &(), &ds, &[1, 2, 4, 8], 3).unwrap();
        assert_eq!(r[0].report.n_test, 40);
        assert_eq!(r[3].report.n_test, 4);
        assert!(r.iter().all(|a| a.report.accuracy == 1.0));
        let cv = kfold_snr_boosted(&ds, 2, &[1, 4], &Oracle, 0).unwrap();
        assert_eq!(cv[0].report.n_test, 40);
        assert_eq!((cv[1].report.n_test, cv[1].report.dropped), (8, 8));
    }
}
