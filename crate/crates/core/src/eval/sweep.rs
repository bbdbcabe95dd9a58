use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{fit_and_score, Classifier, EvalReport, N_CLASSES};
use crate::dataio::EpochDataset;
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, fingerprint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Size of the fixed test set cut from the end of the dataset.
    pub n_test: usize,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { n_test: 160, fractions: (1..=10).map(|i| i as f64 / 10.0).collect(), seeds: vec![0, 1, 2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub n_train: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub seeds: Vec<u64>,
}

impl SweepCurve {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("fraction\tn_train\tmean_accuracy\tstd_accuracy\n");
        for p in &self.points {
            s += &format!("{:.2}\t{}\t{:.6}\t{:.6}\n", p.fraction, p.n_train, p.mean_accuracy, p.std_accuracy);
        }
        s
    }

    pub fn at(&self, fraction: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.fraction - fraction).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: SweepCurve,
    /// One row per (fraction, seed), fraction-major.
    pub runs: Vec<(f64, u64, usize, EvalReport)>,
    /// SHA-256 of the fixed test set's epochs and labels.
    pub test_set_digest: String,
}

impl SweepResult {
    /// Flat `fraction, seed, n_train, accuracy` table.
    pub fn runs_to_tsv(&self) -> String {
        let mut s = String::from("fraction\tseed\tn_train\taccuracy\n");
        for (f, seed, n, r) in &self.runs {
            s += &format!("{f:.2}\t{seed}\t{n}\t{:.6}\n", r.accuracy);
        }
        s
    }
}

fn digest(ds: &EpochDataset) -> String {
    let mut h = Sha256::new();
    for e in ds.epochs() {
        h.update(e.label.as_str());
        for v in &e.data {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-class subsample sizes for `fraction` of the given class counts.
fn class_quota(counts: &[usize; N_CLASSES], fraction: f64) -> Result<[usize; N_CLASSES]> {
    let mut q = [0; N_CLASSES];
    for (c, &n) in counts.iter().enumerate() {
        q[c] = ((n as f64 * fraction).round() as usize).min(n);
        if q[c] < 2 {
            return Err(Error::InsufficientData(format!(
                "fraction {fraction} leaves {} training epochs of class {}; need at least 2",
                q[c],
                crate::Letter::from_index(c).map_or("?", |l| l.as_str())
            )));
        }
    }
    Ok(q)
}

/// Class-stratified subsample without replacement, in chronological order.
fn subsample(labels: &[usize], quota: &[usize; N_CLASSES], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::new();
    for (c, &q) in quota.iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        out.extend_from_slice(&idx[..q]);
    }
    out.sort_unstable();
    out
}

/// Sample-complexity sweep against a fixed chronological test set.
pub fn sample_complexity_sweep<C: Classifier>(dataset: &EpochDataset, cfg: &SweepConfig, clf: &C) -> Result<SweepResult> {
    if cfg.fractions.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one fraction and one seed".into()));
    }
    if cfg.fractions.windows(2).any(|w| w[1] <= w[0]) || cfg.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidArgument("fractions must be strictly increasing within (0, 1]".into()));
    }
    let (superset, test) = dataset.split_fixed_test(cfg.n_test)?;
    let labels: Vec<usize> = superset.labels().iter().map(|l| l.index()).collect();
    let counts = superset.class_counts();
    let quotas = cfg.fractions.iter().map(|&f| class_quota(&counts, f)).collect::<Result<Vec<_>>>()?;
    let fp = fingerprint(&serde_json::json!({"protocol": "sample_complexity_sweep", "config": cfg, "classifier": clf.settings()}));

    let jobs: Vec<(usize, u64)> = (0..cfg.fractions.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let f = cfg.fractions[i];
            let desc = format!("sweep-f{f:.4}-s{seed}");
            let idx = if quotas[i] == counts {
                (0..labels.len()).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{desc}-subsample")));
                subsample(&labels, &quotas[i], &mut rng)
            };
            let train = superset.subset(&idx);
            let r = fit_and_score(clf, &train, &test, derive_seed(seed, &format!("{desc}-train")), desc, &fp)?;
            Ok((f, seed, idx.len(), r))
        })
        .collect::<Result<Vec<_>>>()?;

    let points = cfg
        .fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| {
            let accs: Vec<f64> = runs[i * cfg.seeds.len()..(i + 1) * cfg.seeds.len()].iter().map(|r| r.3.accuracy).collect();
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let std = if accs.len() > 1 {
                (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SweepPoint { fraction, n_train: quotas[i].iter().sum(), mean_accuracy: mean, std_accuracy: std }
        })
        .collect();
    Ok(SweepResult {
        curve: SweepCurve { points, seeds: cfg.seeds.clone() },
        runs,
        test_set_digest: digest(&test),
    })
}

#[cfg(test)]
mod tests {
    use super::super::testing::{planted, Oracle};
    use super::*;

    #[test]
    fn half_of_a_2400_trial_superset() {
        let counts = [560; 4];
        assert_eq!(class_quota(&counts, 0.5).unwrap().iter().sum::<usize>(), 1120);
        assert_eq!(class_quota(&counts, 1.0).unwrap(), counts);
        assert!(class_quota(&[10; 4], 0.1).is_err());
    }

    #[test]
    fn subsample_is_balanced_and_seeded() {
        let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let q = [10; 4];
        let a = subsample(&labels, &q, &mut ChaCha8Rng::seed_from_u64(0));
        let b = subsample(&labels, &q, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a, b);
        for c in 0..4 {
            assert_eq!(a.iter().filter(|&&i| labels[i] == c).count(), 10);
        }
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sweep_with_oracle() {
        let ds = planted(240);
        let cfg = SweepConfig { n_test: 40, ..Default::default() };
        let r = sample_complexity_sweep(&ds, &cfg, &Oracle).unwrap();
        assert_eq!(r.curve.points.len(), 10);
        assert_eq!(r.runs.len(), 30);
        assert_eq!(r.curve.at(1.0).unwrap().n_train, 200);
        assert_eq!(r.curve.at(0.5).unwrap().n_train, 100);
        assert!(r.curve.points.iter().all(|p| p.mean_accuracy == 1.0 && p.std_accuracy == 0.0));
        assert!(r.runs.iter().all(|x| x.3.n_test == 40));
        let bad = SweepConfig { fractions: vec![0.5, 0.3], ..cfg };
        assert!(sample_complexity_sweep(&ds, &bad, &Oracle).is_err());
    }
}
