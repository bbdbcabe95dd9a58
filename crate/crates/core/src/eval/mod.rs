//! Evaluation protocols.
//!
//! Every protocol is generic over a [`Classifier`], so the decoder can be
//! swapped for an oracle or a constant predictor when checking the harness
//! itself. Jobs (folds, sweep points, seeds) run in parallel on the current
//! rayon pool; each job's seed is derived from the master seed and a job
//! descriptor, and results are merged in job order, so outputs do not
//! depend on scheduling.

mod avg;
mod cv;
mod probe;
mod report;
mod sweep;

use ndarray::Array2;
use serde::Serialize;

pub use avg::{DEFAULT_K_VALUES, group_partition, kfold_snr_boosted, snr_boosted_eval, AveragingReport};
pub use cv::{kfold_cv, stratified_folds, CvResult};
pub use probe::{confound_probe_channels, confound_probe_single_ic, zero_channels, ProbeInput};
pub use report::{reports_to_tsv, EvalReport, N_CLASSES};
pub use sweep::{sample_complexity_sweep, SweepConfig, SweepCurve, SweepPoint, SweepResult};

use crate::dataio::EpochDataset;
use crate::decoder::{self, EEGNetConfig, ModelWeights, TrainConfig};
use crate::error::Result;

/// Something that can be trained on epochs and then score new epochs.
pub trait Classifier: Sync {
    type Model: Send + Sync;

    fn fit(&self, train: &EpochDataset, seed: u64) -> Result<Self::Model>;

    /// One probability row per input epoch.
    fn predict_proba(&self, model: &Self::Model, epochs: &[&Array2<f32>]) -> Result<Vec<Vec<f64>>>;

    /// Settings that determine the classifier's behavior; hashed into
    /// report fingerprints.
    fn settings(&self) -> serde_json::Value;
}

/// The compact CNN with fixed architecture and training settings. The
/// training seed is replaced by each job's derived seed.
#[derive(Debug, Clone, Serialize)]
pub struct EEGNetClassifier {
    pub net: EEGNetConfig,
    pub train: TrainConfig,
}

impl EEGNetClassifier {
    pub fn new(net: EEGNetConfig, train: TrainConfig) -> Self {
        EEGNetClassifier { net, train }
    }
}

impl Classifier for EEGNetClassifier {
    type Model = ModelWeights;

    fn fit(&self, train: &EpochDataset, seed: u64) -> Result<ModelWeights> {
        let cfg = TrainConfig { seed, ..self.train };
        Ok(decoder::train(train, &cfg, &self.net)?.0)
    }

    fn predict_proba(&self, model: &ModelWeights, epochs: &[&Array2<f32>]) -> Result<Vec<Vec<f64>>> {
        decoder::predict_proba(model, epochs)
    }

    fn settings(&self) -> serde_json::Value {
        let TrainConfig { seed: _, batch_size, max_epochs, patience, learning_rate, validation_fraction, augmentation, standardize } =
            self.train;
        serde_json::json!({
            "net": self.net,
            "batch_size": batch_size,
            "max_epochs": max_epochs,
            "patience": patience,
            "learning_rate": learning_rate,
            "validation_fraction": validation_fraction,
            "augmentation": augmentation,
            "standardize": standardize,
        })
    }
}

/// Mean of equally shaped epochs, sample by sample.
pub fn mean_epoch(epochs: &[&Array2<f32>]) -> Result<Array2<f32>> {
    let first = epochs
        .first()
        .ok_or_else(|| crate::Error::InvalidArgument("cannot average zero epochs".into()))?;
    let mut acc = Array2::<f64>::zeros(first.dim());
    for e in epochs {
        if e.dim() != first.dim() {
            return Err(crate::Error::ShapeMismatch(format!(
                "epoch shapes {:?} and {:?} differ",
                first.dim(),
                e.dim()
            )));
        }
        acc.zip_mut_with(e, |a, &b| *a += f64::from(b));
    }
    let k = epochs.len() as f64;
    Ok(acc.mapv(|v| (v / k) as f32))
}

/// Trains on `train`, scores `test` and fills a report.
pub(crate) fn fit_and_score<C: Classifier>(
    clf: &C,
    train: &EpochDataset,
    test: &EpochDataset,
    seed: u64,
    job: String,
    fingerprint: &str,
) -> Result<EvalReport> {
    let model = clf.fit(train, seed)?;
    let data: Vec<&Array2<f32>> = test.epochs().iter().map(|e| &e.data).collect();
    let probs = clf.predict_proba(&model, &data)?;
    let truth: Vec<usize> = test.epochs().iter().map(|e| e.label.index()).collect();
    let pred: Vec<usize> = probs.iter().map(|p| decoder::argmax(p)).collect();
    Ok(EvalReport::from_predictions(job, &truth, &pred, seed, fingerprint))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::dataio::{Epoch, Letter, Setting};

    /// Reads the label planted in sample (0, 0).
    pub struct Oracle;

    impl Classifier for Oracle {
        type Model = ();
        fn fit(&self, _: &EpochDataset, _: u64) -> Result<()> {
            Ok(())
        }
        fn predict_proba(&self, _: &(), epochs: &[&Array2<f32>]) -> Result<Vec<Vec<f64>>> {
            Ok(epochs
                .iter()
                .map(|e| {
                    let mut p = vec![0.0; 4];
                    p[e[[0, 0]].round().clamp(0.0, 3.0) as usize] = 1.0;
                    p
                })
                .collect())
        }
        fn settings(&self) -> serde_json::Value {
            serde_json::json!("oracle")
        }
    }

    /// Always predicts class 0.
    pub struct Constant;

    impl Classifier for Constant {
        type Model = ();
        fn fit(&self, _: &EpochDataset, _: u64) -> Result<()> {
            Ok(())
        }
        fn predict_proba(&self, _: &(), epochs: &[&Array2<f32>]) -> Result<Vec<Vec<f64>>> {
            Ok(epochs.iter().map(|_| vec![1.0, 0.0, 0.0, 0.0]).collect())
        }
        fn settings(&self) -> serde_json::Value {
            serde_json::json!("constant")
        }
    }

    /// `n` epochs cycling through the four letters, label planted at (0, 0).
    pub fn planted(n: usize) -> EpochDataset {
        let epochs = (0..n)
            .map(|i| {
                let label = Letter::ALL[i % 4];
                let mut data = Array2::zeros((2, 10));
                data[[0, 0]] = label.index() as f32;
                data[[1, 0]] = i as f32;
                Epoch { data, label, setting: Setting::MeCue, onset_time_s: i as f64, session_id: "t".into() }
            })
            .collect();
        EpochDataset::new(epochs, 100.0, vec!["A".into(), "B".into()]).unwrap()
    }
}
