use ndarray::Axis;

use super::{kfold_cv, Classifier, CvResult};
use crate::dataio::{EpochDataset, EventStream, Recording, Setting};
use crate::epoching::{build_dataset, BuildReport, OnsetDetectorConfig};
use crate::error::{Error, Result};
use crate::ica::IcaModel;

/// Continuous data a single-component probe re-epochs.
#[derive(Debug, Clone, Copy)]
pub struct ProbeInput<'a> {
    /// Preprocessed EEG on the event clock.
    pub eeg: &'a Recording,
    /// Pen stream on the same clock; needed for movement-centered epochs.
    pub pen: Option<&'a Recording>,
    pub events: &'a EventStream,
    pub setting: Setting,
    pub onset: OnsetDetectorConfig,
    pub session_id: &'a str,
}

/// Rebuilds the EEG from one independent component alone, re-epochs it and
/// cross-validates on the result.
pub fn confound_probe_single_ic<C: Classifier>(
    input: &ProbeInput<'_>,
    ica: &IcaModel,
    component: usize,
    clf: &C,
    folds: usize,
    seed: u64,
) -> Result<(CvResult, BuildReport)> {
    if component >= ica.n_components() {
        return Err(Error::ComponentOutOfRange { index: component, k: ica.n_components() });
    }
    let rec = ica.reconstruct(input.eeg, &[component])?;
    let (ds, build) = build_dataset(&rec, input.pen, input.events, input.setting, &input.onset, input.session_id)?;
    Ok((kfold_cv(&ds, folds, clf, seed)?, build))
}

/// Copy of `dataset` with every channel outside `keep` set to zero; the
/// input shape is unchanged.
pub fn zero_channels<S: AsRef<str>>(dataset: &EpochDataset, keep: &[S]) -> Result<EpochDataset> {
    let names = dataset.channel_names();
    let mut mask = vec![false; names.len()];
    for k in keep {
        let i = names
            .iter()
            .position(|n| n == k.as_ref())
            .ok_or_else(|| Error::UnknownChannel(k.as_ref().to_string()))?;
        mask[i] = true;
    }
    dataset.map_data(|d| {
        let mut d = d.clone();
        for (mut row, &m) in d.axis_iter_mut(Axis(0)).zip(&mask) {
            if !m {
                row.fill(0.0);
            }
        }
        d
    })
}

/// Cross-validates on a channel subset, other channels zeroed.
pub fn confound_probe_channels<C: Classifier, S: AsRef<str>>(
    dataset: &EpochDataset,
    channels: &[S],
    clf: &C,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    kfold_cv(&zero_channels(dataset, channels)?, folds, clf, seed)
}

#[cfg(test)]
mod tests {
    use super::super::testing::{planted, Oracle};
    use super::*;

    #[test]
    fn zeroing_keeps_shape() {
        let ds = planted(8);
        let z = zero_channels(&ds, &["B"]).unwrap();
        assert_eq!(z.shape(), ds.shape());
        assert!(z.epochs().iter().all(|e| e.data.row(0).iter().all(|&v| v == 0.0)));
        assert_eq!(z.epochs()[5].data[[1, 0]], 5.0);
        assert!(matches!(zero_channels(&ds, &["Q"]), Err(Error::UnknownChannel(_))));
    }

    #[test]
    fn all_channels_match_plain_cv() {
        let ds = planted(40);
        let a = confound_probe_channels(&ds, &["A", "B"], &Oracle, 5, 0).unwrap();
        assert_eq!(a.pooled, kfold_cv(&ds, 5, &Oracle, 0).unwrap().pooled);
        let b = confound_probe_channels(&ds, &["B"], &Oracle, 5, 0).unwrap();
        assert_eq!(b.pooled.accuracy, 0.25);
    }
}
