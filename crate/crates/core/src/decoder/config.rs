use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and hyperparameters of the compact CNN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EEGNetConfig {
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    /// Temporal filters (F1).
    pub temporal_filters: usize,
    /// Spatial filters per temporal filter (D).
    pub depth_multiplier: usize,
    /// Pointwise filters of the separable block (F2).
    pub separable_filters: usize,
    pub temporal_kernel_len: usize,
    pub separable_kernel_len: usize,
    pub pool1: usize,
    pub pool2: usize,
    pub dropout_p1: f64,
    pub dropout_p2: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for EEGNetConfig {
    fn default() -> Self {
        EEGNetConfig {
            n_channels: 32,
            n_samples: 100,
            n_classes: 4,
            temporal_filters: 8,
            depth_multiplier: 2,
            separable_filters: 16,
            temporal_kernel_len: 50,
            separable_kernel_len: 16,
            pool1: 4,
            pool2: 8,
            dropout_p1: 0.25,
            dropout_p2: 0.25,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl EEGNetConfig {
    /// Default architecture for a given input shape; the temporal kernel
    /// spans half a second.
    pub fn for_input(n_channels: usize, n_samples: usize, sample_rate_hz: f64) -> Self {
        EEGNetConfig {
            n_channels,
            n_samples,
            temporal_kernel_len: ((sample_rate_hz / 2.0).round() as usize).clamp(1, n_samples.max(1)),
            ..Default::default()
        }
    }

    /// Small network used for gradient checks.
    pub fn tiny() -> Self {
        EEGNetConfig {
            n_channels: 4,
            n_samples: 20,
            n_classes: 4,
            temporal_filters: 2,
            depth_multiplier: 1,
            separable_filters: 2,
            temporal_kernel_len: 6,
            separable_kernel_len: 4,
            pool1: 2,
            pool2: 4,
            dropout_p1: 0.0,
            dropout_p2: 0.0,
            ..Default::default()
        }
    }

    /// Spatial maps after the depthwise convolution (F1·D).
    pub fn n_maps(&self) -> usize {
        self.temporal_filters * self.depth_multiplier
    }

    pub fn pooled1(&self) -> usize {
        self.n_samples / self.pool1.max(1)
    }

    pub fn pooled2(&self) -> usize {
        self.pooled1() / self.pool2.max(1)
    }

    pub fn n_features(&self) -> usize {
        self.separable_filters * self.pooled2()
    }

    /// Trainable parameter count.
    pub fn n_params(&self) -> usize {
        let (f1, k, m, c) = (self.temporal_filters, self.temporal_kernel_len, self.n_maps(), self.n_channels);
        let (f2, ks, n) = (self.separable_filters, self.separable_kernel_len, self.n_classes);
        f1 * k + m * c + 2 * m + m * ks + f2 * m + 2 * f2 + f2 * self.pooled2() * n + n
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_channels == 0 || self.n_samples == 0 || self.n_classes < 2 {
            return bad("network needs channels, samples and at least two classes".into());
        }
        if self.temporal_filters == 0 || self.depth_multiplier == 0 || self.separable_filters == 0 {
            return bad("filter counts must be positive".into());
        }
        if self.separable_filters != self.n_maps() {
            return bad(format!(
                "separable_filters ({}) must equal temporal_filters × depth_multiplier ({})",
                self.separable_filters,
                self.n_maps()
            ));
        }
        if self.temporal_kernel_len == 0 || self.temporal_kernel_len > self.n_samples {
            return bad(format!("temporal_kernel_len {} outside 1..={}", self.temporal_kernel_len, self.n_samples));
        }
        if self.separable_kernel_len == 0 || self.pool1 == 0 || self.pool2 == 0 {
            return bad("kernel and pool sizes must be positive".into());
        }
        if self.pooled2() == 0 {
            return bad(format!(
                "pooled temporal length is zero ({} samples / {} / {})",
                self.n_samples, self.pool1, self.pool2
            ));
        }
        for p in [self.dropout_p1, self.dropout_p2] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout probability {p} outside [0, 1)"));
            }
        }
        if !(self.bn_eps > 0.0) || !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return bad("bn_eps must be positive and bn_momentum in (0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Augmentation {
    None,
    RandomShift { max_shift_samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub augmentation: Augmentation,
    /// Per-channel z-scoring with training-set statistics.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            batch_size: 64,
            max_epochs: 300,
            patience: 50,
            learning_rate: 1e-3,
            validation_fraction: 0.2,
            augmentation: Augmentation::None,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside (0, 0.5)",
                self.validation_fraction
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}
