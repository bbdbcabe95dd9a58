use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Augmentation, EEGNetConfig, TrainConfig};
use super::net::{self, Cache, Mode};
use super::weights::{ChannelNorm, ModelWeights};
use crate::dataio::EpochDataset;
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\n");
        for e in &self.epochs {
            s += &format!(
                "{}\t{:.6}\t{:.4}\t{:.6}\t{:.4}\n",
                e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            );
        }
        s
    }
}

/// Trains on an epoch dataset; labels are letter indices.
pub fn train(train_set: &EpochDataset, cfg: &TrainConfig, net: &EEGNetConfig) -> Result<(ModelWeights, TrainHistory)> {
    let shape = train_set
        .shape()
        .ok_or_else(|| Error::InsufficientData("empty training set".into()))?;
    if shape != (net.n_channels, net.n_samples) {
        return Err(Error::ShapeMismatch(format!(
            "epochs are {}×{} but the network expects {}×{}",
            shape.0, shape.1, net.n_channels, net.n_samples
        )));
    }
    let xs: Vec<Vec<f64>> =
        train_set.epochs().iter().map(|e| e.data.iter().map(|&v| f64::from(v)).collect()).collect();
    let labels: Vec<usize> = train_set.epochs().iter().map(|e| e.label.index()).collect();
    train_raw(&xs, &labels, cfg, net)
}

fn channel_norm(xs: &[&Vec<f64>], c: usize, t: usize) -> ChannelNorm {
    let n = (xs.len() * t) as f64;
    let mut mean = vec![0.0; c];
    let mut std = vec![0.0; c];
    for ch in 0..c {
        let m = xs.iter().flat_map(|x| &x[ch * t..(ch + 1) * t]).sum::<f64>() / n;
        let v = xs.iter().flat_map(|x| &x[ch * t..(ch + 1) * t]).map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        mean[ch] = m;
        std[ch] = if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 };
    }
    ChannelNorm { mean, std }
}

pub(crate) fn apply_norm(norm: Option<&ChannelNorm>, x: &mut [f64], t: usize) {
    if let Some(n) = norm {
        for (ch, row) in x.chunks_mut(t).enumerate() {
            let (m, s) = (n.mean[ch], n.std[ch]);
            for v in row {
                *v = (*v - m) / s;
            }
        }
    }
}

fn reflect(i: i64, n: i64) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - k;
    }
    k as usize
}

fn shifted(x: &[f64], t: usize, shift: i64, out: &mut [f64]) {
    for (src, dst) in x.chunks(t).zip(out.chunks_mut(t)) {
        for (i, d) in dst.iter_mut().enumerate() {
            *d = src[reflect(i as i64 - shift, t as i64)];
        }
    }
}

fn stratified_split(labels: &[usize], n_classes: usize, frac: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for k in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        idx.shuffle(rng);
        let n_val = ((idx.len() as f64 * frac).round() as usize).clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..n_val]);
        fit.extend_from_slice(&idx[n_val..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Inference-mode loss and accuracy over `idx`.
fn evaluate(w: &ModelWeights, xs: &[Vec<f64>], labels: &[usize], idx: &[usize], cache: &mut Cache) -> (f64, f64) {
    let nc = w.config.n_classes;
    let (mut loss, mut correct) = (0.0, 0usize);
    let mut buf = Vec::new();
    for chunk in idx.chunks(EVAL_BATCH) {
        buf.clear();
        for &i in chunk {
            buf.extend_from_slice(&xs[i]);
        }
        net::forward::<ChaCha8Rng>(w, &buf, chunk.len(), Mode::Infer, cache);
        for (j, &i) in chunk.iter().enumerate() {
            let p = &cache.probs[j * nc..(j + 1) * nc];
            loss -= p[labels[i]].ln();
            correct += usize::from(super::argmax(p) == labels[i]);
        }
    }
    (loss / idx.len() as f64, correct as f64 / idx.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn update(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        for i in 0..p.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains on flat `C × T` examples.
pub(crate) fn train_raw(
    xs: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
    net_cfg: &EEGNetConfig,
) -> Result<(ModelWeights, TrainHistory)> {
    cfg.validate()?;
    net_cfg.validate()?;
    let (c, t, nc) = (net_cfg.n_channels, net_cfg.n_samples, net_cfg.n_classes);
    if let Some(k) = labels.iter().find(|&&k| k >= nc) {
        return Err(Error::InvalidArgument(format!("label {k} outside {nc} classes")));
    }
    for k in 0..nc {
        let n = labels.iter().filter(|&&l| l == k).count();
        if n < 2 {
            return Err(Error::InsufficientData(format!("class {k} has {n} training examples, need at least 2")));
        }
    }

    let mut rng_split = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "split"));
    let mut rng_init = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init"));
    let mut rng_shuffle = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle"));
    let mut rng_drop = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "dropout"));
    let mut rng_aug = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "augment"));

    let (fit, val) = stratified_split(labels, nc, cfg.validation_fraction, &mut rng_split);
    let mut w = ModelWeights::init(net_cfg, &mut rng_init)?;
    if cfg.standardize {
        let fit_x: Vec<&Vec<f64>> = fit.iter().map(|&i| &xs[i]).collect();
        w.set_channel_norm(Some(channel_norm(&fit_x, c, t)))?;
    }
    let data: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut x = x.clone();
            apply_norm(w.channel_norm(), &mut x, t);
            x
        })
        .collect();

    let mut adam = Adam::new(w.params.len());
    let mut grad = vec![0.0; w.params.len()];
    let mut cache = Cache::default();
    let mut eval_cache = Cache::default();
    let mut order = fit.clone();
    let mut batch = Vec::with_capacity(cfg.batch_size * c * t);
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    let mut shifted_buf = vec![0.0; c * t];

    let mut history = Vec::new();
    let mut best: Option<(f64, f64, usize, ModelWeights)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng_shuffle);
        let (mut tl, mut tc) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch_labels.clear();
            for &i in chunk {
                match cfg.augmentation {
                    Augmentation::RandomShift { max_shift_samples } if max_shift_samples > 0 => {
                        let m = max_shift_samples as i64;
                        shifted(&data[i], t, rng_aug.random_range(-m..=m), &mut shifted_buf);
                        batch.extend_from_slice(&shifted_buf);
                    }
                    _ => batch.extend_from_slice(&data[i]),
                }
                batch_labels.push(labels[i]);
            }
            net::forward(&w, &batch, chunk.len(), Mode::Train(&mut rng_drop), &mut cache);
            let loss = net::loss(&cache, &batch_labels, nc);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            tl += loss * chunk.len() as f64;
            for (j, &y) in batch_labels.iter().enumerate() {
                tc += usize::from(super::argmax(&cache.probs[j * nc..(j + 1) * nc]) == y);
            }
            net::backward(&w, &cache, &batch_labels, &mut grad);
            net::update_running_stats(&mut w, &cache);
            adam.update(&mut w.params, &grad, cfg.learning_rate);
        }
        let (val_loss, val_accuracy) = evaluate(&w, &data, labels, &val, &mut eval_cache);
        if !val_loss.is_finite() || !w.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(EpochStats {
            epoch,
            train_loss: tl / fit.len() as f64,
            train_accuracy: tc as f64 / fit.len() as f64,
            val_loss,
            val_accuracy,
        });
        let improved = match &best {
            None => true,
            Some((acc, loss, _, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, epoch, w.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (_, _, best_epoch, weights) = best.expect("at least one epoch runs");
    Ok((weights, TrainHistory { epochs: history, best_epoch, stopped_early }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_mirrors_without_repeating_edges() {
        let v: Vec<usize> = (-3..8).map(|i| reflect(i, 5)).collect();
        assert_eq!(v, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (fit, val) = stratified_split(&labels, 4, 0.2, &mut rng);
        assert_eq!(val.len(), 8);
        assert_eq!(fit.len(), 32);
        for k in 0..4 {
            assert_eq!(val.iter().filter(|&&i| labels[i] == k).count(), 2);
        }
    }
}
