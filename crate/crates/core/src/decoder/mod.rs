//! Compact convolutional letter classifier.
//!
//! Architecture, in order:
//!
//! 1. temporal convolution, F1 kernels of `temporal_kernel_len` ('same' padding)
//! 2. depthwise spatial convolution over all channels, D maps per kernel
//! 3. batch normalization, ELU, average pool (`pool1`), dropout
//! 4. separable convolution: per-map temporal kernel then pointwise F2 mix
//! 5. batch normalization, ELU, average pool (`pool2`), dropout
//! 6. dense layer with bias, softmax
//!
//! There is no normalization between the temporal and spatial convolutions:
//! an affine map there is absorbed exactly by the spatial weights and the
//! following batch normalization.
//!
//! ```
//! use hwdecode::decoder::{forward, EEGNetConfig, ModelWeights};
//! use rand::SeedableRng;
//!
//! let cfg = EEGNetConfig::default();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let w = ModelWeights::init(&cfg, &mut rng).unwrap();
//! let p = forward(&w, &ndarray::Array2::zeros((32, 100))).unwrap();
//! assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
//! ```

mod config;
mod net;
mod train;
mod weights;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{Augmentation, EEGNetConfig, TrainConfig};
pub use train::{train, EpochStats, TrainHistory};
pub use weights::{ChannelNorm, Layout, ModelWeights};

use crate::error::{Error, Result};
use net::{Cache, Mode};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn prepare(w: &ModelWeights, data: &Array2<f32>) -> Result<Vec<f64>> {
    let c = w.config();
    if data.dim() != (c.n_channels, c.n_samples) {
        return Err(Error::ShapeMismatch(format!(
            "input is {}×{} but the network expects {}×{}",
            data.nrows(),
            data.ncols(),
            c.n_channels,
            c.n_samples
        )));
    }
    let mut x: Vec<f64> = data.iter().map(|&v| f64::from(v)).collect();
    train::apply_norm(w.channel_norm(), &mut x, c.n_samples);
    Ok(x)
}

/// Class probabilities for one epoch in inference mode.
pub fn forward(w: &ModelWeights, data: &Array2<f32>) -> Result<Vec<f64>> {
    let x = prepare(w, data)?;
    let mut cache = Cache::default();
    net::forward::<ChaCha8Rng>(w, &x, 1, Mode::Infer, &mut cache);
    Ok(cache.probs)
}

/// Class probabilities for many epochs; rows match `data`.
pub fn predict_proba(w: &ModelWeights, data: &[&Array2<f32>]) -> Result<Vec<Vec<f64>>> {
    let nc = w.config().n_classes;
    let mut out = Vec::with_capacity(data.len());
    let mut cache = Cache::default();
    for chunk in data.chunks(256) {
        let mut x = Vec::new();
        for d in chunk {
            x.extend(prepare(w, d)?);
        }
        net::forward::<ChaCha8Rng>(w, &x, chunk.len(), Mode::Infer, &mut cache);
        out.extend(cache.probs.chunks(nc).map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Averages the raw epochs sample by sample, then runs one forward pass.
pub fn predict_averaged(w: &ModelWeights, epochs: &[&Array2<f32>]) -> Result<Vec<f64>> {
    let first = epochs
        .first()
        .ok_or_else(|| Error::InvalidArgument("predict_averaged needs at least one epoch".into()))?;
    let mut acc = Array2::<f64>::zeros(first.dim());
    for e in epochs {
        if e.dim() != first.dim() {
            return Err(Error::ShapeMismatch(format!("epoch shapes {:?} and {:?} differ", first.dim(), e.dim())));
        }
        acc.zip_mut_with(e, |a, &b| *a += f64::from(b));
    }
    let k = epochs.len() as f64;
    let mean = acc.mapv(|v| (v / k) as f32);
    forward(w, &mean)
}

/// Training-mode loss and parameter gradient on a batch, with batch
/// statistics and a dropout mask drawn from `dropout_seed`. Exposed for
/// gradient checking.
pub fn loss_and_gradient(
    w: &ModelWeights,
    data: &[&Array2<f32>],
    labels: &[usize],
    dropout_seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let loss = batch_loss(w, data, labels, dropout_seed)?;
    let (x, _) = stack(w, data, labels)?;
    let mut cache = Cache::default();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    net::forward(w, &x, data.len(), Mode::Train(&mut rng), &mut cache);
    let mut g = vec![0.0; w.params().len()];
    net::backward(w, &cache, labels, &mut g);
    Ok((loss, g))
}

/// Training-mode mean cross-entropy of a batch (see [`loss_and_gradient`]).
pub fn batch_loss(w: &ModelWeights, data: &[&Array2<f32>], labels: &[usize], dropout_seed: u64) -> Result<f64> {
    let (x, b) = stack(w, data, labels)?;
    let mut cache = Cache::default();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    net::forward(w, &x, b, Mode::Train(&mut rng), &mut cache);
    Ok(net::loss(&cache, labels, w.config().n_classes))
}

fn stack(w: &ModelWeights, data: &[&Array2<f32>], labels: &[usize]) -> Result<(Vec<f64>, usize)> {
    if data.is_empty() || data.len() != labels.len() {
        return Err(Error::InvalidArgument("batch needs one label per example".into()))?;
    }
    if labels.iter().any(|&y| y >= w.config().n_classes) {
        return Err(Error::InvalidArgument("label outside the class range".into()));
    }
    let mut x = Vec::new();
    for d in data {
        x.extend(prepare(w, d)?);
    }
    Ok((x, data.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    fn random_input(c: usize, t: usize, r: &mut ChaCha8Rng) -> Array2<f32> {
        Array2::from_shape_fn((c, t), |_| r.random_range(-1.0..1.0))
    }

    #[test]
    fn default_parameter_count() {
        let c = EEGNetConfig::default();
        // 8·50 + 16·32 + 2·16 + 16·16 + 16·16 + 2·16 + 16·3·4 + 4
        assert_eq!(c.n_params(), 1684);
        assert_eq!(Layout::new(&c).total, c.n_params());
        let t = EEGNetConfig::tiny();
        assert_eq!(Layout::new(&t).total, t.n_params());
    }

    #[test]
    fn config_invariants() {
        let mut c = EEGNetConfig::default();
        c.separable_filters = 8;
        assert!(c.validate().is_err());
        let mut c = EEGNetConfig::default();
        c.temporal_kernel_len = 101;
        assert!(c.validate().is_err());
        let mut c = EEGNetConfig::default();
        c.pool2 = 40;
        assert!(c.validate().is_err());
        let t = TrainConfig { validation_fraction: 0.5, ..Default::default() };
        assert!(t.validate().is_err());
    }

    #[test]
    fn zero_dense_layer_gives_uniform_output() {
        let mut w = ModelWeights::init(&EEGNetConfig::default(), &mut rng(3)).unwrap();
        let (d, b) = w.dense_mut();
        d.fill(0.0);
        b.fill(0.0);
        let p = forward(&w, &random_input(32, 100, &mut rng(4))).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_forward_is_pure() {
        let w = ModelWeights::init(&EEGNetConfig::default(), &mut rng(5)).unwrap();
        let mut r = rng(6);
        for _ in 0..5 {
            let x = random_input(32, 100, &mut r);
            let p = forward(&w, &x).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert_eq!(p, forward(&w, &x).unwrap());
        }
        let batch = predict_proba(&w, &[&random_input(32, 100, &mut rng(7))]).unwrap();
        assert_eq!(batch[0], forward(&w, &random_input(32, 100, &mut rng(7))).unwrap());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let w = ModelWeights::init(&EEGNetConfig::default(), &mut rng(5)).unwrap();
        assert!(matches!(forward(&w, &Array2::zeros((31, 100))), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn averaged_prediction_of_one_or_identical_epochs() {
        let w = ModelWeights::init(&EEGNetConfig::default(), &mut rng(8)).unwrap();
        let x = random_input(32, 100, &mut rng(9));
        let p = forward(&w, &x).unwrap();
        assert_eq!(predict_averaged(&w, &[&x]).unwrap(), p);
        assert_eq!(predict_averaged(&w, &[&x, &x, &x, &x]).unwrap(), p);
        let y = Array2::zeros((32, 99));
        assert!(predict_averaged(&w, &[&x, &y]).is_err());
        assert!(predict_averaged(&w, &[]).is_err());
    }

    #[test]
    fn permuting_dense_rows_permutes_outputs() {
        let w = ModelWeights::init(&EEGNetConfig::default(), &mut rng(10)).unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut wp = w.clone();
        let nf = w.config().n_features();
        {
            let (src_d, src_b) = {
                let l = w.layout();
                (w.params()[l.dense..l.bias].to_vec(), w.params()[l.bias..].to_vec())
            };
            let (d, b) = wp.dense_mut();
            for (k, &pk) in perm.iter().enumerate() {
                d[k * nf..(k + 1) * nf].copy_from_slice(&src_d[pk * nf..(pk + 1) * nf]);
                b[k] = src_b[pk];
            }
        }
        let x = random_input(32, 100, &mut rng(11));
        let p = forward(&w, &x).unwrap();
        let q = forward(&wp, &x).unwrap();
        for (k, &pk) in perm.iter().enumerate() {
            assert!((q[k] - p[pk]).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_round_trip_exactly() {
        let mut w = ModelWeights::init(&EEGNetConfig::default(), &mut rng(12)).unwrap();
        w.set_channel_norm(Some(ChannelNorm { mean: vec![0.1; 32], std: vec![2.0 / 3.0; 32] })).unwrap();
        let back = ModelWeights::from_bytes(&w.to_bytes()).unwrap();
        assert_eq!(back, w);
        let mut bytes = w.to_bytes();
        bytes.pop();
        assert!(ModelWeights::from_bytes(&bytes).is_err());
        assert!(ModelWeights::from_bytes(b"garbage!").is_err());
    }

    /// Central differences on every parameter of the tiny network.
    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let cfg = EEGNetConfig::tiny();
        let mut w = ModelWeights::init(&cfg, &mut rng(13)).unwrap();
        let mut r = rng(14);
        // move BN affine terms off their trivial init
        for v in w.params_mut().iter_mut() {
            *v += r.random_range(-0.2..0.2);
        }
        let xs: Vec<Array2<f32>> = (0..3).map(|_| random_input(4, 20, &mut r)).collect();
        let refs: Vec<&Array2<f32>> = xs.iter().collect();
        let labels = [0, 2, 3];
        let (_, g) = loss_and_gradient(&w, &refs, &labels, 0).unwrap();
        let h = 1e-5;
        for (name, start, len) in w.layout().tensors() {
            let mut num = vec![0.0; len];
            for i in 0..len {
                let mut wp = w.clone();
                wp.params_mut()[start + i] += h;
                let lp = batch_loss(&wp, &refs, &labels, 0).unwrap();
                wp.params_mut()[start + i] -= 2.0 * h;
                let lm = batch_loss(&wp, &refs, &labels, 0).unwrap();
                num[i] = (lp - lm) / (2.0 * h);
            }
            let a = &g[start..start + len];
            let diff = a.iter().zip(&num).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(num.iter().map(|x| x * x).sum::<f64>().sqrt());
            assert!(scale > 0.0, "{name} has zero gradient");
            assert!(diff / scale < 1e-4, "{name}: relative error {}", diff / scale);
        }
    }
}

#[cfg(test)]
mod train_tests {
    use super::train::train_raw;
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Class-specific constant spatial patterns, no noise.
    fn separable(n_per_class: usize, c: usize, t: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let patterns: Vec<Vec<f64>> = (0..4).map(|_| (0..c).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..4 * n_per_class {
            let k = i % 4;
            xs.push(patterns[k].iter().flat_map(|&v| std::iter::repeat_n(v, t)).collect());
            ys.push(k);
        }
        (xs, ys)
    }

    fn small_net() -> EEGNetConfig {
        EEGNetConfig { n_channels: 8, n_samples: 40, temporal_kernel_len: 10, pool2: 4, ..Default::default() }
    }

    #[test]
    fn separable_data_is_learned() {
        let net = small_net();
        let (xs, ys) = separable(20, 8, 40, 1);
        let cfg = TrainConfig { max_epochs: 150, patience: 150, batch_size: 16, learning_rate: 1e-2, ..Default::default() };
        let (w, hist) = train_raw(&xs, &ys, &cfg, &net).unwrap();
        let acc = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| {
                let a = Array2::from_shape_vec((8, 40), x.iter().map(|&v| v as f32).collect()).unwrap();
                argmax(&forward(&w, &a).unwrap()) == y
            })
            .count() as f64
            / xs.len() as f64;
        assert!(acc >= 0.95, "training accuracy {acc}");
        assert!(hist.best().val_accuracy >= 0.95);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let net = small_net();
        let (xs, ys) = separable(6, 8, 40, 2);
        let cfg = TrainConfig {
            max_epochs: 5,
            augmentation: Augmentation::RandomShift { max_shift_samples: 3 },
            ..Default::default()
        };
        let (a, ha) = train_raw(&xs, &ys, &cfg, &net).unwrap();
        let (b, hb) = train_raw(&xs, &ys, &cfg, &net).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(ha, hb);
        let (c, _) = train_raw(&xs, &ys, &TrainConfig { seed: 1, ..cfg }, &net).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn needs_two_examples_per_class() {
        let (xs, ys) = separable(1, 8, 40, 3);
        assert!(matches!(train_raw(&xs, &ys, &TrainConfig::default(), &small_net()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn exploding_learning_rate_is_reported() {
        let (xs, ys) = separable(8, 8, 40, 4);
        let cfg = TrainConfig { learning_rate: 1e300, max_epochs: 20, ..Default::default() };
        assert!(matches!(train_raw(&xs, &ys, &cfg, &small_net()), Err(Error::Diverged { .. })));
    }

    #[test]
    fn random_labels_score_near_chance() {
        let net = EEGNetConfig::default();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 240;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..3200).map(|_| normal.sample(&mut r)).collect()).collect();
        let ys: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let mut accs = Vec::new();
        for seed in 0..3 {
            let cfg = TrainConfig { seed, max_epochs: 30, patience: 10, ..Default::default() };
            let (w, _) = train_raw(&xs[..160], &ys[..160], &cfg, &net).unwrap();
            let hits = (160..n)
                .filter(|&i| {
                    let a = Array2::from_shape_vec((32, 100), xs[i].iter().map(|&v| v as f32).collect()).unwrap();
                    argmax(&forward(&w, &a).unwrap()) == ys[i]
                })
                .count();
            accs.push(hits as f64 / (n - 160) as f64);
        }
        let mean = accs.iter().sum::<f64>() / 3.0;
        assert!((mean - 0.25).abs() <= 0.1, "{accs:?}");
    }
}
