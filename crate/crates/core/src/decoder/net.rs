//! Batched forward and backward passes.
//!
//! Tensors are flat `Vec<f64>` in `(batch, channel, time)` order. The spatial
//! projection is applied before the temporal convolution; both are linear
//! and act on different axes, so the order does not change the function
//! but the projection shrinks 32 channels to F1·D maps before the long
//! temporal kernel runs.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;

use super::weights::{Layout, ModelWeights};

pub(crate) enum Mode<'a, R: Rng> {
    /// Batch statistics and dropout.
    Train(&'a mut R),
    /// Running statistics, no dropout.
    Infer,
}

/// Activations kept for the backward pass.
#[derive(Default)]
pub(crate) struct Cache {
    pub b: usize,
    x: Vec<f64>,
    s: Vec<f64>,
    zhat2: Vec<f64>,
    y2: Vec<f64>,
    mask1: Vec<f64>,
    p1: Vec<f64>,
    u: Vec<f64>,
    zhat3: Vec<f64>,
    y3: Vec<f64>,
    mask2: Vec<f64>,
    h: Vec<f64>,
    inv2: Vec<f64>,
    inv3: Vec<f64>,
    pub mean2: Vec<f64>,
    pub var2: Vec<f64>,
    pub mean3: Vec<f64>,
    pub var3: Vec<f64>,
    pub probs: Vec<f64>,
}

fn resize(v: &mut Vec<f64>, n: usize) {
    v.clear();
    v.resize(n, 0.0);
}

/// `out[t] += Σ_j w[j] · x[t + j − pl]` with zero padding, `pl = (K−1)/2`.
fn conv_same(x: &[f64], w: &[f64], out: &mut [f64]) {
    let n = x.len();
    let pl = (w.len() - 1) / 2;
    for (j, &wj) in w.iter().enumerate() {
        let lo = pl.saturating_sub(j);
        let hi = (n + pl).saturating_sub(j).min(n);
        if lo >= hi {
            continue;
        }
        let off = lo + j - pl;
        for (o, xi) in out[lo..hi].iter_mut().zip(&x[off..off + hi - lo]) {
            *o += wj * xi;
        }
    }
}

/// Gradients of [`conv_same`]: accumulates into `dw` and `dx`.
fn conv_same_back(x: &[f64], w: &[f64], dout: &[f64], dw: &mut [f64], dx: &mut [f64]) {
    let n = x.len();
    let pl = (w.len() - 1) / 2;
    for (j, &wj) in w.iter().enumerate() {
        let lo = pl.saturating_sub(j);
        let hi = (n + pl).saturating_sub(j).min(n);
        if lo >= hi {
            continue;
        }
        let off = lo + j - pl;
        let d = &dout[lo..hi];
        let mut acc = 0.0;
        for (g, xi) in d.iter().zip(&x[off..off + hi - lo]) {
            acc += g * xi;
        }
        dw[j] += acc;
        for (o, g) in dx[off..off + hi - lo].iter_mut().zip(d) {
            *o += wj * g;
        }
    }
}

fn elu(y: f64) -> f64 {
    if y > 0.0 {
        y
    } else {
        y.exp_m1()
    }
}

fn elu_grad(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else {
        y.exp()
    }
}

/// Normalizes `v` viewed as `(b, ch, l)` per channel.
#[allow(clippy::too_many_arguments)]
fn bn_forward(
    v: &[f64],
    (b, ch, l): (usize, usize, usize),
    gamma: &[f64],
    beta: &[f64],
    stats: Option<(&[f64], &[f64])>,
    eps: f64,
    zhat: &mut [f64],
    y: &mut [f64],
    inv: &mut Vec<f64>,
    mean_out: &mut Vec<f64>,
    var_out: &mut Vec<f64>,
) {
    resize(inv, ch);
    resize(mean_out, ch);
    resize(var_out, ch);
    let n = (b * l) as f64;
    for c in 0..ch {
        let rows = || (0..b).map(|i| &v[(i * ch + c) * l..(i * ch + c + 1) * l]);
        let (mean, var) = match stats {
            Some((m, s)) => (m[c], s[c]),
            None => {
                let mean = rows().flatten().sum::<f64>() / n;
                let var = rows().flatten().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                (mean, var)
            }
        };
        mean_out[c] = mean;
        var_out[c] = var;
        let is = 1.0 / (var + eps).sqrt();
        inv[c] = is;
        for i in 0..b {
            let o = (i * ch + c) * l;
            for t in o..o + l {
                zhat[t] = (v[t] - mean) * is;
                y[t] = gamma[c] * zhat[t] + beta[c];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn bn_backward(
    dy: &[f64],
    zhat: &[f64],
    (b, ch, l): (usize, usize, usize),
    gamma: &[f64],
    inv: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
    dx: &mut [f64],
) {
    let n = (b * l) as f64;
    for c in 0..ch {
        let (mut sdy, mut sdyz) = (0.0, 0.0);
        for i in 0..b {
            let o = (i * ch + c) * l;
            for t in o..o + l {
                sdy += dy[t];
                sdyz += dy[t] * zhat[t];
            }
        }
        dgamma[c] += sdyz;
        dbeta[c] += sdy;
        let k = gamma[c] * inv[c] / n;
        for i in 0..b {
            let o = (i * ch + c) * l;
            for t in o..o + l {
                dx[t] = k * (n * dy[t] - sdy - zhat[t] * sdyz);
            }
        }
    }
}

fn matmul_acc(a: &[f64], ad: (usize, usize), bm: ArrayView2<f64>, out: &mut [f64], od: (usize, usize)) {
    let a = ArrayView2::from_shape(ad, a).expect("shape");
    let mut o = ArrayViewMut2::from_shape(od, out).expect("shape");
    general_mat_mul(1.0, &a, &bm, 1.0, &mut o);
}

fn dropout_mask<R: Rng>(mask: &mut [f64], p: f64, rng: Option<&mut R>) {
    match rng {
        Some(rng) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            for m in mask {
                *m = if rng.random::<f64>() < p { 0.0 } else { keep };
            }
        }
        _ => mask.fill(1.0),
    }
}

/// Runs the network on `b` examples stored in `x` (`b × C × T`, already
/// standardized). Probabilities land in `cache.probs`.
pub(crate) fn forward<R: Rng>(w: &ModelWeights, x: &[f64], b: usize, mode: Mode<'_, R>, cache: &mut Cache) {
    let c = &w.config;
    let l = Layout::new(c);
    let p = &w.params;
    let (ch, t, m, f2) = (c.n_channels, c.n_samples, c.n_maps(), c.separable_filters);
    let (t1, t2, nf, nc) = (c.pooled1(), c.pooled2(), c.n_features(), c.n_classes);
    let (kt, ks) = (c.temporal_kernel_len, c.separable_kernel_len);
    debug_assert_eq!(x.len(), b * ch * t);
    let (train, mut rng) = match mode {
        Mode::Train(r) => (true, Some(r)),
        Mode::Infer => (false, None),
    };
    cache.b = b;
    cache.x.clear();
    cache.x.extend_from_slice(x);

    // spatial projection, then temporal convolution
    resize(&mut cache.s, b * m * t);
    let ws = &p[l.spatial..l.spatial + m * ch];
    for i in 0..b {
        let xb = ArrayView2::from_shape((ch, t), &x[i * ch * t..(i + 1) * ch * t]).unwrap();
        matmul_acc(ws, (m, ch), xb, &mut cache.s[i * m * t..(i + 1) * m * t], (m, t));
    }
    let mut z = vec![0.0; b * m * t];
    for i in 0..b {
        for mm in 0..m {
            let f = mm / c.depth_multiplier;
            let o = (i * m + mm) * t;
            conv_same(&cache.s[o..o + t], &p[l.temporal + f * kt..l.temporal + (f + 1) * kt], &mut z[o..o + t]);
        }
    }

    resize(&mut cache.zhat2, b * m * t);
    resize(&mut cache.y2, b * m * t);
    let stats2 = (!train).then_some((&w.bn2_mean[..], &w.bn2_var[..]));
    bn_forward(
        &z,
        (b, m, t),
        &p[l.bn2_gamma..l.bn2_beta],
        &p[l.bn2_beta..l.separable],
        stats2,
        c.bn_eps,
        &mut cache.zhat2,
        &mut cache.y2,
        &mut cache.inv2,
        &mut cache.mean2,
        &mut cache.var2,
    );

    // ELU, pool1, dropout1
    resize(&mut cache.mask1, b * m * t1);
    resize(&mut cache.p1, b * m * t1);
    dropout_mask(&mut cache.mask1, c.dropout_p1, rng.as_deref_mut());
    for r in 0..b * m {
        for j in 0..t1 {
            let o = r * t + j * c.pool1;
            let s: f64 = cache.y2[o..o + c.pool1].iter().map(|&y| elu(y)).sum();
            cache.p1[r * t1 + j] = s / c.pool1 as f64 * cache.mask1[r * t1 + j];
        }
    }

    // separable: depthwise temporal, then pointwise
    resize(&mut cache.u, b * m * t1);
    for r in 0..b * m {
        let mm = r % m;
        conv_same(
            &cache.p1[r * t1..(r + 1) * t1],
            &p[l.separable + mm * ks..l.separable + (mm + 1) * ks],
            &mut cache.u[r * t1..(r + 1) * t1],
        );
    }
    let mut v = vec![0.0; b * f2 * t1];
    let wp = &p[l.pointwise..l.pointwise + f2 * m];
    for i in 0..b {
        let ub = ArrayView2::from_shape((m, t1), &cache.u[i * m * t1..(i + 1) * m * t1]).unwrap();
        matmul_acc(wp, (f2, m), ub, &mut v[i * f2 * t1..(i + 1) * f2 * t1], (f2, t1));
    }

    resize(&mut cache.zhat3, b * f2 * t1);
    resize(&mut cache.y3, b * f2 * t1);
    let stats3 = (!train).then_some((&w.bn3_mean[..], &w.bn3_var[..]));
    bn_forward(
        &v,
        (b, f2, t1),
        &p[l.bn3_gamma..l.bn3_beta],
        &p[l.bn3_beta..l.dense],
        stats3,
        c.bn_eps,
        &mut cache.zhat3,
        &mut cache.y3,
        &mut cache.inv3,
        &mut cache.mean3,
        &mut cache.var3,
    );

    // ELU, pool2, dropout2
    resize(&mut cache.mask2, b * nf);
    resize(&mut cache.h, b * nf);
    dropout_mask(&mut cache.mask2, c.dropout_p2, rng.as_deref_mut());
    for r in 0..b * f2 {
        for j in 0..t2 {
            let o = r * t1 + j * c.pool2;
            let s: f64 = cache.y3[o..o + c.pool2].iter().map(|&y| elu(y)).sum();
            cache.h[r * t2 + j] = s / c.pool2 as f64 * cache.mask2[r * t2 + j];
        }
    }

    // dense + softmax
    resize(&mut cache.probs, b * nc);
    let wd = &p[l.dense..l.bias];
    let bd = &p[l.bias..l.bias + nc];
    for i in 0..b {
        let h = &cache.h[i * nf..(i + 1) * nf];
        let out = &mut cache.probs[i * nc..(i + 1) * nc];
        for k in 0..nc {
            out[k] = bd[k] + wd[k * nf..(k + 1) * nf].iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
        let mx = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for o in out.iter_mut() {
            *o = (*o - mx).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }
}

/// Mean cross-entropy of the cached batch.
pub(crate) fn loss(cache: &Cache, labels: &[usize], n_classes: usize) -> f64 {
    labels.iter().enumerate().map(|(i, &y)| -cache.probs[i * n_classes + y].ln()).sum::<f64>() / labels.len() as f64
}

/// Gradient of the mean cross-entropy with respect to every parameter, for
/// a batch forwarded in training mode.
pub(crate) fn backward(w: &ModelWeights, cache: &Cache, labels: &[usize], grad: &mut [f64]) {
    let c = &w.config;
    let l = Layout::new(c);
    let p = &w.params;
    let b = cache.b;
    let (ch, t, m, f2) = (c.n_channels, c.n_samples, c.n_maps(), c.separable_filters);
    let (t1, t2, nf, nc) = (c.pooled1(), c.pooled2(), c.n_features(), c.n_classes);
    let (kt, ks) = (c.temporal_kernel_len, c.separable_kernel_len);
    grad.fill(0.0);

    // dense
    let mut dh = vec![0.0; b * nf];
    {
        let (head, tail) = grad.split_at_mut(l.bias);
        let dwd = &mut head[l.dense..];
        let dbd = &mut tail[..nc];
        let wd = &p[l.dense..l.bias];
        for i in 0..b {
            let h = &cache.h[i * nf..(i + 1) * nf];
            let dhi = &mut dh[i * nf..(i + 1) * nf];
            for k in 0..nc {
                let mut g = cache.probs[i * nc + k];
                if k == labels[i] {
                    g -= 1.0;
                }
                g /= b as f64;
                dbd[k] += g;
                for f in 0..nf {
                    dwd[k * nf + f] += g * h[f];
                    dhi[f] += g * wd[k * nf + f];
                }
            }
        }
    }

    // dropout2, pool2, ELU
    let mut dy3 = vec![0.0; b * f2 * t1];
    for r in 0..b * f2 {
        for j in 0..t2 {
            let g = dh[r * t2 + j] * cache.mask2[r * t2 + j] / c.pool2 as f64;
            let o = r * t1 + j * c.pool2;
            for q in o..o + c.pool2 {
                dy3[q] = g * elu_grad(cache.y3[q]);
            }
        }
    }
    let mut dv = vec![0.0; b * f2 * t1];
    {
        let (head, tail) = grad.split_at_mut(l.bn3_beta);
        bn_backward(
            &dy3,
            &cache.zhat3,
            (b, f2, t1),
            &p[l.bn3_gamma..l.bn3_beta],
            &cache.inv3,
            &mut head[l.bn3_gamma..],
            &mut tail[..f2],
            &mut dv,
        );
    }

    // pointwise
    let mut du = vec![0.0; b * m * t1];
    let wp = ArrayView2::from_shape((f2, m), &p[l.pointwise..l.pointwise + f2 * m]).unwrap();
    for i in 0..b {
        let dvb = &dv[i * f2 * t1..(i + 1) * f2 * t1];
        let ub = ArrayView2::from_shape((m, t1), &cache.u[i * m * t1..(i + 1) * m * t1]).unwrap();
        matmul_acc(dvb, (f2, t1), ub.t(), &mut grad[l.pointwise..l.pointwise + f2 * m], (f2, m));
        let dvv = ArrayView2::from_shape((f2, t1), dvb).unwrap();
        let mut dub = ArrayViewMut2::from_shape((m, t1), &mut du[i * m * t1..(i + 1) * m * t1]).unwrap();
        general_mat_mul(1.0, &wp.t(), &dvv, 0.0, &mut dub);
    }

    // depthwise separable kernel
    let mut dp1 = vec![0.0; b * m * t1];
    for r in 0..b * m {
        let mm = r % m;
        let ws = &p[l.separable + mm * ks..l.separable + (mm + 1) * ks];
        conv_same_back(
            &cache.p1[r * t1..(r + 1) * t1],
            ws,
            &du[r * t1..(r + 1) * t1],
            &mut grad[l.separable + mm * ks..l.separable + (mm + 1) * ks],
            &mut dp1[r * t1..(r + 1) * t1],
        );
    }

    // dropout1, pool1, ELU
    let mut dy2 = vec![0.0; b * m * t];
    for r in 0..b * m {
        for j in 0..t1 {
            let g = dp1[r * t1 + j] * cache.mask1[r * t1 + j] / c.pool1 as f64;
            let o = r * t + j * c.pool1;
            for q in o..o + c.pool1 {
                dy2[q] = g * elu_grad(cache.y2[q]);
            }
        }
    }
    let mut dz = vec![0.0; b * m * t];
    {
        let (head, tail) = grad.split_at_mut(l.bn2_beta);
        bn_backward(
            &dy2,
            &cache.zhat2,
            (b, m, t),
            &p[l.bn2_gamma..l.bn2_beta],
            &cache.inv2,
            &mut head[l.bn2_gamma..],
            &mut tail[..m],
            &mut dz,
        );
    }

    // temporal convolution
    let mut ds = vec![0.0; b * m * t];
    for i in 0..b {
        for mm in 0..m {
            let f = mm / c.depth_multiplier;
            let o = (i * m + mm) * t;
            conv_same_back(
                &cache.s[o..o + t],
                &p[l.temporal + f * kt..l.temporal + (f + 1) * kt],
                &dz[o..o + t],
                &mut grad[l.temporal + f * kt..l.temporal + (f + 1) * kt],
                &mut ds[o..o + t],
            );
        }
    }

    // spatial projection
    for i in 0..b {
        let xb = ArrayView2::from_shape((ch, t), &cache.x[i * ch * t..(i + 1) * ch * t]).unwrap();
        matmul_acc(&ds[i * m * t..(i + 1) * m * t], (m, t), xb.t(), &mut grad[l.spatial..l.spatial + m * ch], (m, ch));
    }
}

/// Moves the running statistics toward the last training batch.
pub(crate) fn update_running_stats(w: &mut ModelWeights, cache: &Cache) {
    let c = w.config;
    let mom = c.bn_momentum;
    let n2 = (cache.b * c.n_samples) as f64;
    let n3 = (cache.b * c.pooled1()) as f64;
    let upd = |run_m: &mut [f64], run_v: &mut [f64], m: &[f64], v: &[f64], n: f64| {
        let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
        for k in 0..run_m.len() {
            run_m[k] = (1.0 - mom) * run_m[k] + mom * m[k];
            run_v[k] = (1.0 - mom) * run_v[k] + mom * v[k] * unbias;
        }
    };
    upd(&mut w.bn2_mean, &mut w.bn2_var, &cache.mean2, &cache.var2, n2);
    upd(&mut w.bn3_mean, &mut w.bn3_var, &cache.mean3, &cache.var3, n3);
}

