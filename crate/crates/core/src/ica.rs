//! FastICA (tanh contrast, symmetric decorrelation) for artifact handling.
//!
//! Fitting centers the channels, whitens onto the top-`k` principal
//! directions, then runs the symmetric fixed-point iteration from a seeded
//! random orthogonal start. Components are returned ordered by the variance
//! they explain in channel space (largest first), with each mixing column's
//! largest-magnitude entry made positive.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::Recording;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a direction counts as null.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig { tol: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaModel {
    /// `[k, n_channels]`
    pub whitening: Array2<f64>,
    /// `[k, k]`, orthonormal rows.
    pub unmixing: Array2<f64>,
    /// `[n_channels, k]`
    pub mixing: Array2<f64>,
    pub channel_means: Array1<f64>,
    pub channel_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    format: String,
    channel_names: Vec<String>,
    n_components: usize,
    converged: bool,
    iterations: usize,
    channel_means: Vec<f64>,
    whitening: Vec<Vec<f64>>,
    unmixing: Vec<Vec<f64>>,
    mixing: Vec<Vec<f64>>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(r: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let n = r.len();
    let m = r.first().map_or(0, Vec::len);
    if r.iter().any(|x| x.len() != m) {
        return Err(Error::ModelFormat(format!("ragged {what} matrix")));
    }
    Array2::from_shape_vec((n, m), r.concat()).map_err(|e| Error::ModelFormat(e.to_string()))
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
fn sorted_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_na(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Array2::from_shape_fn((a.nrows(), order.len()), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `(W W^T)^{-1/2} W`
fn symmetric_decorrelation(w: &Array2<f64>) -> Array2<f64> {
    let (vals, vecs) = sorted_eigen(&w.dot(&w.t()));
    let inv_sqrt = Array2::from_diag(&Array1::from_iter(vals.iter().map(|&v| 1.0 / v.max(1e-300).sqrt())));
    vecs.dot(&inv_sqrt).dot(&vecs.t()).dot(w)
}

impl IcaModel {
    pub fn n_components(&self) -> usize {
        self.unmixing.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_means.len()
    }

    fn check_recording(&self, rec: &Recording) -> Result<()> {
        if rec.channel_names() != &self.channel_names[..] {
            return Err(Error::ShapeMismatch(format!(
                "recording channels {:?} differ from the model's {:?}",
                rec.channel_names(),
                self.channel_names
            )));
        }
        Ok(())
    }

    fn centered(&self, rec: &Recording) -> Array2<f64> {
        let mut x = rec.to_f64();
        for (mut row, m) in x.axis_iter_mut(Axis(0)).zip(self.channel_means.iter()) {
            row -= *m;
        }
        x
    }

    /// Full `[k, n_channels]` unmixing from channel space.
    pub fn spatial_filters(&self) -> Array2<f64> {
        self.unmixing.dot(&self.whitening)
    }

    fn source_matrix(&self, rec: &Recording) -> Result<Array2<f64>> {
        self.check_recording(rec)?;
        Ok(self.spatial_filters().dot(&self.centered(rec)))
    }

    /// Component time courses `unmixing · whitening · (x - means)`.
    pub fn sources(&self, rec: &Recording) -> Result<Recording> {
        let s = self.source_matrix(rec)?;
        let names = (0..self.n_components()).map(|i| format!("IC{i:03}")).collect();
        Recording::new(
            format!("{}-sources", rec.name()),
            names,
            rec.sample_rate_hz(),
            rec.start_time_s(),
            rec.clock_domain(),
            s.mapv(|v| v as f32),
        )
    }

    /// Channel-space signal rebuilt from the `keep` components plus the
    /// channel means.
    pub fn reconstruct(&self, rec: &Recording, keep: &[usize]) -> Result<Recording> {
        let k = self.n_components();
        if let Some(&bad) = keep.iter().find(|&&i| i >= k) {
            return Err(Error::ComponentOutOfRange { index: bad, k });
        }
        let s = self.source_matrix(rec)?;
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut x = if keep.is_empty() {
            Array2::<f64>::zeros((self.n_channels(), rec.n_samples()))
        } else {
            let a = self.mixing.select(Axis(1), &keep);
            let sk = s.select(Axis(0), &keep);
            a.dot(&sk)
        };
        for (mut row, m) in x.axis_iter_mut(Axis(0)).zip(self.channel_means.iter()) {
            row += *m;
        }
        rec.with_samples(x.mapv(|v| v as f32))
    }

    /// Reconstruction with the `reject` components removed.
    pub fn reject(&self, rec: &Recording, reject: &[usize]) -> Result<Recording> {
        let k = self.n_components();
        if let Some(&bad) = reject.iter().find(|&&i| i >= k) {
            return Err(Error::ComponentOutOfRange { index: bad, k });
        }
        let keep: Vec<usize> = (0..k).filter(|i| !reject.contains(i)).collect();
        self.reconstruct(rec, &keep)
    }

    /// Component indices ordered by `|corr(source, template)|`, descending;
    /// equal scores keep index order.
    pub fn rank_components_by_template(&self, rec: &Recording, template: &[f64]) -> Result<Vec<usize>> {
        Ok(self.template_scores(rec, template)?.into_iter().map(|(i, _)| i).collect())
    }

    /// `(index, |correlation|)` pairs in ranked order.
    pub fn template_scores(&self, rec: &Recording, template: &[f64]) -> Result<Vec<(usize, f64)>> {
        if template.len() != rec.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "template has {} samples, recording {}",
                template.len(),
                rec.n_samples()
            )));
        }
        let t_mean = template.iter().sum::<f64>() / template.len() as f64;
        let t_c: Vec<f64> = template.iter().map(|v| v - t_mean).collect();
        let t_norm = t_c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(t_norm > 0.0) || !t_norm.is_finite() {
            return Err(Error::DegenerateTemplate("template has zero variance".into()));
        }
        let s = self.source_matrix(rec)?;
        let mut scores: Vec<(usize, f64)> = s
            .outer_iter()
            .enumerate()
            .map(|(i, row)| {
                let m = row.sum() / row.len() as f64;
                let (mut dot, mut nn) = (0.0, 0.0);
                for (a, b) in row.iter().zip(&t_c) {
                    dot += (a - m) * b;
                    nn += (a - m) * (a - m);
                }
                let c = if nn > 0.0 { (dot / (nn.sqrt() * t_norm)).abs() } else { 0.0 };
                (i, c)
            })
            .collect();
        scores.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scores)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let stored = StoredModel {
            format: "hwdecode-ica-1".into(),
            channel_names: self.channel_names.clone(),
            n_components: self.n_components(),
            converged: self.converged,
            iterations: self.iterations,
            channel_means: self.channel_means.to_vec(),
            whitening: rows(&self.whitening),
            unmixing: rows(&self.unmixing),
            mixing: rows(&self.mixing),
        };
        let text = serde_json::to_string_pretty(&stored).expect("model serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: StoredModel = serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if s.format != "hwdecode-ica-1" {
            return Err(Error::ModelFormat(format!("unknown ICA format {:?}", s.format)));
        }
        let m = IcaModel {
            whitening: from_rows(&s.whitening, "whitening")?,
            unmixing: from_rows(&s.unmixing, "unmixing")?,
            mixing: from_rows(&s.mixing, "mixing")?,
            channel_means: Array1::from(s.channel_means),
            channel_names: s.channel_names,
            converged: s.converged,
            iterations: s.iterations,
        };
        let (n, k) = (m.channel_names.len(), s.n_components);
        if m.whitening.dim() != (k, n) || m.unmixing.dim() != (k, k) || m.mixing.dim() != (n, k) {
            return Err(Error::ModelFormat("matrix shapes inconsistent with header".into()));
        }
        Ok(m)
    }
}

pub fn fit_ica(rec: &Recording, k: usize, seed: u64) -> Result<IcaModel> {
    fit_ica_with(rec, k, seed, &IcaConfig::default())
}

pub fn fit_ica_with(rec: &Recording, k: usize, seed: u64, cfg: &IcaConfig) -> Result<IcaModel> {
    let n = rec.n_channels();
    let t = rec.n_samples();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k={k} must be in 1..={n}")));
    }
    if t < 10 * n {
        return Err(Error::InsufficientData(format!("{t} samples for {n} channels; need at least {}", 10 * n)));
    }

    let mut x = rec.to_f64();
    let means = x.mean_axis(Axis(1)).expect("nonempty");
    for (mut row, m) in x.axis_iter_mut(Axis(0)).zip(means.iter()) {
        row -= *m;
    }
    let cov = x.dot(&x.t()) / t as f64;
    let (vals, vecs) = sorted_eigen(&cov);
    let max = vals[0].max(0.0);
    if !(max > 0.0) || vals[k - 1] < RANK_TOL * max {
        let mut null_channels = Vec::new();
        for (j, &v) in vals.iter().enumerate() {
            if v < RANK_TOL * max || max <= 0.0 {
                for c in 0..n {
                    if vecs[[c, j]].abs() > 0.1 && !null_channels.contains(&rec.channel_names()[c]) {
                        null_channels.push(rec.channel_names()[c].clone());
                    }
                }
            }
        }
        return Err(Error::RankDeficient { channels: null_channels });
    }

    // whitening: D^{-1/2} E^T over the top-k directions
    let mut whitening = Array2::<f64>::zeros((k, n));
    let mut dewhitening = Array2::<f64>::zeros((n, k));
    for j in 0..k {
        let s = vals[j].sqrt();
        for c in 0..n {
            whitening[[j, c]] = vecs[[c, j]] / s;
            dewhitening[[c, j]] = vecs[[c, j]] * s;
        }
    }
    let z = whitening.dot(&x);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = Array2::from_shape_simple_fn((k, k), || StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&w0);
    let mut converged = false;
    let mut iterations = 0;
    let inv_t = 1.0 / t as f64;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut g = w.dot(&z);
        let mut gp_mean = vec![0.0; k];
        for (mut row, gp) in g.axis_iter_mut(Axis(0)).zip(gp_mean.iter_mut()) {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                let th = v.tanh();
                *v = th;
                acc += 1.0 - th * th;
            }
            *gp = acc * inv_t;
        }
        let mut w_new = g.dot(&z.t()) * inv_t;
        for i in 0..k {
            for j in 0..k {
                w_new[[i, j]] -= gp_mean[i] * w[[i, j]];
            }
        }
        let w_new = symmetric_decorrelation(&w_new);
        let lim = (0..k)
            .map(|i| {
                let d: f64 = w_new.row(i).dot(&w.row(i));
                (d.abs() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        w = w_new;
        if lim < cfg.tol {
            converged = true;
            break;
        }
    }

    // mixing = E D^{1/2} W^T (W orthonormal)
    let mixing = dewhitening.dot(&w.t());
    let mut order: Vec<usize> = (0..k).collect();
    let power: Vec<f64> = (0..k).map(|i| mixing.column(i).iter().map(|v| v * v).sum()).collect();
    order.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    let mut unmixing = w.select(Axis(0), &order);
    let mut mixing = mixing.select(Axis(1), &order);
    for i in 0..k {
        let col = mixing.column(i);
        let peak = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if peak < 0.0 {
            mixing.column_mut(i).mapv_inplace(|v| -v);
            unmixing.row_mut(i).mapv_inplace(|v| -v);
        }
    }

    Ok(IcaModel {
        whitening,
        unmixing,
        mixing,
        channel_means: means,
        channel_names: rec.channel_names().to_vec(),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn laplace_sources(k: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((k, t), || {
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).max(1e-300).ln()
        })
    }

    fn rec_from(x: &Array2<f64>) -> Recording {
        let names = (0..x.nrows()).map(|i| format!("C{i}")).collect();
        Recording::new("x", names, 100.0, 0.0, "amp", x.mapv(|v| v as f32)).unwrap()
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let (mut d, mut na, mut nb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            d += (x - ma) * (y - mb);
            na += (x - ma).powi(2);
            nb += (y - mb).powi(2);
        }
        d / (na * nb).sqrt()
    }

    #[test]
    fn identity_mixing_recovers_sources() {
        let s = laplace_sources(3, 20_000, 1);
        let rec = rec_from(&s);
        let m = fit_ica(&rec, 3, 7).unwrap();
        assert!(m.converged);
        let est = m.sources(&rec).unwrap().to_f64();
        for src in s.outer_iter() {
            let best = est
                .outer_iter()
                .map(|e| corr(src.as_slice().unwrap(), e.as_slice().unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(best > 0.999, "best {best}");
        }
    }

    #[test]
    fn unmixing_rows_are_orthonormal() {
        let s = laplace_sources(4, 2000, 2);
        let m = fit_ica(&rec_from(&s), 4, 0).unwrap();
        let g = m.unmixing.dot(&m.unmixing.t());
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn duplicated_channel_is_rank_deficient() {
        let mut s = laplace_sources(3, 1000, 3);
        let c0 = s.row(0).to_owned();
        s.row_mut(2).assign(&c0);
        let err = fit_ica(&rec_from(&s), 3, 0).unwrap_err();
        match err {
            Error::RankDeficient { channels } => {
                assert!(channels.contains(&"C0".to_string()) && channels.contains(&"C2".to_string()));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn keep_none_gives_channel_means() {
        let mut s = laplace_sources(3, 1000, 4);
        s.row_mut(1).mapv_inplace(|v| v + 5.0);
        let rec = rec_from(&s);
        let m = fit_ica(&rec, 3, 0).unwrap();
        let out = m.reconstruct(&rec, &[]).unwrap();
        for (row, mean) in out.samples().outer_iter().zip(m.channel_means.iter()) {
            assert!(row.iter().all(|&v| (f64::from(v) - mean).abs() < 1e-5));
        }
        assert!(matches!(m.reconstruct(&rec, &[3]), Err(Error::ComponentOutOfRange { index: 3, k: 3 })));
    }

    #[test]
    fn fit_is_deterministic_in_seed() {
        let s = laplace_sources(3, 1000, 5);
        let rec = rec_from(&s);
        assert_eq!(fit_ica(&rec, 3, 11).unwrap(), fit_ica(&rec, 3, 11).unwrap());
    }

    #[test]
    fn zero_template_is_degenerate_and_ties_keep_index_order() {
        let s = laplace_sources(3, 1000, 6);
        let rec = rec_from(&s);
        let m = fit_ica(&rec, 3, 0).unwrap();
        assert!(matches!(
            m.rank_components_by_template(&rec, &vec![0.0; 1000]),
            Err(Error::DegenerateTemplate(_))
        ));
        // a model whose components are all identical scores ties
        let mut tied = m.clone();
        let r0 = tied.unmixing.row(0).to_owned();
        for i in 1..3 {
            tied.unmixing.row_mut(i).assign(&r0);
        }
        let tpl: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(tied.rank_components_by_template(&rec, &tpl).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn model_file_round_trip() {
        let s = laplace_sources(3, 1000, 8);
        let m = fit_ica(&rec_from(&s), 2, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ica.json");
        m.write(&p).unwrap();
        assert_eq!(IcaModel::read(&p).unwrap(), m);
    }
}
