//! Linear multi-label classifier trained with binary cross-entropy over fixed
//! feature vectors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::labels::{read_labels, write_labels, MultiHotLabel};

const FEATURE_MAGIC: &[u8; 8] = b"CATFEA01";

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_pair(logits: &[f64], target: &[f64]) -> Result<()> {
    if logits.len() != target.len() {
        return Err(Error::Dimension(format!("{} logits, {} targets", logits.len(), target.len())));
    }
    if logits.is_empty() {
        return Err(Error::Dimension("no classes".into()));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("logit"));
    }
    if target.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("target"));
    }
    Ok(())
}

/// Mean over classes of the sigmoid cross-entropy, in the stable form
/// `max(z, 0) - z*y + ln(1 + exp(-|z|))`.
pub fn bce_with_logits(logits: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(logits, target)?;
    let sum: f64 = logits
        .iter()
        .zip(target)
        .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
        .sum();
    Ok(sum / logits.len() as f64)
}

/// Gradient of [`bce_with_logits`]: `(sigmoid(z) - y) / K`.
pub fn bce_grad(logits: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_pair(logits, target)?;
    let k = logits.len() as f64;
    Ok(logits.iter().zip(target).map(|(&z, &y)| (sigmoid(z) - y) / k).collect())
}

pub fn write_features(path: impl AsRef<Path>, n: usize, d: usize, values: &[f32]) -> Result<()> {
    let path = path.as_ref();
    if values.len() != n * d {
        return Err(Error::Dimension(format!("{} values for {n}x{d} features", values.len())));
    }
    let mut out = Vec::with_capacity(24 + 4 * values.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Returns `(n, d, values)`.
pub fn read_features(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::malformed(&file, 0, "features", m);
    if bytes.len() < 24 || &bytes[..8] != FEATURE_MAGIC {
        return Err(bad("missing CATFEA01 header".into()));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .and_then(|x| x.checked_add(24))
        .ok_or_else(|| bad(format!("implausible shape {n}x{d}")))?;
    if bytes.len() as u64 != expected {
        return Err(bad(format!("{} bytes, expected {expected}", bytes.len())));
    }
    let values = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((n as usize, d as usize, values))
}

/// `n` feature rows of width `d` with one multi-hot label each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    dim: usize,
    classes: usize,
    features: Vec<f32>,
    labels: Vec<MultiHotLabel>,
}

impl FeatureDataset {
    pub fn new(dim: usize, classes: usize, features: Vec<f32>, labels: Vec<MultiHotLabel>) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::Dimension(format!(
                "{} feature values for {} samples of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
        for l in &labels {
            if l.class_indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("{}: labels not strictly increasing", l.sample_id)));
            }
            if let Some(&c) = l.class_indices.iter().find(|&&c| c as usize >= classes) {
                return Err(Error::Dimension(format!("{}: label {c} out of range for {classes} classes", l.sample_id)));
            }
        }
        Ok(FeatureDataset {
            dim,
            classes,
            features,
            labels,
        })
    }

    pub fn load(features: impl AsRef<Path>, labels: impl AsRef<Path>, classes: usize) -> Result<Self> {
        let (n, d, values) = read_features(features)?;
        let labels = read_labels(labels, Some(classes))?;
        if labels.len() != n {
            return Err(Error::Dimension(format!("{n} feature rows but {} labels", labels.len())));
        }
        Self::new(d, classes, values, labels)
    }

    pub fn save(&self, features: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
        write_features(features, self.len(), self.dim, &self.features)?;
        write_labels(labels, &self.labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[MultiHotLabel] {
        &self.labels
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        FeatureDataset {
            dim: self.dim,
            classes: self.classes,
            features: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    classes: usize,
    dim: usize,
    /// Row-major `classes x dim`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LinearHead {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearHead {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    /// Weights from the matrix rows, zero bias.
    pub fn from_embedding(m: &EmbeddingMatrix) -> Self {
        LinearHead {
            classes: m.rows(),
            dim: m.dim(),
            weights: m.values().to_vec(),
            bias: vec![0.0; m.rows()],
        }
    }

    pub fn to_embedding(&self, provenance: [u8; 32]) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.classes, self.dim, self.weights.clone(), provenance)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f64> {
        (0..self.classes)
            .map(|k| {
                let w = &self.weights[k * self.dim..(k + 1) * self.dim];
                self.bias[k] as f64 + w.iter().zip(x).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>()
            })
            .collect()
    }

    fn check(&self, data: &FeatureDataset) -> Result<()> {
        if self.dim != data.dim || self.classes != data.classes {
            return Err(Error::Dimension(format!(
                "head is {}x{}, data has {} classes of width {}",
                self.classes, self.dim, data.classes, data.dim
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head parameter"));
        }
        Ok(())
    }
}

/// What to do with samples that have no active class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyLabelPolicy {
    #[default]
    Skip,
    AllNegative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Decoupled: each step shrinks weights (not biases) by `lr * wd`.
    pub weight_decay: f64,
    pub seed: u64,
    pub empty_labels: EmptyLabelPolicy,
    /// Gradient shards per batch. 1 is the sequential reference; more
    /// shards only change the summation order.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 2.0,
            weight_decay: 0.0,
            seed: 0,
            empty_labels: EmptyLabelPolicy::Skip,
            threads: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight decay {}", self.weight_decay)));
        }
        if self.threads == 0 {
            return Err(Error::InvalidArgument("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: LinearHead,
    /// Mean loss over the training samples before training and after every
    /// epoch (`epochs + 1` entries).
    pub losses: Vec<f64>,
}

fn dense_target(label: &MultiHotLabel, k: usize) -> Vec<f64> {
    label.dense(k)
}

/// Mean loss of `head` over the given samples.
pub fn mean_loss(head: &LinearHead, data: &FeatureDataset, samples: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &i in samples {
        total += bce_with_logits(&head.logits(data.row(i)), &dense_target(&data.labels[i], data.classes))?;
    }
    Ok(total / samples.len() as f64)
}

/// Sum over `samples` of per-sample gradients: `(dW, db)` in f64.
fn gradient_sum(head: &LinearHead, data: &FeatureDataset, samples: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let (k, d) = (head.classes, head.dim);
    let mut gw = vec![0f64; k * d];
    let mut gb = vec![0f64; k];
    for &i in samples {
        let x = data.row(i);
        let z = head.logits(x);
        let mut g: Vec<f64> = z.iter().map(|&z| sigmoid(z) / k as f64).collect();
        for &c in &data.labels[i].class_indices {
            g[c as usize] -= 1.0 / k as f64;
        }
        for (c, &gc) in g.iter().enumerate() {
            gb[c] += gc;
            for (w, &xv) in gw[c * d..(c + 1) * d].iter_mut().zip(x) {
                *w += gc * xv as f64;
            }
        }
    }
    (gw, gb)
}

/// Mini-batch gradient descent from `init`. Deterministic given the config:
/// one seeded generator shuffles the samples every epoch and gradients are
/// reduced in a fixed order.
pub fn train_linear(data: &FeatureDataset, init: &LinearHead, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    init.check(data)?;
    let mut samples: Vec<usize> = (0..data.len())
        .filter(|&i| cfg.empty_labels == EmptyLabelPolicy::AllNegative || !data.labels[i].is_empty())
        .collect();
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut head = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = vec![mean_loss(&head, data, &samples)?];
    let diverged = |epoch: usize, loss: f64| Error::Diverged { epoch, loss };
    for epoch in 1..=cfg.epochs {
        samples.shuffle(&mut rng);
        for batch in samples.chunks(cfg.batch_size) {
            let (gw, gb) = match &pool {
                None => gradient_sum(&head, data, batch),
                Some(pool) => {
                    let shard = batch.len().div_ceil(cfg.threads);
                    let parts: Vec<(Vec<f64>, Vec<f64>)> =
                        pool.install(|| batch.par_chunks(shard).map(|s| gradient_sum(&head, data, s)).collect());
                    let mut it = parts.into_iter();
                    let (mut gw, mut gb) = it.next().expect("non-empty batch");
                    for (w, b) in it {
                        gw.iter_mut().zip(w).for_each(|(a, v)| *a += v);
                        gb.iter_mut().zip(b).for_each(|(a, v)| *a += v);
                    }
                    (gw, gb)
                }
            };
            let step = cfg.learning_rate / batch.len() as f64;
            let shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
            for (w, g) in head.weights.iter_mut().zip(&gw) {
                *w = (*w as f64 * shrink - step * g) as f32;
            }
            for (b, g) in head.bias.iter_mut().zip(&gb) {
                *b = (*b as f64 - step * g) as f32;
            }
        }
        if head.weights.iter().chain(&head.bias).any(|v| !v.is_finite()) {
            return Err(diverged(epoch, f64::NAN));
        }
        let loss = mean_loss(&head, data, &samples).map_err(|_| diverged(epoch, f64::NAN))?;
        if !loss.is_finite() {
            return Err(diverged(epoch, loss));
        }
        losses.push(loss);
    }
    Ok(TrainOutcome { head, losses })
}

/// Average precision of one class: mean of precision at the rank of every
/// positive, ranking by descending score with ties broken by ascending
/// sample index. `None` without positives.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let total = positive.iter().filter(|&&p| p).count();
    if total == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Per class; `None` for classes without positives.
    pub average_precision: Vec<Option<f64>>,
    /// Mean over classes with positives.
    pub mean_ap: Option<f64>,
    /// Top-1 accuracy in [0, 1] over single-label samples.
    pub top1: Option<f64>,
    pub single_label_samples: usize,
}

impl Metrics {
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.6}"));
        let mut s = String::from("metric\tvalue\n");
        let _ = writeln!(s, "mean_ap\t{}", opt(self.mean_ap));
        let _ = writeln!(s, "top1\t{}", opt(self.top1));
        let _ = writeln!(s, "single_label_samples\t{}", self.single_label_samples);
        for (k, ap) in self.average_precision.iter().enumerate() {
            let _ = writeln!(s, "ap_{k}\t{}", opt(*ap));
        }
        s
    }
}

pub fn evaluate(head: &LinearHead, data: &FeatureDataset) -> Result<Metrics> {
    head.check(data)?;
    let k = head.classes;
    let scores: Vec<Vec<f64>> = (0..data.len()).map(|i| head.logits(data.row(i))).collect();
    let mut aps = Vec::with_capacity(k);
    for c in 0..k {
        let s: Vec<f64> = scores.iter().map(|z| z[c]).collect();
        let pos: Vec<bool> = data.labels.iter().map(|l| l.class_indices.binary_search(&(c as u32)).is_ok()).collect();
        aps.push(average_precision(&s, &pos));
    }
    let present: Vec<f64> = aps.iter().flatten().copied().collect();
    let mean_ap = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    let mut single = 0usize;
    let mut correct = 0usize;
    for (z, l) in scores.iter().zip(&data.labels) {
        if let [c] = l.class_indices[..] {
            single += 1;
            let best = (0..k).fold(0, |b, j| if z[j] > z[b] { j } else { b });
            correct += (best == c as usize) as usize;
        }
    }
    Ok(Metrics {
        average_precision: aps,
        mean_ap,
        top1: (single > 0).then(|| correct as f64 / single as f64),
        single_label_samples: single,
    })
}
