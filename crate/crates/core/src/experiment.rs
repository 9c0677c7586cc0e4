//! Linear probes initialized from a pre-trained head versus randomly, over
//! growing fractions of the probe training data.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::benchmark::Benchmark;
use crate::caption::Extractor;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::overlap::DownstreamLabelSet;
use crate::trainer::{evaluate, train_linear, FeatureDataset, LinearHead, TrainConfig};
use crate::transfer::{build_transfer_plan, materialize, random_rows, TransferPlan, DEFAULT_ALPHA, DEFAULT_RANDOM_SCALE};

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub fractions: Vec<f64>,
    pub seeds: usize,
    pub pretrain: TrainConfig,
    pub probe: TrainConfig,
    pub alpha: f64,
    pub random_scale: f32,
    /// Parallel probe runs; results do not depend on it.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            seeds: 5,
            pretrain: TrainConfig::default(),
            probe: TrainConfig::default(),
            alpha: DEFAULT_ALPHA,
            random_scale: DEFAULT_RANDOM_SCALE,
            jobs: 1,
        }
    }
}

/// Top-1 accuracies (in points) of both arms at one data fraction, one entry
/// per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub fraction: f64,
    pub train_samples: usize,
    pub transfer: Vec<f64>,
    pub random: Vec<f64>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Cell {
    pub fn transfer_stats(&self) -> (f64, f64) {
        mean_sd(&self.transfer)
    }

    pub fn random_stats(&self) -> (f64, f64) {
        mean_sd(&self.random)
    }

    /// Mean transfer minus mean random accuracy.
    pub fn gap(&self) -> f64 {
        self.transfer_stats().0 - self.random_stats().0
    }

    /// Standard error of [`gap`](Self::gap).
    pub fn gap_se(&self) -> f64 {
        let (_, st) = self.transfer_stats();
        let (_, sr) = self.random_stats();
        (st * st / self.transfer.len() as f64 + sr * sr / self.random.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Sorted by ascending fraction.
    pub cells: Vec<Cell>,
    pub plan: TransferPlan,
    pub pretrain_losses: Vec<f64>,
}

impl ExperimentReport {
    /// Transfer arm at least as good as the random arm at the smallest
    /// fraction.
    pub fn transfer_wins_smallest(&self) -> bool {
        self.cells.first().is_some_and(|c| c.gap() >= 0.0)
    }

    /// Whether each step toward larger fractions keeps the gap from growing
    /// beyond noise: `gap[i+1] <= gap[i] + max(1, 2 * se)` with `se` the
    /// combined standard error of the two gaps.
    pub fn gap_steps(&self) -> Vec<bool> {
        self.cells
            .windows(2)
            .map(|w| {
                let se = (w[0].gap_se().powi(2) + w[1].gap_se().powi(2)).sqrt();
                w[1].gap() <= w[0].gap() + (2.0 * se).max(1.0)
            })
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("fraction\ttrain_samples\ttransfer_mean\ttransfer_sd\trandom_mean\trandom_sd\tgap\tgap_se\n");
        for c in &self.cells {
            let (tm, ts) = c.transfer_stats();
            let (rm, rs) = c.random_stats();
            let _ = writeln!(
                s,
                "{}\t{}\t{tm:.3}\t{ts:.3}\t{rm:.3}\t{rs:.3}\t{:.3}\t{:.3}",
                c.fraction,
                c.train_samples,
                c.gap(),
                c.gap_se()
            );
        }
        s
    }

    /// One row per (fraction, seed, arm).
    pub fn runs_tsv(&self) -> String {
        let mut s = String::from("fraction\tseed\tarm\ttop1\n");
        for c in &self.cells {
            for (arm, vals) in [("transfer", &c.transfer), ("random", &c.random)] {
                for (seed, v) in vals.iter().enumerate() {
                    let _ = writeln!(s, "{}\t{seed}\t{arm}\t{v:.3}", c.fraction);
                }
            }
        }
        s
    }
}

/// Per class, a seeded shuffle of that class's samples truncated to
/// `max(1, round(fraction * n_c))`. Returned in ascending index order.
/// Samples are grouped by their first label.
pub fn stratified_subset(data: &FeatureDataset, fraction: f64, seed: u64) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.classes()];
    for (i, l) in data.labels().iter().enumerate() {
        if let Some(&c) = l.class_indices.first() {
            by_class[c as usize].push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for mut members in by_class {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len());
        out.extend_from_slice(&members[..take]);
    }
    out.sort_unstable();
    out
}

fn top1_points(head: &LinearHead, data: &FeatureDataset) -> Result<f64> {
    Ok(100.0 * evaluate(head, data)?.top1.unwrap_or(0.0))
}

/// Pre-trains a head on the benchmark's pre-training split, maps the probe
/// labels onto it, then trains and scores both initializations for every
/// fraction and seed. Seed `s` drives the subset, the random rows and the
/// probe shuffle of run `s` in both arms.
pub fn transfer_vs_random(bench: &Benchmark, ex: &Extractor<'_>, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    bench.vocab.check_provenance(ex.db().version(), ex.stopwords().hash())?;
    if cfg.seeds == 0 {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let mut fractions = cfg.fractions.clone();
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidArgument(format!("fractions must lie in (0, 1]: {fractions:?}")));
    }
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();

    let downstream = DownstreamLabelSet::resolve(&bench.probe_labels, ex);
    let unresolved: Vec<String> = downstream.unresolved().into_iter().map(String::from).collect();
    if !unresolved.is_empty() {
        return Err(Error::Unresolved(unresolved));
    }
    let plan = build_transfer_plan(&downstream, &bench.vocab, ex.db(), cfg.alpha)?;

    let init = LinearHead::zeros(bench.vocab.len(), bench.pretrain.dim());
    let pre = train_linear(&bench.pretrain, &init, &cfg.pretrain)?;
    let pretrained: EmbeddingMatrix = pre.head.to_embedding(bench.vocab.hash())?;

    let probe_k = bench.probe_labels.len();
    let dim = bench.probe_train.dim();
    let jobs: Vec<(usize, u64)> = (0..fractions.len())
        .flat_map(|f| (0..cfg.seeds as u64).map(move |s| (f, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<(usize, f64, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(f, seed)| {
                let subset = stratified_subset(&bench.probe_train, fractions[f], seed);
                let train = bench.probe_train.subset(&subset);
                let probe_cfg = TrainConfig { seed, ..cfg.probe.clone() };

                let transfer_init = LinearHead::from_embedding(&materialize(&plan, &pretrained, seed, cfg.random_scale)?);
                let t = train_linear(&train, &transfer_init, &probe_cfg)?;
                let random_matrix = EmbeddingMatrix::new(probe_k, dim, random_rows(probe_k, dim, seed, cfg.random_scale), [0; 32])?;
                let r = train_linear(&train, &LinearHead::from_embedding(&random_matrix), &probe_cfg)?;
                Ok((
                    subset.len(),
                    top1_points(&t.head, &bench.probe_test)?,
                    top1_points(&r.head, &bench.probe_test)?,
                ))
            })
            .collect::<Result<_>>()
    })?;

    let cells = fractions
        .iter()
        .enumerate()
        .map(|(f, &fraction)| {
            let runs = &results[f * cfg.seeds..(f + 1) * cfg.seeds];
            Cell {
                fraction,
                train_samples: runs[0].0,
                transfer: runs.iter().map(|r| r.1).collect(),
                random: runs.iter().map(|r| r.2).collect(),
            }
        })
        .collect();
    Ok(ExperimentReport {
        cells,
        plan,
        pretrain_losses: pre.losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::MultiHotLabel;

    fn data(per_class: &[usize]) -> FeatureDataset {
        let mut labels = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for _ in 0..n {
                labels.push(MultiHotLabel {
                    sample_id: labels.len().to_string(),
                    class_indices: vec![c as u32],
                });
            }
        }
        let n = labels.len();
        FeatureDataset::new(1, per_class.len(), vec![0.0; n], labels).unwrap()
    }

    #[test]
    fn stratified_keeps_every_class() {
        let d = data(&[100, 3, 10]);
        let s = stratified_subset(&d, 0.01, 1);
        assert_eq!(s.len(), 3);
        let s = stratified_subset(&d, 0.5, 1);
        assert_eq!(s.len(), 50 + 2 + 5);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(stratified_subset(&d, 1.0, 9).len(), 113);
        assert_eq!(stratified_subset(&d, 0.3, 4), stratified_subset(&d, 0.3, 4));
    }

    #[test]
    fn gap_statistics() {
        let c = Cell { fraction: 0.1, train_samples: 1, transfer: vec![60.0, 62.0], random: vec![50.0, 50.0] };
        assert_eq!(c.gap(), 11.0);
        assert!((c.gap_se() - 1.0).abs() < 1e-12);
    }
}
