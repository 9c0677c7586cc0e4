//! Synthetic feature benchmark for linear-probe experiments.
//!
//! Features are noisy linear images of the label vectors: every vocabulary
//! class owns a fixed random direction, a sample's feature is the sum of its
//! classes' directions plus isotropic Gaussian noise. The pre-training split
//! is multi-label over the whole vocabulary, with classes drawn in
//! proportion to their caption counts. The probe splits are single-label
//! over a subset of classes that round-trip through label resolution, so a
//! transfer plan maps every probe label to exactly one vocabulary row.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::caption::Extractor;
use crate::error::{Error, Result};
use crate::labels::MultiHotLabel;
use crate::overlap::resolve_label;
use crate::trainer::FeatureDataset;
use crate::vocab::SynsetVocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub dim: usize,
    /// Standard deviation of the per-coordinate feature noise.
    pub noise: f64,
    pub pretrain_samples: usize,
    /// Each pre-training sample has between 1 and this many classes.
    pub max_labels: usize,
    pub probe_classes: usize,
    pub probe_train_per_class: usize,
    pub probe_test_per_class: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 20240424,
            dim: 32,
            noise: 1.5,
            pretrain_samples: 6000,
            max_labels: 3,
            probe_classes: 32,
            probe_train_per_class: 50,
            probe_test_per_class: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub vocab: SynsetVocab,
    pub pretrain: FeatureDataset,
    /// Probe class names; probe label `j` is `probe_labels[j]`.
    pub probe_labels: Vec<String>,
    pub probe_train: FeatureDataset,
    pub probe_test: FeatureDataset,
}

/// Vocabulary classes whose canonical lemma resolves back to the class's own
/// synset.
pub fn round_trip_classes(vocab: &SynsetVocab, ex: &Extractor<'_>) -> Vec<usize> {
    vocab
        .classes()
        .iter()
        .enumerate()
        .filter(|(_, c)| resolve_label(&c.lemma, ex).synsets == [c.synset])
        .map(|(k, _)| k)
        .collect()
}

fn noisy_image(rng: &mut ChaCha8Rng, mixing: &[f64], dim: usize, classes: &[usize], noise: f64) -> Vec<f32> {
    (0..dim)
        .map(|j| {
            let signal: f64 = classes.iter().map(|&c| mixing[c * dim + j]).sum();
            let n: f64 = rng.sample(StandardNormal);
            (signal + noise * n) as f32
        })
        .collect()
}

impl Benchmark {
    pub fn generate(vocab: &SynsetVocab, ex: &Extractor<'_>, config: &BenchmarkConfig) -> Result<Self> {
        vocab.check_provenance(ex.db().version(), ex.stopwords().hash())?;
        let k = vocab.len();
        let c = config;
        if k == 0 || c.dim == 0 || c.max_labels == 0 || c.probe_classes == 0 {
            return Err(Error::InvalidArgument("benchmark needs classes, dimensions and labels".into()));
        }
        if !(c.noise.is_finite() && c.noise >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise {}", c.noise)));
        }
        let mut candidates = round_trip_classes(vocab, ex);
        if candidates.len() < c.probe_classes {
            return Err(Error::InvalidArgument(format!(
                "only {} vocabulary classes usable as probe labels, {} requested",
                candidates.len(),
                c.probe_classes
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let mixing: Vec<f64> = (0..k * c.dim).map(|_| rng.sample(StandardNormal)).collect();

        let weights = WeightedIndex::new(vocab.classes().iter().map(|v| v.count))
            .map_err(|e| Error::InvalidArgument(format!("class weights: {e}")))?;
        let max_labels = c.max_labels.min(k);
        let mut features = Vec::with_capacity(c.pretrain_samples * c.dim);
        let mut labels = Vec::with_capacity(c.pretrain_samples);
        for i in 0..c.pretrain_samples {
            let want = rng.random_range(1..=max_labels);
            let mut active: Vec<usize> = Vec::with_capacity(want);
            while active.len() < want {
                let cls = weights.sample(&mut rng);
                if !active.contains(&cls) {
                    active.push(cls);
                }
            }
            active.sort_unstable();
            features.extend(noisy_image(&mut rng, &mixing, c.dim, &active, c.noise));
            labels.push(MultiHotLabel {
                sample_id: format!("p{i}"),
                class_indices: active.iter().map(|&x| x as u32).collect(),
            });
        }
        let pretrain = FeatureDataset::new(c.dim, k, features, labels)?;

        candidates.shuffle(&mut rng);
        let mut probe: Vec<usize> = candidates[..c.probe_classes].to_vec();
        probe.sort_unstable();
        let probe_labels = probe.iter().map(|&p| vocab.classes()[p].lemma.clone()).collect();
        let mut split = |prefix: &str, per_class: usize| {
            let mut features = Vec::new();
            let mut labels = Vec::new();
            for i in 0..per_class * probe.len() {
                let j = i % probe.len();
                features.extend(noisy_image(&mut rng, &mixing, c.dim, &[probe[j]], c.noise));
                labels.push(MultiHotLabel {
                    sample_id: format!("{prefix}{i}"),
                    class_indices: vec![j as u32],
                });
            }
            FeatureDataset::new(c.dim, probe.len(), features, labels)
        };
        let probe_train = split("t", c.probe_train_per_class)?;
        let probe_test = split("e", c.probe_test_per_class)?;
        Ok(Benchmark {
            config: c.clone(),
            vocab: vocab.clone(),
            pretrain,
            probe_labels,
            probe_train,
            probe_test,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(&self.config).expect("config serializes") + "\n";
        let p = dir.join("benchmark.json");
        fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
        self.vocab.save(dir.join("vocab.tsv"))?;
        let p = dir.join("probe_labels.txt");
        let names: String = self.probe_labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(&p, names).map_err(|e| Error::io(&p, e))?;
        self.pretrain.save(dir.join("pretrain.fea"), dir.join("pretrain.jsonl"))?;
        self.probe_train.save(dir.join("probe_train.fea"), dir.join("probe_train.jsonl"))?;
        self.probe_test.save(dir.join("probe_test.fea"), dir.join("probe_test.jsonl"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = dir.join("benchmark.json");
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let config: BenchmarkConfig = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(p.display().to_string(), e.line(), "benchmark", e.to_string()))?;
        let vocab = SynsetVocab::load(dir.join("vocab.tsv"))?;
        let p = dir.join("probe_labels.txt");
        let probe_labels: Vec<String> = fs::read_to_string(&p)
            .map_err(|e| Error::io(&p, e))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().to_string())
            .collect();
        let pretrain = FeatureDataset::load(dir.join("pretrain.fea"), dir.join("pretrain.jsonl"), vocab.len())?;
        let probe_train = FeatureDataset::load(dir.join("probe_train.fea"), dir.join("probe_train.jsonl"), probe_labels.len())?;
        let probe_test = FeatureDataset::load(dir.join("probe_test.fea"), dir.join("probe_test.jsonl"), probe_labels.len())?;
        if pretrain.dim() != probe_train.dim() || pretrain.dim() != probe_test.dim() {
            return Err(Error::Dimension("benchmark splits disagree on feature width".into()));
        }
        Ok(Benchmark {
            config,
            vocab,
            pretrain,
            probe_labels,
            probe_train,
            probe_test,
        })
    }
}
