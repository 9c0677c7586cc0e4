#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::OnceLock;

use catlip_core::labels::MultiHotLabel;
use catlip_core::trainer::{bce_grad, bce_with_logits};
use catlip_core::{FeatureDataset, StopWords, SynsetId, WordNetDb};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}

pub fn golden(name: &str) -> PathBuf {
    data_dir().join("golden").join(name)
}

pub fn wordnet_dir() -> PathBuf {
    data_dir().join("wordnet-3.0")
}

pub fn db() -> &'static WordNetDb {
    static DB: OnceLock<WordNetDb> = OnceLock::new();
    DB.get_or_init(|| WordNetDb::load_dir(wordnet_dir()).expect("bundled WordNet loads"))
}

pub fn stopwords() -> &'static StopWords {
    static SW: OnceLock<StopWords> = OnceLock::new();
    SW.get_or_init(StopWords::english)
}

pub fn read(path: impl Into<PathBuf>) -> String {
    let p = path.into();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Upward BFS over the public synset records only.
fn naive_up(db: &WordNetDb, id: SynsetId) -> HashMap<SynsetId, usize> {
    let mut dist = HashMap::from([(id, 0)]);
    let mut queue = VecDeque::from([id]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for &h in &db.synset(u).unwrap().hypernyms {
            dist.entry(h).or_insert_with(|| {
                queue.push_back(h);
                d + 1
            });
        }
    }
    dist
}

/// Path similarity from two full upward closures, no pruning.
pub fn naive_similarity(db: &WordNetDb, a: SynsetId, b: SynsetId) -> Option<f64> {
    let ua = naive_up(db, a);
    let ub = naive_up(db, b);
    ua.iter()
        .filter_map(|(c, da)| ub.get(c).map(|db| da + db))
        .min()
        .map(|d| 1.0 / (d as f64 + 1.0))
}

pub fn random_synset_pairs(db: &WordNetDb, n: usize, seed: u64) -> Vec<(SynsetId, SynsetId)> {
    let all: Vec<SynsetId> = db.synsets().map(|s| s.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (*all.choose(&mut rng).unwrap(), *all.choose(&mut rng).unwrap()))
        .collect()
}

/// Single-word lemmas whose `+s` plural is handled purely by the suffix
/// rules: neither the plural nor the lemma is an exception form, a
/// stopword, or a lemma of its own.
pub fn plural_sample(db: &WordNetDb, sw: &StopWords, n: usize, seed: u64) -> Vec<String> {
    let mut pool: Vec<&str> = db
        .lemma_entries()
        .map(|(l, _)| l)
        .filter(|l| l.len() > 2 && l.bytes().all(|b| b.is_ascii_lowercase()))
        .filter(|l| !sw.contains(l) && db.exception_bases(l).is_none())
        .filter(|l| {
            let plural = format!("{l}s");
            !db.has_lemma(&plural) && db.exception_bases(&plural).is_none() && !sw.contains(&plural)
        })
        .collect();
    pool.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.choose_multiple(&mut rng, n).map(|s| s.to_string()).collect()
}

/// Largest relative error between the analytic gradient and central
/// differences (step 1e-3) over `instances` random logit/target vectors.
pub fn worst_gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-3;
    let mut worst = 0f64;
    for _ in 0..instances {
        let k = rng.random_range(1..=16);
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-6.0..6.0)).collect();
        let y: Vec<f64> = (0..k).map(|_| rng.random_bool(0.5) as u8 as f64).collect();
        let g = bce_grad(&z, &y).unwrap();
        for j in 0..k {
            let mut plus = z.clone();
            let mut minus = z.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (bce_with_logits(&plus, &y).unwrap() - bce_with_logits(&minus, &y).unwrap()) / (2.0 * h);
            let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-300);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Two classes over two features, each class active when its feature is
/// positive; points within 0.25 of either boundary are dropped.
pub fn separable_toy(seed: u64) -> FeatureDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    while labels.len() < 200 {
        let x: [f32; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if x.iter().any(|v| v.abs() < 0.25) {
            continue;
        }
        let active: Vec<u32> = (0..2).filter(|&c| x[c as usize] > 0.0).collect();
        feats.extend(x);
        labels.push(MultiHotLabel {
            sample_id: labels.len().to_string(),
            class_indices: active,
        });
    }
    FeatureDataset::new(2, 2, feats, labels).unwrap()
}
