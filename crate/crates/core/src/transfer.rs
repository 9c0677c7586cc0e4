//! Initializing a downstream classifier from the rows of a pre-trained head.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::overlap::DownstreamLabelSet;
use crate::vocab::SynsetVocab;
use crate::wordnet::{max_distance_for, NearestClassIndex, WordNetDb};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_RANDOM_SCALE: f32 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitRule {
    /// Copy one pre-trained row.
    Exact(usize),
    /// Mean of several pre-trained rows, ascending and distinct.
    Average(Vec<usize>),
    Random,
}

impl fmt::Display for InitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitRule::Exact(k) => write!(f, "exact\t{k}"),
            InitRule::Average(ks) => {
                let ks: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                write!(f, "average\t{}", ks.join(","))
            }
            InitRule::Random => write!(f, "random\t-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    /// `(label, rule)` in downstream label order.
    pub entries: Vec<(String, InitRule)>,
    pub alpha: f64,
    /// Size and hash of the vocabulary the rule indices refer to.
    pub classes: usize,
    pub vocab_hash: [u8; 32],
}

impl TransferPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn random_count(&self) -> usize {
        self.entries.iter().filter(|(_, r)| *r == InitRule::Random).count()
    }

    /// `label  rule  classes` table; `classes` is `-` for random rows.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("label\trule\tclasses\n");
        for (label, rule) in &self.entries {
            let _ = writeln!(s, "{label}\t{rule}");
        }
        s
    }

    /// SHA-256 over the table, the threshold and the vocabulary hash.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.to_tsv().as_bytes());
        h.update(self.alpha.to_le_bytes());
        h.update(self.vocab_hash);
        h.finalize().into()
    }
}

/// Maps each downstream label to vocabulary rows.
///
/// A label resolved to a single synset with a vocabulary class within
/// similarity `alpha` copies that class's row. A compound label whose parts
/// all match averages the parts' rows. Anything else is initialized randomly.
/// Among equally similar classes the lower index wins, which is the more
/// frequent class since vocabularies are ordered by descending count.
pub fn build_transfer_plan(
    downstream: &DownstreamLabelSet,
    vocab: &SynsetVocab,
    db: &WordNetDb,
    alpha: f64,
) -> Result<TransferPlan> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    if downstream.is_empty() {
        return Err(Error::InvalidArgument("empty downstream label set".into()));
    }
    let index = NearestClassIndex::new(db, &vocab.synsets())?;
    let bound = max_distance_for(alpha);
    let mut entries = Vec::with_capacity(downstream.len());
    for label in &downstream.labels {
        let mut best = Vec::with_capacity(label.synsets.len());
        for &s in &label.synsets {
            best.push(index.nearest(s, bound)?.map(|(_, class)| class));
        }
        let rule = match best.as_slice() {
            [] => InitRule::Random,
            _ if best.iter().any(Option::is_none) => InitRule::Random,
            [Some(k)] => InitRule::Exact(*k),
            _ => {
                let mut ks: Vec<usize> = best.into_iter().flatten().collect();
                ks.sort_unstable();
                ks.dedup();
                InitRule::Average(ks)
            }
        };
        entries.push((label.label.clone(), rule));
    }
    Ok(TransferPlan {
        entries,
        alpha,
        classes: vocab.len(),
        vocab_hash: vocab.hash(),
    })
}

/// Zero-mean normal with standard deviation `scale`, truncated at two
/// standard deviations by rejection.
pub fn truncated_normal<R: Rng>(rng: &mut R, scale: f32) -> f32 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return (z * scale as f64) as f32;
        }
    }
}

/// A `rows x dim` block of truncated-normal values from `seed`.
pub fn random_rows(rows: usize, dim: usize, seed: u64, scale: f32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * dim).map(|_| truncated_normal(&mut rng, scale)).collect()
}

/// Builds the downstream weight matrix, one row per plan entry.
///
/// Exact rows are bit copies; average rows are summed in f64 in ascending
/// class order and divided once; random rows consume the seeded generator in
/// plan order, so changing the seed changes nothing else.
pub fn materialize(plan: &TransferPlan, pretrained: &EmbeddingMatrix, seed: u64, random_scale: f32) -> Result<EmbeddingMatrix> {
    if pretrained.provenance != plan.vocab_hash {
        return Err(Error::Provenance {
            what: "vocabulary hash",
            expected: hex::encode(plan.vocab_hash),
            found: hex::encode(pretrained.provenance),
        });
    }
    if pretrained.rows() != plan.classes {
        return Err(Error::Dimension(format!(
            "pretrained matrix has {} rows, vocabulary has {} classes",
            pretrained.rows(),
            plan.classes
        )));
    }
    if !(random_scale.is_finite() && random_scale >= 0.0) {
        return Err(Error::InvalidArgument(format!("random scale {random_scale}")));
    }
    let dim = pretrained.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(plan.len() * dim);
    for (label, rule) in &plan.entries {
        match rule {
            InitRule::Exact(k) => {
                check_index(*k, plan.classes, label)?;
                values.extend_from_slice(pretrained.row(*k));
            }
            InitRule::Average(ks) => {
                if ks.is_empty() {
                    return Err(Error::InvalidArgument(format!("{label}: empty average")));
                }
                let mut acc = vec![0f64; dim];
                for &k in ks {
                    check_index(k, plan.classes, label)?;
                    for (a, v) in acc.iter_mut().zip(pretrained.row(k)) {
                        *a += *v as f64;
                    }
                }
                let n = ks.len() as f64;
                values.extend(acc.into_iter().map(|a| (a / n) as f32));
            }
            InitRule::Random => {
                values.extend((0..dim).map(|_| truncated_normal(&mut rng, random_scale)));
            }
        }
    }
    let mut h = Sha256::new();
    h.update(plan.hash());
    h.update(seed.to_le_bytes());
    EmbeddingMatrix::new(plan.len(), dim, values, h.finalize().into())
}

fn check_index(k: usize, classes: usize, label: &str) -> Result<()> {
    if k >= classes {
        return Err(Error::Dimension(format!("{label}: class {k} out of range for {classes} classes")));
    }
    Ok(())
}
