//! Downstream label coverage by the synset vocabulary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::caption::Extractor;
use crate::error::{Error, Result};
use crate::vocab::{vocab_size, SynsetCounts, SynsetVocab};
use crate::wordnet::{max_distance_for, similarity_from_distance, NearestClassIndex, SynsetId, WordNetDb};

pub const DEFAULT_ALPHAS: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEFAULT_V_TAUS: [u64; 11] = [0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownstreamLabel {
    /// The label as written in the label file.
    pub label: String,
    /// Most-frequent senses, whole compound or per part, in label order.
    pub synsets: Vec<SynsetId>,
    /// True when the label had no whole-compound entry and was split.
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownstreamLabelSet {
    pub labels: Vec<DownstreamLabel>,
}

/// Resolves one label: lowercase, join words with underscores, look the
/// compound up whole, otherwise run noun extraction over its parts.
pub fn resolve_label(label: &str, ex: &Extractor<'_>) -> DownstreamLabel {
    let key = label.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join("_");
    let db = ex.db();
    if let Some(sense) = db.morphy_noun(&key).first().and_then(|l| db.first_sense(l)) {
        return DownstreamLabel {
            label: label.to_string(),
            synsets: vec![sense],
            split: false,
        };
    }
    let parts: Vec<String> = key.split('_').filter(|p| !p.is_empty()).map(String::from).collect();
    let mut synsets = Vec::new();
    for tok in ex.extract_nouns(&parts) {
        if let Some(s) = tok.lemma.as_deref().and_then(|l| db.first_sense(l)) {
            if !synsets.contains(&s) {
                synsets.push(s);
            }
        }
    }
    DownstreamLabel {
        label: label.to_string(),
        synsets,
        split: true,
    }
}

impl DownstreamLabelSet {
    pub fn resolve<S: AsRef<str>>(labels: &[S], ex: &Extractor<'_>) -> Self {
        DownstreamLabelSet {
            labels: labels.iter().map(|l| resolve_label(l.as_ref(), ex)).collect(),
        }
    }

    /// One label per line; blank lines are skipped.
    pub fn load(path: impl AsRef<Path>, ex: &Extractor<'_>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let labels: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if labels.is_empty() {
            return Err(Error::InvalidArgument(format!("{}: empty label file", path.display())));
        }
        Ok(Self::resolve(&labels, ex))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn unresolved(&self) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|l| l.synsets.is_empty())
            .map(|l| l.label.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestMatch {
    pub similarity: f64,
    pub class: usize,
    pub synset: SynsetId,
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatch {
    pub label: String,
    pub synsets: Vec<SynsetId>,
    /// Most similar vocabulary class, if any reaches the smallest threshold.
    pub best: Option<BestMatch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRow {
    pub alpha: f64,
    pub matched: usize,
    pub total: usize,
}

impl CoverageRow {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.matched as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    /// Sorted by ascending alpha.
    pub coverage: Vec<CoverageRow>,
    pub labels: Vec<LabelMatch>,
}

pub fn validate_alphas(thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("no similarity thresholds".into()));
    }
    if let Some(a) = thresholds.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::InvalidArgument(format!("similarity threshold {a} outside (0, 1]")));
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

/// Best similarity of each downstream label to any vocabulary class and the
/// number of labels matched at each threshold.
///
/// A label matches at `alpha` when some pair (vocabulary synset, label
/// synset) has path similarity at least `alpha`. The search never looks
/// further than the distance allowed by the smallest threshold.
pub fn overlap_sweep(
    vocab: &SynsetVocab,
    downstream: &DownstreamLabelSet,
    db: &WordNetDb,
    thresholds: &[f64],
) -> Result<OverlapReport> {
    if vocab.is_empty() {
        return Err(Error::InvalidArgument("empty vocabulary".into()));
    }
    let alphas = validate_alphas(thresholds)?;
    let bound = max_distance_for(alphas[0]);
    let index = NearestClassIndex::new(db, &vocab.synsets())?;
    let labels: Vec<LabelMatch> = downstream
        .labels
        .par_iter()
        .map(|l| {
            let mut best: Option<(usize, usize)> = None;
            for &s in &l.synsets {
                if let Some(hit) = index.nearest(s, bound)? {
                    if best.is_none_or(|b| hit < b) {
                        best = Some(hit);
                    }
                }
            }
            Ok(LabelMatch {
                label: l.label.clone(),
                synsets: l.synsets.clone(),
                best: best.map(|(d, class)| {
                    let c = vocab.class(class).expect("class in range");
                    BestMatch {
                        similarity: similarity_from_distance(d),
                        class,
                        synset: c.synset,
                        lemma: c.lemma.clone(),
                    }
                }),
            })
        })
        .collect::<Result<_>>()?;
    let coverage = alphas
        .iter()
        .map(|&alpha| CoverageRow {
            alpha,
            matched: labels
                .iter()
                .filter(|l| l.best.as_ref().is_some_and(|b| b.similarity >= alpha))
                .count(),
            total: labels.len(),
        })
        .collect();
    Ok(OverlapReport { coverage, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplesPerSynset {
    /// `(synset, lemma, count)` in canonical order.
    pub rows: Vec<(SynsetId, String, u64)>,
    /// count -> number of synsets with that count.
    pub histogram: BTreeMap<u64, usize>,
    /// Nearest-rank quantiles at 0, 0.25, 0.5, 0.75 and 1.
    pub quantiles: Vec<(f64, u64)>,
}

/// Pre-training occurrence counts of the vocabulary synsets that are the best
/// match (at similarity >= `alpha`) of some downstream label.
pub fn samples_per_synset(counts: &SynsetCounts, report: &OverlapReport, alpha: f64) -> SamplesPerSynset {
    let mut seen = std::collections::BTreeSet::new();
    let mut rows: Vec<(SynsetId, String, u64)> = report
        .labels
        .iter()
        .filter_map(|l| l.best.as_ref())
        .filter(|b| b.similarity >= alpha)
        .filter(|b| seen.insert(b.synset))
        .map(|b| (b.synset, b.lemma.clone(), counts.get(b.synset)))
        .collect();
    rows.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut histogram = BTreeMap::new();
    for r in &rows {
        *histogram.entry(r.2).or_insert(0) += 1;
    }
    let mut values: Vec<u64> = rows.iter().map(|r| r.2).collect();
    values.sort_unstable();
    let quantiles = if values.is_empty() {
        Vec::new()
    } else {
        [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&q| (q, nearest_rank(&values, q)))
            .collect()
    };
    SamplesPerSynset {
        rows,
        histogram,
        quantiles,
    }
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

/// `(v_tau, K)` rows, sorted by threshold.
pub fn vocab_size_sweep(counts: &SynsetCounts, thresholds: &[u64]) -> Vec<(u64, usize)> {
    let mut ts = thresholds.to_vec();
    ts.sort_unstable();
    ts.dedup();
    ts.into_iter().map(|t| (t, vocab_size(counts, t))).collect()
}

/// Rank/frequency rows of every counted synset, most frequent first.
pub fn synset_distribution(counts: &SynsetCounts, db: &WordNetDb) -> Result<Vec<(usize, SynsetId, String, u64)>> {
    counts
        .canonical()
        .into_iter()
        .enumerate()
        .map(|(i, (s, c))| Ok((i + 1, s, db.synset(s)?.canonical_lemma().to_string(), c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stopwords::StopWords;
    use crate::vocab::prune;
    use crate::wordnet::fixture;

    fn setup() -> (WordNetDb, StopWords) {
        (fixture::db(), StopWords::english())
    }

    fn vocab(db: &WordNetDb, sw: &StopWords, pairs: &[(u32, u64)]) -> SynsetVocab {
        let mut c = SynsetCounts::new(db.version(), sw.hash());
        for &(k, v) in pairs {
            c.counts.insert(SynsetId::new(k), v);
        }
        prune(&c, 0, db).unwrap()
    }

    #[test]
    fn label_resolution() {
        let (db, sw) = setup();
        let ex = Extractor::new(&db, &sw);
        let dog = resolve_label("Dog", &ex);
        assert_eq!(dog.synsets, [SynsetId::new(300)]);
        assert!(!dog.split);
        let hot = resolve_label("hot dog", &ex);
        assert_eq!(hot.synsets, [SynsetId::new(700)]);
        let split = resolve_label("cat_box", &ex);
        assert_eq!(split.synsets, [SynsetId::new(400), SynsetId::new(900)]);
        assert!(split.split);
        assert!(resolve_label("qzxv", &ex).synsets.is_empty());
    }

    #[test]
    fn sweep_counts_and_monotonicity() {
        let (db, sw) = setup();
        let ex = Extractor::new(&db, &sw);
        let v = vocab(&db, &sw, &[(300, 5), (900, 4)]);
        let ds = DownstreamLabelSet::resolve(&["dog", "box", "puppy", "cat", "man", "qzxv"], &ex);
        let r = overlap_sweep(&v, &ds, &db, &[1.0, 0.2, 0.5]).unwrap();
        let alphas: Vec<f64> = r.coverage.iter().map(|c| c.alpha).collect();
        assert_eq!(alphas, [0.2, 0.5, 1.0]);
        let matched: Vec<usize> = r.coverage.iter().map(|c| c.matched).collect();
        // dog/box exact, puppy at 0.5, cat at 1/3 (via mammal to dog), man at 0.2
        assert_eq!(matched, [5, 3, 2]);
        assert!(r.labels[5].best.is_none());
        assert_eq!(r.labels[2].best.as_ref().unwrap().lemma, "dog");
    }

    #[test]
    fn thresholds_are_validated() {
        let (db, sw) = setup();
        let ex = Extractor::new(&db, &sw);
        let v = vocab(&db, &sw, &[(300, 5)]);
        let ds = DownstreamLabelSet::resolve(&["dog"], &ex);
        assert!(overlap_sweep(&v, &ds, &db, &[1.5]).is_err());
        assert!(overlap_sweep(&v, &ds, &db, &[0.0]).is_err());
        assert!(overlap_sweep(&v, &ds, &db, &[]).is_err());
        let empty = vocab(&db, &sw, &[]);
        assert!(overlap_sweep(&empty, &ds, &db, &[1.0]).is_err());
    }

    #[test]
    fn samples_histogram_and_quantiles() {
        let (db, sw) = setup();
        let ex = Extractor::new(&db, &sw);
        let mut counts = SynsetCounts::new(db.version(), sw.hash());
        counts.counts.insert(SynsetId::new(300), 7);
        let v = prune(&counts, 0, &db).unwrap();
        let ds = DownstreamLabelSet::resolve(&["dog"], &ex);
        let r = overlap_sweep(&v, &ds, &db, &[1.0]).unwrap();
        let s = samples_per_synset(&counts, &r, 1.0);
        assert_eq!(s.histogram, BTreeMap::from([(7, 1)]));
        assert_eq!(s.quantiles[2], (0.5, 7));

        let none = DownstreamLabelSet::resolve(&["box"], &ex);
        let r = overlap_sweep(&v, &none, &db, &[1.0]).unwrap();
        let s = samples_per_synset(&counts, &r, 1.0);
        assert!(s.histogram.is_empty() && s.quantiles.is_empty());
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        assert_eq!(nearest_rank(&v, 0.0), 1);
        assert_eq!(nearest_rank(&v, 0.25), 3);
        assert_eq!(nearest_rank(&v, 0.5), 5);
        assert_eq!(nearest_rank(&v, 1.0), 10);
    }

    #[test]
    fn vocab_sizes() {
        let mut c = SynsetCounts::new("3.0", "h");
        for (k, v) in [(1, 10), (2, 5), (3, 1)] {
            c.counts.insert(SynsetId::new(k), v);
        }
        assert_eq!(vocab_size_sweep(&c, &[5, 0, 1]), [(0, 3), (1, 2), (5, 1)]);
    }
}
