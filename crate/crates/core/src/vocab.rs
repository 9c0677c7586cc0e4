//! Synset occurrence counting and the pruned class vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::caption::{CaptionRecord, Extractor};
use crate::corpus::CaptionReader;
use crate::error::{Error, Result};
use crate::wordnet::{SynsetId, WordNetDb};

/// Default pruning threshold: keep synsets seen in more than 500 captions.
pub const DEFAULT_V_TAU: u64 = 500;

/// Captions read per streaming step before fanning out to workers.
const STREAM_CHUNK: usize = 16_384;

/// Number of captions mentioning each synset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynsetCounts {
    pub counts: BTreeMap<SynsetId, u64>,
    pub captions_processed: u64,
    pub stopword_hash: String,
    pub wordnet_version: String,
}

impl SynsetCounts {
    pub fn new(wordnet_version: impl Into<String>, stopword_hash: impl Into<String>) -> Self {
        SynsetCounts {
            counts: BTreeMap::new(),
            captions_processed: 0,
            stopword_hash: stopword_hash.into(),
            wordnet_version: wordnet_version.into(),
        }
    }

    pub fn for_extractor(ex: &Extractor<'_>) -> Self {
        Self::new(ex.db().version(), ex.stopwords().hash())
    }

    /// Adds one caption's synset set; each synset counts at most once.
    pub fn add_caption(&mut self, synsets: &BTreeSet<SynsetId>) {
        self.captions_processed += 1;
        for s in synsets {
            *self.counts.entry(*s).or_insert(0) += 1;
        }
    }

    pub fn get(&self, id: SynsetId) -> u64 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Pointwise sum. Both sides must come from the same database and
    /// stopword list.
    pub fn merge(mut self, other: SynsetCounts) -> Result<SynsetCounts> {
        if self.wordnet_version != other.wordnet_version {
            return Err(Error::Provenance {
                what: "wordnet version",
                expected: self.wordnet_version,
                found: other.wordnet_version,
            });
        }
        if self.stopword_hash != other.stopword_hash {
            return Err(Error::Provenance {
                what: "stopword hash",
                expected: self.stopword_hash,
                found: other.stopword_hash,
            });
        }
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.captions_processed += other.captions_processed;
        Ok(self)
    }

    /// `(synset, count)` sorted by descending count, then ascending offset.
    pub fn canonical(&self) -> Vec<(SynsetId, u64)> {
        let mut rows: Vec<(SynsetId, u64)> = self.counts.iter().map(|(k, v)| (*k, *v)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#wordnet={}", self.wordnet_version);
        let _ = writeln!(out, "#stopwords={}", self.stopword_hash);
        let _ = writeln!(out, "#captions={}", self.captions_processed);
        for (id, c) in self.canonical() {
            let _ = writeln!(out, "{id}\t{c}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut headers = Headers::default();
        let mut counts = BTreeMap::new();
        let mut prev: Option<(SynsetId, u64)> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.starts_with('#') {
                headers.read(line, file, lineno)?;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::malformed(file, lineno, "row", format!("expected 2 columns, found {}", cols.len())));
            }
            let id = parse_synset(cols[0], file, lineno)?;
            let c = parse_count(cols[1], file, lineno)?;
            if c == 0 {
                return Err(Error::malformed(file, lineno, "count", "counts must be positive"));
            }
            check_order(prev, (id, c), file, lineno)?;
            prev = Some((id, c));
            counts.insert(id, c);
        }
        Ok(SynsetCounts {
            counts,
            captions_processed: headers.require_u64("captions", file)?,
            stopword_hash: headers.require("stopwords", file)?,
            wordnet_version: headers.require("wordnet", file)?,
        })
    }
}

/// Single-threaded count over in-memory captions.
pub fn count_records(records: &[CaptionRecord], ex: &Extractor<'_>) -> SynsetCounts {
    let mut counts = SynsetCounts::for_extractor(ex);
    for r in records {
        counts.add_caption(&ex.extract_synsets(r));
    }
    counts
}

/// Splits `records` into `shards` contiguous shards, counts each on the
/// rayon pool and merges the partial counts in shard order.
pub fn count_sharded(records: &[CaptionRecord], ex: &Extractor<'_>, shards: usize) -> SynsetCounts {
    let shards = shards.max(1);
    let size = records.len().div_ceil(shards).max(1);
    records
        .par_chunks(size)
        .map(|chunk| count_records(chunk, ex))
        .collect::<Vec<_>>()
        .into_iter()
        .try_fold(SynsetCounts::for_extractor(ex), SynsetCounts::merge)
        .expect("shards share provenance")
}

/// Streams a JSON-lines corpus from disk, counting with `jobs` workers.
pub fn count_corpus(path: impl AsRef<Path>, ex: &Extractor<'_>, jobs: usize) -> Result<SynsetCounts> {
    let jobs = jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut reader = CaptionReader::open(path)?;
    let mut total = SynsetCounts::for_extractor(ex);
    loop {
        let chunk = reader.next_chunk(STREAM_CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let part = pool.install(|| count_sharded(&chunk, ex, jobs));
        total = total.merge(part)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabClass {
    pub synset: SynsetId,
    pub lemma: String,
    pub count: u64,
}

/// Ordered class vocabulary. Class `k` is `classes[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynsetVocab {
    classes: Vec<VocabClass>,
    index: HashMap<SynsetId, usize>,
    prune_threshold: u64,
    wordnet_version: String,
    stopword_hash: String,
}

/// Keeps the synsets counted strictly more than `v_tau` times, in canonical
/// order; each class is named by its synset's first lemma.
pub fn prune(counts: &SynsetCounts, v_tau: u64, db: &WordNetDb) -> Result<SynsetVocab> {
    let mut classes = Vec::new();
    for (synset, count) in counts.canonical() {
        if count > v_tau {
            let lemma = db.synset(synset)?.canonical_lemma().to_string();
            classes.push(VocabClass { synset, lemma, count });
        }
    }
    Ok(SynsetVocab::from_classes(
        classes,
        v_tau,
        counts.wordnet_version.clone(),
        counts.stopword_hash.clone(),
    ))
}

/// Number of classes `prune` would keep at `v_tau`, without building them.
pub fn vocab_size(counts: &SynsetCounts, v_tau: u64) -> usize {
    counts.counts.values().filter(|&&c| c > v_tau).count()
}

impl SynsetVocab {
    fn from_classes(classes: Vec<VocabClass>, prune_threshold: u64, wordnet_version: String, stopword_hash: String) -> Self {
        let index = classes.iter().enumerate().map(|(k, c)| (c.synset, k)).collect();
        SynsetVocab {
            classes,
            index,
            prune_threshold,
            wordnet_version,
            stopword_hash,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[VocabClass] {
        &self.classes
    }

    pub fn class(&self, k: usize) -> Option<&VocabClass> {
        self.classes.get(k)
    }

    pub fn class_of(&self, id: SynsetId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn synsets(&self) -> Vec<SynsetId> {
        self.classes.iter().map(|c| c.synset).collect()
    }

    pub fn prune_threshold(&self) -> u64 {
        self.prune_threshold
    }

    pub fn wordnet_version(&self) -> &str {
        &self.wordnet_version
    }

    pub fn stopword_hash(&self) -> &str {
        &self.stopword_hash
    }

    /// Fails unless this vocabulary was built with the given database
    /// release and stopword list.
    pub fn check_provenance(&self, wordnet_version: &str, stopword_hash: &str) -> Result<()> {
        if self.wordnet_version != wordnet_version {
            return Err(Error::Provenance {
                what: "wordnet version",
                expected: self.wordnet_version.clone(),
                found: wordnet_version.to_string(),
            });
        }
        if self.stopword_hash != stopword_hash {
            return Err(Error::Provenance {
                what: "stopword hash",
                expected: self.stopword_hash.clone(),
                found: stopword_hash.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#wordnet={}", self.wordnet_version);
        let _ = writeln!(out, "#stopwords={}", self.stopword_hash);
        let _ = writeln!(out, "#v_tau={}", self.prune_threshold);
        for (k, c) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "{k}\t{}\t{}\t{}", c.synset, c.lemma, c.count);
        }
        out
    }

    /// SHA-256 of the serialized vocabulary; stamps derived embedding files.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_tsv().as_bytes()).into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut headers = Headers::default();
        let mut classes: Vec<VocabClass> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut prev: Option<(SynsetId, u64)> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.starts_with('#') {
                headers.read(line, file, lineno)?;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::malformed(file, lineno, "row", format!("expected 4 columns, found {}", cols.len())));
            }
            let k: usize = cols[0]
                .parse()
                .map_err(|_| Error::malformed(file, lineno, "class_index", format!("{:?} is not an index", cols[0])))?;
            let synset = parse_synset(cols[1], file, lineno)?;
            let count = parse_count(cols[3], file, lineno)?;
            if cols[2].is_empty() {
                return Err(Error::malformed(file, lineno, "lemma", "empty lemma"));
            }
            check_order(prev, (synset, count), file, lineno)?;
            if k != classes.len() {
                return Err(Error::malformed(
                    file,
                    lineno,
                    "class_index",
                    format!("canonical order violated: expected class {}, found {k}", classes.len()),
                ));
            }
            if !seen.insert(synset) {
                return Err(Error::malformed(file, lineno, "synset_offset", format!("duplicate synset {synset}")));
            }
            prev = Some((synset, count));
            classes.push(VocabClass {
                synset,
                lemma: cols[2].to_string(),
                count,
            });
        }
        let v_tau = headers.require_u64("v_tau", file)?;
        if let Some((k, c)) = classes.iter().enumerate().find(|(_, c)| c.count <= v_tau) {
            return Err(Error::malformed(
                file,
                0,
                "count",
                format!("class {k} has count {} not above v_tau {v_tau}", c.count),
            ));
        }
        Ok(SynsetVocab::from_classes(
            classes,
            v_tau,
            headers.require("wordnet", file)?,
            headers.require("stopwords", file)?,
        ))
    }
}

#[derive(Default)]
struct Headers(BTreeMap<String, String>);

impl Headers {
    fn read(&mut self, line: &str, file: &str, lineno: usize) -> Result<()> {
        let (k, v) = line[1..]
            .split_once('=')
            .ok_or_else(|| Error::malformed(file, lineno, "header", format!("expected #key=value, found {line:?}")))?;
        self.0.insert(k.to_string(), v.to_string());
        Ok(())
    }

    fn require(&self, key: &'static str, file: &str) -> Result<String> {
        self.0
            .get(key)
            .cloned()
            .ok_or_else(|| Error::malformed(file, 0, "header", format!("missing #{key}=")))
    }

    fn require_u64(&self, key: &'static str, file: &str) -> Result<u64> {
        let v = self.require(key, file)?;
        v.parse()
            .map_err(|_| Error::malformed(file, 0, "header", format!("#{key}={v} is not a non-negative integer")))
    }
}

fn parse_synset(s: &str, file: &str, lineno: usize) -> Result<SynsetId> {
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::malformed(file, lineno, "synset_offset", format!("{s:?} is not an 8-digit offset")));
    }
    s.parse()
        .map_err(|_| Error::malformed(file, lineno, "synset_offset", format!("{s:?}")))
}

fn parse_count(s: &str, file: &str, lineno: usize) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::malformed(file, lineno, "count", format!("{s:?} is not a non-negative integer")))
}

fn check_order(prev: Option<(SynsetId, u64)>, cur: (SynsetId, u64), file: &str, lineno: usize) -> Result<()> {
    if let Some((ps, pc)) = prev {
        let ordered = pc > cur.1 || (pc == cur.1 && ps < cur.0);
        if !ordered {
            return Err(Error::malformed(file, lineno, "row", "canonical order violated"));
        }
    }
    Ok(())
}
