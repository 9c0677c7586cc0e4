//! Sparse multi-hot classification targets.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caption::{CaptionRecord, Extractor};
use crate::corpus::{open_text, CaptionReader};
use crate::error::{Error, Result};
use crate::vocab::SynsetVocab;

const STREAM_CHUNK: usize = 16_384;

/// Active class indices of one sample, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiHotLabel {
    #[serde(rename = "id")]
    pub sample_id: String,
    #[serde(rename = "labels")]
    pub class_indices: Vec<u32>,
}

impl MultiHotLabel {
    pub fn is_empty(&self) -> bool {
        self.class_indices.is_empty()
    }

    /// Dense 0/1 vector of length `k`.
    pub fn dense(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        for &c in &self.class_indices {
            v[c as usize] = 1.0;
        }
        v
    }

    fn validate(&self, k: Option<usize>) -> std::result::Result<(), String> {
        if self.class_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err("labels must be strictly increasing".into());
        }
        if let (Some(k), Some(&last)) = (k, self.class_indices.last()) {
            if last as usize >= k {
                return Err(format!("label {last} out of range for {k} classes"));
            }
        }
        Ok(())
    }
}

/// Encodes captions against a fixed vocabulary. Construction checks that
/// the vocabulary was built with the same database and stopword list.
#[derive(Debug, Clone, Copy)]
pub struct LabelEncoder<'a> {
    vocab: &'a SynsetVocab,
    extractor: Extractor<'a>,
}

impl<'a> LabelEncoder<'a> {
    pub fn new(vocab: &'a SynsetVocab, extractor: Extractor<'a>) -> Result<Self> {
        vocab.check_provenance(extractor.db().version(), extractor.stopwords().hash())?;
        Ok(LabelEncoder { vocab, extractor })
    }

    pub fn encode(&self, record: &CaptionRecord) -> MultiHotLabel {
        let mut class_indices: Vec<u32> = self
            .extractor
            .extract_synsets(record)
            .into_iter()
            .filter_map(|s| self.vocab.class_of(s))
            .map(|k| k as u32)
            .collect();
        class_indices.sort_unstable();
        MultiHotLabel {
            sample_id: record.sample_id.clone(),
            class_indices,
        }
    }

    /// Encodes a JSON-lines corpus into a JSON-lines labels file, one output
    /// line per input caption in input order.
    pub fn encode_corpus(&self, captions: impl AsRef<Path>, out: impl AsRef<Path>, jobs: usize) -> Result<EncodingSummary> {
        let out = out.as_ref();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let mut reader = CaptionReader::open(captions)?;
        let file = File::create(out).map_err(|e| Error::io(out, e))?;
        let mut writer = BufWriter::new(file);
        let mut summary = SummaryAcc::default();
        loop {
            let chunk = reader.next_chunk(STREAM_CHUNK)?;
            if chunk.is_empty() {
                break;
            }
            let labels: Vec<MultiHotLabel> = pool.install(|| chunk.par_iter().map(|r| self.encode(r)).collect());
            for l in &labels {
                summary.add(l);
                let line = serde_json::to_string(l).expect("labels serialize");
                writeln!(writer, "{line}").map_err(|e| Error::io(out, e))?;
            }
        }
        writer.flush().map_err(|e| Error::io(out, e))?;
        Ok(summary.finish())
    }
}

/// Per-corpus encoding statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingSummary {
    pub captions: u64,
    pub empty: u64,
    pub mean_labels: f64,
}

impl EncodingSummary {
    pub fn of(labels: &[MultiHotLabel]) -> Self {
        let mut acc = SummaryAcc::default();
        labels.iter().for_each(|l| acc.add(l));
        acc.finish()
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "captions\tempty\tmean_labels\n{}\t{}\t{:.6}\n",
            self.captions, self.empty, self.mean_labels
        )
    }
}

#[derive(Default)]
struct SummaryAcc {
    captions: u64,
    empty: u64,
    labels: u64,
}

impl SummaryAcc {
    fn add(&mut self, l: &MultiHotLabel) {
        self.captions += 1;
        self.empty += l.is_empty() as u64;
        self.labels += l.class_indices.len() as u64;
    }

    fn finish(self) -> EncodingSummary {
        EncodingSummary {
            captions: self.captions,
            empty: self.empty,
            mean_labels: if self.captions == 0 {
                0.0
            } else {
                self.labels as f64 / self.captions as f64
            },
        }
    }
}

/// Reads a labels file, validating ordering and (if given) the class range.
pub fn read_labels(path: impl AsRef<Path>, classes: Option<usize>) -> Result<Vec<MultiHotLabel>> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in open_text(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let label: MultiHotLabel =
            serde_json::from_str(&line).map_err(|e| Error::malformed(&file, i + 1, "labels", e.to_string()))?;
        label
            .validate(classes)
            .map_err(|m| Error::malformed(&file, i + 1, "labels", m))?;
        out.push(label);
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[MultiHotLabel]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for l in labels {
        let line = serde_json::to_string(l).expect("labels serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
