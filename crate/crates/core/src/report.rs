//! Tab-separated and HTML renderings of the overlap analyses.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::overlap::{OverlapReport, SamplesPerSynset};
use crate::wordnet::SynsetId;

/// Everything `analyze-overlap` writes to its report directory.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub overlap: OverlapReport,
    pub samples: SamplesPerSynset,
    pub vocab_sizes: Vec<(u64, usize)>,
    pub distribution: Vec<(usize, SynsetId, String, u64)>,
}

impl OverlapReport {
    pub fn coverage_tsv(&self) -> String {
        let mut s = String::from("alpha\tmatched\ttotal\tpercent\n");
        for r in &self.coverage {
            let _ = writeln!(s, "{:.2}\t{}\t{}\t{:.2}", r.alpha, r.matched, r.total, r.percent());
        }
        s
    }

    /// Per-label resolution and best match. Matches below the smallest
    /// threshold are reported as `none`.
    pub fn labels_tsv(&self) -> String {
        let mut s = String::from("label\tsynsets\tbest_similarity\tnearest_class\n");
        for l in &self.labels {
            let synsets = if l.synsets.is_empty() {
                "-".to_string()
            } else {
                l.synsets.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
            };
            let (sim, class) = match &l.best {
                Some(b) => (format!("{:.6}", b.similarity), format!("{}:{}", b.class, b.lemma)),
                None => ("none".into(), "-".into()),
            };
            let _ = writeln!(s, "{}\t{synsets}\t{sim}\t{class}", l.label);
        }
        s
    }

    pub fn unresolved_txt(&self) -> String {
        self.labels
            .iter()
            .filter(|l| l.synsets.is_empty())
            .map(|l| format!("{}\n", l.label))
            .collect()
    }
}

impl SamplesPerSynset {
    pub fn rows_tsv(&self) -> String {
        let mut s = String::from("synset\tlemma\tcount\n");
        for (id, lemma, c) in &self.rows {
            let _ = writeln!(s, "{id}\t{lemma}\t{c}");
        }
        s
    }

    pub fn histogram_tsv(&self) -> String {
        let mut s = String::from("count\tsynsets\n");
        for (c, n) in &self.histogram {
            let _ = writeln!(s, "{c}\t{n}");
        }
        s
    }

    pub fn quantiles_tsv(&self) -> String {
        let mut s = String::from("quantile\tcount\n");
        for (q, c) in &self.quantiles {
            let _ = writeln!(s, "{q:.2}\t{c}");
        }
        s
    }
}

pub fn vocab_size_tsv(rows: &[(u64, usize)]) -> String {
    let mut s = String::from("v_tau\tclasses\n");
    for (t, k) in rows {
        let _ = writeln!(s, "{t}\t{k}");
    }
    s
}

pub fn distribution_tsv(rows: &[(usize, SynsetId, String, u64)]) -> String {
    let mut s = String::from("rank\tsynset\tlemma\tcount\n");
    for (rank, id, lemma, c) in rows {
        let _ = writeln!(s, "{rank}\t{id}\t{lemma}\t{c}");
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bar(fraction: f64) -> String {
    let w = (fraction.clamp(0.0, 1.0) * 300.0).round();
    format!("<span class=\"bar\" style=\"width:{w}px\"></span>")
}

impl AnalysisReport {
    /// Self-contained HTML page with inline bars, no scripts.
    pub fn html(&self) -> String {
        let mut h = String::from(
            "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Vocabulary overlap</title>\n\
             <style>body{font-family:sans-serif}td,th{padding:2px 8px;text-align:left}\
             .bar{display:inline-block;height:10px;background:#4a7bb7}</style></head><body>\n",
        );
        h.push_str("<h1>Vocabulary overlap</h1>\n<h2>Coverage</h2>\n<table><tr><th>alpha</th><th>matched</th><th>total</th><th>%</th><th></th></tr>\n");
        for r in &self.overlap.coverage {
            let _ = writeln!(
                h,
                "<tr><td>{:.2}</td><td>{}</td><td>{}</td><td>{:.2}</td><td>{}</td></tr>",
                r.alpha,
                r.matched,
                r.total,
                r.percent(),
                bar(r.percent() / 100.0)
            );
        }
        h.push_str("</table>\n<h2>Vocabulary size</h2>\n<table><tr><th>v_tau</th><th>classes</th><th></th></tr>\n");
        let kmax = self.vocab_sizes.iter().map(|r| r.1).max().unwrap_or(0).max(1);
        for (t, k) in &self.vocab_sizes {
            let _ = writeln!(h, "<tr><td>{t}</td><td>{k}</td><td>{}</td></tr>", bar(*k as f64 / kmax as f64));
        }
        h.push_str("</table>\n<h2>Pre-training samples per matched synset</h2>\n<table><tr><th>synset</th><th>lemma</th><th>count</th><th></th></tr>\n");
        let cmax = self.samples.rows.iter().map(|r| r.2).max().unwrap_or(0).max(1);
        for (id, lemma, c) in &self.samples.rows {
            let _ = writeln!(
                h,
                "<tr><td>{id}</td><td>{}</td><td>{c}</td><td>{}</td></tr>",
                escape(lemma),
                bar(*c as f64 / cmax as f64)
            );
        }
        h.push_str("</table>\n<h2>Labels</h2>\n<table><tr><th>label</th><th>best similarity</th><th>nearest class</th></tr>\n");
        for l in &self.overlap.labels {
            let (sim, class) = match &l.best {
                Some(b) => (format!("{:.3}", b.similarity), format!("{}:{}", b.class, escape(&b.lemma))),
                None => ("none".into(), "-".into()),
            };
            let _ = writeln!(h, "<tr><td>{}</td><td>{sim}</td><td>{class}</td></tr>", escape(&l.label));
        }
        h.push_str("</table>\n</body></html>\n");
        h
    }

    /// Writes every table, the unresolved-label list and `report.html`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("coverage.tsv", self.overlap.coverage_tsv()),
            ("labels.tsv", self.overlap.labels_tsv()),
            ("unresolved.txt", self.overlap.unresolved_txt()),
            ("samples_per_synset.tsv", self.samples.rows_tsv()),
            ("samples_histogram.tsv", self.samples.histogram_tsv()),
            ("samples_quantiles.tsv", self.samples.quantiles_tsv()),
            ("vocab_size.tsv", vocab_size_tsv(&self.vocab_sizes)),
            ("synset_distribution.tsv", distribution_tsv(&self.distribution)),
            ("report.html", self.html()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
