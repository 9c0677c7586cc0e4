//! Library outputs on the bundled sample corpus against files frozen by the
//! independent Python reference in `scripts/oracle.py`.

mod common;

use catlip_core::corpus::read_captions;
use catlip_core::overlap::{samples_per_synset, synset_distribution, vocab_size_sweep, DEFAULT_ALPHAS, DEFAULT_V_TAUS};
use catlip_core::report::{distribution_tsv, vocab_size_tsv, AnalysisReport};
use catlip_core::vocab::{count_corpus, count_sharded};
use catlip_core::*;
use common::{db, golden, read, stopwords};

fn captions_path() -> std::path::PathBuf {
    common::data_dir().join("sample_captions.jsonl")
}

fn counts() -> SynsetCounts {
    count_corpus(captions_path(), &Extractor::new(db(), stopwords()), 4).unwrap()
}

#[test]
fn per_caption_extractions() {
    let ex = Extractor::new(db(), stopwords());
    let records = read_captions(captions_path()).unwrap();
    let expected = read(golden("sample_extractions.jsonl"));
    let expected: Vec<serde_json::Value> = expected.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 1000);
    assert_eq!(expected.len(), records.len());
    for (r, e) in records.iter().zip(&expected) {
        assert_eq!(e["id"], r.sample_id.as_str());
        let got: Vec<String> = ex.extract_synsets(r).iter().map(|s| s.to_string()).collect();
        let want: Vec<String> = e["synsets"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
        assert_eq!(got, want, "caption {}: {:?}", r.sample_id, r.text);
    }
}

#[test]
fn counts_are_independent_of_parallelism() {
    let ex = Extractor::new(db(), stopwords());
    let want = read(golden("sample_counts.tsv"));
    for jobs in [1, 2, 8] {
        assert_eq!(count_corpus(captions_path(), &ex, jobs).unwrap().to_tsv(), want, "jobs={jobs}");
    }
    let records = read_captions(captions_path()).unwrap();
    for shards in [1, 3, 8, 1000, 5000] {
        assert_eq!(count_sharded(&records, &ex, shards).to_tsv(), want, "shards={shards}");
    }
}

#[test]
fn vocabularies() {
    let c = counts();
    for tau in [5, 500] {
        let v = prune(&c, tau, db()).unwrap();
        let want = read(golden(&format!("vocab_min{tau}.tsv")));
        assert_eq!(v.to_tsv(), want);
        assert_eq!(SynsetVocab::parse(&want, "golden").unwrap(), v);
    }
    let v500 = prune(&c, 500, db()).unwrap();
    assert_eq!(v500.len(), 1);
    assert_eq!(v500.classes()[0].lemma, "photograph");
}

#[test]
fn labels_and_summary() {
    let v = SynsetVocab::load(golden("vocab_min5.tsv")).unwrap();
    let enc = LabelEncoder::new(&v, Extractor::new(db(), stopwords())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("labels.jsonl");
    let summary = enc.encode_corpus(captions_path(), &out, 3).unwrap();
    assert_eq!(read(&out), read(golden("sample_labels_min5.jsonl")));
    assert_eq!(summary.to_tsv(), read(golden("label_summary_min5.tsv")));
}

#[test]
fn overlap_report_tables() {
    let c = counts();
    let v = prune(&c, 5, db()).unwrap();
    let ex = Extractor::new(db(), stopwords());
    let ds = DownstreamLabelSet::load(common::data_dir().join("sample_downstream_labels.txt"), &ex).unwrap();
    let overlap = overlap_sweep(&v, &ds, db(), &DEFAULT_ALPHAS).unwrap();
    let report = AnalysisReport {
        samples: samples_per_synset(&c, &overlap, 1.0),
        vocab_sizes: vocab_size_sweep(&c, &DEFAULT_V_TAUS),
        distribution: synset_distribution(&c, db()).unwrap(),
        overlap,
    };
    let r = |n: &str| read(golden(&format!("report/{n}")));
    assert_eq!(report.overlap.coverage_tsv(), r("coverage.tsv"));
    assert_eq!(report.overlap.labels_tsv(), r("labels.tsv"));
    assert_eq!(report.overlap.unresolved_txt(), r("unresolved.txt"));
    assert_eq!(report.samples.rows_tsv(), r("samples_per_synset.tsv"));
    assert_eq!(report.samples.histogram_tsv(), r("samples_histogram.tsv"));
    assert_eq!(report.samples.quantiles_tsv(), r("samples_quantiles.tsv"));
    assert_eq!(vocab_size_tsv(&report.vocab_sizes), r("vocab_size.tsv"));
    assert_eq!(distribution_tsv(&report.distribution), r("synset_distribution.tsv"));

    let dir = tempfile::tempdir().unwrap();
    report.write_dir(dir.path()).unwrap();
    assert_eq!(read(dir.path().join("coverage.tsv")), r("coverage.tsv"));
    assert!(read(dir.path().join("report.html")).contains("<h2>Coverage</h2>"));
}

#[test]
fn transfer_plan_table() {
    let v = SynsetVocab::load(golden("vocab_min5.tsv")).unwrap();
    let ex = Extractor::new(db(), stopwords());
    let ds = DownstreamLabelSet::load(common::data_dir().join("sample_downstream_labels.txt"), &ex).unwrap();
    let plan = build_transfer_plan(&ds, &v, db(), 1.0).unwrap();
    assert_eq!(plan.to_tsv(), read(golden("transfer_plan_alpha1.tsv")));
    let rule = |label: &str| plan.entries.iter().find(|(l, _)| l == label).unwrap().1.clone();
    assert_eq!(rule("dog"), InitRule::Exact(v.class_of(db().first_sense("dog").unwrap()).unwrap()));
    let kitchen = |w: &str| v.class_of(db().first_sense(w).unwrap()).unwrap();
    let mut parts = vec![kitchen("restaurant"), kitchen("kitchen")];
    parts.sort_unstable();
    assert_eq!(rule("restaurant_kitchen"), InitRule::Average(parts));
    assert_eq!(rule("archaeological_excavation"), InitRule::Random);
}
