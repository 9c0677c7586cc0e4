//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.
//!
//! `cargo test -p catlip-core --test acceptance`

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use catlip_core::benchmark::Benchmark;
use catlip_core::corpus::read_captions;
use catlip_core::experiment::{transfer_vs_random, ExperimentConfig};
use catlip_core::overlap::{samples_per_synset, synset_distribution, vocab_size_sweep, DEFAULT_ALPHAS, DEFAULT_V_TAUS};
use catlip_core::report::{distribution_tsv, vocab_size_tsv, AnalysisReport};
use catlip_core::trainer::{bce_with_logits, EmptyLabelPolicy};
use catlip_core::transfer::{random_rows, DEFAULT_RANDOM_SCALE};
use catlip_core::vocab::{count_records, count_sharded, vocab_size};
use catlip_core::*;
use common::{db, golden, read, stopwords};

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn captions() -> Vec<CaptionRecord> {
    read_captions(common::data_dir().join("sample_captions.jsonl")).unwrap()
}

fn sample_counts() -> SynsetCounts {
    count_records(&captions(), &Extractor::new(db(), stopwords()))
}

fn wordnet_load() -> Outcome {
    let start = Instant::now();
    let fresh = WordNetDb::load_dir(common::wordnet_dir()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();

    // Every record line starts with its own byte offset.
    let raw = read(common::wordnet_dir().join("data.noun"));
    let mut records = 0;
    let mut pos = 0;
    for line in raw.split_inclusive('\n') {
        if !line.starts_with("  ") {
            let offset: usize = line[..8].parse().map_err(|_| format!("bad offset field at byte {pos}"))?;
            ensure!(offset == pos, "record at byte {pos} claims offset {offset}");
            records += 1;
        }
        pos += line.len();
    }
    ensure!(records == 82_115, "raw file has {records} records");
    ensure!(fresh.synset_count() == records, "parsed {} synsets, raw count {records}", fresh.synset_count());

    let dangling = fresh.synsets().flat_map(|s| &s.hypernyms).filter(|h| !fresh.contains(**h)).count()
        + fresh.lemma_entries().flat_map(|(_, s)| s).filter(|s| !fresh.contains(**s)).count();
    ensure!(dangling == 0, "{dangling} dangling references");
    ensure!(fresh.topological_order().len() == records, "hypernym graph has a cycle");
    ensure!(secs < 10.0, "load took {secs:.2} s");
    Ok(format!("{records} synsets, 0 dangling, acyclic, loaded in {secs:.2} s"))
}

fn path_similarity() -> Outcome {
    let db = db();
    for (a, _) in common::random_synset_pairs(db, 1000, 1) {
        ensure!(db.path_similarity(a, a).unwrap() == Some(1.0), "identity fails for {a}");
    }
    for (a, b) in common::random_synset_pairs(db, 1000, 2) {
        ensure!(db.path_similarity(a, b).unwrap() == db.path_similarity(b, a).unwrap(), "asymmetric on {a} {b}");
    }
    for (a, b) in common::random_synset_pairs(db, 200, 3) {
        let fast = db.path_similarity(a, b).unwrap().map(f64::to_bits);
        let slow = common::naive_similarity(db, a, b).map(f64::to_bits);
        ensure!(fast == slow, "{a} {b}: {fast:?} vs naive {slow:?}");
    }
    let (dog, cat) = (db.first_sense("dog").unwrap(), db.first_sense("cat").unwrap());
    let s = db.path_similarity(dog, cat).unwrap();
    ensure!(s == Some(0.2), "dog/cat = {s:?}");
    Ok("identity and symmetry on 1000 pairs, 200 pairs bit-exact with BFS, dog/cat = 0.2".into())
}

fn extraction() -> Outcome {
    let ex = Extractor::new(db(), stopwords());
    let records = captions();
    let expected: Vec<serde_json::Value> =
        read(golden("sample_extractions.jsonl")).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    ensure!(records.len() == 1000 && expected.len() == 1000, "{} captions, {} reference rows", records.len(), expected.len());
    for (r, e) in records.iter().zip(&expected) {
        let got: Vec<String> = ex.extract_synsets(r).iter().map(|s| s.to_string()).collect();
        let want: Vec<String> = e["synsets"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
        ensure!(e["id"] == r.sample_id.as_str() && got == want, "caption {}: {got:?} vs {want:?}", r.sample_id);
    }
    let sample = common::plural_sample(db(), stopwords(), 100, 5);
    ensure!(sample.len() == 100, "only {} plural candidates", sample.len());
    for l in &sample {
        let singular = ex.extract_text(l);
        ensure!(!singular.is_empty() && ex.extract_text(&format!("{l}s")) == singular, "plural of {l} differs");
    }
    Ok("1000 captions match the reference extraction, 100 plurals invariant".into())
}

fn vocabulary() -> Outcome {
    let ex = Extractor::new(db(), stopwords());
    let records = captions();
    let one = count_sharded(&records, &ex, 1);
    let eight = count_sharded(&records, &ex, 8);
    ensure!(one == eight && one.to_tsv().as_bytes() == eight.to_tsv().as_bytes(), "1 vs 8 shards differ");

    let first = |w: &str| db().first_sense(w).unwrap();
    let mut c = SynsetCounts::for_extractor(&ex);
    c.counts = [(first("dog"), 4), (first("cat"), 5), (first("box"), 6)].into_iter().collect();
    let kept = |tau| prune(&c, tau, db()).unwrap().synsets();
    ensure!(kept(5) == [first("box")], "tau 5 keeps {:?}", kept(5));
    ensure!(kept(4) == [first("box"), first("cat")], "tau 4 keeps {:?}", kept(4));
    ensure!(kept(3).len() == 3 && kept(6).is_empty(), "tau 3 or 6 wrong");
    ensure!((0..8).all(|t| vocab_size(&c, t) == kept(t).len()), "vocab_size disagrees with prune");

    let sweep = vocab_size_sweep(&one, &DEFAULT_V_TAUS);
    ensure!(sweep.windows(2).all(|w| w[1].1 <= w[0].1), "K increases somewhere in {sweep:?}");
    let ks: Vec<String> = sweep.iter().map(|(t, k)| format!("{t}:{k}")).collect();
    Ok(format!("shards bit-equal, strict pruning cases hold, K over grid {}", ks.join(" ")))
}

fn overlap() -> Outcome {
    let counts = sample_counts();
    let vocab = prune(&counts, 5, db()).unwrap();
    let ex = Extractor::new(db(), stopwords());
    let ds = DownstreamLabelSet::load(common::data_dir().join("sample_downstream_labels.txt"), &ex).unwrap();
    let overlap = overlap_sweep(&vocab, &ds, db(), &DEFAULT_ALPHAS).unwrap();
    let cov = &overlap.coverage;
    ensure!(cov.windows(2).all(|w| w[1].matched <= w[0].matched), "coverage not monotone");
    let members: BTreeSet<SynsetId> = vocab.synsets().into_iter().collect();
    let literal = ds.labels.iter().filter(|l| l.synsets.iter().any(|s| members.contains(s))).count();
    let at_one = cov.iter().find(|r| r.alpha == 1.0).unwrap().clone();
    ensure!(at_one.matched == literal, "alpha 1 matched {} but literal membership {literal}", at_one.matched);

    let report = AnalysisReport {
        samples: samples_per_synset(&counts, &overlap, 1.0),
        vocab_sizes: vocab_size_sweep(&counts, &DEFAULT_V_TAUS),
        distribution: synset_distribution(&counts, db()).unwrap(),
        overlap,
    };
    let tables = [
        ("coverage.tsv", report.overlap.coverage_tsv()),
        ("labels.tsv", report.overlap.labels_tsv()),
        ("unresolved.txt", report.overlap.unresolved_txt()),
        ("samples_per_synset.tsv", report.samples.rows_tsv()),
        ("samples_histogram.tsv", report.samples.histogram_tsv()),
        ("samples_quantiles.tsv", report.samples.quantiles_tsv()),
        ("vocab_size.tsv", vocab_size_tsv(&report.vocab_sizes)),
        ("synset_distribution.tsv", distribution_tsv(&report.distribution)),
    ];
    for (name, got) in &tables {
        ensure!(*got == read(golden(&format!("report/{name}"))), "{name} differs from golden");
    }
    let trend: Vec<String> = report.overlap.coverage.iter().map(|r| format!("{}:{}", r.alpha, r.matched)).collect();
    Ok(format!("coverage {} of {}, literal at 1.0, {} golden tables equal", trend.join(" "), at_one.total, tables.len()))
}

fn transfer() -> Outcome {
    let vocab = SynsetVocab::load(golden("vocab_min5.tsv")).unwrap();
    let ex = Extractor::new(db(), stopwords());
    let ds = DownstreamLabelSet::load(common::data_dir().join("sample_downstream_labels.txt"), &ex).unwrap();
    let plan = build_transfer_plan(&ds, &vocab, db(), 1.0).unwrap();
    let dim = 16;
    let pre = EmbeddingMatrix::new(vocab.len(), dim, random_rows(vocab.len(), dim, 99, 1.0), vocab.hash()).unwrap();
    let out = materialize(&plan, &pre, 7, DEFAULT_RANDOM_SCALE).unwrap();

    let (mut exact, mut average) = (0, 0);
    for (i, ((label, _), l)) in plan.entries.iter().zip(&ds.labels).enumerate() {
        ensure!(*label == l.label, "plan order differs from label order at {i}");
        // Class set from literal membership, independent of the plan.
        let classes: Option<BTreeSet<usize>> = l.synsets.iter().map(|s| vocab.class_of(*s)).collect();
        match classes {
            Some(cs) if cs.len() == 1 => {
                let k = *cs.first().unwrap();
                let same = out.row(i).iter().zip(pre.row(k)).all(|(a, b)| a.to_bits() == b.to_bits());
                ensure!(same, "{label}: row is not a bit copy of class {k}");
                exact += 1;
            }
            Some(cs) if !cs.is_empty() => {
                for j in 0..dim {
                    let mean = cs.iter().map(|&k| f64::from(pre.row(k)[j])).sum::<f64>() / cs.len() as f64;
                    ensure!(out.row(i)[j] == mean as f32, "{label}: column {j} is not the mean of {cs:?}");
                }
                average += 1;
            }
            _ => {}
        }
    }
    ensure!(exact > 0 && average > 0, "sample plan lacks exact or average rows");
    let again = materialize(&plan, &pre, 7, DEFAULT_RANDOM_SCALE).unwrap();
    ensure!(again.to_bytes() == out.to_bytes(), "same seed gave different bytes");
    if plan.random_count() > 0 {
        let other = materialize(&plan, &pre, 8, DEFAULT_RANDOM_SCALE).unwrap();
        ensure!(other.to_bytes() != out.to_bytes(), "seed has no effect on random rows");
    }

    // Labels drawn from the vocabulary: every resolved synset is a class.
    let inside: Vec<&str> = vocab
        .classes()
        .iter()
        .map(|c| c.lemma.as_str())
        .filter(|l| {
            let r = catlip_core::overlap::resolve_label(l, &ex);
            !r.synsets.is_empty() && r.synsets.iter().all(|s| vocab.class_of(*s).is_some())
        })
        .collect();
    let subset = DownstreamLabelSet::resolve(&inside, &ex);
    let sub_plan = build_transfer_plan(&subset, &vocab, db(), 1.0).unwrap();
    ensure!(sub_plan.random_count() == 0, "{} random rules for in-vocabulary labels", sub_plan.random_count());
    Ok(format!(
        "{exact} exact and {average} average rows verified, seed deterministic, 0 random over {} in-vocabulary labels",
        inside.len()
    ))
}

fn trainer() -> Outcome {
    for k in [1, 3, 10] {
        for ones in 0..=k {
            let y: Vec<f64> = (0..k).map(|i| (i < ones) as u8 as f64).collect();
            let l = bce_with_logits(&vec![0.0; k], &y).unwrap();
            ensure!((l - std::f64::consts::LN_2).abs() <= 1e-9, "BCE(0) = {l}");
        }
    }
    let worst = common::worst_gradient_error(100, 42);
    ensure!(worst < 1e-5, "gradient relative error {worst:e}");

    let toy = common::separable_toy(1);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 16,
        learning_rate: 5.0,
        empty_labels: EmptyLabelPolicy::AllNegative,
        ..TrainConfig::default()
    };
    let a = train_linear(&toy, &LinearHead::zeros(2, 2), &cfg).unwrap();
    let b = train_linear(&toy, &LinearHead::zeros(2, 2), &cfg).unwrap();
    ensure!(a == b, "training is not deterministic");
    let last = *a.losses.last().unwrap();
    ensure!(last < 0.05, "separable toy final loss {last}");
    Ok(format!("BCE(0) = ln 2, max FD relative error {worst:.1e}, deterministic, toy loss {last:.4}"))
}

fn experiment() -> Outcome {
    let start = Instant::now();
    let bench = Benchmark::load(common::data_dir().join("benchmark")).map_err(|e| e.to_string())?;
    let ex = Extractor::new(db(), stopwords());
    let report = transfer_vs_random(&bench, &ex, &ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let gaps: Vec<String> = report.cells.iter().map(|c| format!("{}:{:+.2}", c.fraction, c.gap())).collect();
    let smallest = &report.cells[0];
    ensure!(smallest.fraction == 0.01, "smallest fraction is {}", smallest.fraction);
    ensure!(smallest.transfer.len() == 5, "{} seeds", smallest.transfer.len());
    ensure!(
        report.transfer_wins_smallest(),
        "transfer {:.2} < random {:.2} at 1%",
        smallest.transfer_stats().0,
        smallest.random_stats().0
    );
    let steps = report.gap_steps();
    ensure!(steps.iter().all(|&s| s), "gap grows beyond noise: steps {steps:?}, gaps {}", gaps.join(" "));
    ensure!(secs < 300.0, "experiment took {secs:.1} s");
    Ok(format!(
        "top-1 at 1%: transfer {:.2} vs random {:.2}; gaps {}; {secs:.1} s",
        smallest.transfer_stats().0,
        smallest.random_stats().0,
        gaps.join(" ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("WordNet load", wordnet_load),
        ("path similarity", path_similarity),
        ("caption extraction", extraction),
        ("vocabulary pruning", vocabulary),
        ("overlap analysis", overlap),
        ("transfer init", transfer),
        ("trainer", trainer),
        ("transfer vs random experiment", experiment),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
