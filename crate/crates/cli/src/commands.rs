use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use catlip_core::benchmark::{Benchmark, BenchmarkConfig};
use catlip_core::experiment::{transfer_vs_random, ExperimentConfig, DEFAULT_FRACTIONS};
use catlip_core::overlap::{samples_per_synset, synset_distribution, vocab_size_sweep, DEFAULT_ALPHAS, DEFAULT_V_TAUS};
use catlip_core::report::AnalysisReport;
use catlip_core::trainer::{EmptyLabelPolicy, Metrics};
use catlip_core::transfer::random_rows;
use catlip_core::vocab::count_corpus;
use catlip_core::{
    build_transfer_plan, evaluate, materialize, overlap_sweep, prune, train_linear, DownstreamLabelSet, EmbeddingMatrix,
    Extractor, FeatureDataset, LabelEncoder, LinearHead, StopWords, SynsetCounts, SynsetVocab, TrainConfig, WordNetDb,
};

use crate::manifest::RunManifest;
use crate::{Cli, Command, Lexicon, UsageError};

const WORDNET_FILES: [&str; 3] = ["index.noun", "data.noun", "noun.exc"];
const BENCHMARK_FILES: [&str; 9] = [
    "benchmark.json",
    "vocab.tsv",
    "probe_labels.txt",
    "pretrain.fea",
    "pretrain.jsonl",
    "probe_train.fea",
    "probe_train.jsonl",
    "probe_test.fea",
    "probe_test.jsonl",
];

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_lexicon(lex: &Lexicon, m: &mut RunManifest) -> Result<(WordNetDb, StopWords)> {
    m.flag("wordnet-dir", lex.wordnet_dir.display());
    m.inputs_in(&lex.wordnet_dir, &WORDNET_FILES)?;
    let db = WordNetDb::load_dir(&lex.wordnet_dir)?;
    let sw = match &lex.stopwords {
        Some(p) => {
            m.flag("stopwords", p.display());
            m.input(p)?;
            StopWords::load(p)?
        }
        None => StopWords::english(),
    };
    Ok((db, sw))
}

fn load_vocab(path: &Path, m: &mut RunManifest) -> Result<SynsetVocab> {
    m.flag("vocab", path.display());
    m.input(path)?;
    Ok(SynsetVocab::load(path)?)
}

pub fn run(cli: Cli) -> Result<()> {
    let manifest_override = cli.manifest;
    let (m, default_manifest) = match cli.command {
        Command::VocabBuild {
            captions,
            lexicon,
            min_count,
            out,
            counts_out,
            jobs,
            strict_unigram,
        } => {
            let mut m = RunManifest::start("vocab-build");
            m.flag("captions", captions.display());
            m.flag("min-count", min_count);
            m.flag("out", out.display());
            m.flag("jobs", jobs);
            m.flag("strict-unigram", strict_unigram);
            m.input(&captions)?;
            let (db, sw) = load_lexicon(&lexicon, &mut m)?;
            let ex = Extractor::new(&db, &sw).strict_unigram(strict_unigram);
            let counts = count_corpus(&captions, &ex, jobs)?;
            if let Some(p) = &counts_out {
                m.flag("counts-out", p.display());
                counts.save(p)?;
                m.output(p);
            }
            let vocab = prune(&counts, min_count, &db)?;
            vocab.save(&out)?;
            m.output(&out);
            eprintln!(
                "{} captions, {} distinct synsets, {} classes above {min_count}",
                counts.captions_processed,
                counts.len(),
                vocab.len()
            );
            (m, with_suffix(&out, ".manifest.json"))
        }
        Command::LabelEncode {
            captions,
            vocab,
            lexicon,
            out,
            jobs,
        } => {
            let mut m = RunManifest::start("label-encode");
            m.flag("captions", captions.display());
            m.flag("out", out.display());
            m.flag("jobs", jobs);
            m.input(&captions)?;
            let vocab = load_vocab(&vocab, &mut m)?;
            let (db, sw) = load_lexicon(&lexicon, &mut m)?;
            let encoder = LabelEncoder::new(&vocab, Extractor::new(&db, &sw))?;
            let summary = encoder.encode_corpus(&captions, &out, jobs)?;
            m.output(&out);
            print!("{}", summary.to_tsv());
            (m, with_suffix(&out, ".manifest.json"))
        }
        Command::AnalyzeOverlap {
            labels_file,
            vocab,
            counts,
            lexicon,
            thresholds,
            v_tau_grid,
            samples_alpha,
            report_dir,
        } => {
            let mut m = RunManifest::start("analyze-overlap");
            let thresholds = if thresholds.is_empty() { DEFAULT_ALPHAS.to_vec() } else { thresholds };
            let grid = if v_tau_grid.is_empty() { DEFAULT_V_TAUS.to_vec() } else { v_tau_grid };
            m.flag("labels-file", labels_file.display());
            m.flag("counts", counts.display());
            m.flag("thresholds", join(&thresholds));
            m.flag("v-tau-grid", join(&grid));
            m.flag("samples-alpha", samples_alpha);
            m.flag("report-dir", report_dir.display());
            m.input(&labels_file)?;
            m.input(&counts)?;
            let vocab = load_vocab(&vocab, &mut m)?;
            let counts = SynsetCounts::load(&counts)?;
            let (db, sw) = load_lexicon(&lexicon, &mut m)?;
            vocab.check_provenance(db.version(), sw.hash())?;
            vocab.check_provenance(&counts.wordnet_version, &counts.stopword_hash)?;
            let ex = Extractor::new(&db, &sw);
            let downstream = DownstreamLabelSet::load(&labels_file, &ex)?;
            let overlap = overlap_sweep(&vocab, &downstream, &db, &thresholds)?;
            let report = AnalysisReport {
                samples: samples_per_synset(&counts, &overlap, samples_alpha),
                vocab_sizes: vocab_size_sweep(&counts, &grid),
                distribution: synset_distribution(&counts, &db)?,
                overlap,
            };
            report.write_dir(&report_dir)?;
            m.output(&report_dir);
            print!("{}", report.overlap.coverage_tsv());
            let unresolved = downstream.unresolved();
            if !unresolved.is_empty() {
                eprintln!("unresolved labels: {}", unresolved.join(", "));
            }
            (m, report_dir.join("manifest.json"))
        }
        Command::TransferInit {
            labels_file,
            vocab,
            embeddings,
            lexicon,
            alpha,
            seed,
            random_scale,
            out,
            plan_out,
            tsv_out,
        } => {
            let mut m = RunManifest::start("transfer-init");
            let plan_out = plan_out.unwrap_or_else(|| with_suffix(&out, ".plan.tsv"));
            m.flag("labels-file", labels_file.display());
            m.flag("embeddings", embeddings.display());
            m.flag("alpha", alpha);
            m.flag("seed", seed);
            m.flag("random-scale", random_scale);
            m.flag("out", out.display());
            m.flag("plan-out", plan_out.display());
            m.input(&labels_file)?;
            m.input(&embeddings)?;
            let vocab = load_vocab(&vocab, &mut m)?;
            let (db, sw) = load_lexicon(&lexicon, &mut m)?;
            vocab.check_provenance(db.version(), sw.hash())?;
            let downstream = DownstreamLabelSet::load(&labels_file, &Extractor::new(&db, &sw))?;
            let plan = build_transfer_plan(&downstream, &vocab, &db, alpha)?;
            let pretrained = EmbeddingMatrix::load(&embeddings)?;
            let matrix = materialize(&plan, &pretrained, seed, random_scale)?;
            matrix.save(&out)?;
            m.output(&out);
            fs::write(&plan_out, plan.to_tsv()).with_context(|| format!("writing {}", plan_out.display()))?;
            m.output(&plan_out);
            if let Some(p) = &tsv_out {
                fs::write(p, matrix.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
                m.output(p);
            }
            eprintln!("{} labels, {} initialized randomly", plan.len(), plan.random_count());
            (m, with_suffix(&out, ".manifest.json"))
        }
        Command::Train {
            features,
            labels,
            init,
            classes,
            vocab,
            epochs,
            lr,
            batch,
            weight_decay,
            seed,
            random_scale,
            empty_labels,
            threads,
            eval_features,
            eval_labels,
            out,
            metrics_out,
        } => {
            let mut m = RunManifest::start("train");
            let empty = match empty_labels.as_str() {
                "skip" => EmptyLabelPolicy::Skip,
                "all-negative" => EmptyLabelPolicy::AllNegative,
                other => return Err(usage(format!("--empty-labels must be skip or all-negative, not {other:?}"))),
            };
            for (k, v) in [
                ("features", features.display().to_string()),
                ("labels", labels.display().to_string()),
                ("init", init.clone()),
                ("epochs", epochs.to_string()),
                ("lr", lr.to_string()),
                ("batch", batch.to_string()),
                ("weight-decay", weight_decay.to_string()),
                ("seed", seed.to_string()),
                ("random-scale", random_scale.to_string()),
                ("empty-labels", empty_labels.clone()),
                ("threads", threads.to_string()),
                ("out", out.display().to_string()),
                ("metrics-out", metrics_out.display().to_string()),
            ] {
                m.flag(k, v);
            }
            m.input(&features)?;
            m.input(&labels)?;
            let vocab = vocab.map(|p| load_vocab(&p, &mut m)).transpose()?;

            let transfer = match init.as_str() {
                "random" => None,
                s => match s.strip_prefix("transfer:") {
                    Some(p) if !p.is_empty() => {
                        let p = PathBuf::from(p);
                        m.input(&p)?;
                        Some(EmbeddingMatrix::load(&p)?)
                    }
                    _ => return Err(usage(format!("--init must be random or transfer:<file>, not {s:?}"))),
                },
            };
            let k = match (&transfer, &vocab, classes) {
                (Some(t), _, _) => t.rows(),
                (None, Some(v), _) => v.len(),
                (None, None, Some(k)) => k,
                (None, None, None) => return Err(usage("random init needs --classes or --vocab")),
            };
            if let Some(v) = &vocab {
                if v.len() != k {
                    bail!(catlip_core::Error::Dimension(format!("vocabulary has {} classes, head has {k}", v.len())));
                }
            }
            let data = FeatureDataset::load(&features, &labels, k)?;
            let init_head = match &transfer {
                Some(t) => LinearHead::from_embedding(t),
                None => LinearHead::from_embedding(&EmbeddingMatrix::new(
                    k,
                    data.dim(),
                    random_rows(k, data.dim(), seed, random_scale),
                    [0; 32],
                )?),
            };
            let cfg = TrainConfig {
                epochs,
                batch_size: batch,
                learning_rate: lr,
                weight_decay,
                seed,
                empty_labels: empty,
                threads,
            };
            let outcome = train_linear(&data, &init_head, &cfg)?;
            let provenance = match (&vocab, &transfer) {
                (Some(v), _) => v.hash(),
                (None, Some(t)) => t.provenance,
                (None, None) => [0; 32],
            };
            outcome.head.to_embedding(provenance)?.save(&out)?;
            m.output(&out);
            let bias_path = with_suffix(&out, ".bias.tsv");
            let bias: String = outcome.head.bias.iter().enumerate().map(|(k, b)| format!("{k}\t{b:?}\n")).collect();
            fs::write(&bias_path, bias).with_context(|| format!("writing {}", bias_path.display()))?;
            m.output(&bias_path);

            let metrics = match (&eval_features, &eval_labels) {
                (Some(f), Some(l)) => {
                    m.input(f)?;
                    m.input(l)?;
                    evaluate(&outcome.head, &FeatureDataset::load(f, l, k)?)?
                }
                _ => evaluate(&outcome.head, &data)?,
            };
            let text = metrics_tsv(&metrics, &outcome.losses);
            fs::write(&metrics_out, &text).with_context(|| format!("writing {}", metrics_out.display()))?;
            m.output(&metrics_out);
            print!("{}", text.lines().take(4).map(|l| format!("{l}\n")).collect::<String>());
            (m, with_suffix(&out, ".manifest.json"))
        }
        Command::ExperimentTransfer {
            benchmark,
            lexicon,
            fractions,
            seeds,
            epochs,
            lr,
            batch,
            alpha,
            jobs,
            report_dir,
        } => {
            let mut m = RunManifest::start("experiment-transfer");
            let fractions = if fractions.is_empty() { DEFAULT_FRACTIONS.to_vec() } else { fractions };
            m.flag("benchmark", benchmark.display());
            m.flag("fractions", join(&fractions));
            m.flag("seeds", seeds);
            m.flag("epochs", epochs);
            m.flag("lr", lr);
            m.flag("batch", batch);
            m.flag("alpha", alpha);
            m.flag("jobs", jobs);
            m.flag("report-dir", report_dir.display());
            m.inputs_in(&benchmark, &BENCHMARK_FILES)?;
            let (db, sw) = load_lexicon(&lexicon, &mut m)?;
            let bench = Benchmark::load(&benchmark)?;
            let train = TrainConfig {
                epochs,
                batch_size: batch,
                learning_rate: lr,
                ..TrainConfig::default()
            };
            let cfg = ExperimentConfig {
                fractions,
                seeds,
                pretrain: train.clone(),
                probe: train,
                alpha,
                jobs,
                ..ExperimentConfig::default()
            };
            let report = transfer_vs_random(&bench, &Extractor::new(&db, &sw), &cfg)?;
            fs::create_dir_all(&report_dir).with_context(|| format!("creating {}", report_dir.display()))?;
            let loss: String = report
                .pretrain_losses
                .iter()
                .enumerate()
                .fold(String::from("epoch\tloss\n"), |mut s, (e, l)| {
                    let _ = writeln!(s, "{e}\t{l:.9}");
                    s
                });
            let steps = report.gap_steps();
            let checks = format!(
                "check\tpass\ntransfer_at_least_random_at_smallest_fraction\t{}\ngap_shrinks_within_noise\t{}\n",
                report.transfer_wins_smallest(),
                steps.iter().all(|&s| s)
            );
            for (name, body) in [
                ("summary.tsv", report.to_tsv()),
                ("runs.tsv", report.runs_tsv()),
                ("plan.tsv", report.plan.to_tsv()),
                ("pretrain_loss.tsv", loss),
                ("checks.tsv", checks.clone()),
            ] {
                let p = report_dir.join(name);
                fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
                m.output(&p);
            }
            print!("{}{}", report.to_tsv(), checks);
            (m, report_dir.join("manifest.json"))
        }
        Command::MakeBenchmark {
            vocab,
            lexicon,
            seed,
            dim,
            noise,
            pretrain_samples,
            probe_classes,
            probe_train_per_class,
            probe_test_per_class,
            out,
        } => {
            let mut m = RunManifest::start("make-benchmark");
            let config = BenchmarkConfig {
                seed,
                dim,
                noise,
                pretrain_samples,
                probe_classes,
                probe_train_per_class,
                probe_test_per_class,
                ..BenchmarkConfig::default()
            };
            for (k, v) in serde_json::to_value(&config)?.as_object().expect("config is an object") {
                m.flag(&k.replace('_', "-"), v);
            }
            m.flag("out", out.display());
            let vocab = load_vocab(&vocab, &mut m)?;
            let (db, sw) = load_lexicon(&lexicon, &mut m)?;
            let bench = Benchmark::generate(&vocab, &Extractor::new(&db, &sw), &config)?;
            bench.save(&out)?;
            m.output(&out);
            eprintln!(
                "{} pre-training samples over {} classes, {} probe classes",
                bench.pretrain.len(),
                bench.vocab.len(),
                bench.probe_labels.len()
            );
            (m, out.join("manifest.json"))
        }
    };
    let path = manifest_override.unwrap_or(default_manifest);
    m.finish(&path)?;
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn metrics_tsv(metrics: &Metrics, losses: &[f64]) -> String {
    let mut s = metrics.to_tsv();
    if let Some(last) = losses.last() {
        let _ = writeln!(s, "final_loss\t{last:.9}");
    }
    for (e, l) in losses.iter().enumerate() {
        let _ = writeln!(s, "loss_epoch_{e}\t{l:.9}");
    }
    s
}

