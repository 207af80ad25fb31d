//! Acceptance checks, one line per criterion.
//!
//! Criteria 1 and 2 need the GUM 9.1 `.rs3` files, which are not bundled:
//! point `RSTKIT_GUM_DIR` at the directory holding them and, for criterion 2,
//! `RSTKIT_GUM_SENTS` at a sentence-start file (`doc_id<TAB>starts`, token
//! indices into the toolkit's tokens). `RSTKIT_RSTDT_CANONICAL` optionally
//! names a canonical JSONL of RST-DT with `sents` filled in. Without the data
//! these criteria report NOT RUN, never PASS.

mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstkit::canonical::{attach_sentences, read_canonical, read_sentence_starts};
use rstkit::crf::{edus_to_labels, HashedWindowFeatures, Segmenter, TrainConfig};
use rstkit::decode::{decode, decode_scored, oracle_provider, tree_score, DecodeConfig};
use rstkit::dwa::{trajectory, DwaState};
use rstkit::eval::{corpus_stats, end_to_end_eval, genre_breakdown, parseval, Metric, Prf};
use rstkit::preprocess::{genre_from_file_name, load_rs3_dir, preprocess_corpus, DocMeta, PreprocessOptions, RemapTable};
use rstkit::{Corpus, DocumentRecord, Language, RstTree, Span, Split};

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

/// Collects failed expectations while a criterion runs.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(what);
        }
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.expect((value - target).abs() <= tol, format!("{name} {value:.3} (target {target} ± {tol})"));
    }

    fn finish(self) -> Outcome {
        if self.failed.is_empty() {
            Outcome::Pass(self.notes.join("; "))
        } else {
            Outcome::Fail(self.failed.join("; "))
        }
    }
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn meta(language: Language) -> impl FnMut(&str) -> DocMeta {
    move |stem| DocMeta { genre: genre_from_file_name(stem).unwrap_or_else(|| "unknown".into()), language, split: Split::Train }
}

fn load_gum() -> Option<Result<Vec<DocumentRecord>, String>> {
    let dir = env_path("RSTKIT_GUM_DIR")?;
    Some(load_rs3_dir(&dir, meta(Language::En)).map_err(|e| e.to_string()))
}

fn corpus_statistics() -> Outcome {
    let start = Instant::now();
    let docs = match load_gum() {
        None => return Outcome::NotRun("RSTKIT_GUM_DIR not set; GUM 9.1 .rs3 files are not bundled".into()),
        Some(Err(e)) => return Outcome::Fail(e),
        Some(Ok(d)) => d,
    };
    let stats = match corpus_stats(&docs) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut c = Checks::default();
    c.expect(stats.docs == 213, format!("docs {}", stats.docs));
    c.expect(stats.edus == 26319, format!("EDUs {}", stats.edus));
    c.within("EDUs/tree", stats.edus_per_tree(), 123.6, 0.1);
    c.within("relation pairs", stats.relation_pairs as f64, 26106.0, 300.0);
    c.within("median tokens/tree", stats.tokens_median, 989.0, 989.0 * 0.02);
    c.expect(elapsed < 30.0, format!("{elapsed:.1} s"));
    c.finish()
}

fn sentence_coverage() -> Outcome {
    let (mut docs, sents) = match (load_gum(), env_path("RSTKIT_GUM_SENTS")) {
        (None, _) => return Outcome::NotRun("RSTKIT_GUM_DIR not set; GUM 9.1 .rs3 files are not bundled".into()),
        (_, None) => return Outcome::NotRun("RSTKIT_GUM_SENTS not set; sentence boundaries are external inputs".into()),
        (Some(Err(e)), _) => return Outcome::Fail(e),
        (Some(Ok(d)), Some(s)) => (d, s),
    };
    let starts = match File::open(&sents)
        .map_err(|e| e.to_string())
        .and_then(|f| read_sentence_starts(BufReader::new(f)).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("{}: {e}", sents.display())),
    };
    match attach_sentences(&mut docs, &starts) {
        Ok(n) if n == docs.len() => {}
        Ok(n) => return Outcome::Fail(format!("sentence file covers {n} of {} documents", docs.len())),
        Err(e) => return Outcome::Fail(e.to_string()),
    }
    let mut c = Checks::default();
    let overall = corpus_stats(&docs).ok().and_then(|s| s.spanned);
    match overall {
        Some(s) => c.within("GUM overall", s.non_elementary_percent(), 72.5, 1.5),
        None => c.expect(false, "GUM coverage not computable"),
    }
    let targets: BTreeMap<&str, f64> = [
        ("academic", 72.0),
        ("bio", 61.1),
        ("conversation", 65.8),
        ("fiction", 70.4),
        ("interview", 71.4),
        ("news", 69.0),
        ("reddit", 73.0),
        ("speech", 85.8),
        ("textbook", 78.5),
        ("vlog", 75.3),
        ("voyage", 71.3),
        ("whow", 77.5),
    ]
    .into_iter()
    .collect();
    match genre_breakdown(&docs) {
        Ok(by_genre) => {
            for (genre, target) in &targets {
                match by_genre.get(*genre).and_then(|s| s.spanned) {
                    Some(s) => c.within(genre, s.non_elementary_percent(), *target, 1.5),
                    None => c.expect(false, format!("{genre} missing")),
                }
            }
        }
        Err(e) => c.expect(false, e.to_string()),
    }
    match env_path("RSTKIT_RSTDT_CANONICAL") {
        None => c.notes.push("RST-DT not available, GUM only".into()),
        Some(p) => {
            let covered = File::open(&p)
                .map_err(|e| e.to_string())
                .and_then(|f| read_canonical("rstdt", BufReader::new(f)).map_err(|e| e.to_string()))
                .and_then(|corpus| corpus_stats(&corpus.documents).map_err(|e| e.to_string()))
                .map(|s| s.spanned.map(|s| s.non_elementary_percent()));
            match covered {
                Ok(Some(v)) => c.within("RST-DT non-elementary", v, 79.4, 1.5),
                Ok(None) => c.expect(false, "RST-DT records lack sentence boundaries"),
                Err(e) => c.expect(false, e),
            }
        }
    }
    c.finish()
}

fn rrt_preprocessing() -> Outcome {
    // the bundled synthetic forest stands in for RRT unless real files are given
    let (dir, synthetic) = match env_path("RSTKIT_RRT_DIR") {
        Some(d) => (d, false),
        None => (fixture("rrt_forest"), true),
    };
    let run = || -> Result<Outcome, String> {
        let docs = load_rs3_dir(&dir, meta(Language::Ru)).map_err(|e| e.to_string())?;
        let corpus = Corpus::new("rrt", docs).map_err(|e| e.to_string())?;
        let options = PreprocessOptions { remap: Some(RemapTable::rrt_default()), drop_single_edu: true };
        let (out, report) = preprocess_corpus(corpus, &options).map_err(|e| e.to_string())?;
        let small = out.documents.iter().filter(|d| (2..=4).contains(&d.edus.len())).count();
        let share = 100.0 * small as f64 / out.len() as f64;
        let mut c = Checks::default();
        if synthetic {
            c.notes.push("synthetic forest fixture".into());
            c.expect(
                (report.documents_in, report.trees_extracted, report.single_edu_dropped, out.len(), small) == (10, 117, 23, 94, 12),
                format!(
                    "files {} trees {} single-EDU {} kept {} with 2-4 EDUs {}",
                    report.documents_in,
                    report.trees_extracted,
                    report.single_edu_dropped,
                    out.len(),
                    small
                ),
            );
        }
        c.within("2-4 EDU share %", share, 12.8, 0.5);
        c.within("trees/document", report.trees_per_document(), 11.7, 0.2);
        c.expect(report.histogram_after.len() == 24, format!("classes {}", report.histogram_after.len()));
        Ok(c.finish())
    };
    run().unwrap_or_else(Outcome::Fail)
}

fn parseval_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let inv = inventory();
    let mut c = Checks::default();
    let (mut mismatches, mut imperfect) = (0, 0);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let edus = random_edus(&mut rng, n, 4);
        let gold = RstTree::build(&random_desc(&mut rng, 0, n, &inv), &edus).unwrap();
        let pred = RstTree::build(&random_desc(&mut rng, 0, n, &inv), &edus).unwrap();
        if parseval(&gold, &pred).unwrap().matched != all_pairs_matches(&gold, &pred) {
            mismatches += 1;
        }
        let oracle = oracle_provider(&gold, &inv).unwrap();
        let decoded = decode(&edus, &oracle, &DecodeConfig::greedy(inv.clone())).unwrap();
        if parseval(&gold, &decoded).unwrap().score(Metric::Full).f1 != 100.0 {
            imperfect += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    c.expect(mismatches == 0, format!("1000 docs, {mismatches} matcher disagreements"));
    c.expect(imperfect == 0, format!("{imperfect} oracle decodes below Full 100"));
    c.expect(elapsed < 60.0, format!("{elapsed:.1} s"));
    c.finish()
}

fn decoder_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let inv = labels(&["elaboration_NS", "joint_NN", "attribution_SN"]);
    let (mut suboptimal, mut greedy_wins) = (0, 0);
    for _ in 0..500 {
        let n = rng.gen_range(2..=8);
        let p = RandomProvider::new(&mut rng, n, inv.len());
        let (best, _) = exhaustive_best(n, &p, &inv);
        let edus = Span::unit_edus(n);
        let (_, score) = decode_scored(&edus, &p, &DecodeConfig::beam(catalan(n - 1), inv.clone())).unwrap();
        if (score - best).abs() > 1e-9 {
            suboptimal += 1;
        }
        let greedy = decode(&edus, &p, &DecodeConfig::greedy(inv.clone())).unwrap();
        let width = rng.gen_range(1..=6);
        let beam = decode(&edus, &p, &DecodeConfig::beam(width, inv.clone())).unwrap();
        if tree_score(&greedy, &p, &inv).unwrap() > tree_score(&beam, &p, &inv).unwrap() {
            greedy_wins += 1;
        }
    }
    let mut c = Checks::default();
    c.expect(suboptimal == 0, format!("500 trials, {suboptimal} below the exhaustive optimum"));
    c.expect(greedy_wins == 0, format!("{greedy_wins} greedy > beam"));
    c.finish()
}

fn crf_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let mut c = Checks::default();
    let mut worst_logz: f64 = 0.0;
    for _ in 0..200 {
        let labels = rng.gen_range(2..=3);
        let len = rng.gen_range(1..=6);
        let m = random_model(&mut rng, labels, 4);
        let x = random_features(&mut rng, len, 4);
        worst_logz = worst_logz.max((m.log_partition(&x).unwrap() - brute_log_partition(&m, &x)).abs());
    }
    c.expect(worst_logz < 1e-10, format!("logZ max error {worst_logz:.1e}"));

    let h = 1e-5;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let labels = rng.gen_range(2..=3);
        let len = rng.gen_range(1..=6);
        let mut m = random_model(&mut rng, labels, 3);
        let x = random_features(&mut rng, len, 3);
        let gold: Vec<usize> = (0..len).map(|_| rng.gen_range(0..labels)).collect();
        let (_, grad) = m.log_likelihood(&x, &gold).unwrap();
        for block in 0..4 {
            for j in 0..grad.blocks()[block].len() {
                let orig = m.params.blocks()[block][j];
                m.params.blocks_mut()[block][j] = orig + h;
                let up = m.log_likelihood(&x, &gold).unwrap().0;
                m.params.blocks_mut()[block][j] = orig - h;
                let down = m.log_likelihood(&x, &gold).unwrap().0;
                m.params.blocks_mut()[block][j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grad.blocks()[block][j];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
                worst_grad = worst_grad.max(rel);
            }
        }
    }
    c.expect(worst_grad < 1e-4, format!("gradient max relative error {worst_grad:.1e}"));

    let docs = separable_docs(30, 4);
    let start = Instant::now();
    let cfg = TrainConfig { epochs: 200, ..TrainConfig::default() };
    let (seg, _) = Segmenter::train(&docs, HashedWindowFeatures { bits: 10 }, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let (mut right, mut total) = (0, 0);
    for d in &docs {
        let labels = seg.segment(&d.tokens).unwrap();
        let gold = edus_to_labels(&d.edus, d.tokens.len());
        right += labels.iter().zip(&gold).filter(|(a, b)| a == b).count();
        total += gold.len();
    }
    c.expect(right == total, format!("separable training accuracy {right}/{total}"));
    c.expect(elapsed < 10.0, format!("training {elapsed:.1} s"));
    c.finish()
}

/// Three decaying task losses with i.i.d. multiplicative noise.
fn noisy_stream(steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [2.0, 1.0, 0.5];
    let decay = [0.01, 0.003, 0.02];
    (0..steps).map(|i| (0..3).map(|k| base[k] * (-decay[k] * i as f64).exp() * rng.gen_range(0.6..1.4)).collect()).collect()
}

fn variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

fn dwa_checks() -> Outcome {
    let mut c = Checks::default();

    let mut exact = true;
    for (k, b) in [(2, 1), (3, 12), (7, 4)] {
        let stream = vec![vec![0.7; k]; 3 * b + 5];
        for (i, w) in trajectory(&stream, b, 2.0).unwrap().iter().enumerate() {
            exact &= i < 2 * b || w.iter().all(|&x| x == 1.0);
        }
    }
    c.expect(exact, "constant losses give all-ones weights exactly");

    let stream = noisy_stream(600, 31);
    let mut sum_ok = true;
    for b in [1, 3, 12] {
        for w in trajectory(&stream, b, 2.0).unwrap() {
            sum_ok &= (w.iter().sum::<f64>() - 3.0).abs() < 1e-12;
        }
    }
    c.expect(sum_ok, "weights sum to K within 1e-12");

    // replay a logged stream through the text form a training run would write
    let log: String = stream[..80].iter().map(|r| format!("{},{},{}\n", r[0], r[1], r[2])).collect();
    let replayed: Vec<Vec<f64>> = log.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let mut state = DwaState::new(3, 1, 2.0).unwrap();
    let mut bit_exact = true;
    for (i, row) in replayed.iter().enumerate() {
        if i >= 2 {
            let rates = state.rates().unwrap();
            for k in 0..3 {
                bit_exact &= rates[k].to_bits() == (replayed[i - 1][k] / replayed[i - 2][k]).to_bits();
            }
        }
        state.update(row).unwrap();
    }
    c.expect(bit_exact, "b=1 ratios bit-exact on replayed log");

    let first = |b: usize| -> Vec<f64> { trajectory(&stream, b, 2.0).unwrap().iter().skip(24).map(|w| w[0]).collect() };
    let (wide, narrow) = (variance(&first(12)), variance(&first(1)));
    c.expect(wide < narrow, format!("variance b=12 {wide:.2e} < b=1 {narrow:.2e}"));
    c.finish()
}

/// Parses `100`, `75` or `200/3`.
fn fraction(s: &str) -> f64 {
    match s.split_once('/') {
        Some((a, b)) => a.parse::<f64>().unwrap() / b.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

fn eval_fixtures() -> Outcome {
    let run = || -> Result<Outcome, String> {
        let read = |name: &str| -> Result<BTreeMap<String, DocumentRecord>, String> {
            let f = File::open(fixture(&format!("eval_cases/{name}"))).map_err(|e| e.to_string())?;
            let corpus = read_canonical(name, BufReader::new(f)).map_err(|e| e.to_string())?;
            Ok(corpus.documents.into_iter().map(|d| (d.id.clone(), d)).collect())
        };
        let (gold, pred) = (read("gold.jsonl")?, read("pred.jsonl")?);
        let expected = std::fs::read_to_string(fixture("eval_cases/expected.tsv")).map_err(|e| e.to_string())?;
        let mut c = Checks::default();
        let mut rows = 0;
        for line in expected.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            let (case, metric) = (f[0], f[1]);
            let counts: Vec<usize> = f[2..5].iter().map(|v| v.parse().unwrap()).collect();
            let want = Prf { precision: fraction(f[5]), recall: fraction(f[6]), f1: fraction(f[7]) };
            let (g, p) = (&gold[case], &pred[case]);
            let (seg, e2e) = end_to_end_eval(g, &p.edus, p.tree.as_ref().unwrap()).map_err(|e| e.to_string())?;
            let (got_counts, got) = if metric == "Seg" {
                (vec![seg.matched, seg.gold, seg.predicted], seg.score())
            } else {
                let m: Metric = metric.parse().map_err(|_| format!("bad metric {metric}"))?;
                (vec![e2e.matched(m), e2e.gold, e2e.predicted], e2e.score(m))
            };
            let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
            c.expect(
                got_counts == counts && close(got.precision, want.precision) && close(got.recall, want.recall) && close(got.f1, want.f1),
                format!("{case} {metric}: {got_counts:?} P {:.4} R {:.4} F {:.4}", got.precision, got.recall, got.f1),
            );
            rows += 1;
        }
        let cases: std::collections::BTreeSet<&str> =
            expected.lines().filter(|l| !l.starts_with('#')).filter_map(|l| l.split('\t').next()).collect();
        c.expect(cases.len() == 6 && rows == 30, format!("{} cases, {rows} rows", cases.len()));
        if c.failed.is_empty() {
            c.notes = vec![format!(
                "{} fixture cases match hand counts; published parser F1 (e.g. RST-DT end-to-end Full 53.0) needs a fine-tuned \
                 multilingual LM and is NOT reproducible here, the harness is validated by criteria 4-5 and these fixtures",
                cases.len()
            )];
        }
        Ok(c.finish())
    };
    run().unwrap_or_else(Outcome::Fail)
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("corpus statistics", corpus_statistics),
        ("spanned-sentence coverage", sentence_coverage),
        ("RRT preprocessing", rrt_preprocessing),
        ("Parseval oracle equivalence", parseval_oracle),
        ("decoder optimality", decoder_optimality),
        ("CRF correctness", crf_correctness),
        ("DWA weighting", dwa_checks),
        ("evaluation fixtures", eval_fixtures),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::NotRun(d) => ("NOT RUN", d),
        };
        println!("criterion {} {name}: {tag} ({secs:.1} s) {detail}", i + 1);
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
