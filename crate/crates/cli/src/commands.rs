use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use rstkit::canonical::{attach_sentences, read_sentence_starts, record_to_line, records};
use rstkit::crf::{labels_to_edus, HashedWindowFeatures, Optimizer, Segmenter, TrainConfig};
use rstkit::decode::{decode, oracle_provider, right_branching_provider, DecodeConfig, ScoreFile, Strategy};
use rstkit::dwa::trajectory;
use rstkit::eval::{
    corpus_stats, end_to_end_eval, genre_breakdown, parseval, parseval_report, stats_report, Metric, ParsevalCounts, SegCounts,
};
use rstkit::preprocess::{preprocess_corpus, PreprocessOptions, RemapTable, DEFAULT_RRT_TABLE};
use rstkit::rs3::serialize_rs3;
use rstkit::{Corpus, DocumentRecord, RelationLabel};

use crate::io::{apply_filter, create, load_canonical, load_docs, open, Paths};
use crate::*;

/// Documents handed to the worker pool at a time by streaming commands.
const BATCH: usize = 64;

pub fn run(cli: Cli) -> Result<()> {
    let paths = Paths::new(cli.data_dir);
    match cli.command {
        Command::Convert(a) => convert(&paths, a),
        Command::Preprocess(a) => preprocess(&paths, a),
        Command::Stats(a) => stats(&paths, a),
        Command::Segment(a) => segment(&paths, a),
        Command::TrainSegmenter(a) => train_segmenter(&paths, a),
        Command::Parse(a) => parse(&paths, a),
        Command::Eval(a) => eval(&paths, a),
        Command::DwaSim(a) => dwa_sim(&paths, a),
        Command::DumpRemap => {
            print!("{DEFAULT_RRT_TABLE}");
            Ok(())
        }
    }
}

fn write_sorted(path: &Path, mut docs: Vec<DocumentRecord>) -> Result<()> {
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = create(path)?;
    for d in &docs {
        writeln!(out, "{}", record_to_line(d))?;
    }
    out.flush()?;
    Ok(())
}

fn convert(paths: &Paths, a: ConvertArgs) -> Result<()> {
    let input = paths.input(&a.input)?;
    match a.to {
        Format::Canonical => {
            if !input.is_dir() {
                bail!("{}: expected a directory of .rs3 files", input.display());
            }
            let corpus = Corpus::new(input.display().to_string(), load_docs(&input, &a.meta)?)?;
            let (corpus, report) = preprocess_corpus(corpus, &PreprocessOptions::default())?;
            eprintln!("{report}");
            write_sorted(&a.output, corpus.documents)
        }
        Format::Rs3 => {
            let docs = load_docs(&input, &a.meta)?;
            std::fs::create_dir_all(&a.output).with_context(|| a.output.display().to_string())?;
            for d in &docs {
                let xml = serialize_rs3(d).with_context(|| d.id.clone())?;
                let path = a.output.join(format!("{}.rs3", d.id));
                std::fs::write(&path, xml).with_context(|| path.display().to_string())?;
            }
            eprintln!("wrote {} files to {}", docs.len(), a.output.display());
            Ok(())
        }
    }
}

fn preprocess(paths: &Paths, a: PreprocessArgs) -> Result<()> {
    let input = paths.input(&a.input)?;
    let docs = load_docs(&input, &a.meta)?;
    if input.is_dir() && !a.split_forests {
        let mut per_source: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            *per_source.entry(d.source_id()).or_default() += 1;
        }
        if let Some((id, n)) = per_source.iter().find(|(_, &n)| n > 1) {
            bail!("{id}: file holds {n} separate trees; pass --split-forests");
        }
    }
    let remap = match a.remap.as_deref() {
        None => None,
        Some("rrt") => Some(RemapTable::rrt_default()),
        Some(p) => {
            let path = paths.input(Path::new(p))?;
            let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
            Some(text.parse::<RemapTable>().with_context(|| path.display().to_string())?)
        }
    };
    let options = PreprocessOptions { remap, drop_single_edu: a.drop_single_edu };
    let corpus = Corpus::new(input.display().to_string(), docs)?;
    let (corpus, report) = preprocess_corpus(corpus, &options)?;
    eprintln!("{report}");
    write_sorted(&a.output, corpus.documents)
}

fn stats(paths: &Paths, a: StatsArgs) -> Result<()> {
    let input = paths.input(&a.input)?;
    let mut docs = load_docs(&input, &a.meta)?;
    if let Some(s) = &a.sents {
        let path = paths.input(s)?;
        let starts = read_sentence_starts(open(&path)?).with_context(|| path.display().to_string())?;
        let n = attach_sentences(&mut docs, &starts).with_context(|| path.display().to_string())?;
        if n < docs.len() {
            eprintln!("warning: sentence boundaries for {n} of {} documents; coverage columns left empty", docs.len());
        }
    }
    let docs = apply_filter(docs, &a.filter)?;
    let mut rows = vec![("all".to_string(), corpus_stats(&docs)?)];
    if a.by_genre {
        rows.extend(genre_breakdown(&docs)?);
    }
    print!("{}", stats_report(&rows, a.csv));
    Ok(())
}

/// Reads canonical records in batches, maps each batch on the worker pool
/// and writes results in input order.
fn stream<F>(input: &Path, output: &Path, f: F) -> Result<usize>
where
    F: Fn(DocumentRecord) -> Result<DocumentRecord> + Sync,
{
    let mut out = create(output)?;
    let mut iter = records(open(input)?);
    let mut seen = BTreeSet::new();
    let mut total = 0;
    loop {
        let batch: Vec<DocumentRecord> =
            iter.by_ref().take(BATCH).collect::<Result<_, _>>().with_context(|| input.display().to_string())?;
        if batch.is_empty() {
            break;
        }
        for d in &batch {
            if !seen.insert(d.id.clone()) {
                bail!("{}: duplicate document id {}", input.display(), d.id);
            }
        }
        total += batch.len();
        let done: Vec<Result<DocumentRecord>> = batch.into_par_iter().map(&f).collect();
        for d in done {
            writeln!(out, "{}", record_to_line(&d?))?;
        }
    }
    out.flush()?;
    Ok(total)
}

fn segment(paths: &Paths, a: SegmentArgs) -> Result<()> {
    let model_path = paths.input(&a.model)?;
    let seg = Segmenter::load(open(&model_path)?).with_context(|| model_path.display().to_string())?;
    let input = paths.input(&a.input)?;
    let n = stream(&input, &a.output, |mut d| {
        let labels = seg.segment(&d.tokens).with_context(|| d.id.clone())?;
        d.edus = labels_to_edus(&labels);
        d.tree = None;
        d.validate().with_context(|| d.id.clone())?;
        Ok(d)
    })?;
    eprintln!("segmented {n} documents");
    Ok(())
}

fn train_segmenter(paths: &Paths, a: TrainArgs) -> Result<()> {
    let input = paths.input(&a.input)?;
    let docs = apply_filter(load_canonical(&input)?, &a.filter)?;
    let optimizer = match a.optimizer {
        OptimizerArg::Sgd => Optimizer::Sgd,
        OptimizerArg::Adam => Optimizer::default(),
    };
    if !(1..=24).contains(&a.bits) {
        bail!("--bits must be between 1 and 24");
    }
    let cfg = TrainConfig { epochs: a.epochs, learning_rate: a.lr, l2: a.l2, batch_size: a.batch_size, seed: a.seed, optimizer };
    let (seg, curve) = Segmenter::train(&docs, HashedWindowFeatures { bits: a.bits }, &cfg)?;
    let mut out = create(&a.model)?;
    seg.save(&mut out)?;
    out.flush()?;
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        eprintln!("trained on {} documents, {} epochs, loss {first:.4} -> {last:.4}", docs.len(), curve.len());
    }
    Ok(())
}

fn parse(paths: &Paths, a: ParseArgs) -> Result<()> {
    let strategy = match a.beam {
        None => Strategy::Greedy,
        Some(0) => bail!("--beam must be at least 1"),
        Some(w) => Strategy::Beam(w),
    };
    let config = |labels: Vec<RelationLabel>| DecodeConfig { strategy, labels };
    let input = paths.input(&a.input)?;
    let n = if let Some(s) = &a.scores {
        let path = paths.input(s)?;
        let file = ScoreFile::read(open(&path)?).with_context(|| path.display().to_string())?;
        let cfg = config(file.labels.clone());
        stream(&input, &a.output, |mut d| {
            let provider = file.document(&d.id)?;
            d.tree = Some(decode(&d.edus, provider, &cfg).with_context(|| d.id.clone())?);
            Ok(d)
        })?
    } else if a.baseline {
        let label: RelationLabel = a.label.parse().with_context(|| format!("--label {}", a.label))?;
        let provider = right_branching_provider(&label, std::slice::from_ref(&label))?;
        let cfg = config(vec![label]);
        stream(&input, &a.output, |mut d| {
            d.tree = Some(decode(&d.edus, &provider, &cfg)?);
            Ok(d)
        })?
    } else if a.oracle {
        stream(&input, &a.output, |mut d| {
            let gold = d.tree.as_ref().ok_or_else(|| anyhow!("{}: --oracle needs gold trees", d.id))?;
            let labels: Vec<RelationLabel> =
                gold.internal_nodes().filter_map(|n| n.label()).cloned().collect::<BTreeSet<_>>().into_iter().collect();
            let provider = oracle_provider(gold, &labels).with_context(|| d.id.clone())?;
            let tree = decode(&d.edus, &provider, &config(labels))?;
            d.tree = Some(tree);
            Ok(d)
        })?
    } else {
        bail!("choose a score source: --scores, --baseline or --oracle");
    };
    eprintln!("parsed {n} documents");
    Ok(())
}

struct DocEval {
    genre: String,
    parseval: ParsevalCounts,
    seg: Option<SegCounts>,
}

fn eval(paths: &Paths, a: EvalArgs) -> Result<()> {
    let metrics = a
        .metrics
        .iter()
        .map(|m| m.parse::<Metric>().map_err(|_| anyhow!("unknown metric {m:?} (expected S, N, R or Full)")))
        .collect::<Result<Vec<_>>>()?;
    let gold_path = paths.input(&a.gold)?;
    let pred_path = paths.input(&a.pred)?;
    let all_gold = load_canonical(&gold_path)?;
    let gold_ids: BTreeSet<&str> = all_gold.iter().map(|d| d.id.as_str()).collect();
    let mut pred: HashMap<String, DocumentRecord> = HashMap::new();
    for d in load_canonical(&pred_path)? {
        if !gold_ids.contains(d.id.as_str()) {
            bail!("{}: document {} is not in the gold file", pred_path.display(), d.id);
        }
        pred.insert(d.id.clone(), d);
    }
    let gold = apply_filter(all_gold.clone(), &a.filter)?;
    let results: Vec<DocEval> = gold
        .par_iter()
        .map(|g| {
            let p = pred.get(&g.id).ok_or_else(|| anyhow!("{}: no prediction for {}", pred_path.display(), g.id))?;
            let p_tree = p.tree.as_ref().ok_or_else(|| anyhow!("{}: prediction has no tree", g.id))?;
            if p.tokens.len() != g.tokens.len() {
                bail!("{}: predicted document has {} tokens, gold {}", g.id, p.tokens.len(), g.tokens.len());
            }
            if a.end_to_end {
                let (seg, counts) = end_to_end_eval(g, &p.edus, p_tree).with_context(|| g.id.clone())?;
                Ok(DocEval { genre: g.genre.clone(), parseval: counts, seg: Some(seg) })
            } else {
                if p.edus != g.edus {
                    bail!("{}: predicted EDUs differ from gold; use --end-to-end", g.id);
                }
                let counts = parseval(g.tree()?, p_tree).with_context(|| g.id.clone())?;
                Ok(DocEval { genre: g.genre.clone(), parseval: counts, seg: None })
            }
        })
        .collect::<Result<_>>()?;

    let mut groups: Vec<(String, Vec<&DocEval>)> = vec![("all".into(), results.iter().collect())];
    if a.by_genre {
        let mut by: BTreeMap<&str, Vec<&DocEval>> = BTreeMap::new();
        for r in &results {
            by.entry(&r.genre).or_default().push(r);
        }
        groups.extend(by.into_iter().map(|(g, rs)| (g.to_string(), rs)));
    }
    let rows: Vec<(String, ParsevalCounts)> = groups.iter().map(|(n, rs)| (n.clone(), rs.iter().map(|r| r.parseval).sum())).collect();
    let seg: Option<Vec<(String, SegCounts)>> = a.end_to_end.then(|| {
        groups
            .iter()
            .map(|(n, rs)| {
                let total = rs.iter().filter_map(|r| r.seg).fold(SegCounts::default(), |acc, s| SegCounts {
                    matched: acc.matched + s.matched,
                    gold: acc.gold + s.gold,
                    predicted: acc.predicted + s.predicted,
                });
                (n.clone(), total)
            })
            .collect()
    });
    print!("{}", parseval_report(&rows, seg.as_deref(), &metrics, a.csv));
    Ok(())
}

fn dwa_sim(paths: &Paths, a: DwaArgs) -> Result<()> {
    let path = paths.input(&a.losses)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(open(&path)?);
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| path.display().to_string())?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => names = Some(rec.iter().map(String::from).collect()),
            Err(e) => bail!("{}: row {}: {e}", path.display(), i + 1),
        }
    }
    let k = rows.first().map(Vec::len).ok_or_else(|| anyhow!("{}: no loss rows", path.display()))?;
    if let Some(expected) = a.k {
        if expected != k {
            bail!("{}: --k {expected} but the log has {k} task columns", path.display());
        }
    }
    let weights = trajectory(&rows, a.b, a.temp).with_context(|| path.display().to_string())?;
    let names = names.unwrap_or_else(|| (1..=k).map(|i| format!("task{i}")).collect());
    if names.len() != k {
        bail!("{}: header names {} tasks, rows have {k}", path.display(), names.len());
    }
    let mut w = csv::Writer::from_writer(create(&a.output)?);
    let mut header = vec!["step".to_string()];
    header.extend(names.iter().map(|n| format!("lambda_{n}")));
    w.write_record(&header)?;
    for (step, ws) in weights.iter().enumerate() {
        let mut rec = vec![step.to_string()];
        rec.extend(ws.iter().map(|x| format!("{x}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
