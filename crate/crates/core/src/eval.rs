//! Original-Parseval micro F1, segmentation F1 and corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::document::{check_partition, DocumentRecord};
use crate::tree::{Role, RstTree, Span};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("gold covers tokens {gold:?} but prediction covers {pred:?}")]
    SpanRangeMismatch { gold: Span, pred: Span },
    #[error("{which} EDUs do not partition {tokens} tokens (problem at EDU {edu})")]
    NotAPartition { which: &'static str, tokens: usize, edu: usize },
    #[error("predicted tree leaves do not match the predicted EDUs")]
    LeafMismatch,
    #[error("document `{0}` has no tree")]
    MissingTree(String),
    #[error("document `{0}` has no sentence boundaries")]
    MissingSentences(String),
    #[error("empty corpus")]
    EmptyCorpus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Percent P/R/F1. With nothing to find and nothing predicted all three are
/// 100; otherwise an empty denominator gives 0.
pub fn prf(matched: usize, gold: usize, predicted: usize) -> Prf {
    if gold == 0 && predicted == 0 {
        return Prf { precision: 100.0, recall: 100.0, f1: 100.0 };
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    let (p, r) = (ratio(matched, predicted), ratio(matched, gold));
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Prf { precision: p, recall: r, f1 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    S,
    N,
    R,
    Full,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::S, Metric::N, Metric::R, Metric::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::S => "S",
            Metric::N => "N",
            Metric::R => "R",
            Metric::Full => "Full",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric `{s}` (expected S, N, R or Full)"))
    }
}

/// Constituent match counts; sum over documents for micro scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParsevalCounts {
    /// Matches for S, N, R, Full in that order.
    pub matched: [usize; 4],
    pub gold: usize,
    pub predicted: usize,
}

impl ParsevalCounts {
    pub fn matched(&self, m: Metric) -> usize {
        self.matched[m as usize]
    }

    pub fn score(&self, m: Metric) -> Prf {
        prf(self.matched(m), self.gold, self.predicted)
    }
}

impl AddAssign for ParsevalCounts {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.matched.iter_mut().zip(rhs.matched) {
            *a += b;
        }
        self.gold += rhs.gold;
        self.predicted += rhs.predicted;
    }
}

impl std::iter::Sum for ParsevalCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut total = ParsevalCounts::default();
        for c in iter {
            total += c;
        }
        total
    }
}

/// Matches the non-root constituents of two trees over the same tokens by
/// token span. Spans are unique within a tree, so each predicted
/// constituent matches at most one gold one.
pub fn parseval(gold: &RstTree, pred: &RstTree) -> Result<ParsevalCounts, EvalError> {
    if gold.tokens() != pred.tokens() {
        return Err(EvalError::SpanRangeMismatch { gold: gold.tokens(), pred: pred.tokens() });
    }
    let gold_cs = gold.constituents();
    let pred_cs = pred.constituents();
    let index: HashMap<Span, (Role, &str)> = gold_cs.iter().map(|c| (c.span, (c.role, c.relation.as_str()))).collect();
    let mut counts = ParsevalCounts { matched: [0; 4], gold: gold_cs.len(), predicted: pred_cs.len() };
    for c in &pred_cs {
        if let Some(&(role, relation)) = index.get(&c.span) {
            let n = role == c.role;
            let r = relation == c.relation;
            counts.matched[0] += 1;
            counts.matched[1] += n as usize;
            counts.matched[2] += r as usize;
            counts.matched[3] += (n && r) as usize;
        }
    }
    Ok(counts)
}

/// Boundary counts over EDU-initial tokens, token 0 excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SegCounts {
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
}

impl SegCounts {
    pub fn score(&self) -> Prf {
        prf(self.matched, self.gold, self.predicted)
    }
}

impl AddAssign for SegCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.matched += rhs.matched;
        self.gold += rhs.gold;
        self.predicted += rhs.predicted;
    }
}

pub fn segmentation_f1(gold: &[Span], pred: &[Span], tokens: usize) -> Result<SegCounts, EvalError> {
    check_partition(gold, tokens).map_err(|edu| EvalError::NotAPartition { which: "gold", tokens, edu })?;
    check_partition(pred, tokens).map_err(|edu| EvalError::NotAPartition { which: "predicted", tokens, edu })?;
    let g: BTreeSet<usize> = gold.iter().skip(1).map(|e| e.first).collect();
    let p: BTreeSet<usize> = pred.iter().skip(1).map(|e| e.first).collect();
    Ok(SegCounts { matched: g.intersection(&p).count(), gold: g.len(), predicted: p.len() })
}

/// Scores a predicted segmentation and tree against a gold document. Parseval
/// matching is by token span, so segmentation errors lower every metric.
pub fn end_to_end_eval(gold: &DocumentRecord, pred_edus: &[Span], pred_tree: &RstTree) -> Result<(SegCounts, ParsevalCounts), EvalError> {
    if pred_tree.edu_spans() != pred_edus {
        return Err(EvalError::LeafMismatch);
    }
    let seg = segmentation_f1(&gold.edus, pred_edus, gold.tokens.len())?;
    let tree = gold.tree.as_ref().ok_or_else(|| EvalError::MissingTree(gold.id.clone()))?;
    Ok((seg, parseval(tree, pred_tree)?))
}

/// Sentence coverage counts for one or more documents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpannedCounts {
    pub sentences: usize,
    pub spanned: usize,
    /// Sentences overlapping at least two EDUs.
    pub non_elementary: usize,
    pub non_elementary_spanned: usize,
}

impl SpannedCounts {
    pub fn non_elementary_percent(&self) -> f64 {
        percent(self.non_elementary_spanned, self.non_elementary)
    }

    pub fn overall_percent(&self) -> f64 {
        percent(self.spanned, self.sentences)
    }
}

impl AddAssign for SpannedCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.sentences += rhs.sentences;
        self.spanned += rhs.spanned;
        self.non_elementary += rhs.non_elementary;
        self.non_elementary_spanned += rhs.non_elementary_spanned;
    }
}

fn percent(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

/// A sentence is spanned when some tree node (leaf, internal or root) covers
/// exactly its tokens.
pub fn spanned_sentences(doc: &DocumentRecord) -> Result<SpannedCounts, EvalError> {
    let tree = doc.tree.as_ref().ok_or_else(|| EvalError::MissingTree(doc.id.clone()))?;
    let sentences = doc.sentences().ok_or_else(|| EvalError::MissingSentences(doc.id.clone()))?;
    let node_spans: BTreeSet<Span> = tree.nodes().map(|n| n.tokens()).collect();
    let mut counts = SpannedCounts::default();
    for s in sentences {
        let edus = doc.edus.iter().filter(|e| e.overlaps(&s)).count();
        let spanned = node_spans.contains(&s);
        counts.sentences += 1;
        counts.spanned += spanned as usize;
        if edus >= 2 {
            counts.non_elementary += 1;
            counts.non_elementary_spanned += spanned as usize;
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    pub genres: usize,
    /// Distinct source documents; split forests count once.
    pub docs: usize,
    pub trees: usize,
    /// Distinct merged relation labels.
    pub classes: usize,
    pub tokens_min: usize,
    pub tokens_max: usize,
    pub tokens_median: f64,
    pub edus: usize,
    /// Internal nodes, i.e. EDUs minus trees.
    pub relation_pairs: usize,
    /// Constituents whose relation is not `span`.
    pub non_span_constituents: usize,
    /// Present when every document carries sentence boundaries.
    pub spanned: Option<SpannedCounts>,
}

impl CorpusStats {
    pub fn edus_per_tree(&self) -> f64 {
        self.edus as f64 / self.trees as f64
    }

    pub fn trees_per_doc(&self) -> f64 {
        self.trees as f64 / self.docs as f64
    }
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

pub fn corpus_stats<'a, I>(docs: I) -> Result<CorpusStats, EvalError>
where
    I: IntoIterator<Item = &'a DocumentRecord>,
{
    let mut genres = BTreeSet::new();
    let mut sources = BTreeSet::new();
    let mut classes = BTreeSet::new();
    let mut sizes = Vec::new();
    let (mut edus, mut pairs, mut non_span) = (0, 0, 0);
    let mut spanned = Some(SpannedCounts::default());
    for doc in docs {
        let tree = doc.tree.as_ref().ok_or_else(|| EvalError::MissingTree(doc.id.clone()))?;
        genres.insert(doc.genre.as_str());
        sources.insert(doc.source_id());
        classes.extend(tree.internal_nodes().filter_map(|n| n.label()).map(|l| l.merged()));
        sizes.push(tree.tokens().len());
        edus += tree.leaf_count();
        pairs += tree.internal_count();
        non_span += tree.constituents().iter().filter(|c| c.relation != crate::tree::SPAN_RELATION).count();
        spanned = match (spanned, doc.sentence_boundaries.is_some()) {
            (Some(mut acc), true) => {
                acc += spanned_sentences(doc)?;
                Some(acc)
            }
            _ => None,
        };
    }
    if sizes.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    sizes.sort_unstable();
    Ok(CorpusStats {
        genres: genres.len(),
        docs: sources.len(),
        trees: sizes.len(),
        classes: classes.len(),
        tokens_min: sizes[0],
        tokens_max: sizes[sizes.len() - 1],
        tokens_median: median(&sizes),
        edus,
        relation_pairs: pairs,
        non_span_constituents: non_span,
        spanned,
    })
}

/// Statistics per genre, in genre order.
pub fn genre_breakdown(docs: &[DocumentRecord]) -> Result<BTreeMap<String, CorpusStats>, EvalError> {
    let mut groups: BTreeMap<&str, Vec<&DocumentRecord>> = BTreeMap::new();
    for d in docs {
        groups.entry(&d.genre).or_default().push(d);
    }
    groups.into_iter().map(|(g, ds)| Ok((g.to_string(), corpus_stats(ds)?))).collect()
}

const STATS_COLUMNS: [&str; 13] = [
    "name",
    "genres",
    "docs",
    "trees",
    "classes",
    "tok_min",
    "tok_max",
    "tok_median",
    "spanned_non_edu_pct",
    "spanned_all_pct",
    "edus",
    "edus_per_tree",
    "relation_pairs",
];

fn stats_cells(name: &str, s: &CorpusStats) -> Vec<String> {
    let pct = |f: fn(&SpannedCounts) -> f64| s.spanned.as_ref().map_or("-".to_string(), |c| format!("{:.1}", f(c)));
    vec![
        name.to_string(),
        s.genres.to_string(),
        s.docs.to_string(),
        s.trees.to_string(),
        s.classes.to_string(),
        s.tokens_min.to_string(),
        s.tokens_max.to_string(),
        format!("{:.1}", s.tokens_median),
        pct(SpannedCounts::non_elementary_percent),
        pct(SpannedCounts::overall_percent),
        s.edus.to_string(),
        format!("{:.1}", s.edus_per_tree()),
        s.relation_pairs.to_string(),
    ]
}

/// Left-aligned plain-text table.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let text: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", text.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let escape = |c: &str| {
        if c.contains([',', '"', '\n']) {
            format!("\"{}\"", c.replace('"', "\"\""))
        } else {
            c.to_string()
        }
    };
    let mut out = header.join(",") + "\n";
    for row in rows {
        out += &row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(",");
        out.push('\n');
    }
    out
}

pub fn stats_report(rows: &[(String, CorpusStats)], csv: bool) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|(n, s)| stats_cells(n, s)).collect();
    if csv {
        render_csv(&STATS_COLUMNS, &cells)
    } else {
        render_table(&STATS_COLUMNS, &cells)
    }
}

/// One row per (group, metric) with P/R/F1 to one decimal.
pub fn parseval_report(rows: &[(String, ParsevalCounts)], seg: Option<&[(String, SegCounts)]>, metrics: &[Metric], csv: bool) -> String {
    let header = ["group", "metric", "precision", "recall", "f1", "matched", "gold", "predicted"];
    let mut cells = Vec::new();
    let fmt = |name: &str, metric: &str, p: Prf, m: usize, g: usize, pr: usize| {
        vec![
            name.to_string(),
            metric.to_string(),
            format!("{:.1}", p.precision),
            format!("{:.1}", p.recall),
            format!("{:.1}", p.f1),
            m.to_string(),
            g.to_string(),
            pr.to_string(),
        ]
    };
    for (i, (name, c)) in rows.iter().enumerate() {
        if let Some(s) = seg.and_then(|s| s.get(i)) {
            cells.push(fmt(name, "Seg", s.1.score(), s.1.matched, s.1.gold, s.1.predicted));
        }
        for &m in metrics {
            cells.push(fmt(name, m.as_str(), c.score(m), c.matched(m), c.gold, c.predicted));
        }
    }
    if csv {
        render_csv(&header, &cells)
    } else {
        render_table(&header, &cells)
    }
}
