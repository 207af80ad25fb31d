//! Top-down span-splitting decoding over abstract scores.
//!
//! Ranges are half-open EDU index ranges `i..j`. For a range of length `m`,
//! `split_scores` returns `m - 1` values; entry `s` scores the split into
//! `i..i+s+1` and `i+s+1..j`. Scores are log-domain and summed along the
//! decisions of a tree; each node contributes its split score plus the score
//! of its label.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::BufRead;
use std::ops::Range;

use serde::Deserialize;

use crate::crf::{labels_to_edus, Boundary};
use crate::tree::{LabelError, RelationLabel, RstTree, Span, TreeDesc, TreeError};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("score provider returned {found} {what} scores for {range:?}, expected {expected}")]
    ProviderLengthMismatch { what: &'static str, range: Range<usize>, expected: usize, found: usize },
    #[error("non-finite {what} score for {range:?}")]
    NonFiniteScore { what: &'static str, range: Range<usize> },
    #[error("no EDUs to decode")]
    NoEdus,
    #[error("beam width must be at least 1")]
    ZeroBeamWidth,
    #[error("empty label inventory")]
    EmptyInventory,
    #[error("label `{0}` is not in the inventory")]
    UnknownLabel(String),
    #[error("no {what} scores for document `{doc}` at {range:?}")]
    MissingScore { doc: String, what: &'static str, range: Range<usize> },
    #[error("no scores for document `{0}`")]
    UnknownDocument(String),
    #[error("score file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source of split and label scores, e.g. a neural scorer's dump.
pub trait ScoreProvider {
    fn split_scores(&self, range: Range<usize>) -> Result<Vec<f64>, DecodeError>;
    fn label_scores(&self, left: Range<usize>, right: Range<usize>) -> Result<Vec<f64>, DecodeError>;
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for &P {
    fn split_scores(&self, range: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        (**self).split_scores(range)
    }
    fn label_scores(&self, left: Range<usize>, right: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        (**self).label_scores(left, right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Greedy,
    Beam(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    /// Merged label inventory; label score vectors index into it.
    pub labels: Vec<RelationLabel>,
}

impl DecodeConfig {
    pub fn greedy(labels: Vec<RelationLabel>) -> DecodeConfig {
        DecodeConfig { strategy: Strategy::Greedy, labels }
    }

    pub fn beam(width: usize, labels: Vec<RelationLabel>) -> DecodeConfig {
        DecodeConfig { strategy: Strategy::Beam(width), labels }
    }
}

/// Index of the maximum, lowest index on ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Validating, memoizing wrapper around a provider.
struct Scorer<'a, P: ?Sized> {
    provider: &'a P,
    num_labels: usize,
    splits: RefCell<HashMap<(usize, usize), Vec<f64>>>,
    labels: RefCell<HashMap<(usize, usize, usize), BestLabel>>,
}

/// Index and score of the best label for a split.
type BestLabel = (usize, f64);

impl<'a, P: ScoreProvider + ?Sized> Scorer<'a, P> {
    fn new(provider: &'a P, num_labels: usize) -> Self {
        Scorer { provider, num_labels, splits: RefCell::default(), labels: RefCell::default() }
    }

    fn splits(&self, range: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        let key = (range.start, range.end);
        if let Some(v) = self.splits.borrow().get(&key) {
            return Ok(v.clone());
        }
        let v = self.provider.split_scores(range.clone())?;
        let expected = range.len() - 1;
        if v.len() != expected {
            return Err(DecodeError::ProviderLengthMismatch { what: "split", range, expected, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DecodeError::NonFiniteScore { what: "split", range });
        }
        self.splits.borrow_mut().insert(key, v.clone());
        Ok(v)
    }

    /// Best label and its score for splitting `i..j` after `k - 1`.
    fn best_label(&self, i: usize, k: usize, j: usize) -> Result<(usize, f64), DecodeError> {
        if let Some(&hit) = self.labels.borrow().get(&(i, k, j)) {
            return Ok(hit);
        }
        let v = self.provider.label_scores(i..k, k..j)?;
        if v.len() != self.num_labels {
            return Err(DecodeError::ProviderLengthMismatch { what: "label", range: i..j, expected: self.num_labels, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DecodeError::NonFiniteScore { what: "label", range: i..j });
        }
        let best = argmax(&v);
        self.labels.borrow_mut().insert((i, k, j), (best, v[best]));
        Ok((best, v[best]))
    }
}

/// One node decision in pre-order: split point `k` (left is `i..k`) and label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Decision {
    k: usize,
    label: usize,
}

#[allow(clippy::single_range_in_vec_init)] // a stack of ranges, not a range
fn greedy_decisions<P: ScoreProvider + ?Sized>(scorer: &Scorer<P>, n: usize) -> Result<(Vec<Decision>, f64), DecodeError> {
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut score = 0.0;
    let mut stack = vec![0..n];
    while let Some(r) = stack.pop() {
        if r.len() < 2 {
            continue;
        }
        let splits = scorer.splits(r.clone())?;
        let s = argmax(&splits);
        let k = r.start + 1 + s;
        let (label, ls) = scorer.best_label(r.start, k, r.end)?;
        score = score + splits[s] + ls;
        out.push(Decision { k, label });
        stack.push(k..r.end);
        stack.push(r.start..k);
    }
    Ok((out, score))
}

struct Partial {
    score: f64,
    decisions: Vec<Decision>,
    frontier: Vec<Range<usize>>,
}

/// Beam over pre-order decision prefixes. Every complete tree takes exactly
/// `n - 1` steps, and only the best label is expanded per split (label
/// choices never interact), so a width of at least Catalan(n - 1) never
/// prunes and the search is exact.
#[allow(clippy::single_range_in_vec_init)]
fn beam_decisions<P: ScoreProvider + ?Sized>(scorer: &Scorer<P>, n: usize, width: usize) -> Result<(Vec<Decision>, f64), DecodeError> {
    let root = if n >= 2 { vec![0..n] } else { Vec::new() };
    let mut beam = vec![Partial { score: 0.0, decisions: Vec::new(), frontier: root }];
    for _ in 1..n {
        let mut next = Vec::new();
        for p in &beam {
            let mut frontier = p.frontier.clone();
            let r = frontier.pop().expect("frontier holds the remaining decisions");
            let splits = scorer.splits(r.clone())?;
            for (s, split_score) in splits.iter().enumerate() {
                let k = r.start + 1 + s;
                let (label, ls) = scorer.best_label(r.start, k, r.end)?;
                let mut f = frontier.clone();
                if r.end - k >= 2 {
                    f.push(k..r.end);
                }
                if k - r.start >= 2 {
                    f.push(r.start..k);
                }
                let mut decisions = p.decisions.clone();
                decisions.push(Decision { k, label });
                next.push(Partial { score: p.score + split_score + ls, decisions, frontier: f });
            }
        }
        // stable: equal scores keep parent rank, then earlier split
        next.sort_by(|a, b| b.score.total_cmp(&a.score));
        next.truncate(width);
        beam = next;
    }
    let best = beam.swap_remove(0);
    Ok((best.decisions, best.score))
}

fn assemble(decisions: &[Decision], labels: &[RelationLabel], edus: &[Span]) -> Result<RstTree, DecodeError> {
    fn go(r: Range<usize>, it: &mut std::slice::Iter<Decision>, labels: &[RelationLabel]) -> TreeDesc {
        if r.len() == 1 {
            return TreeDesc::Leaf(r.start);
        }
        let d = *it.next().expect("one decision per internal node");
        let left = go(r.start..d.k, it, labels);
        let right = go(d.k..r.end, it, labels);
        TreeDesc::node(left, right, labels[d.label].clone())
    }
    let desc = go(0..edus.len(), &mut decisions.iter(), labels);
    Ok(RstTree::build(&desc, edus)?)
}

/// Decodes a tree over `edus` and returns it with its accumulated score.
pub fn decode_scored<P: ScoreProvider + ?Sized>(edus: &[Span], provider: &P, config: &DecodeConfig) -> Result<(RstTree, f64), DecodeError> {
    let n = edus.len();
    if n == 0 {
        return Err(DecodeError::NoEdus);
    }
    if config.labels.is_empty() {
        return Err(DecodeError::EmptyInventory);
    }
    if n == 1 {
        return Ok((RstTree::leaf(edus[0]), 0.0));
    }
    let scorer = Scorer::new(provider, config.labels.len());
    let (decisions, score) = match config.strategy {
        Strategy::Beam(0) => return Err(DecodeError::ZeroBeamWidth),
        Strategy::Greedy | Strategy::Beam(1) => greedy_decisions(&scorer, n)?,
        Strategy::Beam(w) => {
            // the greedy path is kept as a fallback so a narrow beam never
            // does worse than greedy
            let (g, gs) = greedy_decisions(&scorer, n)?;
            let (b, bs) = beam_decisions(&scorer, n, w)?;
            if gs > bs {
                (g, gs)
            } else {
                (b, bs)
            }
        }
    };
    Ok((assemble(&decisions, &config.labels, edus)?, score))
}

pub fn decode<P: ScoreProvider + ?Sized>(edus: &[Span], provider: &P, config: &DecodeConfig) -> Result<RstTree, DecodeError> {
    decode_scored(edus, provider, config).map(|(t, _)| t)
}

/// Accumulated score of an arbitrary tree under `provider`, summed in the
/// same order as the decoder sums it.
pub fn tree_score<P: ScoreProvider + ?Sized>(tree: &RstTree, provider: &P, labels: &[RelationLabel]) -> Result<f64, DecodeError> {
    let mut score = 0.0;
    for node in tree.internal_nodes() {
        let (left, right) = node.children().expect("internal node");
        let (le, re) = (left.edus(), right.edus());
        let (i, k, j) = (le.first, re.first, re.last + 1);
        let splits = provider.split_scores(i..j)?;
        let label = node.label().expect("internal node");
        let idx = labels.iter().position(|l| l == label).ok_or_else(|| DecodeError::UnknownLabel(label.merged()))?;
        let ls = provider.label_scores(i..k, k..j)?;
        if splits.len() != j - i - 1 || ls.len() != labels.len() {
            return Err(DecodeError::ProviderLengthMismatch { what: "tree", range: i..j, expected: j - i - 1, found: splits.len() });
        }
        score = score + splits[k - i - 1] + ls[idx];
    }
    Ok(score)
}

/// Segments `num_tokens` tokens by `labels` and decodes a tree over the
/// resulting EDUs.
pub fn decode_with_segmentation<P: ScoreProvider + ?Sized>(
    labels: &[Boundary],
    provider: &P,
    config: &DecodeConfig,
) -> Result<(Vec<Span>, RstTree), DecodeError> {
    let edus = labels_to_edus(labels);
    let tree = decode(&edus, provider, config)?;
    Ok((edus, tree))
}

/// Scores the splits and labels of a gold tree 1 and everything else 0.
#[derive(Clone, Debug)]
pub struct OracleProvider {
    num_labels: usize,
    /// `(i, j) -> (k, label)` for every gold internal node.
    nodes: HashMap<(usize, usize), (usize, usize)>,
}

pub fn oracle_provider(gold: &RstTree, labels: &[RelationLabel]) -> Result<OracleProvider, DecodeError> {
    let mut nodes = HashMap::new();
    for node in gold.internal_nodes() {
        let (left, right) = node.children().expect("internal node");
        let label = node.label().expect("internal node");
        let idx = labels.iter().position(|l| l == label).ok_or_else(|| DecodeError::UnknownLabel(label.merged()))?;
        nodes.insert((left.edus().first, right.edus().last + 1), (right.edus().first, idx));
    }
    Ok(OracleProvider { num_labels: labels.len(), nodes })
}

impl ScoreProvider for OracleProvider {
    fn split_scores(&self, range: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        let mut v = vec![0.0; range.len().saturating_sub(1)];
        if let Some(&(k, _)) = self.nodes.get(&(range.start, range.end)) {
            v[k - range.start - 1] = 1.0;
        }
        Ok(v)
    }

    fn label_scores(&self, left: Range<usize>, right: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        let mut v = vec![0.0; self.num_labels];
        if let Some(&(k, label)) = self.nodes.get(&(left.start, right.end)) {
            if k == left.end {
                v[label] = 1.0;
            }
        }
        Ok(v)
    }
}

/// Baseline preferring the leftmost split and a fixed label everywhere.
#[derive(Clone, Debug)]
pub struct RightBranchingProvider {
    label: usize,
    num_labels: usize,
}

pub fn right_branching_provider(label: &RelationLabel, labels: &[RelationLabel]) -> Result<RightBranchingProvider, DecodeError> {
    let idx = labels.iter().position(|l| l == label).ok_or_else(|| DecodeError::UnknownLabel(label.merged()))?;
    Ok(RightBranchingProvider { label: idx, num_labels: labels.len() })
}

impl ScoreProvider for RightBranchingProvider {
    fn split_scores(&self, range: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        let mut v = vec![0.0; range.len().saturating_sub(1)];
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        Ok(v)
    }

    fn label_scores(&self, _: Range<usize>, _: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        let mut v = vec![0.0; self.num_labels];
        v[self.label] = 1.0;
        Ok(v)
    }
}

/// Scores read from a JSON-lines dump. The first line declares the label
/// inventory; each following line is either a split entry or a label entry:
///
/// ```text
/// {"labels": ["elaboration_NS", "joint_NN"]}
/// {"doc": "d1", "range": [0, 3], "split": [0.9, 0.1]}
/// {"doc": "d1", "left": [0, 1], "right": [1, 3], "scores": [-0.2, -1.7]}
/// ```
#[derive(Clone, Debug, Default)]
pub struct ScoreFile {
    pub labels: Vec<RelationLabel>,
    docs: HashMap<String, DocScores>,
}

#[derive(Clone, Debug, Default)]
pub struct DocScores {
    doc: String,
    splits: HashMap<(usize, usize), Vec<f64>>,
    labels: HashMap<(usize, usize, usize), Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    labels: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum Entry {
    Split { doc: String, range: [usize; 2], split: Vec<f64> },
    Label { doc: String, left: [usize; 2], right: [usize; 2], scores: Vec<f64> },
}

impl ScoreFile {
    pub fn read<R: BufRead>(reader: R) -> Result<ScoreFile, DecodeError> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
        let bad = |line: usize, msg: String| DecodeError::Format { line: line + 1, msg };
        let (n0, first) = lines.next().ok_or_else(|| bad(0, "missing label header".into()))?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| bad(n0, e.to_string()))?;
        let labels = header.labels.iter().map(|l| l.parse::<RelationLabel>()).collect::<Result<Vec<_>, _>>()?;
        let mut file = ScoreFile { labels, docs: HashMap::new() };
        for (n, line) in lines {
            let entry: Entry = serde_json::from_str(&line?).map_err(|e| bad(n, e.to_string()))?;
            match entry {
                Entry::Split { doc, range: [i, j], split } => {
                    if j <= i || split.len() != j - i - 1 {
                        return Err(bad(n, format!("split vector for [{i}, {j}) must have {} entries", (j.max(i + 1)) - i - 1)));
                    }
                    file.doc_mut(doc).splits.insert((i, j), split);
                }
                Entry::Label { doc, left: [i, k], right: [k2, j], scores } => {
                    if k != k2 || i >= k || k >= j {
                        return Err(bad(n, format!("ranges [{i}, {k}) and [{k2}, {j}) are not adjacent and non-empty")));
                    }
                    if scores.len() != file.labels.len() {
                        return Err(bad(n, format!("expected {} label scores, found {}", file.labels.len(), scores.len())));
                    }
                    file.doc_mut(doc).labels.insert((i, k, j), scores);
                }
            }
        }
        Ok(file)
    }

    fn doc_mut(&mut self, doc: String) -> &mut DocScores {
        self.docs.entry(doc.clone()).or_insert_with(|| DocScores { doc, ..DocScores::default() })
    }

    pub fn document(&self, id: &str) -> Result<&DocScores, DecodeError> {
        self.docs.get(id).ok_or_else(|| DecodeError::UnknownDocument(id.to_string()))
    }
}

impl ScoreProvider for DocScores {
    fn split_scores(&self, range: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        self.splits.get(&(range.start, range.end)).cloned().ok_or_else(|| DecodeError::MissingScore {
            doc: self.doc.clone(),
            what: "split",
            range,
        })
    }

    fn label_scores(&self, left: Range<usize>, right: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        self.labels.get(&(left.start, left.end, right.end)).cloned().ok_or_else(|| DecodeError::MissingScore {
            doc: self.doc.clone(),
            what: "label",
            range: left.start..right.end,
        })
    }
}
