//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::ops::Range;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstkit::crf::{CrfModel, FeatureMatrix};
use rstkit::decode::{DecodeError, ScoreProvider};
use rstkit::{Constituent, DocumentRecord, Language, Nuclearity, RelationLabel, Role, RstTree, Span, Split, Token, TreeDesc};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn labels(names: &[&str]) -> Vec<RelationLabel> {
    names.iter().map(|s| s.parse().unwrap()).collect()
}

pub fn inventory() -> Vec<RelationLabel> {
    labels(&["elaboration_NS", "attribution_SN", "joint_NN", "contrast_NN", "background_SN"])
}

/// Uniformly random binary bracketing of `lo..hi` with random labels.
pub fn random_desc<R: Rng>(rng: &mut R, lo: usize, hi: usize, labels: &[RelationLabel]) -> TreeDesc {
    if hi - lo == 1 {
        return TreeDesc::Leaf(lo);
    }
    let k = rng.gen_range(lo + 1..hi);
    let label = labels[rng.gen_range(0..labels.len())].clone();
    TreeDesc::node(random_desc(rng, lo, k, labels), random_desc(rng, k, hi, labels), label)
}

/// Random partition of `tokens` tokens into `n` non-empty EDUs.
pub fn random_edus<R: Rng>(rng: &mut R, n: usize, max_len: usize) -> Vec<Span> {
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for _ in 0..n {
        let len = rng.gen_range(1..=max_len);
        out.push(Span { first: start, last: start + len - 1 });
        start += len;
    }
    out
}

pub fn random_tree<R: Rng>(rng: &mut R, n: usize, labels: &[RelationLabel]) -> RstTree {
    let edus = random_edus(rng, n, 4);
    RstTree::build(&random_desc(rng, 0, n, labels), &edus).unwrap()
}

/// Every binary bracketing of `lo..hi`, leaves only; internal nodes get
/// `placeholder`.
pub fn all_shapes(lo: usize, hi: usize, placeholder: &RelationLabel) -> Vec<TreeDesc> {
    if hi - lo == 1 {
        return vec![TreeDesc::Leaf(lo)];
    }
    let mut out = Vec::new();
    for k in lo + 1..hi {
        for l in all_shapes(lo, k, placeholder) {
            for r in all_shapes(k, hi, placeholder) {
                out.push(TreeDesc::node(l.clone(), r, placeholder.clone()));
            }
        }
    }
    out
}

pub fn catalan(n: usize) -> usize {
    (0..n).fold(1usize, |c, i| c * 2 * (2 * i + 1) / (i + 2))
}

/// Non-root constituents computed straight from the bracketing, without
/// going through `RstTree::constituents`.
pub fn constituents_by_hand(tree: &RstTree) -> Vec<Constituent> {
    let mut out = Vec::new();
    for node in tree.internal_nodes() {
        let (l, r) = node.children().unwrap();
        let label = node.label().unwrap();
        let (lrole, lrel, rrole, rrel) = match label.nuclearity {
            Nuclearity::NN => (Role::Nucleus, label.relation.clone(), Role::Nucleus, label.relation.clone()),
            Nuclearity::NS => (Role::Nucleus, "span".to_string(), Role::Satellite, label.relation.clone()),
            Nuclearity::SN => (Role::Satellite, label.relation.clone(), Role::Nucleus, "span".to_string()),
        };
        out.push(Constituent { span: l.tokens(), role: lrole, relation: lrel });
        out.push(Constituent { span: r.tokens(), role: rrole, relation: rrel });
    }
    out
}

/// Quadratic all-pairs matcher: `[S, N, R, Full]` matched counts. A gold
/// constituent is consumed by its first match.
pub fn all_pairs_matches(gold: &RstTree, pred: &RstTree) -> [usize; 4] {
    let g = constituents_by_hand(gold);
    let p = constituents_by_hand(pred);
    let mut out = [0; 4];
    for (metric, slot) in out.iter_mut().enumerate() {
        let mut used = vec![false; g.len()];
        for pc in &p {
            for (gi, gc) in g.iter().enumerate() {
                let ok =
                    gc.span == pc.span && (metric != 1 && metric != 3 || gc.role == pc.role) && (metric < 2 || gc.relation == pc.relation);
                if ok && !used[gi] {
                    used[gi] = true;
                    *slot += 1;
                    break;
                }
            }
        }
    }
    out
}

/// Random log-domain scores, memoized so repeated queries agree.
pub struct RandomProvider {
    pub splits: std::collections::HashMap<(usize, usize), Vec<f64>>,
    pub labels: std::collections::HashMap<(usize, usize, usize), Vec<f64>>,
}

impl RandomProvider {
    pub fn new<R: Rng>(rng: &mut R, n: usize, num_labels: usize) -> RandomProvider {
        let mut splits = std::collections::HashMap::new();
        let mut labels = std::collections::HashMap::new();
        for i in 0..n {
            for j in i + 2..=n {
                splits.insert((i, j), (0..j - i - 1).map(|_| rng.gen_range(-3.0..0.0)).collect());
                for k in i + 1..j {
                    labels.insert((i, k, j), (0..num_labels).map(|_| rng.gen_range(-3.0..0.0)).collect());
                }
            }
        }
        RandomProvider { splits, labels }
    }
}

impl ScoreProvider for RandomProvider {
    fn split_scores(&self, r: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        Ok(self.splits[&(r.start, r.end)].clone())
    }
    fn label_scores(&self, l: Range<usize>, r: Range<usize>) -> Result<Vec<f64>, DecodeError> {
        Ok(self.labels[&(l.start, l.end, r.end)].clone())
    }
}

/// Exhaustive search over every shape and every label of every node: the
/// best total score and a tree achieving it.
pub fn exhaustive_best(n: usize, p: &RandomProvider, inventory: &[RelationLabel]) -> (f64, TreeDesc) {
    fn labelings(desc: &TreeDesc, inventory: &[RelationLabel]) -> Vec<TreeDesc> {
        match desc {
            TreeDesc::Leaf(_) => vec![desc.clone()],
            TreeDesc::Node { children, .. } => {
                let mut out = Vec::new();
                for l in labelings(&children[0], inventory) {
                    for r in labelings(&children[1], inventory) {
                        for lab in inventory {
                            out.push(TreeDesc::node(l.clone(), r.clone(), lab.clone()));
                        }
                    }
                }
                out
            }
        }
    }
    fn score(desc: &TreeDesc, p: &RandomProvider, inventory: &[RelationLabel]) -> (f64, Range<usize>) {
        match desc {
            TreeDesc::Leaf(k) => (0.0, *k..*k + 1),
            TreeDesc::Node { label, children } => {
                let (ls, lr) = score(&children[0], p, inventory);
                let (rs, rr) = score(&children[1], p, inventory);
                let split = p.splits[&(lr.start, rr.end)][lr.end - lr.start - 1];
                let idx = inventory.iter().position(|l| l == label).unwrap();
                let lab = p.labels[&(lr.start, lr.end, rr.end)][idx];
                (split + lab + ls + rs, lr.start..rr.end)
            }
        }
    }
    let mut best: Option<(f64, TreeDesc)> = None;
    for shape in all_shapes(0, n, &inventory[0]) {
        // full label enumeration only while it stays small
        let candidates = if n <= 5 { labelings(&shape, inventory) } else { vec![best_labels(&shape, p, inventory)] };
        for c in candidates {
            let (s, _) = score(&c, p, inventory);
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, c));
            }
        }
    }
    best.unwrap()
}

/// Gives each node of `shape` its highest-scoring label.
fn best_labels(shape: &TreeDesc, p: &RandomProvider, inventory: &[RelationLabel]) -> TreeDesc {
    fn go(d: &TreeDesc, p: &RandomProvider, inv: &[RelationLabel]) -> (TreeDesc, Range<usize>) {
        match d {
            TreeDesc::Leaf(k) => (d.clone(), *k..*k + 1),
            TreeDesc::Node { children, .. } => {
                let (l, lr) = go(&children[0], p, inv);
                let (r, rr) = go(&children[1], p, inv);
                let scores = &p.labels[&(lr.start, lr.end, rr.end)];
                let mut best = 0;
                for (i, s) in scores.iter().enumerate() {
                    if *s > scores[best] {
                        best = i;
                    }
                }
                (TreeDesc::node(l, r, inv[best].clone()), lr.start..rr.end)
            }
        }
    }
    go(shape, p, inventory).0
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// All `L^T` label paths.
pub fn all_paths(len: usize, labels: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out.into_iter().flat_map(|p| (0..labels).map(move |l| [p.clone(), vec![l]].concat())).collect();
    }
    out
}

/// `log Z` by enumerating every path.
pub fn brute_log_partition(model: &CrfModel, x: &FeatureMatrix) -> f64 {
    let scores: Vec<f64> = all_paths(x.len(), model.num_labels()).iter().map(|p| model.path_score(x, p).unwrap()).collect();
    log_sum_exp(&scores)
}

pub fn random_model<R: Rng>(rng: &mut R, labels: usize, dim: usize) -> CrfModel {
    let names = (0..labels).map(|i| format!("L{i}")).collect();
    let mut m = CrfModel::new(names, dim).unwrap();
    for block in m.params.blocks_mut() {
        for v in block.iter_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
    }
    m
}

pub fn random_features<R: Rng>(rng: &mut R, len: usize, dim: usize) -> FeatureMatrix {
    let mut rows = Vec::with_capacity(len);
    for _ in 0..len {
        let mut row = Vec::new();
        for f in 0..dim {
            if rng.gen_bool(0.6) {
                row.push((f as u32, rng.gen_range(-1.5..1.5)));
            }
        }
        rows.push(row);
    }
    FeatureMatrix::new(dim, rows)
}

/// Token sequences whose EDUs start exactly at "The" after a comma.
pub fn separable_docs(n: usize, seed: u64) -> Vec<DocumentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ["cat", "dog", "ran", "home", "fast", "slowly", "big", "red"];
    (0..n)
        .map(|d| {
            let mut tokens: Vec<String> = Vec::new();
            let mut starts = vec![0];
            for e in 0..rng.gen_range(2..5) {
                if e > 0 {
                    starts.push(tokens.len());
                }
                tokens.push("The".into());
                for _ in 0..rng.gen_range(1..5) {
                    tokens.push(words[rng.gen_range(0..words.len())].into());
                }
                tokens.push(",".into());
            }
            let edus: Vec<Span> = starts
                .iter()
                .enumerate()
                .map(|(i, &s)| Span { first: s, last: starts.get(i + 1).copied().unwrap_or(tokens.len()) - 1 })
                .collect();
            DocumentRecord {
                id: format!("d{d}"),
                genre: "synthetic".into(),
                language: Language::En,
                tokens: tokens.into_iter().enumerate().map(|(i, t)| Token { text: t, char_start: 0, index: i }).collect(),
                edus,
                tree: None,
                sentence_boundaries: None,
                split: Split::Train,
            }
        })
        .collect()
}
