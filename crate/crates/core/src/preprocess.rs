//! Corpus preprocessing: relation remapping, forest splitting, single-EDU
//! filtering and merged `relation_NUC` labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::document::{Corpus, DocumentError, DocumentRecord, Language, Split};
use crate::rs3::{binarize, parse_rs3, Rs3Error, Rs3Tree};
use crate::tokenize::tokenize;
use crate::tree::{LabelError, Nuclearity, RelationLabel, RstTree, Span, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("relation `{0}` is neither in the inventory nor covered by a remap rule")]
    UnknownLabel(String),
    #[error("remap table line {line}: {msg}")]
    BadTable { line: usize, msg: String },
    #[error(transparent)]
    Rs3(#[from] Rs3Error),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: {source}")]
    InFile { path: String, source: Box<PreprocessError> },
}

/// `relation_NUC`.
pub fn merge_label(relation: &str, nuclearity: Nuclearity) -> String {
    format!("{relation}_{nuclearity}")
}

/// Inverse of [`merge_label`].
pub fn split_label(merged: &str) -> Result<(String, Nuclearity), LabelError> {
    let label: RelationLabel = merged.parse()?;
    Ok((label.relation, label.nuclearity))
}

/// Left or right side of a remap rule: a relation name, optionally pinned to
/// one nuclearity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelPattern {
    pub relation: String,
    pub nuclearity: Option<Nuclearity>,
}

impl LabelPattern {
    fn matches(&self, label: &RelationLabel) -> bool {
        self.relation == label.relation && self.nuclearity.is_none_or(|n| n == label.nuclearity)
    }
}

impl FromStr for LabelPattern {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((rel, nuc)) = s.rsplit_once('_') {
            if let Ok(n) = nuc.parse::<Nuclearity>() {
                let label = RelationLabel::new(rel, n)?;
                return Ok(LabelPattern { relation: label.relation, nuclearity: Some(n) });
            }
        }
        let label = RelationLabel::new(s, Nuclearity::NN)?;
        Ok(LabelPattern { relation: label.relation, nuclearity: None })
    }
}

impl fmt::Display for LabelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.nuclearity {
            Some(n) => write!(f, "{}_{n}", self.relation),
            None => f.write_str(&self.relation),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemapRule {
    pub from: LabelPattern,
    /// A target without nuclearity keeps the original nuclearity.
    pub to: LabelPattern,
}

impl RemapRule {
    fn apply(&self, label: &RelationLabel) -> RelationLabel {
        RelationLabel { relation: self.to.relation.clone(), nuclearity: self.to.nuclearity.unwrap_or(label.nuclearity) }
    }
}

impl fmt::Display for RemapRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

/// Ordered relabeling rules, applied in a single pass: the first matching
/// rule rewrites a label and the result is not matched again.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemapTable {
    rules: Vec<RemapRule>,
}

/// Relabeling for RuRSTreebank 2.1. Name merges come first, then the
/// nuclearity-specific rows; no label is matched by both groups.
pub const DEFAULT_RRT_TABLE: &str = "\
# RuRSTreebank relation remapping.
# Two columns: original label, replacement. A bare relation name matches
# any nuclearity and keeps it; `name_NUC` matches (or sets) one nuclearity.
# Rules apply in order, once per label, without chaining.

# Merged or retired relation names.
antithesis\tattribution
cause\tcause-effect
effect\tcause-effect
motivation\tcondition
evaluation\tinterpretation-evaluation
interpretation\tinterpretation-evaluation

# Nuclearity-specific corrections.
restatement_SN\tcondition_SN
restatement_NS\telaboration_NS
solutionhood_NS\tsolutionhood_SN
preparation_NS\telaboration_NS
elaboration_SN\tpreparation_SN
background_NS\telaboration_SN
";

impl RemapTable {
    pub fn new(rules: Vec<RemapRule>) -> Result<RemapTable, PreprocessError> {
        for (i, r) in rules.iter().enumerate() {
            let identity = r.from.relation == r.to.relation && (r.to.nuclearity.is_none() || r.to.nuclearity == r.from.nuclearity);
            if identity {
                return Err(PreprocessError::BadTable { line: i + 1, msg: format!("rule `{r}` maps a label to itself") });
            }
        }
        Ok(RemapTable { rules })
    }

    pub fn rrt_default() -> RemapTable {
        DEFAULT_RRT_TABLE.parse().expect("embedded table parses")
    }

    pub fn rules(&self) -> &[RemapRule] {
        &self.rules
    }

    /// Index of the first matching rule and the rewritten label.
    pub fn lookup(&self, label: &RelationLabel) -> Option<(usize, RelationLabel)> {
        self.rules.iter().enumerate().find(|(_, r)| r.from.matches(label)).map(|(i, r)| (i, r.apply(label)))
    }

    /// Relation inventory after remapping `inventory`.
    pub fn remap_inventory(&self, inventory: &BTreeSet<String>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for rel in inventory {
            match self.rules.iter().find(|r| r.from.nuclearity.is_none() && &r.from.relation == rel) {
                Some(r) => out.insert(r.to.relation.clone()),
                None => out.insert(rel.clone()),
            };
        }
        for r in &self.rules {
            if r.from.nuclearity.is_some() && out.contains(&r.from.relation) {
                out.insert(r.to.relation.clone());
            }
        }
        out
    }

    /// Plain-text form, loadable again with `parse`.
    pub fn dump(&self) -> String {
        self.rules.iter().map(|r| format!("{}\t{}\n", r.from, r.to)).collect()
    }
}

impl FromStr for RemapTable {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rules = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| PreprocessError::BadTable { line: i + 1, msg };
            if cols.len() != 2 {
                return Err(bad(format!("expected 2 columns, found {}", cols.len())));
            }
            let from = cols[0].parse().map_err(|e: LabelError| bad(e.to_string()))?;
            let to = cols[1].parse().map_err(|e: LabelError| bad(e.to_string()))?;
            rules.push(RemapRule { from, to });
        }
        RemapTable::new(rules).map_err(|e| match e {
            PreprocessError::BadTable { msg, .. } => PreprocessError::BadTable { line: 0, msg },
            other => other,
        })
    }
}

/// Rewrites labels according to `table`. Structure and child order are
/// untouched; a nuclearity change only changes which child is the nucleus.
/// Returns the new tree and the number of rewrites per rule.
pub fn remap_labels(tree: &RstTree, table: &RemapTable, inventory: &BTreeSet<String>) -> Result<(RstTree, Vec<usize>), PreprocessError> {
    let mut counts = vec![0; table.rules.len()];
    for label in tree.internal_nodes().filter_map(|n| n.label()) {
        match table.lookup(label) {
            Some((i, _)) => counts[i] += 1,
            None if inventory.contains(&label.relation) => {}
            None => return Err(PreprocessError::UnknownLabel(label.relation.clone())),
        }
    }
    let out = tree.map_labels(|l| table.lookup(l).map_or_else(|| l.clone(), |(_, new)| new));
    Ok((out, counts))
}

/// [`remap_labels`] without the counts.
pub fn remap_rrt_labels(tree: &RstTree, table: &RemapTable, inventory: &BTreeSet<String>) -> Result<RstTree, PreprocessError> {
    remap_labels(tree, table, inventory).map(|(t, _)| t)
}

/// Per-file metadata inherited by every tree extracted from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocMeta {
    pub genre: String,
    pub language: Language,
    pub split: Split,
}

/// Turns the components of one rs3 file into documents. A single component
/// keeps `id`; otherwise components become `<id>_part_1`, `<id>_part_2`, ...
/// in document order.
pub fn split_forest(id: &str, forest: &[Rs3Tree], meta: &DocMeta) -> Result<Vec<DocumentRecord>, PreprocessError> {
    let mut out = Vec::with_capacity(forest.len());
    for (i, component) in forest.iter().enumerate() {
        let doc_id = if forest.len() == 1 { id.to_string() } else { format!("{id}_part_{}", i + 1) };
        out.push(component_to_record(doc_id, component, meta)?);
    }
    Ok(out)
}

/// Tokenizes one component's EDUs and binarizes its tree.
pub fn component_to_record(id: String, component: &Rs3Tree, meta: &DocMeta) -> Result<DocumentRecord, PreprocessError> {
    let mut tokens = Vec::new();
    let mut edus = Vec::with_capacity(component.texts.len());
    let mut offset = 0;
    for text in &component.texts {
        let first = tokens.len();
        for raw in tokenize(text) {
            tokens.push(Token { text: raw.text.to_string(), char_start: offset + raw.char_start, index: tokens.len() });
        }
        offset += text.chars().count() + 1;
        edus.push(Span { first, last: tokens.len() - 1 });
    }
    let tree = binarize(&component.tree, &edus)?;
    let doc = DocumentRecord {
        id,
        genre: meta.genre.clone(),
        language: meta.language,
        tokens,
        edus,
        tree: Some(tree),
        sentence_boundaries: None,
        split: meta.split,
    };
    doc.validate()?;
    Ok(doc)
}

/// Genre encoded in a file stem: `GUM_<genre>_...`, otherwise the leading
/// run of letters (`news1_41` gives `news`).
pub fn genre_from_file_name(stem: &str) -> Option<String> {
    if let Some(rest) = stem.strip_prefix("GUM_") {
        return rest.split('_').next().filter(|g| !g.is_empty()).map(str::to_lowercase);
    }
    let lead: String = stem.chars().take_while(|c| c.is_alphabetic()).collect();
    (!lead.is_empty()).then(|| lead.to_lowercase())
}

/// Reads every `*.rs3` file in `dir` (sorted by name) and splits each into
/// documents named after the file stem. `meta` supplies per-file metadata.
pub fn load_rs3_dir<F>(dir: &Path, mut meta: F) -> Result<Vec<DocumentRecord>, PreprocessError>
where
    F: FnMut(&str) -> DocMeta,
{
    let io = |path: &Path, e: std::io::Error| PreprocessError::Io { path: path.display().to_string(), msg: e.to_string() };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| io(dir, e)))
        .collect::<Result<Vec<_>, _>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "rs3"));
    files.sort();
    let mut docs = Vec::new();
    for path in files {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
        let in_file = |e: PreprocessError| PreprocessError::InFile { path: path.display().to_string(), source: Box::new(e) };
        let forest = parse_rs3(&bytes).map_err(|e| in_file(e.into()))?;
        docs.extend(split_forest(&stem, &forest, &meta(&stem)).map_err(in_file)?);
    }
    Ok(docs)
}

/// Drops documents whose tree is a single EDU.
pub fn filter_single_edu(corpus: Corpus) -> (Corpus, usize) {
    let before = corpus.documents.len();
    let documents: Vec<_> = corpus.documents.into_iter().filter(|d| d.tree.as_ref().is_none_or(|t| t.leaf_count() > 1)).collect();
    let dropped = before - documents.len();
    (Corpus { name: corpus.name, documents, relation_inventory: corpus.relation_inventory }, dropped)
}

/// Counts of merged labels over all trees.
pub fn label_histogram<'a>(docs: impl IntoIterator<Item = &'a DocumentRecord>) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for doc in docs {
        if let Some(tree) = &doc.tree {
            for label in tree.internal_nodes().filter_map(|n| n.label()) {
                *h.entry(label.merged()).or_insert(0) += 1;
            }
        }
    }
    h
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    /// Source files (or source document ids).
    pub documents_in: usize,
    /// Trees produced by forest splitting; `documents_out + single_edu_dropped`.
    pub trees_extracted: usize,
    pub single_edu_dropped: usize,
    pub documents_out: usize,
    /// `(rule, rewrites)` in table order.
    pub rule_counts: Vec<(String, usize)>,
    pub histogram_before: BTreeMap<String, usize>,
    pub histogram_after: BTreeMap<String, usize>,
}

impl PreprocessReport {
    pub fn trees_per_document(&self) -> f64 {
        if self.documents_in == 0 {
            0.0
        } else {
            self.trees_extracted as f64 / self.documents_in as f64
        }
    }
}

impl fmt::Display for PreprocessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents in        {}", self.documents_in)?;
        writeln!(f, "trees extracted     {} ({:.1} per document)", self.trees_extracted, self.trees_per_document())?;
        writeln!(f, "single-EDU dropped  {}", self.single_edu_dropped)?;
        writeln!(f, "documents out       {}", self.documents_out)?;
        for (rule, n) in &self.rule_counts {
            writeln!(f, "rewrite {rule:<40} {n}")?;
        }
        writeln!(f, "classes before      {}", self.histogram_before.len())?;
        write!(f, "classes after       {}", self.histogram_after.len())
    }
}

#[derive(Clone, Debug, Default)]
pub struct PreprocessOptions {
    pub remap: Option<RemapTable>,
    pub drop_single_edu: bool,
}

/// Applies remapping and filtering to a corpus of already split trees.
/// `documents_in` is the number of distinct source documents.
pub fn preprocess_corpus(corpus: Corpus, options: &PreprocessOptions) -> Result<(Corpus, PreprocessReport), PreprocessError> {
    let mut report = PreprocessReport {
        documents_in: corpus.documents.iter().map(|d| d.source_id()).collect::<BTreeSet<_>>().len(),
        trees_extracted: corpus.documents.len(),
        histogram_before: label_histogram(&corpus.documents),
        ..Default::default()
    };
    let (mut corpus, dropped) = if options.drop_single_edu { filter_single_edu(corpus) } else { (corpus, 0) };
    report.single_edu_dropped = dropped;
    if let Some(table) = &options.remap {
        let mut totals = vec![0; table.rules().len()];
        for doc in &mut corpus.documents {
            if let Some(tree) = &doc.tree {
                let (new, counts) = remap_labels(tree, table, &corpus.relation_inventory)?;
                doc.tree = Some(new);
                totals.iter_mut().zip(counts).for_each(|(t, c)| *t += c);
            }
        }
        report.rule_counts = table.rules().iter().map(|r| r.to_string()).zip(totals).collect();
        corpus.relation_inventory = table.remap_inventory(&corpus.relation_inventory);
    }
    report.documents_out = corpus.documents.len();
    report.histogram_after = label_histogram(&corpus.documents);
    corpus.validate()?;
    Ok((corpus, report))
}
