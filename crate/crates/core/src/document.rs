//! Documents and corpora.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tree::{RstTree, Span, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    En,
    Ru,
    Other,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Ru => "ru",
            Language::Other => "other",
        }
    }
}

impl FromStr for Language {
    type Err = DocumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "ru" => Ok(Language::Ru),
            "other" => Ok(Language::Other),
            _ => Err(DocumentError::BadField { field: "lang", value: s.to_string() }),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = DocumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(DocumentError::BadField { field: "split", value: s.to_string() }),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocumentError {
    #[error("document `{0}` has no tokens")]
    NoTokens(String),
    #[error("document `{id}`: token {index} is empty or misnumbered")]
    BadToken { id: String, index: usize },
    #[error("document `{id}`: EDUs do not partition the {tokens} tokens (problem at EDU {edu})")]
    NotAPartition { id: String, tokens: usize, edu: usize },
    #[error("document `{id}`: tree has {leaves} leaves but there are {edus} EDUs")]
    LeafCountMismatch { id: String, leaves: usize, edus: usize },
    #[error("document `{id}`: tree spans do not match the EDU spans")]
    TreeSpanMismatch { id: String },
    #[error("document `{id}`: bad sentence boundaries")]
    BadSentences { id: String },
    #[error("document `{0}` has no tree")]
    MissingTree(String),
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{id}` uses relation `{relation}` which is not in the corpus inventory")]
    UnknownRelation { id: String, relation: String },
    #[error("bad {field} value `{value}`")]
    BadField { field: &'static str, value: String },
}

/// One document: tokens, gold EDU segmentation, and optionally a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentRecord {
    pub id: String,
    pub genre: String,
    pub language: Language,
    pub tokens: Vec<Token>,
    pub edus: Vec<Span>,
    pub tree: Option<RstTree>,
    /// Token index at which each sentence starts; the first entry is 0.
    pub sentence_boundaries: Option<Vec<usize>>,
    pub split: Split,
}

impl DocumentRecord {
    /// Checks the record invariants.
    pub fn validate(&self) -> Result<(), DocumentError> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(DocumentError::NoTokens(self.id.clone()));
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.text.is_empty() || tok.index != i {
                return Err(DocumentError::BadToken { id: self.id.clone(), index: i });
            }
        }
        check_partition(&self.edus, n).map_err(|edu| DocumentError::NotAPartition { id: self.id.clone(), tokens: n, edu })?;
        if let Some(tree) = &self.tree {
            if tree.leaf_count() != self.edus.len() {
                return Err(DocumentError::LeafCountMismatch { id: self.id.clone(), leaves: tree.leaf_count(), edus: self.edus.len() });
            }
            if tree.edu_spans() != self.edus {
                return Err(DocumentError::TreeSpanMismatch { id: self.id.clone() });
            }
        }
        if let Some(sents) = &self.sentence_boundaries {
            let ok = sents.first() == Some(&0) && sents.windows(2).all(|w| w[0] < w[1]) && sents.last().is_some_and(|&s| s < n);
            if !ok {
                return Err(DocumentError::BadSentences { id: self.id.clone() });
            }
        }
        Ok(())
    }

    pub fn tree(&self) -> Result<&RstTree, DocumentError> {
        self.tree.as_ref().ok_or_else(|| DocumentError::MissingTree(self.id.clone()))
    }

    /// Token spans of the sentences, if boundaries are known.
    pub fn sentences(&self) -> Option<Vec<Span>> {
        let starts = self.sentence_boundaries.as_ref()?;
        let n = self.tokens.len();
        Some(starts.iter().enumerate().map(|(i, &s)| Span { first: s, last: starts.get(i + 1).map_or(n, |&e| e) - 1 }).collect())
    }

    /// The id with any `_part_<k>` suffix removed.
    pub fn source_id(&self) -> &str {
        match self.id.rfind("_part_") {
            Some(pos) if self.id[pos + 6..].chars().all(|c| c.is_ascii_digit()) && pos + 6 < self.id.len() => &self.id[..pos],
            _ => &self.id,
        }
    }
}

/// Returns the index of the first offending EDU if `edus` does not
/// partition `0..n`.
pub fn check_partition(edus: &[Span], n: usize) -> Result<(), usize> {
    let mut next = 0;
    for (k, e) in edus.iter().enumerate() {
        if e.first != next || e.last < e.first || e.last >= n {
            return Err(k);
        }
        next = e.last + 1;
    }
    if next != n {
        return Err(edus.len());
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeStats {
    pub edu_count: usize,
    pub token_count: usize,
    pub depth: usize,
}

pub fn tree_stats(doc: &DocumentRecord) -> Result<TreeStats, DocumentError> {
    let tree = doc.tree()?;
    Ok(TreeStats { edu_count: tree.leaf_count(), token_count: tree.tokens().len(), depth: tree.depth() })
}

/// A named set of documents with a registered relation inventory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<DocumentRecord>,
    pub relation_inventory: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus whose inventory is exactly the relations used by its
    /// trees.
    pub fn new(name: impl Into<String>, documents: Vec<DocumentRecord>) -> Result<Corpus, DocumentError> {
        let relation_inventory = documents
            .iter()
            .filter_map(|d| d.tree.as_ref())
            .flat_map(|t| t.internal_nodes().filter_map(|n| n.label()).map(|l| l.relation.clone()))
            .collect();
        Corpus::with_inventory(name, documents, relation_inventory)
    }

    pub fn with_inventory(
        name: impl Into<String>,
        documents: Vec<DocumentRecord>,
        relation_inventory: BTreeSet<String>,
    ) -> Result<Corpus, DocumentError> {
        let corpus = Corpus { name: name.into(), documents, relation_inventory };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), DocumentError> {
        let mut ids = HashSet::new();
        for doc in &self.documents {
            if !ids.insert(doc.id.as_str()) {
                return Err(DocumentError::DuplicateId(doc.id.clone()));
            }
            doc.validate()?;
            if let Some(tree) = &doc.tree {
                for label in tree.internal_nodes().filter_map(|n| n.label()) {
                    if !self.relation_inventory.contains(&label.relation) {
                        return Err(DocumentError::UnknownRelation { id: doc.id.clone(), relation: label.relation.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}
