//! Canonical line-delimited record format.
//!
//! One JSON object per line, UTF-8, fields in this order:
//!
//! ```text
//! {"id":"GUM_news_iodine","genre":"news","lang":"en",
//!  "tokens":[["The",0],["salt",4]],"edus":[[0,1]],
//!  "tree":"#0","sents":[0],"split":"train"}
//! ```
//!
//! `tokens` holds `[text, char_start]` pairs, `edus` inclusive token ranges,
//! `tree` the bracketed tree (`(rel_NUC left right)`, leaves `#k`) or null,
//! `sents` sentence-start token indices or null.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{Corpus, DocumentError, DocumentRecord};
use crate::tree::{RstTree, Span, Token, TreeDesc};

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("line {line}: {msg}")]
    SchemaViolation { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Document(#[from] DocumentError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    id: String,
    genre: String,
    lang: String,
    tokens: Vec<(String, usize)>,
    edus: Vec<(usize, usize)>,
    tree: Option<String>,
    sents: Option<Vec<usize>>,
    split: String,
}

pub fn record_to_line(doc: &DocumentRecord) -> String {
    let wire = Wire {
        id: doc.id.clone(),
        genre: doc.genre.clone(),
        lang: doc.language.as_str().to_string(),
        tokens: doc.tokens.iter().map(|t| (t.text.clone(), t.char_start)).collect(),
        edus: doc.edus.iter().map(|e| (e.first, e.last)).collect(),
        tree: doc.tree.as_ref().map(RstTree::to_string),
        sents: doc.sentence_boundaries.clone(),
        split: doc.split.as_str().to_string(),
    };
    serde_json::to_string(&wire).expect("record serializes")
}

/// Parses and validates one line. `line` is the 1-based line number used in
/// error messages.
pub fn record_from_line(text: &str, line: usize) -> Result<DocumentRecord, CanonicalError> {
    let bad = |msg: String| CanonicalError::SchemaViolation { line, msg };
    let wire: Wire = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let tokens: Vec<Token> =
        wire.tokens.into_iter().enumerate().map(|(index, (text, char_start))| Token { text, char_start, index }).collect();
    let edus = wire
        .edus
        .iter()
        .map(|&(a, b)| Span::new(a, b).ok_or_else(|| bad(format!("EDU [{a}, {b}] is reversed"))))
        .collect::<Result<Vec<_>, _>>()?;
    let tree = match wire.tree {
        None => None,
        Some(s) => {
            let desc: TreeDesc = s.parse().map_err(|e| bad(format!("tree: {e}")))?;
            Some(RstTree::build(&desc, &edus).map_err(|e| bad(format!("tree: {e}")))?)
        }
    };
    let doc = DocumentRecord {
        id: wire.id,
        genre: wire.genre,
        language: wire.lang.parse().map_err(|e: DocumentError| bad(e.to_string()))?,
        tokens,
        edus,
        tree,
        sentence_boundaries: wire.sents,
        split: wire.split.parse().map_err(|e: DocumentError| bad(e.to_string()))?,
    };
    doc.validate().map_err(|e| bad(e.to_string()))?;
    Ok(doc)
}

/// Streams records from a reader, skipping blank lines.
pub fn records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<DocumentRecord, CanonicalError>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(record_from_line(&l, i + 1)),
    })
}

pub fn read_canonical<R: BufRead>(name: &str, reader: R) -> Result<Corpus, CanonicalError> {
    let docs = records(reader).collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(name, docs)?)
}

pub fn write_canonical<'a, W, I>(mut writer: W, docs: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a DocumentRecord>,
{
    for doc in docs {
        writeln!(writer, "{}", record_to_line(doc))?;
    }
    writer.flush()
}

/// Reads a sentence-start file: one `doc_id<TAB>s0 s1 ...` line per document,
/// where the starts are token indices into the canonical tokens. Blank lines
/// and `#` comments are skipped.
pub fn read_sentence_starts<R: BufRead>(reader: R) -> Result<BTreeMap<String, Vec<usize>>, CanonicalError> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let bad = |msg: String| CanonicalError::SchemaViolation { line: i + 1, msg };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or_else(|| bad("expected doc_id<TAB>starts".into()))?;
        let starts = rest
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad token index {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if out.insert(id.to_string(), starts).is_some() {
            return Err(bad(format!("duplicate document {id:?}")));
        }
    }
    Ok(out)
}

/// Attaches sentence starts to the matching documents and revalidates them.
/// Returns the number of documents that received boundaries; ids without an
/// entry are left untouched. A missing leading 0 is added.
pub fn attach_sentences(docs: &mut [DocumentRecord], starts: &BTreeMap<String, Vec<usize>>) -> Result<usize, DocumentError> {
    let mut attached = 0;
    for doc in docs.iter_mut() {
        if let Some(s) = starts.get(&doc.id) {
            let mut s = s.clone();
            if s.first() != Some(&0) {
                s.insert(0, 0);
            }
            doc.sentence_boundaries = Some(s);
            doc.validate()?;
            attached += 1;
        }
    }
    Ok(attached)
}
