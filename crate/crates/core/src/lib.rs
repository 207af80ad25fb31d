//! Toolkit for Rhetorical Structure Theory treebanks and parsing.
//!
//! * [`tree`], [`document`]: binarized RST trees, documents and corpora.
//! * [`rs3`], [`canonical`], [`tokenize`]: treebank I/O.
//! * [`preprocess`]: relation remapping, forest splitting, filtering.
//! * [`crf`]: linear-chain CRF EDU segmenter.
//! * [`decode`]: top-down span-splitting tree decoder over score providers.
//! * [`dwa`]: windowed dynamic weight average for multi-task losses.
//! * [`eval`]: Parseval, segmentation F1 and corpus statistics.

pub mod canonical;
pub mod crf;
pub mod decode;
pub mod document;
pub mod dwa;
pub mod eval;
pub mod preprocess;
pub mod rs3;
pub mod tokenize;
pub mod tree;

pub use document::{Corpus, DocumentRecord, Language, Split};
pub use tree::{Constituent, Nuclearity, RelationLabel, Role, RstTree, Span, Token, TreeDesc};
