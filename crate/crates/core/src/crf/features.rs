use std::hash::Hasher;

use fnv::FnvHasher;
use unicode_categories::UnicodeCategories;

use super::CrfError;
use crate::tree::Token;

/// Sparse `[seq_len × dim]` feature matrix: one `(feature, value)` list per
/// token, sorted by feature index without duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl FeatureMatrix {
    /// Normalizes each row (sorts, sums duplicate indices). Indices must be
    /// below `dim`.
    pub fn new(dim: usize, rows: Vec<Vec<(u32, f64)>>) -> FeatureMatrix {
        let rows = rows
            .into_iter()
            .map(|mut row| {
                assert!(row.iter().all(|&(f, _)| (f as usize) < dim), "feature index out of range");
                row.sort_by_key(|&(f, _)| f);
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
                for (f, x) in row {
                    match merged.last_mut() {
                        Some((g, y)) if *g == f => *y += x,
                        _ => merged.push((f, x)),
                    }
                }
                merged
            })
            .collect();
        FeatureMatrix { dim, rows }
    }

    /// Externally supplied dense vectors, e.g. encoder states.
    pub fn from_dense(rows: Vec<Vec<f64>>) -> Result<FeatureMatrix, CrfError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(CrfError::DimensionMismatch { what: "dense feature row", expected: dim, found: bad.len() });
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(CrfError::NonFinite);
        }
        let rows = rows.into_iter().map(|r| r.into_iter().enumerate().map(|(f, x)| (f as u32, x)).collect()).collect();
        Ok(FeatureMatrix { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }
}

/// Maps a token sequence to features. Must be deterministic for a fixed
/// configuration.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;
    fn extract(&self, tokens: &[Token]) -> FeatureMatrix;
}

/// Hashed lexical window: lowercased current/previous/next token, their
/// punctuation classes, comma flags, capitalization and a bias, each hashed
/// (FNV-1a) into `2^bits` buckets with value 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedWindowFeatures {
    pub bits: u32,
}

impl Default for HashedWindowFeatures {
    fn default() -> Self {
        HashedWindowFeatures { bits: 16 }
    }
}

fn punct_class(text: &str) -> &'static str {
    match text {
        "," | "،" | "、" => "comma",
        "." | "!" | "?" | "..." | "…" => "final",
        ":" | ";" => "colon",
        _ => {
            let mut chars = text.chars();
            let first = chars.next().unwrap_or(' ');
            if text.chars().all(|c| c.is_punctuation()) {
                if first.is_punctuation_open() || first.is_punctuation_close() {
                    "bracket"
                } else if first.is_punctuation_initial_quote() || first.is_punctuation_final_quote() || first == '"' || first == '\'' {
                    "quote"
                } else if first.is_punctuation_dash() {
                    "dash"
                } else {
                    "punct"
                }
            } else if text.chars().any(|c| c.is_ascii_digit()) {
                "number"
            } else if first.is_uppercase() {
                "cap"
            } else {
                "word"
            }
        }
    }
}

impl HashedWindowFeatures {
    fn bucket(&self, key: &str) -> u32 {
        let mut h = FnvHasher::default();
        h.write(key.as_bytes());
        (h.finish() & ((1u64 << self.bits) - 1)) as u32
    }
}

impl FeatureExtractor for HashedWindowFeatures {
    fn dim(&self) -> usize {
        1 << self.bits
    }

    fn extract(&self, tokens: &[Token]) -> FeatureMatrix {
        let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let class: Vec<&str> = tokens.iter().map(|t| punct_class(&t.text)).collect();
        let word = |i: isize| -> &str {
            if i < 0 {
                "<s>"
            } else {
                lower.get(i as usize).map_or("</s>", String::as_str)
            }
        };
        let cls = |i: isize| -> &str {
            if i < 0 {
                "<s>"
            } else {
                class.get(i as usize).copied().unwrap_or("</s>")
            }
        };
        let rows = (0..tokens.len() as isize)
            .map(|t| {
                let keys = [
                    "bias".to_string(),
                    format!("w0={}", word(t)),
                    format!("w-1={}", word(t - 1)),
                    format!("w+1={}", word(t + 1)),
                    format!("w-1|w0={}|{}", word(t - 1), word(t)),
                    format!("c0={}", cls(t)),
                    format!("c-1={}", cls(t - 1)),
                    format!("c+1={}", cls(t + 1)),
                    format!("c-1|c0={}|{}", cls(t - 1), cls(t)),
                    format!("comma-1={}", cls(t - 1) == "comma"),
                    format!("comma0={}", cls(t) == "comma"),
                ];
                keys.iter().map(|k| (self.bucket(k), 1.0)).collect()
            })
            .collect();
        FeatureMatrix::new(self.dim(), rows)
    }
}
