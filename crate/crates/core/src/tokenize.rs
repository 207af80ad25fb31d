//! Deterministic whitespace-plus-punctuation tokenizer.
//!
//! Rules, applied in order:
//!
//! 1. Split on Unicode whitespace.
//! 2. Peel punctuation (Unicode category `P*`) off the front of each chunk.
//!    A run of identical punctuation characters is a single token (`"...`).
//! 3. Peel punctuation off the back the same way, except that a single
//!    trailing `.` stays attached when the rest of the chunk already contains
//!    a `.` (abbreviations such as `U.S.` or `e.g.`).
//! 4. Whatever remains in the middle is one token (`don't`, `3.5`, `e-mail`).
//!
//! Offsets are character (not byte) offsets into the input.

use unicode_categories::UnicodeCategories;

/// A token slice of the input and its character offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawToken<'a> {
    pub text: &'a str,
    pub char_start: usize,
}

pub fn tokenize(text: &str) -> Vec<RawToken<'_>> {
    let mut out = Vec::new();
    let mut chunk_start: Option<(usize, usize)> = None; // (byte, char)
    for (char_idx, (byte, c)) in text.char_indices().enumerate() {
        if c.is_whitespace() {
            if let Some((b, ch)) = chunk_start.take() {
                split_chunk(&text[b..byte], ch, &mut out);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some((byte, char_idx));
        }
    }
    if let Some((b, ch)) = chunk_start {
        split_chunk(&text[b..], ch, &mut out);
    }
    out
}

fn is_punct(c: char) -> bool {
    c.is_punctuation()
}

fn split_chunk<'a>(chunk: &'a str, char_start: usize, out: &mut Vec<RawToken<'a>>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(chunk.len(), |&(b, _)| b);

    let mut lo = 0;
    let mut hi = chars.len();
    let mut head = Vec::new();
    while lo < hi && is_punct(chars[lo].1) {
        let mut end = lo + 1;
        while end < hi && chars[end].1 == chars[lo].1 {
            end += 1;
        }
        head.push((lo, end));
        lo = end;
    }
    let mut tail = Vec::new();
    while lo < hi && is_punct(chars[hi - 1].1) {
        let c = chars[hi - 1].1;
        let mut start = hi - 1;
        while start > lo && chars[start - 1].1 == c {
            start -= 1;
        }
        if c == '.' && hi - start == 1 && chars[lo..start].iter().any(|&(_, x)| x == '.') {
            break;
        }
        tail.push((start, hi));
        hi = start;
    }
    let mut push = |a: usize, b: usize| {
        out.push(RawToken { text: &chunk[byte_at(a)..byte_at(b)], char_start: char_start + a });
    };
    for (a, b) in head {
        push(a, b);
    }
    if lo < hi {
        push(lo, hi);
    }
    for &(a, b) in tail.iter().rev() {
        push(a, b);
    }
}
