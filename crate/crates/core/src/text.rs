//! Word-level span helpers shared by the tokenizers, the heuristic parser and
//! the retrieval analyzer.

use std::ops::Range;

const LEADING_PUNCT: &[char] = &['(', '[', '{', '"', '\'', '“', '‘', '«'];
const TRAILING_PUNCT: &[char] = &[',', ';', ':', '.', '!', '?', ')', ']', '}', '"', '\'', '”', '’', '»'];

/// Byte ranges of the word-level tokens of `text`.
///
/// Whitespace separates runs; leading brackets/quotes and trailing sentence
/// punctuation are peeled into their own single-character tokens. A run made
/// only of punctuation stays one token.
pub fn word_spans(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    for run in whitespace_runs(text) {
        let s = &text[run.clone()];
        if s.chars().all(is_punct_char) {
            out.push(run);
            continue;
        }
        let mut start = run.start;
        let mut end = run.end;
        let mut leading = Vec::new();
        for (i, c) in s.char_indices() {
            if LEADING_PUNCT.contains(&c) {
                leading.push(run.start + i..run.start + i + c.len_utf8());
                start = run.start + i + c.len_utf8();
            } else {
                break;
            }
        }
        let mut trailing = Vec::new();
        for (i, c) in text[start..end].char_indices().rev() {
            if TRAILING_PUNCT.contains(&c) {
                trailing.push(start + i..start + i + c.len_utf8());
                end = start + i;
            } else {
                break;
            }
        }
        out.extend(leading);
        if start < end {
            out.push(start..end);
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Maximal non-whitespace runs.
pub fn whitespace_runs(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

pub fn is_punct_char(c: char) -> bool {
    c.is_ascii_punctuation() || LEADING_PUNCT.contains(&c) || TRAILING_PUNCT.contains(&c)
}

pub fn is_punct_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_punct_char)
}

/// Lowercased alphanumeric runs, used as index terms.
pub fn index_terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
