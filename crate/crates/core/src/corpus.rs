//! Document ingestion: hierarchical section splitting, sentence segmentation
//! and paragraph packing.
//!
//! A [`Document`] keeps every byte of its input. Paragraph texts are trimmed
//! slices of the raw text; whatever lies between them (headings, blank
//! lines) is kept as a separator so [`Document::render`] reproduces the
//! original exactly.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::whitespace_runs;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty input")]
    EmptyInput,
}

/// Default hierarchy markers for US-regulation style text: sections,
/// lettered paragraphs and numbered clauses, each at the start of a line.
pub const DEFAULT_HIERARCHY_PATTERNS: &[&str] = &[
    r"(?m)^[ \t]*(§+[ \t]*\d+(?:\.\d+)*[a-z]?)\.?",
    r"(?m)^[ \t]*(\([a-z]{1,2}\))",
    r"(?m)^[ \t]*(\(\d{1,3}\))",
];

pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "u.s.c.", "c.f.r.", "u.s.", "fed.", "reg.", "stat.", "pub.", "l.", "e.g.", "i.e.", "etc.", "et al.", "no.", "nos.",
    "sec.", "secs.", "par.", "para.", "art.", "ch.", "pt.", "vol.", "inc.", "corp.", "co.", "ltd.", "llc.", "mr.",
    "mrs.", "ms.", "dr.", "st.", "jr.", "sr.", "vs.", "v.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.",
    "sep.", "sept.", "oct.", "nov.", "dec.", "approx.", "dept.", "govt.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Ordered from outermost to innermost level. If a pattern has a capture
    /// group, group 1 is the heading label; otherwise the whole match is.
    pub hierarchy_patterns: Vec<String>,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub merge_short: bool,
    /// Keep heading markers inside paragraph text instead of only in
    /// `heading_path`.
    pub keep_headings: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            hierarchy_patterns: DEFAULT_HIERARCHY_PATTERNS.iter().map(|s| s.to_string()).collect(),
            min_tokens: 30,
            max_tokens: 300,
            merge_short: true,
            keep_headings: false,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<Vec<Regex>, CorpusError> {
        if self.min_tokens == 0 {
            return Err(CorpusError::Config("min_tokens must be positive".into()));
        }
        if self.min_tokens >= self.max_tokens {
            return Err(CorpusError::Config(format!(
                "min_tokens ({}) must be smaller than max_tokens ({})",
                self.min_tokens, self.max_tokens
            )));
        }
        self.hierarchy_patterns
            .iter()
            .map(|p| Regex::new(p).map_err(|e| CorpusError::Config(format!("invalid pattern {p:?}: {e}"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub doc_id: String,
    pub heading_path: Vec<String>,
    pub text: String,
    pub sentences: Vec<String>,
    pub token_count: usize,
}

impl Paragraph {
    /// Rebuilds sentences and token count from `text`.
    pub fn with_text(mut self, text: String, segmenter: &dyn SentenceSegmenter) -> Self {
        self.sentences = segmenter.segment(&text);
        self.token_count = count_tokens(&text);
        self.text = text;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub raw_text: String,
    pub paragraphs: Vec<Paragraph>,
    /// `separators[i]` precedes `paragraphs[i]`.
    pub separators: Vec<String>,
    pub trailer: String,
}

impl Document {
    /// Separators, paragraph texts and trailer joined back together.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.raw_text.len());
        for (sep, p) in self.separators.iter().zip(&self.paragraphs) {
            out.push_str(sep);
            out.push_str(&p.text);
        }
        out.push_str(&self.trailer);
        out
    }

    /// Rebuilds a document from a paragraph store. Separators are blank
    /// lines since the store does not record them.
    pub fn from_paragraphs(title: &str, paragraphs: Vec<Paragraph>) -> Self {
        let id = paragraphs
            .first()
            .map(|p| p.doc_id.clone())
            .unwrap_or_else(|| document_id(title, ""));
        let separators = (0..paragraphs.len())
            .map(|i| if i == 0 { String::new() } else { "\n\n".to_string() })
            .collect();
        let mut doc = Self {
            id,
            title: title.to_string(),
            raw_text: String::new(),
            paragraphs,
            separators,
            trailer: String::new(),
        };
        doc.raw_text = doc.render();
        doc
    }

    pub fn paragraph(&self, id: &str) -> Option<&Paragraph> {
        self.paragraphs.iter().find(|p| p.id == id)
    }
}

/// Sentence boundary detection. Returned spans are trimmed, ordered and
/// disjoint; only whitespace lies between them.
pub trait SentenceSegmenter: Send + Sync {
    fn spans(&self, text: &str) -> Vec<Range<usize>>;

    fn segment(&self, text: &str) -> Vec<String> {
        self.spans(text).into_iter().map(|r| text[r].to_string()).collect()
    }
}

static ENUM_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:§+|\(?(?:\d{1,3}|[A-Za-z]|[ivxlc]+|[IVXLC]+)\)?)$").unwrap());

/// Punctuation-driven segmenter with an abbreviation list and a guard for
/// enumeration labels such as "1." or "(a).".
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: HashSet<String>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl RuleSegmenter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim().to_lowercase())
                .collect(),
        }
    }

    pub fn with_abbreviation(mut self, abbr: &str) -> Self {
        self.abbreviations.insert(abbr.trim().to_lowercase());
        self
    }

    fn suppressed(&self, text: &str, sentence_start: usize, period: usize) -> bool {
        let word_start = text[..period]
            .rfind(char::is_whitespace)
            .map(|i| i + text[i..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(0)
            .max(sentence_start);
        let word = &text[word_start..=period];
        let bare = word.trim_start_matches(['(', '[', '"', '\'', '“']);
        if self.abbreviations.contains(&bare.to_lowercase()) {
            return true;
        }
        // two-word abbreviations such as "et al."
        if let Some(prev) = text[sentence_start..word_start].split_whitespace().last() {
            if self
                .abbreviations
                .contains(&format!("{} {}", prev, bare).to_lowercase())
            {
                return true;
            }
        }
        let label = &word[..word.len() - 1];
        let words_so_far = text[sentence_start..=period].split_whitespace().count();
        words_so_far <= 2 && ENUM_LABEL.is_match(label)
    }
}

impl SentenceSegmenter for RuleSegmenter {
    fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = match text.find(|c: char| !c.is_whitespace()) {
            Some(s) => s,
            None => return spans,
        };
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if pos < start || !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            // absorb runs like "?!" or "..." and closing quotes/brackets
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | ')' | ']' | '"' | '\'' | '”' | '’') {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = k > j
                && k < chars.len()
                && (chars[k].1.is_uppercase()
                    || chars[k].1.is_ascii_digit()
                    // a new line opening with "(b)" or "§ 2" starts a new sentence
                    || (matches!(chars[k].1, '(' | '[' | '§') && chars[j..k].iter().any(|&(_, w)| w == '\n')))
                && !(c == '.' && j == i + 1 && self.suppressed(text, start, pos));
            if boundary {
                spans.push(start..end);
                start = chars[k].0;
                i = k;
            } else {
                i = j;
            }
        }
        let tail_end = text.trim_end().len();
        if start < tail_end {
            spans.push(start..tail_end);
        }
        spans
    }
}

/// Splits `text` into sentences with the default rule-based segmenter.
pub fn segment_sentences(text: &str) -> Vec<String> {
    RuleSegmenter::default().segment(text)
}

/// Whitespace-delimited token count. Punctuation counts as its own token
/// only when it already stands apart, as in "31 , 1985 ,".
pub fn count_tokens(text: &str) -> usize {
    whitespace_runs(text).len()
}

/// Stable identifier derived from the document title and content.
pub fn document_id(title: &str, raw: &str) -> String {
    let mut h = Sha256::new();
    h.update(title.as_bytes());
    h.update([0u8]);
    h.update(raw.as_bytes());
    let digest = h.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn paragraph_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}-p{index:05}")
}

pub fn ingest(raw: &str, title: &str, config: &SplitConfig) -> Result<Document, CorpusError> {
    ingest_with(raw, title, config, &RuleSegmenter::default())
}

#[derive(Debug, Clone)]
struct Unit {
    range: Range<usize>,
    heading_path: Vec<String>,
    tokens: usize,
}

struct Marker {
    range: Range<usize>,
    level: usize,
    label: String,
}

fn find_markers(raw: &str, patterns: &[Regex]) -> Vec<Marker> {
    let mut all = Vec::new();
    for (level, re) in patterns.iter().enumerate() {
        for caps in re.captures_iter(raw) {
            let whole = caps.get(0).unwrap();
            if whole.as_str().trim().is_empty() {
                continue;
            }
            let label = match caps.get(1) {
                Some(g) => g.as_str().trim().to_string(),
                None => whole.as_str().trim().trim_end_matches(['.', ':']).trim().to_string(),
            };
            let lead = whole.as_str().len() - whole.as_str().trim_start().len();
            all.push(Marker {
                range: whole.start() + lead..whole.end(),
                level,
                label,
            });
        }
    }
    all.sort_by_key(|m| (m.range.start, m.level));
    let mut kept: Vec<Marker> = Vec::new();
    for m in all {
        if kept.last().is_some_and(|k| m.range.start < k.range.end) {
            continue;
        }
        kept.push(m);
    }
    kept
}

fn trimmed(raw: &str, range: Range<usize>) -> Option<Range<usize>> {
    let s = &raw[range.clone()];
    let lead = s.len() - s.trim_start().len();
    let t = s.trim();
    (!t.is_empty()).then(|| range.start + lead..range.start + lead + t.len())
}

/// Splits a section body into units of at most `max` tokens at sentence
/// boundaries (next-fit). A single sentence longer than `max` stays whole.
fn pack_sentences(
    raw: &str,
    body: Range<usize>,
    path: &[String],
    max: usize,
    segmenter: &dyn SentenceSegmenter,
) -> Vec<Unit> {
    let text = &raw[body.clone()];
    let mut units: Vec<Unit> = Vec::new();
    let mut current: Option<Unit> = None;
    for span in segmenter.spans(text) {
        let range = body.start + span.start..body.start + span.end;
        let tokens = count_tokens(&raw[range.clone()]);
        match current.as_mut() {
            Some(cur) if cur.tokens + tokens <= max => {
                cur.range.end = range.end;
                cur.tokens = count_tokens(&raw[cur.range.clone()]);
            }
            _ => {
                if let Some(done) = current.take() {
                    units.push(done);
                }
                current = Some(Unit {
                    range,
                    heading_path: path.to_vec(),
                    tokens,
                });
            }
        }
    }
    units.extend(current);
    units
}

fn merge_short(raw: &str, units: Vec<Unit>, min: usize, max: usize) -> Vec<Unit> {
    let mut out: Vec<Unit> = Vec::with_capacity(units.len());
    let mut iter = units.into_iter().peekable();
    while let Some(mut unit) = iter.next() {
        while unit.tokens < min {
            let Some(next) = iter.peek() else { break };
            let merged = unit.range.start..next.range.end;
            let tokens = count_tokens(&raw[merged.clone()]);
            if tokens > max {
                break;
            }
            unit.range = merged;
            unit.tokens = tokens;
            iter.next();
        }
        out.push(unit);
    }
    // a short tail folds into its predecessor when that still fits
    if out.len() >= 2 && out[out.len() - 1].tokens < min {
        let last = out.pop().unwrap();
        let prev = out.last_mut().unwrap();
        let merged = prev.range.start..last.range.end;
        let tokens = count_tokens(&raw[merged.clone()]);
        if tokens <= max {
            prev.range = merged;
            prev.tokens = tokens;
        } else {
            out.push(last);
        }
    }
    out
}

pub fn ingest_with(
    raw: &str,
    title: &str,
    config: &SplitConfig,
    segmenter: &dyn SentenceSegmenter,
) -> Result<Document, CorpusError> {
    let patterns = config.validate()?;
    if raw.trim().is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let markers = find_markers(raw, &patterns);

    let mut units = Vec::new();
    let mut stack: Vec<(usize, String)> = Vec::new();
    let first = markers.first().map_or(raw.len(), |m| m.range.start);
    if let Some(body) = trimmed(raw, 0..first) {
        units.extend(pack_sentences(raw, body, &[], config.max_tokens, segmenter));
    }
    for (i, m) in markers.iter().enumerate() {
        while stack.last().is_some_and(|(lvl, _)| *lvl >= m.level) {
            stack.pop();
        }
        stack.push((m.level, m.label.clone()));
        let path: Vec<String> = stack.iter().map(|(_, l)| l.clone()).collect();
        let end = markers.get(i + 1).map_or(raw.len(), |n| n.range.start);
        let Some(body) = trimmed(raw, m.range.end..end) else {
            continue;
        };
        let mut section = pack_sentences(raw, body, &path, config.max_tokens, segmenter);
        if config.keep_headings {
            if let Some(u) = section.first_mut() {
                u.range.start = m.range.start;
                u.tokens = count_tokens(&raw[u.range.clone()]);
            }
        }
        units.extend(section);
    }
    if config.merge_short {
        units = merge_short(raw, units, config.min_tokens, config.max_tokens);
    }

    let doc_id = document_id(title, raw);
    let mut paragraphs = Vec::with_capacity(units.len());
    let mut separators = Vec::with_capacity(units.len());
    let mut cursor = 0;
    for (i, u) in units.into_iter().enumerate() {
        separators.push(raw[cursor..u.range.start].to_string());
        cursor = u.range.end;
        let text = raw[u.range].to_string();
        paragraphs.push(Paragraph {
            id: paragraph_id(&doc_id, i),
            doc_id: doc_id.clone(),
            heading_path: u.heading_path,
            sentences: segmenter.segment(&text),
            token_count: count_tokens(&text),
            text,
        });
    }
    Ok(Document {
        id: doc_id,
        title: title.to_string(),
        raw_text: raw.to_string(),
        paragraphs,
        separators,
        trailer: raw[cursor..].to_string(),
    })
}
