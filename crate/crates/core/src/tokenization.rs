//! Phrase tokenization: defined terms and verb-anchored noun groups are
//! replaced by short registry symbols, consistently across a document.
//!
//! Both tokenizers run in two phases. Discovery walks the document and
//! registers phrases (the only step that mutates the registry); application
//! then rewrites paragraphs against the frozen registry.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_tokens, Document, Paragraph};
use crate::dependency::{DepError, DependencyGraph, DependencyProvider};
use crate::text::{is_punct_token, word_spans};

pub const DEFAULT_DEFINITION_KEYWORDS: &[&str] = &["mean", "means", "defined", "define", "defines"];

const SUBJECT_MODIFIERS: &[&str] = &[
    "compound",
    "amod",
    "det",
    "nummod",
    "flat",
    "fixed",
    "nmod:poss",
    "det:predet",
    "compound:prt",
];
const GROUP_RELATIONS: &[&str] = &["nsubj", "nsubj:pass", "obj", "iobj"];
const CLAUSE_HEADS: &[&str] = &["root", "conj", "ccomp", "parataxis"];

static SYMBOL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:X[0-9X]*|Y[0-9Y]*)[0-9]$").unwrap());

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("phrase is empty after canonicalization")]
    EmptyPhrase,
    #[error("symbol {symbol:?} does not fit the {class:?} format")]
    BadSymbol { symbol: String, class: TokenClass },
    #[error("symbol {0:?} is already bound to another phrase")]
    SymbolTaken(String),
    #[error("phrase {0:?} is already bound to another symbol")]
    PhraseTaken(String),
    #[error("invalid registry file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenClass {
    Definition,
    Dependency,
}

impl TokenClass {
    fn letter(self) -> char {
        match self {
            TokenClass::Definition => 'X',
            TokenClass::Dependency => 'Y',
        }
    }

    pub fn mint(self, n: u32) -> String {
        let l = self.letter();
        format!("{l}1{l}{n}")
    }

    /// Minted symbols look like `X1X7`; seeded ones only need the class
    /// letter, digits and a trailing digit (`X1441`, `Y1Y300`).
    pub fn accepts(self, symbol: &str) -> bool {
        SYMBOL.is_match(symbol) && symbol.starts_with(self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenSource {
    KeywordDefinition,
    Lexicon,
    DependencyGroup,
    Seed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub phrase: String,
    pub surface_forms: BTreeSet<String>,
    pub class: TokenClass,
    pub source: TokenSource,
}

/// Bijective canonical-phrase ↔ symbol store.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenRegistry {
    entries: BTreeMap<String, TokenEntry>,
    reverse: BTreeMap<String, String>,
    next_definition: u32,
    next_dependency: u32,
}

impl TokenRegistry {
    pub fn new() -> Self {
        Self {
            next_definition: 1,
            next_dependency: 1,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TokenEntry> {
        self.entries.values()
    }

    pub fn get(&self, phrase: &str) -> Option<&TokenEntry> {
        self.entries.get(&canonicalize(phrase))
    }

    pub fn phrase_for(&self, token: &str) -> Option<&str> {
        self.reverse.get(token).map(String::as_str)
    }

    pub fn is_token(&self, word: &str) -> bool {
        self.reverse.contains_key(word)
    }

    /// Returns the symbol for `phrase`, minting the next one of `class` if
    /// the canonical phrase is new. An existing binding wins regardless of
    /// class.
    pub fn register(&mut self, phrase: &str, class: TokenClass, source: TokenSource) -> Result<String, TokenError> {
        let canonical = canonicalize(phrase);
        if canonical.is_empty() {
            return Err(TokenError::EmptyPhrase);
        }
        if let Some(e) = self.entries.get_mut(&canonical) {
            e.surface_forms.insert(phrase.trim().to_string());
            return Ok(e.token.clone());
        }
        let counter = match class {
            TokenClass::Definition => &mut self.next_definition,
            TokenClass::Dependency => &mut self.next_dependency,
        };
        *counter = (*counter).max(1);
        let mut symbol = class.mint(*counter);
        while self.reverse.contains_key(&symbol) {
            *counter += 1;
            symbol = class.mint(*counter);
        }
        *counter += 1;
        self.insert(TokenEntry {
            token: symbol.clone(),
            phrase: canonical,
            surface_forms: BTreeSet::from([phrase.trim().to_string()]),
            class,
            source,
        });
        Ok(symbol)
    }

    /// Binds an explicit symbol, e.g. to replay a known mapping.
    pub fn seed(&mut self, token: &str, phrase: &str, class: TokenClass) -> Result<(), TokenError> {
        let canonical = canonicalize(phrase);
        if canonical.is_empty() {
            return Err(TokenError::EmptyPhrase);
        }
        if !class.accepts(token) {
            return Err(TokenError::BadSymbol {
                symbol: token.to_string(),
                class,
            });
        }
        match (self.entries.get(&canonical), self.reverse.get(token)) {
            (Some(e), _) if e.token == token => return Ok(()),
            (Some(_), _) => return Err(TokenError::PhraseTaken(canonical)),
            (None, Some(_)) => return Err(TokenError::SymbolTaken(token.to_string())),
            (None, None) => {}
        }
        self.insert(TokenEntry {
            token: token.to_string(),
            phrase: canonical,
            surface_forms: BTreeSet::from([phrase.trim().to_string()]),
            class,
            source: TokenSource::Seed,
        });
        Ok(())
    }

    fn insert(&mut self, entry: TokenEntry) {
        if let Some(n) = minted_number(&entry.token, entry.class) {
            let counter = match entry.class {
                TokenClass::Definition => &mut self.next_definition,
                TokenClass::Dependency => &mut self.next_dependency,
            };
            *counter = (*counter).max(n + 1);
        }
        self.reverse.insert(entry.token.clone(), entry.phrase.clone());
        self.entries.insert(entry.phrase.clone(), entry);
    }

    pub fn record_surface(&mut self, token: &str, surface: &str) {
        if let Some(phrase) = self.reverse.get(token) {
            if let Some(e) = self.entries.get_mut(phrase) {
                e.surface_forms.insert(surface.to_string());
            }
        }
    }

    pub fn to_json(&self) -> String {
        let list: Vec<&TokenEntry> = self.entries.values().collect();
        serde_json::to_string_pretty(&list).expect("registry entries serialize")
    }

    pub fn from_json(json: &str) -> Result<Self, TokenError> {
        let list: Vec<TokenEntry> = serde_json::from_str(json).map_err(|e| TokenError::Format(e.to_string()))?;
        let mut reg = Self::new();
        for mut e in list {
            e.phrase = canonicalize(&e.phrase);
            if e.phrase.is_empty() {
                return Err(TokenError::EmptyPhrase);
            }
            if !e.class.accepts(&e.token) {
                return Err(TokenError::BadSymbol {
                    symbol: e.token,
                    class: e.class,
                });
            }
            if reg.entries.contains_key(&e.phrase) {
                return Err(TokenError::PhraseTaken(e.phrase));
            }
            if reg.reverse.contains_key(&e.token) {
                return Err(TokenError::SymbolTaken(e.token));
            }
            reg.insert(e);
        }
        Ok(reg)
    }
}

/// Casefold and whitespace-collapse a phrase; embedded registry symbols
/// keep their case so nested groups stay expandable.
pub fn canonicalize(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(|w| {
            if SYMBOL.is_match(w) {
                w.to_string()
            } else {
                w.to_lowercase()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn minted_number(token: &str, class: TokenClass) -> Option<u32> {
    let l = class.letter();
    token.strip_prefix(&format!("{l}1{l}"))?.parse().ok()
}

/// Longest-match-first phrase lookup over word sequences.
#[derive(Debug, Clone, Default)]
pub struct PhraseMatcher {
    phrases: HashMap<Vec<String>, String>,
    max_words: usize,
}

fn phrase_words(phrase: &str) -> Vec<String> {
    word_spans(phrase)
        .into_iter()
        .map(|r| phrase[r].to_lowercase())
        .collect()
}

impl PhraseMatcher {
    pub fn new<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut m = Self::default();
        for (phrase, token) in pairs {
            let words = phrase_words(phrase);
            if words.is_empty() {
                continue;
            }
            m.max_words = m.max_words.max(words.len());
            m.phrases.insert(words, token.to_string());
        }
        m
    }

    pub fn from_registry(registry: &TokenRegistry) -> Self {
        Self::new(registry.entries().map(|e| (e.phrase.as_str(), e.token.as_str())))
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Non-overlapping matches scanned left to right, longest first.
    pub fn find(&self, text: &str) -> Vec<(Range<usize>, &str)> {
        let spans = word_spans(text);
        let lower: Vec<String> = spans.iter().map(|r| text[r.clone()].to_lowercase()).collect();
        let mut out = Vec::new();
        let mut i = 0;
        'outer: while i < spans.len() {
            let longest = self.max_words.min(spans.len() - i);
            for len in (1..=longest).rev() {
                let window = &spans[i..i + len];
                let joined_by_space = window
                    .windows(2)
                    .all(|w| text[w[0].end..w[1].start].chars().all(char::is_whitespace));
                if !joined_by_space {
                    continue;
                }
                if let Some(token) = self.phrases.get(&lower[i..i + len]) {
                    out.push((window[0].start..window[len - 1].end, token.as_str()));
                    i += len;
                    continue 'outer;
                }
            }
            i += 1;
        }
        out
    }

    pub fn replace(&self, text: &str) -> (String, Vec<(String, String)>) {
        let matches = self.find(text);
        let edits: Vec<(Range<usize>, String)> = matches.iter().map(|(r, t)| (r.clone(), t.to_string())).collect();
        let replaced = matches
            .into_iter()
            .map(|(r, t)| (t.to_string(), text[r].to_string()))
            .collect();
        (apply_edits(text, &edits), replaced)
    }
}

fn apply_edits(text: &str, edits: &[(Range<usize>, String)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (r, token) in edits {
        out.push_str(&text[cursor..r.start]);
        out.push_str(token);
        cursor = r.end;
    }
    out.push_str(&text[cursor..]);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionSentence {
    pub paragraph_id: String,
    pub sentence_index: usize,
    pub trigger_keyword: String,
    /// 0-based half-open range over the sentence's parse nodes.
    pub subject_span: Range<usize>,
    pub subject_phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub paragraph_id: String,
    pub sentence_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub paragraph_id: String,
    pub token: String,
    pub original: String,
}

#[derive(Debug, Clone)]
pub struct TokenizeOutcome {
    pub document: Document,
    pub replacements: Vec<Replacement>,
    pub warnings: Vec<Warning>,
}

/// Byte ranges of each recorded sentence inside the paragraph text. Falls
/// back to a single whole-text sentence if the record is out of sync.
fn sentence_spans(p: &Paragraph) -> Vec<Range<usize>> {
    let mut spans = Vec::with_capacity(p.sentences.len());
    let mut cursor = 0;
    for s in &p.sentences {
        match p.text[cursor..].find(s.as_str()) {
            Some(off) if p.text[cursor..cursor + off].trim().is_empty() => {
                spans.push(cursor + off..cursor + off + s.len());
                cursor += off + s.len();
            }
            _ => return vec![0..p.text.len()],
        }
    }
    if !p.text[cursor..].trim().is_empty() {
        return vec![0..p.text.len()];
    }
    spans
}

/// Rewrites each sentence of `p` with `f`, keeping the gaps between them.
fn rewrite_sentences(p: &Paragraph, mut f: impl FnMut(usize, &str) -> String) -> Paragraph {
    let spans = sentence_spans(p);
    let mut text = String::with_capacity(p.text.len());
    let mut sentences = Vec::with_capacity(spans.len());
    let mut cursor = 0;
    for (i, r) in spans.iter().enumerate() {
        text.push_str(&p.text[cursor..r.start]);
        let s = f(i, &p.text[r.clone()]);
        text.push_str(&s);
        sentences.push(s);
        cursor = r.end;
    }
    text.push_str(&p.text[cursor..]);
    Paragraph {
        token_count: count_tokens(&text),
        text,
        sentences,
        ..p.clone()
    }
}

fn rebuild(doc: &Document, paragraphs: Vec<Paragraph>) -> Document {
    let mut out = Document {
        paragraphs,
        ..doc.clone()
    };
    out.raw_text = out.render();
    out
}

/// Byte range of every parse node within `sentence`, matching forms in
/// order and skipping whitespace between them.
pub fn align(sentence: &str, graph: &DependencyGraph) -> Option<Vec<Range<usize>>> {
    let mut cursor = 0;
    let mut out = Vec::with_capacity(graph.nodes.len());
    for n in &graph.nodes {
        let rest = &sentence[cursor..];
        let skipped = rest.len() - rest.trim_start().len();
        let start = cursor + skipped;
        if !sentence[start..].starts_with(n.form.as_str()) {
            return None;
        }
        out.push(start..start + n.form.len());
        cursor = start + n.form.len();
    }
    Some(out)
}

fn looks_like_symbol(s: &str) -> bool {
    SYMBOL.is_match(s.trim())
}

/// Definition sentences: a keyword acting as a clause-heading verb whose
/// nominal subject (with its compound/amod/det modifiers) is the defined term.
pub fn find_definitions(
    doc: &Document,
    keywords: &HashSet<String>,
    dep: &dyn DependencyProvider,
) -> Vec<DefinitionSentence> {
    let keywords: HashSet<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let mut out = Vec::new();
    for p in &doc.paragraphs {
        for (si, sentence) in p.sentences.iter().enumerate() {
            let has_keyword = word_spans(sentence)
                .into_iter()
                .any(|r| keywords.contains(&sentence[r].to_lowercase()));
            if !has_keyword {
                continue;
            }
            let graph = match dep.parse(sentence) {
                Ok(g) => g,
                Err(e) => {
                    tracing::warn!(paragraph = %p.id, sentence = si, "definition scan skipped: {e}");
                    continue;
                }
            };
            let Some(offsets) = align(sentence, &graph) else {
                tracing::warn!(paragraph = %p.id, sentence = si, "parse does not align with sentence text");
                continue;
            };
            for verb in &graph.nodes {
                let form = verb.form.to_lowercase();
                if !keywords.contains(&form) || !CLAUSE_HEADS.contains(&verb.deprel.as_str()) {
                    continue;
                }
                let Some(subj) = graph
                    .children(verb.index)
                    .find(|c| c.deprel == "nsubj" || c.deprel == "nsubj:pass")
                else {
                    continue;
                };
                let mut members = vec![subj.index];
                let mut frontier = vec![subj.index];
                while let Some(cur) = frontier.pop() {
                    for c in graph.children(cur) {
                        if SUBJECT_MODIFIERS.contains(&c.deprel.as_str()) {
                            members.push(c.index);
                            frontier.push(c.index);
                        }
                    }
                }
                let lo = *members.iter().min().unwrap();
                let hi = *members.iter().max().unwrap();
                let phrase = &sentence[offsets[lo - 1].start..offsets[hi - 1].end];
                if looks_like_symbol(phrase) {
                    continue;
                }
                out.push(DefinitionSentence {
                    paragraph_id: p.id.clone(),
                    sentence_index: si,
                    trigger_keyword: verb.form.clone(),
                    subject_span: lo - 1..hi,
                    subject_phrase: phrase.to_string(),
                });
            }
        }
    }
    out
}

/// Replaces definition subjects and lexicon phrases throughout `doc`.
///
/// Subjects are registered in discovery order, then lexicon phrases in order
/// of first appearance; lexicon phrases absent from the document are not
/// registered.
pub fn apply_definition_tokenization(
    doc: &Document,
    registry: &mut TokenRegistry,
    defs: &[DefinitionSentence],
    lexicon: &[String],
) -> Result<TokenizeOutcome, TokenError> {
    let mut tokens: BTreeMap<String, String> = BTreeMap::new();
    for d in defs {
        let token = registry.register(
            &d.subject_phrase,
            TokenClass::Definition,
            TokenSource::KeywordDefinition,
        )?;
        tokens.insert(canonicalize(&d.subject_phrase), token);
    }
    let lex_matcher = PhraseMatcher::new(lexicon.iter().map(|l| (l.as_str(), "")));
    if !lex_matcher.is_empty() {
        for p in &doc.paragraphs {
            for (range, _) in lex_matcher.find(&p.text) {
                let surface = &p.text[range];
                let canonical = canonicalize(surface);
                if tokens.contains_key(&canonical) {
                    continue;
                }
                let token = registry.register(surface, TokenClass::Definition, TokenSource::Lexicon)?;
                tokens.insert(canonical, token);
            }
        }
    }

    let matcher = PhraseMatcher::new(tokens.iter().map(|(p, t)| (p.as_str(), t.as_str())));
    let mut replacements = Vec::new();
    let paragraphs = doc
        .paragraphs
        .iter()
        .map(|p| {
            rewrite_sentences(p, |_, s| {
                let (text, hits) = matcher.replace(s);
                replacements.extend(hits.into_iter().map(|(token, original)| Replacement {
                    paragraph_id: p.id.clone(),
                    token,
                    original,
                }));
                text
            })
        })
        .collect();
    for r in &replacements {
        registry.record_surface(&r.token, &r.original);
    }
    Ok(TokenizeOutcome {
        document: rebuild(doc, paragraphs),
        replacements,
        warnings: Vec::new(),
    })
}

/// Verbs whose subject and object groups are tokenized: the root plus verbs
/// chained to it through `xcomp`, `conj`, `ccomp` or `advcl`.
fn anchor_verbs(graph: &DependencyGraph) -> Vec<usize> {
    let Some(root) = graph.root() else { return Vec::new() };
    if graph.degraded {
        return Vec::new();
    }
    let mut out = vec![root.index];
    let mut frontier = vec![root.index];
    while let Some(cur) = frontier.pop() {
        for c in graph.children(cur) {
            if matches!(c.deprel.as_str(), "xcomp" | "conj" | "ccomp" | "advcl")
                && matches!(c.upos.as_str(), "VERB" | "AUX")
            {
                out.push(c.index);
                frontier.push(c.index);
            }
        }
    }
    out
}

struct PlannedEdit {
    paragraph: usize,
    sentence: usize,
    range: Range<usize>,
    token: String,
}

/// Replaces each subject and object subtree of the main verb chain with one
/// dependency-class token. Sentences whose parse fails, does not align, or
/// yields a non-contiguous group are left as they are and reported.
pub fn apply_dependency_tokenization(
    doc: &Document,
    registry: &mut TokenRegistry,
    dep: &dyn DependencyProvider,
) -> Result<TokenizeOutcome, TokenError> {
    let mut warnings = Vec::new();
    let mut planned: Vec<PlannedEdit> = Vec::new();
    let warn = |warnings: &mut Vec<Warning>, p: &Paragraph, si: usize, reason: String| {
        warnings.push(Warning {
            paragraph_id: p.id.clone(),
            sentence_index: si,
            reason,
        });
    };

    for (pi, p) in doc.paragraphs.iter().enumerate() {
        let spans = sentence_spans(p);
        for (si, span) in spans.iter().enumerate() {
            let sentence = &p.text[span.clone()];
            let graph = match dep.parse(sentence).and_then(|g| g.validate().map(|_| g)) {
                Ok(g) => g,
                Err(DepError::EmptySentence) => continue,
                Err(e) => {
                    warn(&mut warnings, p, si, e.to_string());
                    continue;
                }
            };
            let Some(offsets) = align(sentence, &graph) else {
                warn(&mut warnings, p, si, "parse does not align with sentence text".into());
                continue;
            };
            let mut groups: Vec<Range<usize>> = Vec::new();
            for verb in anchor_verbs(&graph) {
                for child in graph.children(verb) {
                    if !GROUP_RELATIONS.contains(&child.deprel.as_str()) {
                        continue;
                    }
                    let mut members = graph.subtree(child.index);
                    while members.len() > 1 && graph.node(members[0]).is_some_and(|n| n.upos == "PUNCT") {
                        members.remove(0);
                    }
                    while members.len() > 1 && graph.node(*members.last().unwrap()).is_some_and(|n| n.upos == "PUNCT") {
                        members.pop();
                    }
                    let (lo, hi) = (members[0], *members.last().unwrap());
                    if hi - lo + 1 != members.len() {
                        warn(
                            &mut warnings,
                            p,
                            si,
                            format!("non-contiguous {} group at node {}", child.deprel, child.index),
                        );
                        continue;
                    }
                    groups.push(offsets[lo - 1].start..offsets[hi - 1].end);
                }
            }
            groups.sort_by_key(|r| r.start);
            for g in groups {
                let phrase = &sentence[g.clone()];
                if is_punct_token(phrase) || registry.is_token(phrase.trim()) || looks_like_symbol(phrase) {
                    continue;
                }
                let token = registry.register(phrase, TokenClass::Dependency, TokenSource::DependencyGroup)?;
                planned.push(PlannedEdit {
                    paragraph: pi,
                    sentence: si,
                    range: g,
                    token,
                });
            }
        }
    }

    let mut by_sentence: HashMap<(usize, usize), Vec<(Range<usize>, String)>> = HashMap::new();
    for e in planned {
        by_sentence
            .entry((e.paragraph, e.sentence))
            .or_default()
            .push((e.range, e.token));
    }
    let mut replacements = Vec::new();
    let paragraphs = doc
        .paragraphs
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            rewrite_sentences(p, |si, s| match by_sentence.get(&(pi, si)) {
                Some(edits) => {
                    for (r, t) in edits {
                        replacements.push(Replacement {
                            paragraph_id: p.id.clone(),
                            token: t.clone(),
                            original: s[r.clone()].to_string(),
                        });
                    }
                    apply_edits(s, edits)
                }
                None => s.to_string(),
            })
        })
        .collect();
    for r in &replacements {
        registry.record_surface(&r.token, &r.original);
    }
    Ok(TokenizeOutcome {
        document: rebuild(doc, paragraphs),
        replacements,
        warnings,
    })
}

/// Question-side tokenization: plain longest-match replacement with every
/// registered phrase, no dependency grouping.
pub fn tokenize_question(question: &str, registry: &TokenRegistry) -> String {
    PhraseMatcher::from_registry(registry).replace(question).0
}

/// Replaces standalone registry symbols with their canonical phrases.
/// Nested symbols (a group containing an earlier token) are expanded too.
pub fn detokenize(text: &str, registry: &TokenRegistry) -> String {
    let mut current = text.to_string();
    for _ in 0..8 {
        let edits: Vec<(Range<usize>, String)> = word_spans(&current)
            .into_iter()
            .filter_map(|r| registry.phrase_for(&current[r.clone()]).map(|p| (r, p.to_string())))
            .collect();
        if edits.is_empty() {
            break;
        }
        current = apply_edits(&current, &edits);
    }
    current
}
