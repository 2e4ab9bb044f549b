use std::collections::HashSet;
use std::path::Path;

use super::{DepError, DepNode, DependencyGraph, DependencyProvider};
use crate::text::{is_punct_token, word_spans};

const VERBS: &str = include_str!("../../data/lexicon/verbs.txt");
const DETERMINERS: &str = include_str!("../../data/lexicon/determiners.txt");
const PREPOSITIONS: &str = include_str!("../../data/lexicon/prepositions.txt");
const AUXILIARIES: &str = include_str!("../../data/lexicon/auxiliaries.txt");
const PRONOUNS: &str = include_str!("../../data/lexicon/pronouns.txt");

const CONJUNCTIONS: &[&str] = &["and", "or", "nor", "but"];
const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "twenty",
    "thirty", "fifty", "hundred", "thousand", "million", "billion",
];
const ADJ_SUFFIXES: &[&str] = &["ous", "ive", "able", "ible", "ful", "less", "ic", "al"];

fn word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Closed-class word lists driving the heuristic parser. The defaults are
/// compiled in; [`HeuristicLexicon::load_dir`] reads replacements from
/// `verbs.txt`, `determiners.txt`, `prepositions.txt`, `auxiliaries.txt`
/// and `pronouns.txt`, keeping the default for any missing file.
#[derive(Debug, Clone)]
pub struct HeuristicLexicon {
    pub verbs: HashSet<String>,
    pub determiners: HashSet<String>,
    pub prepositions: HashSet<String>,
    pub auxiliaries: HashSet<String>,
    pub pronouns: HashSet<String>,
}

impl Default for HeuristicLexicon {
    fn default() -> Self {
        Self {
            verbs: word_list(VERBS),
            determiners: word_list(DETERMINERS),
            prepositions: word_list(PREPOSITIONS),
            auxiliaries: word_list(AUXILIARIES),
            pronouns: word_list(PRONOUNS),
        }
    }
}

impl HeuristicLexicon {
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut lex = Self::default();
        for (name, slot) in [
            ("verbs.txt", &mut lex.verbs),
            ("determiners.txt", &mut lex.determiners),
            ("prepositions.txt", &mut lex.prepositions),
            ("auxiliaries.txt", &mut lex.auxiliaries),
            ("pronouns.txt", &mut lex.pronouns),
        ] {
            let path = dir.join(name);
            if path.exists() {
                *slot = word_list(&std::fs::read_to_string(path)?);
            }
        }
        Ok(lex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Det,
    Noun,
    Adj,
    Num,
    Pron,
    Cconj,
    Adp,
    Aux,
    Part,
    Adv,
    Sconj,
    Verb,
    Punct,
}

impl Tag {
    fn upos(self) -> &'static str {
        match self {
            Tag::Det => "DET",
            Tag::Noun => "NOUN",
            Tag::Adj => "ADJ",
            Tag::Num => "NUM",
            Tag::Pron => "PRON",
            Tag::Cconj => "CCONJ",
            Tag::Adp => "ADP",
            Tag::Aux => "AUX",
            Tag::Part => "PART",
            Tag::Adv => "ADV",
            Tag::Sconj => "SCONJ",
            Tag::Verb => "VERB",
            Tag::Punct => "PUNCT",
        }
    }

    fn nominal(self) -> bool {
        matches!(
            self,
            Tag::Det | Tag::Noun | Tag::Adj | Tag::Num | Tag::Pron | Tag::Cconj
        )
    }
}

const SUBORDINATORS: &[&str] = &[
    "if", "when", "whenever", "where", "wherever", "while", "because", "although", "though", "unless", "whether",
    "once", "whereas", "which", "who", "whom", "whose",
];
const ADVERBS: &[&str] = &[
    "otherwise",
    "also",
    "only",
    "thereafter",
    "therefore",
    "however",
    "soon",
    "then",
];
/// Words ending in -ly that are not adverbs.
const LY_NOUNS: &[&str] = &[
    "family", "supply", "assembly", "reply", "anomaly", "monopoly", "july", "italy", "apply", "comply",
];
const MODALS: &[&str] = &[
    "shall", "must", "may", "might", "can", "could", "will", "would", "should", "do", "does", "did",
];

fn is_participle(word: &str) -> bool {
    let w = word.to_lowercase();
    (w.len() > 4 && (w.ends_with("ed") || w.ends_with("en")))
        || matches!(
            w.as_str(),
            "held" | "made" | "kept" | "sent" | "paid" | "sold" | "known" | "done" | "set"
        )
}

fn tag_tokens(tokens: &[&str], lex: &HeuristicLexicon) -> Vec<Tag> {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut tags: Vec<Tag> = lower
        .iter()
        .zip(tokens)
        .map(|(w, raw)| {
            if is_punct_token(raw) {
                Tag::Punct
            } else if SUBORDINATORS.contains(&w.as_str()) {
                Tag::Sconj
            } else if lex.determiners.contains(w) {
                Tag::Det
            } else if lex.auxiliaries.contains(w) {
                Tag::Aux
            } else if CONJUNCTIONS.contains(&w.as_str()) {
                Tag::Cconj
            } else if w == "not" || w == "n't" {
                Tag::Part
            } else if w == "to" || lex.prepositions.contains(w) {
                Tag::Adp
            } else if lex.verbs.contains(w) {
                Tag::Verb
            } else if lex.pronouns.contains(w) {
                Tag::Pron
            } else if NUMBER_WORDS.contains(&w.as_str())
                || (w.chars().any(|c| c.is_ascii_digit())
                    && w.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.'))
            {
                Tag::Num
            } else if ADVERBS.contains(&w.as_str())
                || (w.len() > 4 && w.ends_with("ly") && !LY_NOUNS.contains(&w.as_str()))
            {
                Tag::Adv
            } else if (w.len() > 4 && w.ends_with("ed"))
                || ADJ_SUFFIXES.iter().any(|s| w.len() > s.len() + 2 && w.ends_with(s))
            {
                Tag::Adj
            } else {
                Tag::Noun
            }
        })
        .collect();
    let n = tags.len();
    // previous token that is not an adverb or negation
    let prev_core = |tags: &[Tag], i: usize| (0..i).rev().find(|&k| !matches!(tags[k], Tag::Adv | Tag::Part));
    for i in 0..n {
        let after = prev_core(&tags, i);
        let after_modal = after.is_some_and(|k| tags[k] == Tag::Aux && MODALS.contains(&lower[k].as_str()));
        let after_aux = after.is_some_and(|k| tags[k] == Tag::Aux);
        let ed = lower[i].len() > 4 && lower[i].ends_with("ed");
        if (after_modal && tags[i] == Tag::Noun) || (after_aux && tags[i] == Tag::Adj && ed) {
            tags[i] = Tag::Verb;
        } else if tags[i] == Tag::Adj && ed && !matches!(tags.get(i + 1), Some(Tag::Noun | Tag::Adj)) {
            // trailing participle: "any bank subpoenaed or ..."
            tags[i] = Tag::Verb;
        }
    }
    for i in 0..n {
        if lower[i] == "to" && tags.get(i + 1) == Some(&Tag::Verb) {
            tags[i] = Tag::Part;
        }
        if lower[i] == "that" && tags[i] == Tag::Det {
            let next = tags.get(i + 1).copied();
            let prev = i.checked_sub(1).map(|k| tags[k]);
            if matches!(
                next,
                Some(Tag::Det | Tag::Pron | Tag::Aux | Tag::Verb | Tag::Num | Tag::Adv) | None
            ) || matches!(prev, Some(Tag::Verb | Tag::Noun))
            {
                tags[i] = Tag::Sconj;
            }
        }
    }
    tags
}

struct Builder {
    head: Vec<usize>,
    rel: Vec<&'static str>,
}

impl Builder {
    fn set(&mut self, i: usize, head: usize, rel: &'static str) {
        self.head[i] = head + 1;
        self.rel[i] = rel;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VerbRole {
    Clause,
    /// Infinitive after "to".
    Infinitive,
    /// Participle modifying the noun before it.
    Modifier,
}

/// Shallow verb-anchored parse of a tokenized sentence.
///
/// The first finite-looking verb is the root; later verbs are coordinated
/// (`conj`), subordinate (`ccomp`/`advcl`), infinitival (`xcomp`), or reduced
/// relatives on the preceding noun (`acl`). The nominal run right before a
/// clause verb is its subject; a run right after a verb is its object; runs
/// introduced by a preposition attach as `obl`, except that "of" chains hang
/// off the preceding noun as `nmod`. Within a run, `and`/`or` split
/// conjuncts, each headed by its last word; the first conjunct heads the run.
/// Without any verb, the last word becomes the root of a flat compound and the
/// graph is flagged as degraded.
pub fn heuristic_parse(tokens: &[&str], lex: &HeuristicLexicon) -> Result<DependencyGraph, DepError> {
    if tokens.is_empty() {
        return Err(DepError::EmptySentence);
    }
    let tags = tag_tokens(tokens, lex);
    let n = tokens.len();
    let mut b = Builder {
        head: vec![0; n],
        rel: vec!["dep"; n],
    };
    let verbs: Vec<usize> = (0..n).filter(|&i| tags[i] == Tag::Verb).collect();

    if verbs.is_empty() {
        let root = (0..n).rev().find(|&i| tags[i] != Tag::Punct).unwrap_or(n - 1);
        for i in 0..n {
            if i == root {
                b.head[i] = 0;
                b.rel[i] = "root";
            } else {
                b.set(i, root, if tags[i] == Tag::Punct { "punct" } else { "compound" });
            }
        }
        return Ok(finish(tokens, &tags, b, true));
    }

    let prev_core = |i: usize| (0..i).rev().find(|&k| !matches!(tags[k], Tag::Adv | Tag::Part));
    let mut roles = vec![VerbRole::Clause; n];
    for (vi, &v) in verbs.iter().enumerate() {
        let before = prev_core(v);
        if v > 0 && tags[v - 1] == Tag::Part && tokens[v - 1].eq_ignore_ascii_case("to") {
            roles[v] = VerbRole::Infinitive;
        } else if (is_participle(tokens[v]) && before.is_some_and(|k| matches!(tags[k], Tag::Noun | Tag::Num)))
            // "filed and retained": a conjunct of a modifier is one too
            || (vi > 0
                && before.is_some_and(|k| tags[k] == Tag::Cconj)
                && before.and_then(prev_core).is_some_and(|k| tags[k] == Tag::Verb && roles[k] == VerbRole::Modifier))
        {
            roles[v] = VerbRole::Modifier;
        }
    }
    let root = verbs
        .iter()
        .copied()
        .find(|&v| roles[v] == VerbRole::Clause)
        .unwrap_or(verbs[0]);
    roles[root] = VerbRole::Clause;
    b.head[root] = 0;
    b.rel[root] = "root";

    // clause structure
    let mut last_clause = root;
    for &v in &verbs {
        if v == root {
            continue;
        }
        let prev_verb = verbs.iter().rev().copied().find(|&u| u < v);
        match roles[v] {
            VerbRole::Infinitive => b.set(v, prev_verb.unwrap_or(root), "xcomp"),
            VerbRole::Modifier => {
                let before = prev_core(v).unwrap_or(root);
                if tags[before] == Tag::Cconj {
                    let first = prev_core(before).unwrap_or(root);
                    b.set(v, first, "conj");
                    b.set(before, v, "cc");
                } else {
                    b.set(v, before, "acl");
                }
            }
            VerbRole::Clause => {
                let anchor = if v > root { last_clause } else { root };
                let lo = anchor.min(v);
                let sconj = (lo..v).rev().find(|&k| tags[k] == Tag::Sconj && k > anchor.min(v));
                let rel = match sconj {
                    Some(k) if tokens[k].eq_ignore_ascii_case("that") => "ccomp",
                    Some(_) => "advcl",
                    None if v < root => "advcl",
                    None => "conj",
                };
                b.set(v, anchor, rel);
                if v > root {
                    last_clause = v;
                }
            }
        }
    }
    let next_verb = |i: usize| verbs.iter().copied().find(|&v| v > i);
    let prev_verb = |i: usize| verbs.iter().rev().copied().find(|&v| v < i);

    for i in 0..n {
        match tags[i] {
            Tag::Aux => b.set(i, next_verb(i).unwrap_or(root), "aux"),
            Tag::Sconj => b.set(i, next_verb(i).unwrap_or(root), "mark"),
            Tag::Part if tokens[i].eq_ignore_ascii_case("to") => b.set(i, next_verb(i).unwrap_or(root), "mark"),
            Tag::Part | Tag::Adv => b.set(i, next_verb(i).or(prev_verb(i)).unwrap_or(root), "advmod"),
            Tag::Punct => b.set(i, root, "punct"),
            _ => {}
        }
    }

    // nominal runs, left to right; `chain` tracks the first run of an "of" chain
    let mut runs: Vec<(usize, usize, usize)> = Vec::new(); // (start, end, head)
    let mut i = 0;
    while i < n {
        if !tags[i].nominal() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < n && tags[j].nominal() {
            j += 1;
        }
        let (mut s, mut e) = (i, j);
        while s < e && tags[s] == Tag::Cconj {
            b.set(s, next_verb(s).or(prev_verb(s)).unwrap_or(root), "cc");
            s += 1;
        }
        while e > s && tags[e - 1] == Tag::Cconj {
            b.set(e - 1, next_verb(e - 1).or(prev_verb(e - 1)).unwrap_or(root), "cc");
            e -= 1;
        }
        if s < e {
            let head = shape_run(&mut b, &tags, s, e);
            runs.push((s, e, head));
        }
        i = j;
    }
    let mut chain_head: Vec<usize> = Vec::with_capacity(runs.len());
    for (ri, &(s, e, head)) in runs.iter().enumerate() {
        let before = s.checked_sub(1).map(|p| tags[p]);
        let of_link = ri > 0
            && s >= 2
            && before == Some(Tag::Adp)
            && tokens[s - 1].eq_ignore_ascii_case("of")
            && runs[ri - 1].1 == s - 1;
        if of_link {
            b.set(head, runs[ri - 1].2, "nmod");
            chain_head.push(chain_head[ri - 1]);
        } else {
            chain_head.push(head);
            let adjectival = tags[head] == Tag::Adj;
            if before == Some(Tag::Adp) {
                b.set(head, prev_verb(s).unwrap_or(root), "obl");
            } else if before == Some(Tag::Verb) && !adjectival {
                b.set(head, s - 1, "obj");
            } else if before == Some(Tag::Verb) {
                b.set(head, s - 1, "xcomp");
            } else {
                b.set(head, prev_verb(s).unwrap_or(root), "dep");
            }
        }
        // subject of the clause verb right after this run
        let mut k = e;
        while k < n && matches!(tags[k], Tag::Aux | Tag::Part | Tag::Adv) {
            k += 1;
        }
        if k < n && tags[k] == Tag::Verb && roles[k] == VerbRole::Clause && k != chain_head[ri] {
            let mut subj = chain_head[ri];
            // "any bank requested to disclose a report shall decline": the run
            // closes a reduced relative, so the subject is the noun it modifies
            if before == Some(Tag::Verb) && roles[s - 1] != VerbRole::Clause {
                let mut cur = s - 1;
                let mut steps = 0;
                while tags[cur] == Tag::Verb && b.head[cur] != 0 && steps < n {
                    cur = b.head[cur] - 1;
                    steps += 1;
                }
                if tags[cur].nominal() {
                    subj = runs.iter().position(|r| r.2 == cur).map_or(cur, |p| chain_head[p]);
                }
            }
            if tags[subj] != Tag::Adj {
                b.set(subj, k, "nsubj");
            }
        }
    }

    // prepositions: case marker of the following run, else dangling
    for i in 0..n {
        if tags[i] == Tag::Adp {
            match runs.iter().find(|r| r.0 == i + 1) {
                Some(&(_, e, _)) => b.set(i, e - 1, "case"),
                None => b.set(i, prev_verb(i).unwrap_or(root), "dep"),
            }
        }
    }
    Ok(finish(tokens, &tags, b, false))
}

/// Internal structure of a nominal run; returns its head.
fn shape_run(b: &mut Builder, tags: &[Tag], s: usize, e: usize) -> usize {
    let mut conjuncts: Vec<(usize, usize)> = Vec::new();
    let mut cs = s;
    for k in s..e {
        if tags[k] == Tag::Cconj {
            if cs < k {
                conjuncts.push((cs, k));
            }
            cs = k + 1;
        }
    }
    if cs < e {
        conjuncts.push((cs, e));
    }
    let heads: Vec<usize> = conjuncts.iter().map(|&(_, ce)| ce - 1).collect();
    for &(cs, ce) in &conjuncts {
        let h = ce - 1;
        for k in cs..h {
            let rel = match tags[k] {
                Tag::Det => "det",
                Tag::Num => "nummod",
                Tag::Adj => "amod",
                Tag::Pron => "nmod:poss",
                _ => "compound",
            };
            b.set(k, h, rel);
        }
    }
    let run_head = heads[0];
    for &h in &heads[1..] {
        b.set(h, run_head, "conj");
    }
    for k in s..e {
        if tags[k] == Tag::Cconj {
            let following = heads.iter().copied().find(|&h| h > k).unwrap_or(run_head);
            b.set(k, following, "cc");
        }
    }
    run_head
}

fn finish(tokens: &[&str], tags: &[Tag], b: Builder, degraded: bool) -> DependencyGraph {
    let nodes = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| DepNode {
            index: i + 1,
            form: t.to_string(),
            lemma: t.to_lowercase(),
            upos: tags[i].upos().to_string(),
            head: b.head[i],
            deprel: b.rel[i].to_string(),
        })
        .collect();
    DependencyGraph {
        sentence_id: "heuristic".into(),
        nodes,
        degraded,
    }
}

/// Provider wrapping [`heuristic_parse`] with the shared word splitter.
#[derive(Debug, Clone, Default)]
pub struct HeuristicParser {
    pub lexicon: HeuristicLexicon,
}

impl HeuristicParser {
    pub fn new(lexicon: HeuristicLexicon) -> Self {
        Self { lexicon }
    }
}

impl DependencyProvider for HeuristicParser {
    fn parse(&self, sentence: &str) -> Result<DependencyGraph, DepError> {
        let tokens: Vec<&str> = word_spans(sentence).into_iter().map(|r| &sentence[r]).collect();
        heuristic_parse(&tokens, &self.lexicon)
    }
}
