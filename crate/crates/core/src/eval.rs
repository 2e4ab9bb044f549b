//! Answer scoring: SQuAD-style token F1, manual quality grades, and the
//! per-document comparison report.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::count_tokens;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("quality score must be 1, 2 or 3, got {0}")]
    QScoreRange(i64),
    #[error("predictions reference unknown example ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("example {0} has no gold answers")]
    NoGold(String),
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub const PERFECT: Scores = Scores {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
    pub const ZERO: Scores = Scores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
}

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let stripped: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn token_f1(predicted: &str, gold: &str) -> Scores {
    let p = normalize_answer(predicted);
    let g = normalize_answer(gold);
    let pred: Vec<&str> = p.split_whitespace().collect();
    let gold: Vec<&str> = g.split_whitespace().collect();
    if pred.is_empty() && gold.is_empty() {
        return Scores::PERFECT;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut tp = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    if tp == 0 {
        return Scores::ZERO;
    }
    let precision = tp as f64 / pred.len() as f64;
    let recall = tp as f64 / gold.len() as f64;
    Scores {
        precision,
        recall,
        f1: 2.0 * precision * recall / (precision + recall),
    }
}

/// Best score against any of the references; the first gold wins ties.
pub fn best_gold_f1(predicted: &str, golds: &[String]) -> Scores {
    golds
        .iter()
        .map(|g| token_f1(predicted, g))
        .fold(None, |best: Option<Scores>, s| match best {
            Some(b) if b.f1 >= s.f1 => Some(b),
            _ => Some(s),
        })
        .unwrap_or(Scores::ZERO)
}

/// Maps grades 1 (unacceptable), 2 (partial), 3 (complete) onto 0, 0.5, 1.
pub fn normalize_q(q: i64) -> Result<f64, EvalError> {
    if (1..=3).contains(&q) {
        Ok((q - 1) as f64 / 2.0)
    } else {
        Err(EvalError::QScoreRange(q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub question: String,
    /// `title#paragraph-index` within the dataset file.
    pub context_ref: String,
    pub gold_answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub title: String,
    pub contexts: Vec<String>,
    pub examples: Vec<QaExample>,
}

impl DatasetDocument {
    pub fn size_words(&self) -> usize {
        self.contexts.iter().map(|c| count_tokens(c)).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub documents: Vec<DatasetDocument>,
}

#[derive(Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    #[serde(default)]
    title: Option<String>,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    #[serde(default)]
    answers: Vec<SquadAnswer>,
}

#[derive(Deserialize)]
struct SquadAnswer {
    text: String,
}

impl Dataset {
    /// Parses SQuAD-format JSON. Questions without answers get a single
    /// empty gold answer.
    pub fn from_squad_json(json: &str) -> Result<Self, EvalError> {
        let file: SquadFile = serde_json::from_str(json).map_err(|e| EvalError::Format {
            what: "dataset",
            message: e.to_string(),
        })?;
        let documents = file
            .data
            .into_iter()
            .enumerate()
            .map(|(i, article)| {
                let title = article.title.unwrap_or_else(|| format!("document-{}", i + 1));
                let mut contexts = Vec::new();
                let mut examples = Vec::new();
                for (pi, para) in article.paragraphs.into_iter().enumerate() {
                    for qa in para.qas {
                        let mut gold_answers: Vec<String> = qa.answers.into_iter().map(|a| a.text).collect();
                        if gold_answers.is_empty() {
                            gold_answers.push(String::new());
                        }
                        examples.push(QaExample {
                            id: qa.id,
                            question: qa.question,
                            context_ref: format!("{title}#{pi}"),
                            gold_answers,
                        });
                    }
                    contexts.push(para.context);
                }
                DatasetDocument {
                    title,
                    contexts,
                    examples,
                }
            })
            .collect();
        Ok(Self { documents })
    }

    pub fn examples(&self) -> impl Iterator<Item = &QaExample> {
        self.documents.iter().flat_map(|d| d.examples.iter())
    }
}

pub fn parse_predictions(json: &str) -> Result<BTreeMap<String, String>, EvalError> {
    serde_json::from_str(json).map_err(|e| EvalError::Format {
        what: "predictions",
        message: e.to_string(),
    })
}

pub fn parse_q_scores(json: &str) -> Result<BTreeMap<String, i64>, EvalError> {
    let raw: BTreeMap<String, i64> = serde_json::from_str(json).map_err(|e| EvalError::Format {
        what: "q-scores",
        message: e.to_string(),
    })?;
    for q in raw.values() {
        normalize_q(*q)?;
    }
    Ok(raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub example_id: String,
    pub system: String,
    pub predicted: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_score: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_normalized: Option<f64>,
}

/// Predictions (and optional grades) of one system configuration.
#[derive(Debug, Clone, Default)]
pub struct SystemRun {
    pub label: String,
    pub predictions: BTreeMap<String, String>,
    pub q_scores: Option<BTreeMap<String, i64>>,
}

/// Scores every example; a missing prediction counts as the empty answer.
pub fn evaluate_run(examples: &[&QaExample], run: &SystemRun) -> Result<Vec<EvalRecord>, EvalError> {
    let known: std::collections::HashSet<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    let mut unknown: Vec<String> = run
        .predictions
        .keys()
        .chain(run.q_scores.iter().flat_map(|q| q.keys()))
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(EvalError::UnknownIds(unknown));
    }
    examples
        .iter()
        .map(|ex| {
            if ex.gold_answers.is_empty() {
                return Err(EvalError::NoGold(ex.id.clone()));
            }
            let predicted = run.predictions.get(&ex.id).cloned().unwrap_or_default();
            let s = best_gold_f1(&predicted, &ex.gold_answers);
            let q_score = run.q_scores.as_ref().and_then(|q| q.get(&ex.id).copied());
            let q_normalized = q_score.map(normalize_q).transpose()?;
            Ok(EvalRecord {
                example_id: ex.id.clone(),
                system: run.label.clone(),
                predicted,
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
                q_score,
                q_normalized,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub document: String,
    pub size_words: usize,
    pub questions: usize,
    pub system: String,
    pub mean_f1: f64,
    /// Mean of normalized grades over the graded questions only.
    pub mean_q_normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub records: Vec<EvalRecord>,
}

/// One row per (document, system), documents in dataset order and systems in
/// the order given.
pub fn evaluate(dataset: &Dataset, runs: &[SystemRun]) -> Result<EvalReport, EvalError> {
    let all: Vec<&QaExample> = dataset.examples().collect();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut per_system = Vec::new();
    for run in runs {
        per_system.push(evaluate_run(&all, run)?);
    }
    let mut offset = 0;
    for doc in &dataset.documents {
        let n = doc.examples.len();
        for (run, recs) in runs.iter().zip(&per_system) {
            let slice = &recs[offset..offset + n];
            let mean_f1 = if n == 0 {
                0.0
            } else {
                slice.iter().map(|r| r.f1).sum::<f64>() / n as f64
            };
            let graded: Vec<f64> = slice.iter().filter_map(|r| r.q_normalized).collect();
            let mean_q_normalized = (!graded.is_empty()).then(|| graded.iter().sum::<f64>() / graded.len() as f64);
            rows.push(ReportRow {
                document: doc.title.clone(),
                size_words: doc.size_words(),
                questions: n,
                system: run.label.clone(),
                mean_f1,
                mean_q_normalized,
            });
        }
        offset += n;
    }
    for recs in per_system {
        records.extend(recs);
    }
    Ok(EvalReport { rows, records })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, percentages with one decimal.
    pub fn to_text_table(&self) -> String {
        let header = [
            "Document",
            "Size (words)",
            "Questions",
            "System",
            "F1",
            "Q (normalized)",
        ];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.document.clone(),
                    r.size_words.to_string(),
                    r.questions.to_string(),
                    r.system.clone(),
                    format!("{:.1}%", r.mean_f1 * 100.0),
                    r.mean_q_normalized
                        .map_or_else(|| "-".to_string(), |q| format!("{:.1}%", q * 100.0)),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 || i == 3 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header.map(String::from));
        line(&mut out, &widths.map(|w| "-".repeat(w)));
        for row in &body {
            line(&mut out, row);
        }
        out
    }
}
