//! Hybrid paragraph ranking: a weighted blend of TF-IDF cosine and
//! paragraph-vector cosine, optionally over Soundex-encoded terms.

mod pv;
mod tfidf;

pub use pv::{cosine, Inferred, ParagraphVectorModel, PvHyperParams};
pub use tfidf::{SparseVector, TfidfIndex};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Paragraph;
use crate::phonetics::soundex;
use crate::text::index_terms;
use crate::tokenization::{tokenize_question, TokenRegistry};

pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_WEIGHT: f64 = 0.5;
pub const DEFAULT_TOP_K: usize = 3;

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("index format version {found} does not match supported version {expected}")]
    FormatVersion { found: u32, expected: u32 },
    #[error("index and model cover different paragraphs")]
    Mismatch,
    #[error("invalid index file: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn default_stopwords() -> Vec<String> {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// Turns text into index terms: lowercased alphanumeric runs, minus
/// stopwords, then Soundex-encoded when enabled. Terms containing digits
/// (years, section numbers, registry symbols) are never encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyzer {
    pub stopwords: Vec<String>,
    pub soundex_length: Option<usize>,
    #[serde(skip)]
    stop_set: HashSet<String>,
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::new(default_stopwords(), None)
    }
}

impl Analyzer {
    pub fn new(stopwords: Vec<String>, soundex_length: Option<usize>) -> Self {
        let stop_set = stopwords.iter().map(|s| s.to_lowercase()).collect();
        Self {
            stopwords,
            soundex_length,
            stop_set,
        }
    }

    /// No stopwords, no encoding.
    pub fn plain() -> Self {
        Self::new(Vec::new(), None)
    }

    pub fn with_soundex(self, length: usize) -> Self {
        Self::new(self.stopwords, Some(length))
    }

    pub fn from_stopword_file(path: &Path, soundex_length: Option<usize>) -> std::io::Result<Self> {
        let words = std::fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Ok(Self::new(words, soundex_length))
    }

    fn prepared(self) -> Self {
        Self::new(self.stopwords, self.soundex_length)
    }

    pub fn terms(&self, text: &str) -> Vec<String> {
        index_terms(text)
            .into_iter()
            .filter(|t| !self.stop_set.contains(t))
            .map(|t| match self.soundex_length {
                Some(len) if !t.chars().any(|c| c.is_ascii_digit()) => {
                    soundex(&t, len).map(|c| c.to_string()).unwrap_or(t)
                }
                _ => t,
            })
            .collect()
    }
}

/// TF-IDF index and paragraph-vector model over the same paragraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridIndex {
    pub format_version: u32,
    pub tfidf: TfidfIndex,
    pub pv: ParagraphVectorModel,
}

impl HybridIndex {
    pub fn build(paragraphs: &[Paragraph], analyzer: Analyzer, hyper: PvHyperParams) -> Result<Self, RetrievalError> {
        let tfidf = TfidfIndex::build(paragraphs, analyzer)?;
        let pv = ParagraphVectorModel::train(paragraphs, hyper)?;
        Ok(Self {
            format_version: INDEX_FORMAT_VERSION,
            tfidf,
            pv,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, RetrievalError> {
        let value: serde_json::Value = serde_json::from_str(json).map_err(|e| RetrievalError::Format(e.to_string()))?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != INDEX_FORMAT_VERSION {
            return Err(RetrievalError::FormatVersion {
                found,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        let mut index: Self = serde_json::from_value(value).map_err(|e| RetrievalError::Format(e.to_string()))?;
        if index.tfidf.paragraph_ids != index.pv.paragraph_ids {
            return Err(RetrievalError::Mismatch);
        }
        index.tfidf.analyzer = index.tfidf.analyzer.clone().prepared();
        index.pv = index.pv.prepared();
        Ok(index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedParagraph {
    pub paragraph_id: String,
    pub tfidf_sim: f64,
    pub pv_sim: f64,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStatus {
    Ok,
    /// `top_k` exceeded the corpus; every paragraph was returned.
    TopKExceedsCorpus,
    /// The question shares no terms with the index and has no embedding.
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutcome {
    pub status: RankStatus,
    pub results: Vec<RankedParagraph>,
}

/// Scores every paragraph and returns the best `top_k`.
///
/// `tfidf_sim` is the clamped TF-IDF cosine, `pv_sim` maps the embedding
/// cosine from `[-1, 1]` onto `[0, 1]`, and
/// `score = weight * pv_sim + (1 - weight) * tfidf_sim`. Ties go to the
/// smaller paragraph id. When a registry is given the question is tokenized
/// with it first.
pub fn rank(
    question: &str,
    index: &HybridIndex,
    weight: f64,
    top_k: usize,
    registry: Option<&TokenRegistry>,
) -> Result<RankOutcome, RetrievalError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(RetrievalError::Argument(format!("weight {weight} outside [0, 1]")));
    }
    if top_k == 0 {
        return Err(RetrievalError::Argument("top_k must be positive".into()));
    }
    if question.trim().is_empty() {
        return Err(RetrievalError::Argument("question is empty".into()));
    }
    if index.tfidf.paragraph_ids != index.pv.paragraph_ids {
        return Err(RetrievalError::Mismatch);
    }
    let question = match registry {
        Some(r) => tokenize_question(question, r),
        None => question.to_string(),
    };

    let qvec = index.tfidf.vectorize(&question);
    let inferred = index.pv.infer(&question);
    if qvec.is_zero() && inferred.no_signal {
        return Ok(RankOutcome {
            status: RankStatus::NoMatch,
            results: Vec::new(),
        });
    }
    let tfidf = index.tfidf.similarities(&qvec);
    let mut results: Vec<RankedParagraph> = index
        .tfidf
        .paragraph_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let pv_sim = ((cosine(&inferred.vector, &index.pv.doc_vectors[i]) + 1.0) / 2.0).clamp(0.0, 1.0);
            let tfidf_sim = tfidf[i];
            RankedParagraph {
                paragraph_id: id.clone(),
                tfidf_sim,
                pv_sim,
                score: weight * pv_sim + (1.0 - weight) * tfidf_sim,
                rank: 0,
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.paragraph_id.cmp(&b.paragraph_id))
    });
    let status = if top_k > results.len() {
        RankStatus::TopKExceedsCorpus
    } else {
        RankStatus::Ok
    };
    results.truncate(top_k);
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(RankOutcome { status, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn para(id: &str, text: &str) -> Paragraph {
        Paragraph {
            id: id.into(),
            doc_id: "d".into(),
            heading_path: vec![],
            text: text.into(),
            sentences: vec![text.into()],
            token_count: 0,
        }
    }

    fn small_index(analyzer: Analyzer) -> HybridIndex {
        let paras = vec![
            para(
                "p0",
                "Banks file suspicious activity reports with the treasury department.",
            ),
            para("p1", "Lenders must not discriminate in housing loans or rentals."),
            para("p2", "Appraisals of real estate require a certified appraiser."),
        ];
        let hyper = PvHyperParams {
            dim: 16,
            epochs: 20,
            min_count: 1,
            ..Default::default()
        };
        HybridIndex::build(&paras, analyzer, hyper).unwrap()
    }

    #[test]
    fn verbatim_question_ranks_its_paragraph_first() {
        let idx = small_index(Analyzer::default());
        let out = rank(
            "Lenders must not discriminate in housing loans or rentals.",
            &idx,
            0.0,
            3,
            None,
        )
        .unwrap();
        assert_eq!(out.status, RankStatus::Ok);
        assert_eq!(out.results[0].paragraph_id, "p1");
        assert!((out.results[0].tfidf_sim - 1.0).abs() < 1e-9);
        assert_eq!(out.results.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn misspelled_question_with_soundex() {
        let idx = small_index(Analyzer::default().with_soundex(6));
        let out = rank("suspicous activty", &idx, 0.0, 1, None).unwrap();
        assert_eq!(out.results[0].paragraph_id, "p0");
        let plain = small_index(Analyzer::default());
        let out = rank("suspicous activty", &plain, 0.0, 3, None).unwrap();
        assert!(out.results.iter().all(|r| r.tfidf_sim == 0.0));
    }

    #[test]
    fn statuses_and_arguments() {
        let idx = small_index(Analyzer::default());
        assert_eq!(
            rank("housing", &idx, 0.5, 10, None).unwrap().status,
            RankStatus::TopKExceedsCorpus
        );
        let none = rank("zzz qqq", &idx, 0.5, 3, None).unwrap();
        assert_eq!(none.status, RankStatus::NoMatch);
        assert!(none.results.is_empty());
        assert!(rank("x", &idx, 1.5, 3, None).is_err());
        assert!(rank("x", &idx, 0.5, 0, None).is_err());
        assert!(rank("  ", &idx, 0.5, 3, None).is_err());
    }

    #[test]
    fn equal_scores_fall_back_to_id_order() {
        let paras = vec![
            para("p2", "alpha beta"),
            para("p0", "alpha beta"),
            para("p1", "alpha beta"),
        ];
        let hyper = PvHyperParams {
            dim: 8,
            epochs: 5,
            min_count: 1,
            ..Default::default()
        };
        let mut idx = HybridIndex::build(&paras, Analyzer::plain(), hyper).unwrap();
        let v = idx.pv.doc_vectors[0].clone();
        idx.pv.doc_vectors = vec![v; 3];
        let out = rank("alpha", &idx, 0.5, 3, None).unwrap();
        let ids: Vec<_> = out.results.iter().map(|r| r.paragraph_id.as_str()).collect();
        assert_eq!(ids, ["p0", "p1", "p2"]);
    }

    #[test]
    fn index_file_round_trip_and_version_check() {
        let idx = small_index(Analyzer::default().with_soundex(6));
        let back = HybridIndex::from_json(&idx.to_json()).unwrap();
        let a = rank("suspicous activty", &idx, 0.5, 3, None).unwrap();
        let b = rank("suspicous activty", &back, 0.5, 3, None).unwrap();
        assert_eq!(a, b);
        let stale = idx
            .to_json()
            .replacen("\"format_version\":1", "\"format_version\":0", 1);
        assert!(matches!(
            HybridIndex::from_json(&stale),
            Err(RetrievalError::FormatVersion { found: 0, expected: 1 })
        ));
    }
}
