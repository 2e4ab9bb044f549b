use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Analyzer, RetrievalError};
use crate::corpus::Paragraph;

/// Sparse vector with ascending column indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    fn from_map(map: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = map.into_iter().unzip();
        Self { indices, values }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= n);
        }
        self
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// TF-IDF over analyzed paragraph terms: raw term counts times
/// `ln((1 + N) / (1 + df)) + 1`, L2-normalized per paragraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfIndex {
    pub vocabulary: BTreeMap<String, u32>,
    pub doc_freq: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub vectors: Vec<SparseVector>,
    /// Paragraphs with no indexable terms keep a zero vector.
    pub empty: Vec<bool>,
    pub paragraph_ids: Vec<String>,
    pub analyzer: Analyzer,
}

impl TfidfIndex {
    pub fn build(paragraphs: &[Paragraph], analyzer: Analyzer) -> Result<Self, RetrievalError> {
        if paragraphs.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut sorted: Vec<&Paragraph> = paragraphs.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));

        let docs: Vec<Vec<String>> = sorted.iter().map(|p| analyzer.terms(&p.text)).collect();
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        for terms in &docs {
            let mut seen: Vec<&String> = terms.iter().collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
        }
        let vocabulary: BTreeMap<String, u32> = doc_freq
            .keys()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let n = docs.len() as f64;
        let idf: Vec<f64> = doc_freq
            .values()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect();

        let mut index = Self {
            vocabulary,
            doc_freq,
            idf,
            vectors: Vec::with_capacity(docs.len()),
            empty: Vec::with_capacity(docs.len()),
            paragraph_ids: sorted.iter().map(|p| p.id.clone()).collect(),
            analyzer,
        };
        for terms in &docs {
            let v = index.weigh(terms);
            index.empty.push(v.is_zero());
            index.vectors.push(v);
        }
        Ok(index)
    }

    fn weigh(&self, terms: &[String]) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in terms {
            if let Some(&col) = self.vocabulary.get(t) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        for (col, w) in counts.iter_mut() {
            *w *= self.idf[*col as usize];
        }
        SparseVector::from_map(counts).normalized()
    }

    /// Normalized query vector; terms outside the vocabulary are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.weigh(&self.analyzer.terms(text))
    }

    pub fn len(&self) -> usize {
        self.paragraph_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraph_ids.is_empty()
    }

    /// Cosine similarity of `query` against every paragraph, clamped to
    /// `[0, 1]`, in index order.
    pub fn similarities(&self, query: &SparseVector) -> Vec<f64> {
        self.vectors.iter().map(|v| v.dot(query).clamp(0.0, 1.0)).collect()
    }
}
