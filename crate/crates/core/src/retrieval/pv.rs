//! Paragraph vectors, distributed bag of words (PV-DBOW) with negative
//! sampling.
//!
//! Each paragraph vector is trained to predict the words of its paragraph
//! against `negative` noise words drawn from the unigram distribution raised
//! to 0.75. With `train_words` set, skip-gram word vectors are trained in the
//! same pass over a `window`-sized context.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::corpus::Paragraph;
use crate::text::index_terms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvHyperParams {
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub initial_learning_rate: f32,
    pub min_learning_rate: f32,
    pub min_count: usize,
    pub seed: u64,
    /// Inference epochs; training epochs when unset.
    pub infer_epochs: Option<usize>,
    pub train_words: bool,
}

impl Default for PvHyperParams {
    fn default() -> Self {
        Self {
            dim: 64,
            epochs: 40,
            window: 5,
            negative_samples: 5,
            initial_learning_rate: 0.025,
            min_learning_rate: 0.0001,
            min_count: 2,
            seed: 42,
            infer_epochs: None,
            train_words: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphVectorModel {
    pub hyperparams: PvHyperParams,
    pub vocabulary: Vec<String>,
    pub counts: Vec<u64>,
    pub paragraph_ids: Vec<String>,
    pub doc_vectors: Vec<Vec<f32>>,
    /// Output (prediction) vectors, one per vocabulary word.
    pub word_vectors: Vec<Vec<f32>>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
    #[serde(skip)]
    noise: Vec<f64>,
}

/// Result of inferring a vector for unseen text.
#[derive(Debug, Clone, PartialEq)]
pub struct Inferred {
    pub vector: Vec<f32>,
    /// True when no word of the text was in the vocabulary.
    pub no_signal: bool,
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0) as f64
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| (rng.gen::<f32>() - 0.5) / dim as f32).collect()
}

/// Cumulative unigram^0.75 distribution.
fn noise_table(counts: &[u64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut table: Vec<f64> = counts
        .iter()
        .map(|&c| {
            acc += (c as f64).powf(0.75);
            acc
        })
        .collect();
    if acc > 0.0 {
        table.iter_mut().for_each(|v| *v /= acc);
    }
    table
}

/// One logistic-loss update of `input` towards predicting `target`, with
/// negative samples. Returns the gradient to add to `input`.
#[allow(clippy::too_many_arguments)]
fn sgd_pair(
    input: &[f32],
    target: usize,
    outputs: &mut [Vec<f32>],
    update_outputs: bool,
    noise: &[f64],
    negative: usize,
    lr: f32,
    rng: &mut ChaCha8Rng,
) -> Vec<f32> {
    let mut grad = vec![0.0f32; input.len()];
    for sample in 0..=negative {
        let (word, label) = if sample == 0 {
            (target, 1.0)
        } else {
            let r: f64 = rng.gen();
            let w = noise.partition_point(|&c| c < r).min(noise.len() - 1);
            if w == target {
                continue;
            }
            (w, 0.0)
        };
        let out = &mut outputs[word];
        let g = (label - sigmoid(dot(input, out))) * lr;
        for (gi, o) in grad.iter_mut().zip(out.iter()) {
            *gi += g * o;
        }
        if update_outputs {
            for (o, x) in out.iter_mut().zip(input) {
                *o += g * x;
            }
        }
    }
    grad
}

impl ParagraphVectorModel {
    fn rebuild_caches(&mut self) {
        self.lookup = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        self.noise = noise_table(&self.counts);
    }

    /// Restores lookup tables after deserialization.
    pub fn prepared(mut self) -> Self {
        self.rebuild_caches();
        self
    }

    fn word_ids(&self, text: &str) -> Vec<usize> {
        index_terms(text)
            .iter()
            .filter_map(|w| self.lookup.get(w).copied())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.hyperparams.dim
    }

    /// Trains over `paragraphs` sorted by id, so the input order does not
    /// affect the result.
    pub fn train(paragraphs: &[Paragraph], hyper: PvHyperParams) -> Result<Self, RetrievalError> {
        if paragraphs.len() < 2 {
            return Err(RetrievalError::Argument(
                "paragraph vectors need at least 2 paragraphs".into(),
            ));
        }
        if hyper.dim < 2 {
            return Err(RetrievalError::Argument("dim must be at least 2".into()));
        }
        let mut sorted: Vec<&Paragraph> = paragraphs.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let docs: Vec<Vec<String>> = sorted.iter().map(|p| index_terms(&p.text)).collect();

        let mut freq: HashMap<&str, u64> = HashMap::new();
        for w in docs.iter().flatten() {
            *freq.entry(w).or_default() += 1;
        }
        let mut vocab: Vec<(&str, u64)> = freq
            .into_iter()
            .filter(|&(_, c)| c as usize >= hyper.min_count.max(1))
            .collect();
        vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if vocab.is_empty() {
            return Err(RetrievalError::Training(
                "vocabulary is empty after min_count filtering".into(),
            ));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let dim = hyper.dim;
        let mut model = Self {
            vocabulary: vocab.iter().map(|(w, _)| w.to_string()).collect(),
            counts: vocab.iter().map(|(_, c)| *c).collect(),
            paragraph_ids: sorted.iter().map(|p| p.id.clone()).collect(),
            doc_vectors: (0..docs.len()).map(|_| random_vector(&mut rng, dim)).collect(),
            word_vectors: vec![vec![0.0; dim]; vocab.len()],
            hyperparams: hyper,
            lookup: HashMap::new(),
            noise: Vec::new(),
        };
        model.rebuild_caches();
        let ids: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| d.iter().filter_map(|w| model.lookup.get(w).copied()).collect())
            .collect();
        let mut input_words: Vec<Vec<f32>> = if model.hyperparams.train_words {
            (0..model.vocabulary.len())
                .map(|_| random_vector(&mut rng, dim))
                .collect()
        } else {
            Vec::new()
        };

        let h = &model.hyperparams;
        let total = (h.epochs * ids.iter().map(Vec::len).sum::<usize>()).max(1) as f32;
        let mut step = 0usize;
        for _ in 0..h.epochs {
            for (d, words) in ids.iter().enumerate() {
                for (pos, &w) in words.iter().enumerate() {
                    let lr = (h.initial_learning_rate
                        - (h.initial_learning_rate - h.min_learning_rate) * step as f32 / total)
                        .max(h.min_learning_rate);
                    step += 1;
                    let grad = sgd_pair(
                        &model.doc_vectors[d],
                        w,
                        &mut model.word_vectors,
                        true,
                        &model.noise,
                        h.negative_samples,
                        lr,
                        &mut rng,
                    );
                    for (x, g) in model.doc_vectors[d].iter_mut().zip(grad) {
                        *x += g;
                    }
                    if h.train_words && h.window > 0 {
                        let reduced = rng.gen_range(0..h.window);
                        let span = h.window - reduced;
                        let lo = pos.saturating_sub(span);
                        let hi = (pos + span + 1).min(words.len());
                        for c in lo..hi {
                            if c == pos {
                                continue;
                            }
                            let ctx = words[c];
                            let grad = sgd_pair(
                                &input_words[ctx],
                                w,
                                &mut model.word_vectors,
                                true,
                                &model.noise,
                                h.negative_samples,
                                lr,
                                &mut rng,
                            );
                            for (x, g) in input_words[ctx].iter_mut().zip(grad) {
                                *x += g;
                            }
                        }
                    }
                }
            }
        }
        if model.doc_vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(RetrievalError::Training(
                "training diverged to non-finite values".into(),
            ));
        }
        Ok(model)
    }

    /// Fits a fresh paragraph vector for `text` against the frozen word
    /// vectors. Deterministic for a given model.
    pub fn infer(&self, text: &str) -> Inferred {
        let words = self.word_ids(text);
        let dim = self.dim();
        if words.is_empty() {
            return Inferred {
                vector: vec![0.0; dim],
                no_signal: true,
            };
        }
        let h = &self.hyperparams;
        let mut rng = ChaCha8Rng::seed_from_u64(h.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut v = random_vector(&mut rng, dim);
        let mut outputs = self.word_vectors.clone();
        let epochs = h.infer_epochs.unwrap_or(h.epochs);
        let total = (epochs * words.len()).max(1) as f32;
        let mut step = 0usize;
        for _ in 0..epochs {
            for &w in &words {
                let lr = (h.initial_learning_rate
                    - (h.initial_learning_rate - h.min_learning_rate) * step as f32 / total)
                    .max(h.min_learning_rate);
                step += 1;
                let grad = sgd_pair(
                    &v,
                    w,
                    &mut outputs,
                    false,
                    &self.noise,
                    h.negative_samples,
                    lr,
                    &mut rng,
                );
                for (x, g) in v.iter_mut().zip(grad) {
                    *x += g;
                }
            }
        }
        Inferred {
            vector: v,
            no_signal: false,
        }
    }

    pub fn doc_vector(&self, paragraph_id: &str) -> Option<&[f32]> {
        self.paragraph_ids
            .iter()
            .position(|p| p == paragraph_id)
            .map(|i| self.doc_vectors[i].as_slice())
    }
}
