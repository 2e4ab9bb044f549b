//! Document condensing and passage retrieval for extractive question answering.
//!
//! The pipeline splits a long regulation-style document into paragraphs,
//! replaces defined terms and verb-anchored noun phrases with short registry
//! tokens, ranks paragraphs against a question with a TF-IDF / paragraph
//! vector blend, and sends the best passages to an external QA service.

pub mod chunking;
pub mod corpus;
pub mod dependency;
pub mod eval;
pub mod phonetics;
pub mod qa_client;
pub mod retrieval;
pub mod text;
pub mod tokenization;
