//! Client side of the extractive-QA service, plus a deterministic stub
//! backend for running the pipeline without a model.
//!
//! Wire protocol: `POST {"question", "context"}` → `{"answer", "probability"}`.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::{Chunk, ChunkError, ChunkingConfig};
use crate::corpus::segment_sentences;
use crate::retrieval::default_stopwords;
use crate::text::{index_terms, whitespace_runs};
use crate::tokenization::{detokenize, TokenRegistry};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("no candidate chunks to ask")]
    NoCandidates,
    #[error("every QA request failed: {}", .0.join("; "))]
    AllFailed(Vec<String>),
    #[error("malformed QA response for chunk {chunk}: {message}")]
    Protocol { chunk: usize, message: String },
    #[error(transparent)]
    Chunking(#[from] ChunkError),
}

/// Failure of one backend call.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRequest {
    pub question: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResponse {
    pub answer: String,
    pub probability: f64,
}

pub trait QaBackend: Send + Sync {
    fn answer(&self, question: &str, context: &str) -> Result<QaResponse, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRef {
    pub context_id: String,
    pub chunk_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    /// Detokenized answer text.
    pub text: String,
    /// Answer exactly as the backend returned it.
    pub raw_text: String,
    pub probability: f64,
    pub source_chunk: ChunkRef,
    pub source_paragraph: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            retries: 1,
            backoff: Duration::from_millis(100),
        }
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }
}

impl QaBackend for HttpBackend {
    fn answer(&self, question: &str, context: &str) -> Result<QaResponse, BackendError> {
        let body = QaRequest {
            question: question.to_string(),
            context: context.to_string(),
        };
        let mut attempt = 0;
        let text = loop {
            match self.agent.post(&self.endpoint).send_json(&body) {
                Ok(resp) => {
                    break resp
                        .into_string()
                        .map_err(|e| BackendError::Protocol(format!("unreadable body: {e}")))?
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(BackendError::Protocol(format!("service returned HTTP {code}")))
                }
                Err(ureq::Error::Transport(t)) => {
                    if attempt >= self.retries {
                        return Err(BackendError::Transport(format!("{}: {t}", self.endpoint)));
                    }
                    attempt += 1;
                    thread::sleep(self.backoff * attempt);
                }
            }
        };
        serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AskOptions {
    pub max_in_flight: usize,
}

impl Default for AskOptions {
    fn default() -> Self {
        Self { max_in_flight: 4 }
    }
}

/// Asks every chunk and keeps the best answer: non-empty answers beat empty
/// ones, then higher probability, then the earlier chunk. Requests run
/// concurrently (at most `max_in_flight` at once); the reduction does not
/// depend on completion order.
///
/// `source_paragraph` is filled only when a paragraph marker precedes the
/// answer inside the chunk; [`ask`] resolves the rest.
pub fn answer_question(
    question: &str,
    candidates: &[Chunk],
    backend: &dyn QaBackend,
    options: AskOptions,
    registry: Option<&TokenRegistry>,
) -> Result<Answer, QaError> {
    if candidates.is_empty() {
        return Err(QaError::NoCandidates);
    }
    let results: Mutex<Vec<Option<Result<QaResponse, BackendError>>>> = Mutex::new(vec![None; candidates.len()]);
    let next = AtomicUsize::new(0);
    let workers = options.max_in_flight.clamp(1, candidates.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= candidates.len() {
                    break;
                }
                let r = backend.answer(question, &candidates[i].text);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    let results: Vec<Result<QaResponse, BackendError>> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every chunk asked"))
        .collect();

    let mut failures = Vec::new();
    let mut best: Option<(usize, QaResponse)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let chunk = &candidates[i];
        match r {
            Err(BackendError::Transport(msg)) => {
                tracing::warn!(chunk = chunk.chunk_index, "QA request failed: {msg}");
                failures.push(format!("chunk {} of {}: {msg}", chunk.chunk_index, chunk.context_id));
            }
            Err(BackendError::Protocol(message)) => {
                return Err(QaError::Protocol {
                    chunk: chunk.chunk_index,
                    message,
                })
            }
            Ok(resp) => {
                if !resp.probability.is_finite() || !(0.0..=1.0).contains(&resp.probability) {
                    return Err(QaError::Protocol {
                        chunk: chunk.chunk_index,
                        message: format!("probability {} outside [0, 1]", resp.probability),
                    });
                }
                let better = match &best {
                    None => true,
                    Some((bi, b)) => {
                        let key = |r: &QaResponse| (!r.answer.trim().is_empty(), r.probability);
                        let (ne, p) = key(&resp);
                        let (bne, bp) = key(b);
                        (ne, p) > (bne, bp) || ((ne, p) == (bne, bp) && order_key(chunk) < order_key(&candidates[*bi]))
                    }
                };
                if better {
                    best = Some((i, resp));
                }
            }
        }
    }
    let (i, resp) = best.ok_or(QaError::AllFailed(failures))?;
    let chunk = &candidates[i];
    let raw = resp.answer.trim().to_string();
    let text = match registry {
        Some(r) => detokenize(&raw, r),
        None => raw.clone(),
    };
    Ok(Answer {
        source_paragraph: marker_before(&chunk.text, &raw),
        text,
        raw_text: raw,
        probability: resp.probability,
        source_chunk: ChunkRef {
            context_id: chunk.context_id.clone(),
            chunk_index: chunk.chunk_index,
        },
    })
}

fn order_key(c: &Chunk) -> (usize, &str) {
    (c.chunk_index, c.context_id.as_str())
}

const MARKER_OPEN: &str = "[[paragraph:";
const MARKER_CLOSE: &str = "]]";

/// Line placed before each paragraph when ranked paragraphs are joined.
pub fn paragraph_marker(id: &str) -> String {
    format!("{MARKER_OPEN}{id}{MARKER_CLOSE}")
}

fn parse_marker(line: &str) -> Option<&str> {
    line.trim().strip_prefix(MARKER_OPEN)?.strip_suffix(MARKER_CLOSE)
}

/// Paragraph id of the last marker line starting before `limit`.
fn last_marker(text: &str, limit: usize) -> Option<String> {
    let mut found = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if offset >= limit {
            break;
        }
        if let Some(id) = parse_marker(line) {
            found = Some(id.to_string());
        }
        offset += line.len();
    }
    found
}

fn marker_before(chunk_text: &str, answer: &str) -> Option<String> {
    if answer.is_empty() {
        return None;
    }
    chunk_text.find(answer).and_then(|pos| last_marker(chunk_text, pos))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub paragraph_id: String,
    pub text: String,
}

/// Contexts sent to the QA service: one per paragraph, or all passages joined
/// in the given order behind marker lines.
pub fn build_contexts(passages: &[Passage], per_paragraph: bool) -> Vec<(String, String)> {
    if per_paragraph {
        passages
            .iter()
            .map(|p| (p.paragraph_id.clone(), p.text.clone()))
            .collect()
    } else {
        let joined = passages
            .iter()
            .map(|p| format!("{}\n{}", paragraph_marker(&p.paragraph_id), p.text))
            .collect::<Vec<_>>()
            .join("\n\n");
        vec![("joined".to_string(), joined)]
    }
}

/// Chunk, ask, select, and attribute the answer to a paragraph.
pub fn ask(
    question: &str,
    passages: &[Passage],
    per_paragraph: bool,
    chunking: &ChunkingConfig,
    backend: &dyn QaBackend,
    options: AskOptions,
    registry: Option<&TokenRegistry>,
) -> Result<Answer, QaError> {
    let contexts = build_contexts(passages, per_paragraph);
    let mut chunks = Vec::new();
    for (id, text) in &contexts {
        chunks.extend(chunking.chunk(id, text)?);
    }
    let mut answer = answer_question(question, &chunks, backend, options, registry)?;
    if answer.source_paragraph.is_none() {
        let (id, context) = contexts
            .iter()
            .find(|(id, _)| *id == answer.source_chunk.context_id)
            .expect("chunk context exists");
        answer.source_paragraph = if per_paragraph {
            Some(id.clone())
        } else {
            let chunk = chunks
                .iter()
                .find(|c| c.context_id == *id && c.chunk_index == answer.source_chunk.chunk_index)
                .expect("selected chunk exists");
            let start = whitespace_runs(context).get(chunk.token_span.0).map_or(0, |r| r.start);
            let pos = if answer.raw_text.is_empty() {
                None
            } else {
                chunk.text.find(&answer.raw_text)
            };
            last_marker(context, start + pos.unwrap_or(0) + 1)
        };
    }
    Ok(answer)
}

/// Deterministic keyword-overlap scorer: picks the context sentence sharing
/// the largest fraction of the question's content words. Probability is
/// that fraction; no overlap yields `("", 0)`.
#[derive(Debug, Clone)]
pub struct StubScorer {
    stopwords: HashSet<String>,
}

impl Default for StubScorer {
    fn default() -> Self {
        Self {
            stopwords: default_stopwords().into_iter().collect(),
        }
    }
}

impl StubScorer {
    fn content_terms(&self, text: &str) -> HashSet<String> {
        index_terms(text)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    pub fn score(&self, question: &str, context: &str) -> QaResponse {
        let q = self.content_terms(question);
        let mut best = QaResponse {
            answer: String::new(),
            probability: 0.0,
        };
        if q.is_empty() {
            return best;
        }
        let blocks = context.split("\n\n").flat_map(|block| {
            let body: Vec<&str> = block.lines().filter(|l| parse_marker(l).is_none()).collect();
            segment_sentences(&body.join("\n"))
        });
        for sentence in blocks {
            let terms = self.content_terms(&sentence);
            let p = q.intersection(&terms).count() as f64 / q.len() as f64;
            if p > best.probability {
                best = QaResponse {
                    answer: sentence.trim().to_string(),
                    probability: p,
                };
            }
        }
        best
    }
}

impl QaBackend for StubScorer {
    fn answer(&self, question: &str, context: &str) -> Result<QaResponse, BackendError> {
        Ok(self.score(question, context))
    }
}

/// The stub scorer behind an HTTP listener on localhost.
pub struct StubServer {
    server: Arc<tiny_http::Server>,
    port: u16,
    handle: Option<thread::JoinHandle<()>>,
}

impl StubServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and serves on a
    /// background thread until dropped.
    pub fn start(port: u16) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(("127.0.0.1", port)).map_err(std::io::Error::other)?;
        let port = server.server_addr().to_ip().map_or(port, |a| a.port());
        let server = Arc::new(server);
        let worker = Arc::clone(&server);
        let handle = thread::spawn(move || {
            let scorer = StubScorer::default();
            for request in worker.incoming_requests() {
                handle_request(&scorer, request);
            }
        });
        Ok(Self {
            server,
            port,
            handle: Some(handle),
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/", self.port)
    }

    /// Blocks until the serving thread ends.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_request(scorer: &StubScorer, mut request: tiny_http::Request) {
    let json_header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    let mut body = String::new();
    let parsed = request
        .as_reader()
        .read_to_string(&mut body)
        .ok()
        .and_then(|_| serde_json::from_str::<QaRequest>(&body).ok());
    let response = match parsed {
        Some(req) => {
            let out = serde_json::to_string(&scorer.score(&req.question, &req.context)).expect("response serializes");
            tiny_http::Response::from_string(out).with_header(json_header)
        }
        None => tiny_http::Response::from_string(r#"{"error":"expected {\"question\", \"context\"}"}"#)
            .with_status_code(400)
            .with_header(json_header),
    };
    let _ = request.respond(response);
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<Result<QaResponse, BackendError>>);

    impl QaBackend for Fixed {
        fn answer(&self, _q: &str, context: &str) -> Result<QaResponse, BackendError> {
            let i: usize = context.trim_start_matches('c').parse().unwrap();
            self.0[i].clone()
        }
    }

    fn ok(a: &str, p: f64) -> Result<QaResponse, BackendError> {
        Ok(QaResponse {
            answer: a.into(),
            probability: p,
        })
    }

    fn chunks(n: usize) -> Vec<Chunk> {
        (0..n)
            .map(|i| Chunk {
                context_id: "ctx".into(),
                chunk_index: i,
                token_span: (i, i + 1),
                text: format!("c{i}"),
            })
            .collect()
    }

    #[test]
    fn argmax_probability() {
        let b = Fixed(vec![ok("first", 0.2), ok("second", 0.9), ok("third", 0.5)]);
        let a = answer_question("q", &chunks(3), &b, AskOptions::default(), None).unwrap();
        assert_eq!(a.text, "second");
        assert_eq!(a.source_chunk.chunk_index, 1);
    }

    #[test]
    fn single_chunk_verbatim() {
        let b = Fixed(vec![ok("only answer", 0.1)]);
        assert_eq!(
            answer_question("q", &chunks(1), &b, AskOptions::default(), None)
                .unwrap()
                .text,
            "only answer"
        );
    }

    #[test]
    fn non_empty_preferred_and_ties_go_early() {
        let b = Fixed(vec![ok("", 0.9), ok("text", 0.3)]);
        assert_eq!(
            answer_question("q", &chunks(2), &b, AskOptions::default(), None)
                .unwrap()
                .text,
            "text"
        );
        let b = Fixed(vec![ok("", 0.9), ok("", 0.3)]);
        let a = answer_question("q", &chunks(2), &b, AskOptions::default(), None).unwrap();
        assert_eq!((a.text.as_str(), a.probability), ("", 0.9));
        let b = Fixed(vec![ok("x", 0.5), ok("y", 0.5)]);
        let mut cs = chunks(2);
        cs.reverse();
        assert_eq!(
            answer_question("q", &cs, &b, AskOptions::default(), None).unwrap().text,
            "x"
        );
    }

    #[test]
    fn failures() {
        let t = || Err(BackendError::Transport("refused".into()));
        let b = Fixed(vec![t(), t()]);
        match answer_question("q", &chunks(2), &b, AskOptions::default(), None) {
            Err(QaError::AllFailed(msgs)) => assert_eq!(msgs.len(), 2),
            other => panic!("{other:?}"),
        }
        let b = Fixed(vec![t(), ok("kept", 0.1)]);
        assert_eq!(
            answer_question("q", &chunks(2), &b, AskOptions::default(), None)
                .unwrap()
                .text,
            "kept"
        );
        let b = Fixed(vec![ok("a", 0.1), Err(BackendError::Protocol("bad json".into()))]);
        assert!(matches!(
            answer_question("q", &chunks(2), &b, AskOptions::default(), None),
            Err(QaError::Protocol { chunk: 1, .. })
        ));
        let b = Fixed(vec![ok("a", 1.5)]);
        assert!(matches!(
            answer_question("q", &chunks(1), &b, AskOptions::default(), None),
            Err(QaError::Protocol { .. })
        ));
        assert!(matches!(
            answer_question("q", &[], &b, AskOptions::default(), None),
            Err(QaError::NoCandidates)
        ));
    }

    #[test]
    fn in_flight_cap_one_is_sequential_and_same_result() {
        let b = Fixed(vec![ok("a", 0.2), ok("b", 0.7), ok("c", 0.4), ok("d", 0.1)]);
        let a = answer_question("q", &chunks(4), &b, AskOptions { max_in_flight: 1 }, None).unwrap();
        let z = answer_question("q", &chunks(4), &b, AskOptions { max_in_flight: 16 }, None).unwrap();
        assert_eq!(a, z);
    }

    #[test]
    fn detokenizes_answer() {
        let mut reg = TokenRegistry::new();
        reg.seed("X1X1", "common ownership", crate::tokenization::TokenClass::Definition)
            .unwrap();
        let b = Fixed(vec![ok("X1X1 applies.", 0.4)]);
        let a = answer_question("q", &chunks(1), &b, AskOptions::default(), Some(&reg)).unwrap();
        assert_eq!(a.text, "common ownership applies.");
        assert_eq!(a.raw_text, "X1X1 applies.");
    }

    #[test]
    fn stub_scorer_picks_overlap_sentence() {
        let s = StubScorer::default();
        let ctx = "The bank files reports. Capital stock is held by the remaining bank.";
        let r = s.score("Who holds the capital stock?", ctx);
        assert_eq!(r.answer, "Capital stock is held by the remaining bank.");
        assert!((r.probability - 2.0 / 3.0).abs() < 1e-12, "{}", r.probability);
        assert_eq!(
            s.score("zebra?", ctx),
            QaResponse {
                answer: String::new(),
                probability: 0.0
            }
        );
    }

    #[test]
    fn ask_attributes_paragraphs() {
        let passages = vec![
            Passage {
                paragraph_id: "d-p00003".into(),
                text: "Reserves are kept in cash.".into(),
            },
            Passage {
                paragraph_id: "d-p00001".into(),
                text: "The remaining bank holds capital stock.".into(),
            },
        ];
        let cfg = ChunkingConfig {
            window_size: 10,
            stride: 5,
            margin: 1.0,
        };
        let stub = StubScorer::default();
        for per in [false, true] {
            let a = ask(
                "Who holds capital stock?",
                &passages,
                per,
                &cfg,
                &stub,
                AskOptions::default(),
                None,
            )
            .unwrap();
            assert_eq!(a.text, "The remaining bank holds capital stock.");
            assert_eq!(a.source_paragraph.as_deref(), Some("d-p00001"), "per_paragraph={per}");
        }
        // a chunk starting mid-paragraph has no marker of its own
        let narrow = ChunkingConfig {
            window_size: 6,
            stride: 3,
            margin: 1.0,
        };
        let a = ask(
            "Who holds capital stock?",
            &passages,
            false,
            &narrow,
            &stub,
            AskOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(a.text, "bank holds capital stock.");
        assert_eq!(a.source_chunk.chunk_index, 3);
        assert_eq!(a.source_paragraph.as_deref(), Some("d-p00001"));
    }

    #[test]
    fn stub_server_round_trip() {
        let server = StubServer::start(0).unwrap();
        let backend = HttpBackend::new(server.url(), Duration::from_secs(5));
        let r = backend
            .answer("Who holds capital stock?", "The remaining bank holds capital stock.")
            .unwrap();
        assert_eq!(r.answer, "The remaining bank holds capital stock.");
        assert_eq!(r.probability, 1.0);
        let port = server.port();
        drop(server);
        let dead = HttpBackend::new(format!("http://127.0.0.1:{port}/"), Duration::from_millis(500))
            .with_retries(0, Duration::ZERO);
        assert!(matches!(dead.answer("q", "c"), Err(BackendError::Transport(_))));
    }
}
