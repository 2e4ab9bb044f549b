use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{normalize_deprel, DepError, DepNode, DependencyGraph, DependencyProvider};

#[derive(Serialize)]
struct ParseRequest<'a> {
    sentence: &'a str,
}

#[derive(Deserialize)]
struct ParseResponse {
    nodes: Vec<DepNode>,
}

/// Client for a parser service speaking `POST {"sentence"}` →
/// `{"nodes": [...]}`.
///
/// Each request builds its own call on a shared agent; transport failures
/// are retried a fixed number of times with linear backoff.
#[derive(Debug, Clone)]
pub struct RemoteParser {
    endpoint: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
}

impl RemoteParser {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            retries: 2,
            backoff: Duration::from_millis(100),
        }
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    fn request(&self, sentence: &str) -> Result<String, DepError> {
        let mut attempt = 0;
        loop {
            let result = self.agent.post(&self.endpoint).send_json(ParseRequest { sentence });
            match result {
                Ok(resp) => {
                    return resp
                        .into_string()
                        .map_err(|e| DepError::Protocol(format!("unreadable body: {e}")))
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(DepError::Protocol(format!("parser returned HTTP {code}")))
                }
                Err(ureq::Error::Transport(t)) => {
                    if attempt >= self.retries {
                        return Err(DepError::Transport(t.to_string()));
                    }
                    attempt += 1;
                    thread::sleep(self.backoff * attempt);
                }
            }
        }
    }
}

impl DependencyProvider for RemoteParser {
    fn parse(&self, sentence: &str) -> Result<DependencyGraph, DepError> {
        let body = self.request(sentence)?;
        if body.trim().is_empty() {
            return Err(DepError::Protocol("empty response body".into()));
        }
        let parsed: ParseResponse =
            serde_json::from_str(&body).map_err(|e| DepError::Protocol(format!("invalid response: {e}")))?;
        let graph = DependencyGraph {
            sentence_id: "remote".into(),
            nodes: parsed
                .nodes
                .into_iter()
                .map(|n| DepNode {
                    deprel: normalize_deprel(&n.deprel),
                    ..n
                })
                .collect(),
            degraded: false,
        };
        graph.validate()?;
        Ok(graph)
    }
}

/// One-shot convenience wrapper around [`RemoteParser`].
pub fn parse_remote(sentence: &str, endpoint: &str) -> Result<DependencyGraph, DepError> {
    RemoteParser::new(endpoint, Duration::from_secs(10)).parse(sentence)
}
