//! Dependency parses behind one provider interface.
//!
//! Tokenizers only read `upos`, `head` and `deprel`, so any source of parses
//! works: CoNLL-U files produced offline, a parser reachable over HTTP, or
//! the built-in heuristic chunker.

mod conllu;
mod heuristic;
mod remote;

pub use conllu::{read_conllu, write_conllu, ConlluProvider};
pub use heuristic::{heuristic_parse, HeuristicLexicon, HeuristicParser};
pub use remote::{parse_remote, RemoteParser};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid graph {sentence_id}: {message}")]
    Validation { sentence_id: String, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no parse available for sentence {0:?}")]
    Missing(String),
    #[error("cannot parse an empty sentence")]
    EmptySentence,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepNode {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub sentence_id: String,
    pub nodes: Vec<DepNode>,
    /// Set by the heuristic parser when no verb was found.
    #[serde(default)]
    pub degraded: bool,
}

impl DependencyGraph {
    /// Checks consecutive indices, a single root, in-range heads and
    /// acyclicity.
    pub fn validate(&self) -> Result<(), DepError> {
        let fail = |message: String| DepError::Validation {
            sentence_id: self.sentence_id.clone(),
            message,
        };
        let n = self.nodes.len();
        if n == 0 {
            return Err(fail("graph has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.index != i + 1 {
                return Err(fail(format!("expected index {}, found {}", i + 1, node.index)));
            }
            if node.head > n {
                return Err(fail(format!(
                    "node {} has head {} beyond {n} nodes",
                    node.index, node.head
                )));
            }
        }
        let roots = self.nodes.iter().filter(|d| d.head == 0).count();
        if roots != 1 {
            return Err(fail(format!("expected exactly one root, found {roots}")));
        }
        for start in 1..=n {
            let mut cur = start;
            let mut steps = 0;
            while cur != 0 {
                cur = self.nodes[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(fail(format!("cycle through node {start}")));
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> Option<&DepNode> {
        self.nodes.iter().find(|d| d.head == 0)
    }

    pub fn node(&self, index: usize) -> Option<&DepNode> {
        index.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    pub fn children(&self, index: usize) -> impl Iterator<Item = &DepNode> + '_ {
        self.nodes.iter().filter(move |d| d.head == index)
    }

    /// Indices of `index` and all its descendants, ascending.
    pub fn subtree(&self, index: usize) -> Vec<usize> {
        let mut out = vec![index];
        let mut frontier = vec![index];
        while let Some(cur) = frontier.pop() {
            for c in self.children(cur) {
                out.push(c.index);
                frontier.push(c.index);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Maps legacy (Stanford / UD v1) relation labels onto Universal
/// Dependencies v2 names.
pub fn normalize_deprel(label: &str) -> String {
    match label {
        "dobj" => "obj",
        "nsubjpass" => "nsubj:pass",
        "csubjpass" => "csubj:pass",
        "auxpass" => "aux:pass",
        "nn" => "compound",
        "num" => "nummod",
        "poss" => "nmod:poss",
        "neg" => "advmod",
        "prep" | "pobj" => "obl",
        "partmod" | "infmod" => "acl",
        "rcmod" => "acl:relcl",
        "possessive" => "case",
        "tmod" => "obl:tmod",
        "npadvmod" => "obl:npmod",
        "predet" => "det:predet",
        "preconj" => "cc:preconj",
        "quantmod" => "advmod",
        other => other,
    }
    .to_string()
}

pub trait DependencyProvider: Send + Sync {
    fn parse(&self, sentence: &str) -> Result<DependencyGraph, DepError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(index: usize, head: usize) -> DepNode {
        DepNode {
            index,
            form: format!("w{index}"),
            lemma: format!("w{index}"),
            upos: "X".into(),
            head,
            deprel: if head == 0 { "root".into() } else { "dep".into() },
        }
    }

    fn graph(heads: &[usize]) -> DependencyGraph {
        DependencyGraph {
            sentence_id: "s".into(),
            nodes: heads.iter().enumerate().map(|(i, &h)| node(i + 1, h)).collect(),
            degraded: false,
        }
    }

    #[test]
    fn validation_rules() {
        assert!(graph(&[2, 0, 2]).validate().is_ok());
        assert!(graph(&[0, 0]).validate().is_err());
        assert!(graph(&[2, 1, 0]).validate().is_err());
        assert!(graph(&[4, 0]).validate().is_err());
        assert!(graph(&[]).validate().is_err());
        let mut g = graph(&[2, 0]);
        g.nodes[1].index = 3;
        assert!(g.validate().is_err());
    }

    #[test]
    fn subtree_collects_descendants() {
        let g = graph(&[2, 0, 4, 2, 4]);
        assert_eq!(g.subtree(4), vec![3, 4, 5]);
        assert_eq!(g.subtree(2), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn legacy_labels() {
        assert_eq!(normalize_deprel("dobj"), "obj");
        assert_eq!(normalize_deprel("nsubjpass"), "nsubj:pass");
        assert_eq!(normalize_deprel("amod"), "amod");
    }
}
