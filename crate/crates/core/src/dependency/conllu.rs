use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{normalize_deprel, DepError, DepNode, DependencyGraph, DependencyProvider};

/// Parses CoNLL-U text into one graph per sentence block.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.
/// Sentence ids come from `# sent_id =` comments when present.
pub fn read_conllu(content: &str) -> Result<Vec<DependencyGraph>, DepError> {
    let mut graphs = Vec::new();
    let mut nodes: Vec<DepNode> = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut degraded = false;
    let mut block_line = 0;

    let mut flush = |nodes: &mut Vec<DepNode>, sent_id: &mut Option<String>, degraded: &mut bool, line: usize| {
        if nodes.is_empty() {
            *sent_id = None;
            *degraded = false;
            return Ok(());
        }
        let graph = DependencyGraph {
            sentence_id: sent_id.take().unwrap_or_else(|| format!("s{}", graphs.len() + 1)),
            nodes: std::mem::take(nodes),
            degraded: std::mem::take(degraded),
        };
        graph.validate().map_err(|e| match e {
            DepError::Validation { sentence_id, message } => DepError::Validation {
                sentence_id,
                message: format!("{message} (block starting at line {line})"),
            },
            other => other,
        })?;
        graphs.push(graph);
        Ok::<(), DepError>(())
    };

    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut nodes, &mut sent_id, &mut degraded, block_line)?;
            continue;
        }
        if nodes.is_empty() && sent_id.is_none() && !degraded {
            block_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => sent_id = Some(value.trim().to_string()),
                    "degraded" => degraded = value.trim() == "true",
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(DepError::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| DepError::Parse {
            line: line_no,
            message: format!("invalid token id {:?}", cols[0]),
        })?;
        let head: usize = cols[6].parse().map_err(|_| DepError::Parse {
            line: line_no,
            message: format!("invalid head {:?}", cols[6]),
        })?;
        nodes.push(DepNode {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: normalize_deprel(cols[7]),
        });
    }
    flush(&mut nodes, &mut sent_id, &mut degraded, block_line)?;
    Ok(graphs)
}

/// Serializes graphs as CoNLL-U; unused columns are written as `_`.
pub fn write_conllu(graphs: &[DependencyGraph]) -> String {
    let mut out = String::new();
    for g in graphs {
        let _ = writeln!(out, "# sent_id = {}", g.sentence_id);
        if g.degraded {
            out.push_str("# degraded = true\n");
        }
        for n in &g.nodes {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                n.index, n.form, n.lemma, n.upos, n.head, n.deprel
            );
        }
        out.push('\n');
    }
    out
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Serves pre-computed parses, matched to sentences by their
/// whitespace-free surface text.
#[derive(Debug, Clone, Default)]
pub struct ConlluProvider {
    by_text: HashMap<String, DependencyGraph>,
}

impl ConlluProvider {
    pub fn new(graphs: Vec<DependencyGraph>) -> Self {
        let by_text = graphs
            .into_iter()
            .map(|g| (g.nodes.iter().map(|n| squash(&n.form)).collect::<String>(), g))
            .collect();
        Self { by_text }
    }

    pub fn from_path(path: &Path) -> Result<Self, DepError> {
        Ok(Self::new(read_conllu(&std::fs::read_to_string(path)?)?))
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }
}

impl DependencyProvider for ConlluProvider {
    fn parse(&self, sentence: &str) -> Result<DependencyGraph, DepError> {
        self.by_text
            .get(&squash(sentence))
            .cloned()
            .ok_or_else(|| DepError::Missing(sentence.to_string()))
    }
}
