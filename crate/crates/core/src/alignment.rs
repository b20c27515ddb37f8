//! Node-to-token alignments.
//!
//! Token 0 is always the synthetic `START` token that carries the top box.
//! Alignments are stored one JSON object per line:
//!
//! ```text
//! {"tokens":["START","every","child"],"nodes":{"b0":0,"b1":1,"s0":2}}
//! ```
//!
//! Constants may be left out; they follow the token of their parent.
//! Edge alignments (tokens such as prepositions that contribute a relation
//! rather than a node) are optional.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drg::{Drg, NodeId};

pub const START: &str = "START";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeAlignment {
    pub source: NodeId,
    pub label: String,
    pub target: NodeId,
    pub token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub tokens: Vec<String>,
    pub nodes: BTreeMap<NodeId, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeAlignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignmentError {
    #[error("node {0} is not aligned to any token")]
    UnalignedNode(NodeId),
    #[error("node {node} is aligned to token {token}, but there are only {len} tokens")]
    TokenOutOfRange {
        node: NodeId,
        token: usize,
        len: usize,
    },
    #[error("token 0 must be `START`")]
    MissingStart,
    #[error("alignment mentions node {0}, which is not in the graph")]
    UnknownNode(NodeId),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Alignment {
    /// An alignment over `words`, with `START` prepended.
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut tokens = vec![START.to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        Alignment {
            tokens,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
        }
    }

    pub fn align(mut self, node: NodeId, token: usize) -> Self {
        self.nodes.insert(node, token);
        self
    }

    pub fn align_edge(mut self, source: NodeId, label: &str, target: NodeId, token: usize) -> Self {
        self.edges.push(EdgeAlignment {
            source,
            label: label.to_string(),
            target,
            token,
        });
        self
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Token of `n`. Unaligned constants inherit the token of their
    /// smallest aligned parent.
    pub fn token_of(&self, g: &Drg, n: NodeId) -> Option<usize> {
        if let Some(t) = self.nodes.get(&n) {
            return Some(*t);
        }
        if g.is_constant(n) {
            let mut parents: Vec<NodeId> = g.incoming(n).map(|e| e.source).collect();
            parents.sort();
            return parents
                .into_iter()
                .find_map(|p| self.nodes.get(&p).copied());
        }
        None
    }

    /// Owner token of every node of `g`.
    pub fn owners(&self, g: &Drg) -> Result<BTreeMap<NodeId, usize>, AlignmentError> {
        self.check(g)?;
        g.nodes()
            .keys()
            .map(|n| {
                self.token_of(g, *n)
                    .map(|t| (*n, t))
                    .ok_or(AlignmentError::UnalignedNode(*n))
            })
            .collect()
    }

    /// Nodes grouped by token.
    pub fn token_nodes(&self, g: &Drg) -> Result<BTreeMap<usize, Vec<NodeId>>, AlignmentError> {
        let mut out: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for (n, t) in self.owners(g)? {
            out.entry(t).or_default().push(n);
        }
        Ok(out)
    }

    /// Every non-constant node must be aligned to an existing token.
    pub fn check(&self, g: &Drg) -> Result<(), AlignmentError> {
        if self.tokens.first().map(String::as_str) != Some(START) {
            return Err(AlignmentError::MissingStart);
        }
        for (n, t) in &self.nodes {
            if !g.contains(*n) {
                return Err(AlignmentError::UnknownNode(*n));
            }
            if *t >= self.tokens.len() {
                return Err(AlignmentError::TokenOutOfRange {
                    node: *n,
                    token: *t,
                    len: self.tokens.len(),
                });
            }
        }
        for (n, kind) in g.nodes() {
            if !kind.is_constant() && !self.nodes.contains_key(n) {
                return Err(AlignmentError::UnalignedNode(*n));
            }
        }
        Ok(())
    }

    /// Applies a node renaming (e.g. from canonical box numbering).
    pub fn renamed(&self, rename: &BTreeMap<NodeId, NodeId>) -> Alignment {
        let r = |id: &NodeId| rename.get(id).copied().unwrap_or(*id);
        Alignment {
            tokens: self.tokens.clone(),
            nodes: self.nodes.iter().map(|(n, t)| (r(n), *t)).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeAlignment {
                    source: r(&e.source),
                    label: e.label.clone(),
                    target: r(&e.target),
                    token: e.token,
                })
                .collect(),
        }
    }
}

pub fn read_alignments(reader: impl BufRead) -> Result<Vec<Alignment>, AlignmentError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| AlignmentError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let a: Alignment = serde_json::from_str(trimmed).map_err(|e| AlignmentError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(a);
    }
    Ok(out)
}

pub fn write_alignments<'a>(
    mut writer: impl Write,
    alignments: impl IntoIterator<Item = &'a Alignment>,
) -> std::io::Result<()> {
    for a in alignments {
        let line = serde_json::to_string(a).map_err(std::io::Error::other)?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}
