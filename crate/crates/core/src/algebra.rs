//! Graphs with sources and the Apply/Modify algebra.
//!
//! An [`SGraph`] is a fragment of a DRG whose nodes may be unlabeled
//! placeholders. Some nodes carry source names; one node is the root.
//! [`apply`] plugs an argument's root into a source of the head and
//! [`modify`] attaches a modifier's source to the head's root. In both
//! cases nodes sharing a source name are merged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drg::{Drg, DrgEdge, EdgeLabel, Namespace, NodeId, NodeKind};
use crate::penman::{self, Builder, Concept, PNode, PenmanError, Value};

/// Name of a source slot. `root` is reserved for the root marker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceName(String);

pub const ROOT_SOURCE: &str = "root";

impl SourceName {
    pub fn new(name: &str) -> Result<Self, AlgebraError> {
        if name.is_empty() || name == ROOT_SOURCE {
            return Err(AlgebraError::ReservedSource(name.to_string()));
        }
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(AlgebraError::ReservedSource(name.to_string()));
        }
        Ok(SourceName(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for SourceName {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceName::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("`{0}` is not a usable source name")]
    ReservedSource(String),
    #[error("graph has no node with source `{0}`")]
    MissingSource(SourceName),
    #[error("merging would give node {node} both `{left}` and `{right}`")]
    SourceClash {
        node: NodeId,
        left: String,
        right: String,
    },
    #[error("source `{0}` is on more than one node")]
    DuplicateSourceNode(String),
    #[error("modifier source `{0}` is not a source of the head")]
    ModifierSourceNotInHead(SourceName),
    #[error("no root node")]
    MissingRoot,
    #[error("graph still has open sources: {0:?}")]
    OpenSources(Vec<SourceName>),
    #[error("node {0} is an unfilled placeholder")]
    UnlabeledNode(NodeId),
    #[error("constant node {0} has an outgoing edge")]
    ConstantWithEdge(NodeId),
    #[error("lexical graph is not connected")]
    Disconnected,
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("evaluating edge {head} -> {dependent}: {error}")]
    EvaluationFailure {
        head: usize,
        dependent: usize,
        error: Box<AlgebraError>,
    },
    #[error(transparent)]
    Penman(#[from] PenmanError),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// A graph with sources. Node labels are optional; an unlabeled node is a
/// placeholder waiting to be filled by another graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SGraph {
    nodes: BTreeMap<NodeId, Option<NodeKind>>,
    edges: Vec<DrgEdge>,
    root: NodeId,
    sources: BTreeMap<SourceName, NodeId>,
}

impl SGraph {
    pub fn new(
        nodes: impl IntoIterator<Item = (NodeId, Option<NodeKind>)>,
        edges: impl IntoIterator<Item = DrgEdge>,
        root: NodeId,
        sources: impl IntoIterator<Item = (SourceName, NodeId)>,
    ) -> Result<Self, AlgebraError> {
        let nodes: BTreeMap<NodeId, Option<NodeKind>> = nodes.into_iter().collect();
        let mut edges: Vec<DrgEdge> = edges.into_iter().collect();
        edges.sort();
        if !nodes.contains_key(&root) {
            return Err(AlgebraError::MissingRoot);
        }
        let sources: BTreeMap<SourceName, NodeId> = sources.into_iter().collect();
        for n in sources.values() {
            if !nodes.contains_key(n) {
                return Err(AlgebraError::MalformedTree(format!(
                    "source on unknown node {n}"
                )));
            }
        }
        for e in &edges {
            if !nodes.contains_key(&e.source) || !nodes.contains_key(&e.target) {
                return Err(AlgebraError::MalformedTree(format!("dangling edge {e}")));
            }
        }
        Ok(SGraph {
            nodes,
            edges,
            root,
            sources,
        })
    }

    /// A complete DRG seen as an s-graph rooted at its top box.
    pub fn from_drg(g: &Drg) -> Result<Self, AlgebraError> {
        let root = g.root().ok_or(AlgebraError::MissingRoot)?;
        SGraph::new(
            g.nodes().iter().map(|(id, k)| (*id, Some(k.clone()))),
            g.edges().iter().cloned(),
            root,
            [],
        )
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Option<NodeKind>> {
        &self.nodes
    }

    pub fn edges(&self) -> &[DrgEdge] {
        &self.edges
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn sources(&self) -> &BTreeMap<SourceName, NodeId> {
        &self.sources
    }

    pub fn source(&self, name: &SourceName) -> Option<NodeId> {
        self.sources.get(name).copied()
    }

    /// Source names on `n`.
    pub fn sources_of(&self, n: NodeId) -> Vec<&SourceName> {
        self.sources
            .iter()
            .filter(|(_, v)| **v == n)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_placeholder(&self, n: NodeId) -> bool {
        matches!(self.nodes.get(&n), Some(None))
    }

    /// Strips sources; fails if any remain open or any placeholder is
    /// left unfilled.
    pub fn to_drg(&self) -> Result<Drg, AlgebraError> {
        if !self.sources.is_empty() {
            return Err(AlgebraError::OpenSources(
                self.sources.keys().cloned().collect(),
            ));
        }
        let mut nodes = BTreeMap::new();
        for (id, k) in &self.nodes {
            let k = k.clone().ok_or(AlgebraError::UnlabeledNode(*id))?;
            nodes.insert(*id, k);
        }
        // ids of merged nodes may come from a placeholder in another
        // namespace; renumber those
        let mut rename = BTreeMap::new();
        let mut next: BTreeMap<Namespace, u32> = BTreeMap::new();
        for id in nodes.keys() {
            let n = next.entry(id.namespace).or_insert(0);
            *n = (*n).max(id.index + 1);
        }
        for (id, k) in &nodes {
            if id.namespace != k.namespace() {
                let n = next.entry(k.namespace()).or_insert(0);
                rename.insert(*id, NodeId::new(k.namespace(), *n));
                *n += 1;
            }
        }
        let r = |id: NodeId| rename.get(&id).copied().unwrap_or(id);
        let nodes = nodes.into_iter().map(|(id, k)| (r(id), k)).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| DrgEdge::new(r(e.source), r(e.target), e.label.clone()))
            .collect();
        Drg::from_parts(nodes, edges).map_err(|e| AlgebraError::MalformedTree(e.to_string()))
    }

    /// Parses strict Penman with `<src>` annotations on variables.
    /// Unlabeled nodes such as `(s3<o>)` are placeholders. Without a
    /// `<root>` mark the top node is the root.
    pub fn parse(text: &str) -> Result<Self, AlgebraError> {
        let tree = penman::parse_tree(text, 1)?;
        let mut b = SBuilder::default();
        let top = b.visit(tree)?;
        b.finish(top)
    }

    /// Inverse of [`SGraph::parse`].
    pub fn to_penman(&self) -> Result<String, AlgebraError> {
        let lay = penman::layout(&self.edges, self.nodes.len(), self.root)
            .map_err(|_| AlgebraError::Disconnected)?;
        let mut out = String::new();
        self.write_node(&lay, self.root, 0, &mut out);
        Ok(out)
    }

    fn inline(&self, n: NodeId) -> bool {
        matches!(self.nodes.get(&n), Some(Some(NodeKind::Constant(_))))
            && n != self.root
            && self.sources_of(n).is_empty()
            && self.edges.iter().filter(|e| e.target == n).count() == 1
    }

    fn write_node(&self, lay: &penman::Layout, n: NodeId, depth: usize, out: &mut String) {
        let mut marks: Vec<String> = self.sources_of(n).iter().map(|s| s.to_string()).collect();
        if n == self.root {
            marks.insert(0, ROOT_SOURCE.to_string());
        }
        let _ = write!(out, "({n}");
        for m in marks {
            let _ = write!(out, "<{m}>");
        }
        match &self.nodes[&n] {
            Some(NodeKind::Box) => out.push_str(" / box"),
            Some(NodeKind::Synset(s)) => {
                let _ = write!(out, " / {s}");
            }
            Some(NodeKind::Constant(c)) => {
                let _ = write!(out, " / {}", penman::quote(c));
            }
            None => {}
        }
        let indent = "  ".repeat(depth + 1);
        for &(i, inverse) in lay.children.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            let e = &self.edges[i];
            let (other, role) = if inverse {
                (e.source, format!("{}-of", e.label.relation()))
            } else {
                (e.target, e.label.relation().to_string())
            };
            let _ = write!(out, "\n{indent}:{role} ");
            if lay.tree_edges.contains(&i) {
                if !inverse && self.inline(other) {
                    if let Some(Some(NodeKind::Constant(c))) = self.nodes.get(&other) {
                        out.push_str(&penman::quote(c));
                    }
                } else {
                    self.write_node(lay, other, depth + 1, out);
                }
            } else {
                let _ = write!(out, "{other}");
            }
        }
        out.push(')');
    }
}

#[derive(Default)]
struct SBuilder {
    nodes: Vec<(String, Option<NodeKind>, Vec<String>)>,
    edges: Vec<(usize, String, STarget)>,
    defined: BTreeMap<String, usize>,
}

enum STarget {
    Node(usize),
    Var(String),
}

impl SBuilder {
    fn visit(&mut self, mut node: PNode) -> Result<usize, AlgebraError> {
        let kind = match node.concept {
            None => None,
            Some(Concept::Quoted(_)) | Some(Concept::Atom(_)) => {
                Some(Builder::concept_kind(&mut node)?)
            }
        };
        if self.defined.contains_key(&node.var) {
            return Err(PenmanError::DuplicateVariable {
                var: node.var,
                line: node.pos.line,
                col: node.pos.col,
            }
            .into());
        }
        let me = self.nodes.len();
        self.defined.insert(node.var.clone(), me);
        self.nodes
            .push((node.var.clone(), kind, node.sources.clone()));
        for (role, value) in node.relations {
            let target = match value {
                Value::Node(child) => STarget::Node(self.visit(child)?),
                Value::Atom(a, _) => STarget::Var(a),
                Value::Quoted(q) => {
                    let c = self.nodes.len();
                    self.nodes
                        .push((String::new(), Some(NodeKind::Constant(q)), Vec::new()));
                    STarget::Node(c)
                }
            };
            self.edges.push((me, role, target));
        }
        Ok(me)
    }

    fn finish(self, top: usize) -> Result<SGraph, AlgebraError> {
        let mut ids: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut used = BTreeSet::new();
        for (i, (var, kind, _)) in self.nodes.iter().enumerate() {
            if let Ok(id) = var.parse::<NodeId>() {
                let fits = kind.as_ref().is_none_or(|k| k.namespace() == id.namespace);
                if fits && used.insert(id) {
                    ids[i] = Some(id);
                }
            }
        }
        let mut next: BTreeMap<Namespace, u32> = BTreeMap::new();
        for id in &used {
            let n = next.entry(id.namespace).or_insert(0);
            *n = (*n).max(id.index + 1);
        }
        for (i, (_, kind, _)) in self.nodes.iter().enumerate() {
            if ids[i].is_none() {
                let ns = kind.as_ref().map_or(Namespace::Synset, NodeKind::namespace);
                let n = next.entry(ns).or_insert(0);
                ids[i] = Some(NodeId::new(ns, *n));
                *n += 1;
            }
        }
        let ids: Vec<NodeId> = ids.into_iter().map(Option::unwrap).collect();

        let mut root = None;
        let mut sources = BTreeMap::new();
        for (i, (_, _, names)) in self.nodes.iter().enumerate() {
            for name in names {
                if name == ROOT_SOURCE {
                    if root.replace(ids[i]).is_some() {
                        return Err(AlgebraError::DuplicateSourceNode(name.clone()));
                    }
                } else if sources.insert(SourceName::new(name)?, ids[i]).is_some() {
                    return Err(AlgebraError::DuplicateSourceNode(name.clone()));
                }
            }
        }
        let mut edges = Vec::new();
        for (src, role, target) in self.edges {
            let tgt = match target {
                STarget::Node(t) => t,
                STarget::Var(v) => {
                    *self
                        .defined
                        .get(&v)
                        .ok_or_else(|| PenmanError::UndefinedVariable {
                            var: v.clone(),
                            line: 0,
                            col: 0,
                        })?
                }
            };
            let (from, to, name) = match role.strip_suffix("-of") {
                Some(base) if !base.is_empty() => (tgt, src, base.to_string()),
                _ => (src, tgt, role),
            };
            edges.push(DrgEdge::new(
                ids[from],
                ids[to],
                EdgeLabel::from_relation(&name),
            ));
        }
        let nodes = self
            .nodes
            .into_iter()
            .enumerate()
            .map(|(i, (_, k, _))| (ids[i], k));
        SGraph::new(nodes, edges, root.unwrap_or(ids[top]), sources)
    }
}

// ---------------------------------------------------------------------------
// the operations

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Head,
    Other,
}

/// Disjoint union of `head` and `other`, followed by identification of the
/// node pairs in `glue`. Head ids are kept where possible; other ids are
/// renamed on collision.
fn glue(
    head: &SGraph,
    other: &SGraph,
    pairs: &[(NodeId, NodeId)],
    sources: Vec<(SourceName, Side, NodeId)>,
) -> Result<SGraph, AlgebraError> {
    let head_ids: Vec<NodeId> = head.nodes.keys().copied().collect();
    let other_ids: Vec<NodeId> = other.nodes.keys().copied().collect();
    let hn = head_ids.len();
    let index = |side: Side, n: NodeId| -> usize {
        match side {
            Side::Head => head_ids.binary_search(&n).expect("head node"),
            Side::Other => hn + other_ids.binary_search(&n).expect("other node"),
        }
    };
    let total = hn + other_ids.len();
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(h, o) in pairs {
        let (a, b) = (
            find(&mut parent, index(Side::Head, h)),
            find(&mut parent, index(Side::Other, o)),
        );
        if a != b {
            // keep the smaller index (head side) as representative
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    // the same source name on both sides also identifies nodes
    let mut by_name: BTreeMap<&SourceName, Vec<usize>> = BTreeMap::new();
    for (name, side, n) in &sources {
        by_name.entry(name).or_default().push(index(*side, *n));
    }
    for members in by_name.values() {
        for w in members.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
    }

    let node_at = |i: usize| -> (NodeId, &Option<NodeKind>) {
        if i < hn {
            (head_ids[i], &head.nodes[&head_ids[i]])
        } else {
            (other_ids[i - hn], &other.nodes[&other_ids[i - hn]])
        }
    };
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..total {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(i);
    }
    let mut labels: BTreeMap<usize, Option<NodeKind>> = BTreeMap::new();
    for (r, members) in &classes {
        let mut label: Option<(NodeId, &NodeKind)> = None;
        for &m in members {
            let (id, k) = node_at(m);
            if let Some(k) = k {
                match label {
                    Some((_, l)) if l != k => {
                        return Err(AlgebraError::SourceClash {
                            node: id,
                            left: l.to_string(),
                            right: k.to_string(),
                        })
                    }
                    Some(_) => {}
                    None => label = Some((id, k)),
                }
            }
        }
        labels.insert(*r, label.map(|(_, k)| k.clone()));
    }

    // choose an id per class; classes holding head nodes go first
    let mut taken: BTreeSet<NodeId> = BTreeSet::new();
    let mut class_id: BTreeMap<usize, NodeId> = BTreeMap::new();
    let mut deferred = Vec::new();
    for (r, members) in &classes {
        let label = &labels[r];
        // head classes keep a head id; the rest keep their own unless it
        // collides with a head id
        let mut candidates: Vec<NodeId> = members
            .iter()
            .filter(|&&m| *r >= hn || m < hn)
            .map(|&m| node_at(m).0)
            .collect();
        if let Some(k) = label {
            candidates.sort_by_key(|c| c.namespace != k.namespace());
        }
        match candidates.into_iter().find(|c| !taken.contains(c)) {
            Some(c) if *r < hn || !head.nodes.contains_key(&c) => {
                taken.insert(c);
                class_id.insert(*r, c);
            }
            _ => deferred.push(*r),
        }
    }
    let mut next: BTreeMap<Namespace, u32> = BTreeMap::new();
    for id in head.nodes.keys().chain(other.nodes.keys()) {
        let n = next.entry(id.namespace).or_insert(0);
        *n = (*n).max(id.index + 1);
    }
    for r in deferred {
        let ns = match &labels[&r] {
            Some(k) => k.namespace(),
            None => node_at(r).0.namespace,
        };
        let n = next.entry(ns).or_insert(0);
        let id = NodeId::new(ns, *n);
        *n += 1;
        taken.insert(id);
        class_id.insert(r, id);
    }

    let mut resolve = |side: Side, n: NodeId| class_id[&find(&mut parent, index(side, n))];
    let nodes: BTreeMap<NodeId, Option<NodeKind>> = classes
        .keys()
        .map(|r| (class_id[r], labels[r].clone()))
        .collect();
    let mut edges = Vec::new();
    for e in &head.edges {
        edges.push(DrgEdge::new(
            resolve(Side::Head, e.source),
            resolve(Side::Head, e.target),
            e.label.clone(),
        ));
    }
    for e in &other.edges {
        edges.push(DrgEdge::new(
            resolve(Side::Other, e.source),
            resolve(Side::Other, e.target),
            e.label.clone(),
        ));
    }
    let root = resolve(Side::Head, head.root);
    let mut out_sources = BTreeMap::new();
    for (name, side, n) in sources {
        let id = resolve(side, n);
        if let Some(prev) = out_sources.insert(name.clone(), id) {
            debug_assert_eq!(prev, id);
        }
    }
    let mut per_node: BTreeMap<NodeId, usize> = BTreeMap::new();
    for id in out_sources.values() {
        *per_node.entry(*id).or_default() += 1;
    }
    if per_node.values().any(|c| *c > 1) {
        log::debug!("a node carries several sources after merging");
    }
    for (id, label) in &nodes {
        if matches!(label, Some(NodeKind::Constant(_))) && edges.iter().any(|e| e.source == *id) {
            return Err(AlgebraError::ConstantWithEdge(*id));
        }
    }
    SGraph::new(nodes, edges, root, out_sources)
}

/// `app_x(head, arg)`: arg's root fills head's `x` source.
pub fn apply(head: &SGraph, arg: &SGraph, x: &SourceName) -> Result<SGraph, AlgebraError> {
    let hx = head
        .source(x)
        .ok_or_else(|| AlgebraError::MissingSource(x.clone()))?;
    let mut sources: Vec<(SourceName, Side, NodeId)> = head
        .sources
        .iter()
        .filter(|(k, _)| *k != x)
        .map(|(k, v)| (k.clone(), Side::Head, *v))
        .collect();
    sources.extend(
        arg.sources
            .iter()
            .map(|(k, v)| (k.clone(), Side::Other, *v)),
    );
    glue(head, arg, &[(hx, arg.root)], sources)
}

/// `mod_x(head, modifier)`: the modifier's `x` source is identified with
/// the head's root. The modifier's root is forgotten, and its remaining
/// sources must already be sources of the head.
pub fn modify(head: &SGraph, modifier: &SGraph, x: &SourceName) -> Result<SGraph, AlgebraError> {
    let mx = modifier
        .source(x)
        .ok_or_else(|| AlgebraError::MissingSource(x.clone()))?;
    for name in modifier.sources.keys() {
        if name != x && !head.sources.contains_key(name) {
            return Err(AlgebraError::ModifierSourceNotInHead(name.clone()));
        }
    }
    let mut sources: Vec<(SourceName, Side, NodeId)> = head
        .sources
        .iter()
        .map(|(k, v)| (k.clone(), Side::Head, *v))
        .collect();
    sources.extend(
        modifier
            .sources
            .iter()
            .filter(|(k, _)| *k != x)
            .map(|(k, v)| (k.clone(), Side::Other, *v)),
    );
    glue(head, modifier, &[(head.root, mx)], sources)
}

// ---------------------------------------------------------------------------
// dependency trees

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Operation {
    App(SourceName),
    Mod(SourceName),
}

impl Operation {
    pub fn source(&self) -> &SourceName {
        match self {
            Operation::App(s) | Operation::Mod(s) => s,
        }
    }

    pub fn is_app(&self) -> bool {
        matches!(self, Operation::App(_))
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::App(s) => write!(f, "APP_{s}"),
            Operation::Mod(s) => write!(f, "MOD_{s}"),
        }
    }
}

impl std::str::FromStr for Operation {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(src) = s.strip_prefix("APP_") {
            Ok(Operation::App(SourceName::new(src)?))
        } else if let Some(src) = s.strip_prefix("MOD_") {
            Ok(Operation::Mod(SourceName::new(src)?))
        } else {
            Err(AlgebraError::MalformedTree(format!(
                "unknown operation `{s}`"
            )))
        }
    }
}

impl Serialize for Operation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Operation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AmEdge {
    pub head: usize,
    pub dependent: usize,
    pub op: Operation,
}

/// Tokens with per-token graph constants and APP/MOD edges between them.
/// Tokens without a constant take no part in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmDependencyTree {
    pub tokens: Vec<String>,
    pub constants: BTreeMap<usize, SGraph>,
    pub edges: Vec<AmEdge>,
}

impl AmDependencyTree {
    /// The token with a constant and no incoming edge.
    pub fn root(&self) -> Result<usize, AlgebraError> {
        self.check()
    }

    fn check(&self) -> Result<usize, AlgebraError> {
        let bad = |m: String| Err(AlgebraError::MalformedTree(m));
        let mut has_head = BTreeSet::new();
        for e in &self.edges {
            for t in [e.head, e.dependent] {
                if !self.constants.contains_key(&t) {
                    return bad(format!("token {t} has an edge but no constant"));
                }
            }
            if !has_head.insert(e.dependent) {
                return bad(format!("token {} has two heads", e.dependent));
            }
        }
        let roots: Vec<usize> = self
            .constants
            .keys()
            .copied()
            .filter(|t| !has_head.contains(t))
            .collect();
        if roots.len() != 1 {
            return bad(format!("expected one root, found {}", roots.len()));
        }
        // every constant must hang below the root
        let mut seen = BTreeSet::from([roots[0]]);
        let mut stack = vec![roots[0]];
        while let Some(t) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.head == t) {
                if seen.insert(e.dependent) {
                    stack.push(e.dependent);
                }
            }
        }
        if seen.len() != self.constants.len() {
            return bad("edges contain a cycle".to_string());
        }
        Ok(roots[0])
    }

    /// Evaluates the tree bottom-up. Children are combined in the order
    /// their edges are listed. When that order fails, here or further up
    /// the tree, other sibling orders are tried before giving up.
    pub fn evaluate(&self) -> Result<SGraph, AlgebraError> {
        let root = self.check()?;
        let mut budget = EVAL_BUDGET;
        let candidates = self.eval_at(root, &mut budget)?;
        let complete = |g: &SGraph| g.sources.is_empty() && g.nodes.values().all(Option::is_some);
        if let Some(g) = candidates.iter().find(|g| complete(g)) {
            return Ok(g.clone());
        }
        if let Some(g) = candidates.iter().find(|g| g.sources.is_empty()) {
            return Ok(g.clone());
        }
        let g = &candidates[0];
        Err(AlgebraError::OpenSources(
            g.sources.keys().cloned().collect(),
        ))
    }

    /// Evaluates and converts to a DRG.
    pub fn evaluate_to_drg(&self) -> Result<Drg, AlgebraError> {
        self.evaluate()?.to_drg()
    }

    /// Distinct values the subtree at `t` can take, preferred order first.
    fn eval_at(&self, t: usize, budget: &mut usize) -> Result<Vec<SGraph>, AlgebraError> {
        let children: Vec<&AmEdge> = self.edges.iter().filter(|e| e.head == t).collect();
        let mut graphs = Vec::with_capacity(children.len());
        for c in &children {
            graphs.push(self.eval_at(c.dependent, budget)?);
        }
        let mut search = Combine {
            children: &children,
            graphs: &graphs,
            used: vec![false; children.len()],
            first_error: None,
            budget,
            results: Vec::new(),
        };
        search.run(&self.constants[&t]);
        if search.results.is_empty() {
            return Err(search.first_error.unwrap_or_else(|| {
                AlgebraError::MalformedTree("evaluation budget exhausted".into())
            }));
        }
        Ok(search.results)
    }

    pub fn to_record(&self) -> Result<AmTreeRecord, AlgebraError> {
        let mut constants = BTreeMap::new();
        for (t, g) in &self.constants {
            constants.insert(*t, g.to_penman()?);
        }
        Ok(AmTreeRecord {
            tokens: self.tokens.clone(),
            constants,
            edges: self.edges.clone(),
        })
    }

    pub fn from_record(r: &AmTreeRecord) -> Result<Self, AlgebraError> {
        let mut constants = BTreeMap::new();
        for (t, text) in &r.constants {
            if *t >= r.tokens.len() {
                return Err(AlgebraError::MalformedTree(format!(
                    "constant for missing token {t}"
                )));
            }
            constants.insert(*t, SGraph::parse(text)?);
        }
        Ok(AmDependencyTree {
            tokens: r.tokens.clone(),
            constants,
            edges: r.edges.clone(),
        })
    }
}

/// Step limit for sibling-order search during evaluation.
const EVAL_BUDGET: usize = 200_000;
/// Alternative values kept per subtree.
const MAX_ALTERNATIVES: usize = 8;

struct Combine<'a> {
    children: &'a [&'a AmEdge],
    graphs: &'a [Vec<SGraph>],
    used: Vec<bool>,
    first_error: Option<AlgebraError>,
    budget: &'a mut usize,
    results: Vec<SGraph>,
}

impl Combine<'_> {
    fn run(&mut self, acc: &SGraph) {
        if self.used.iter().all(|u| *u) {
            if !self.results.contains(acc) {
                self.results.push(acc.clone());
            }
            return;
        }
        for i in 0..self.children.len() {
            if self.used[i] {
                continue;
            }
            let e = self.children[i];
            for g in &self.graphs[i] {
                if *self.budget == 0 || self.results.len() >= MAX_ALTERNATIVES {
                    return;
                }
                *self.budget -= 1;
                let step = match &e.op {
                    Operation::App(x) => apply(acc, g, x),
                    Operation::Mod(x) => modify(acc, g, x),
                };
                match step {
                    Ok(next) => {
                        self.used[i] = true;
                        self.run(&next);
                        self.used[i] = false;
                    }
                    Err(err) => {
                        if self.first_error.is_none() {
                            self.first_error = Some(AlgebraError::EvaluationFailure {
                                head: e.head,
                                dependent: e.dependent,
                                error: Box::new(err),
                            });
                        }
                    }
                }
            }
        }
    }
}

/// One line of an AM tree file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmTreeRecord {
    pub tokens: Vec<String>,
    pub constants: BTreeMap<usize, String>,
    pub edges: Vec<AmEdge>,
}

/// Reads AM trees, one JSON object per line.
pub fn read_am_trees(text: &str) -> Result<Vec<AmDependencyTree>, AlgebraError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| AlgebraError::Format {
            line: i + 1,
            message,
        };
        let rec: AmTreeRecord = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        out.push(AmDependencyTree::from_record(&rec).map_err(|e| fail(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_am_trees(trees: &[AmDependencyTree]) -> Result<String, AlgebraError> {
    let mut out = String::new();
    for t in trees {
        let rec = t.to_record()?;
        out.push_str(&serde_json::to_string(&rec).expect("records serialise"));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(s: &str) -> SourceName {
        SourceName::new(s).unwrap()
    }

    #[test]
    fn root_is_reserved() {
        assert!(SourceName::new("root").is_err());
        assert!(SourceName::new("").is_err());
        assert!(SourceName::new("m1").is_ok());
    }

    #[test]
    fn parse_and_print_with_sources() {
        let g = SGraph::parse("(s0<root> / sleep.v.01 :Agent (s1<s>))").unwrap();
        assert_eq!(g.root(), NodeId::synset(0));
        assert_eq!(g.source(&src("s")), Some(NodeId::synset(1)));
        assert!(g.is_placeholder(NodeId::synset(1)));
        let text = g.to_penman().unwrap();
        assert_eq!(SGraph::parse(&text).unwrap(), g);
    }

    #[test]
    fn apply_fills_a_source() {
        let head = SGraph::parse("(s0<root> / sleep.v.01 :Agent (s1<s>))").unwrap();
        let arg = SGraph::parse("(s1<root> / cat.n.01)").unwrap();
        let g = apply(&head, &arg, &src("s")).unwrap();
        assert!(g.sources().is_empty());
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(
            g.nodes()[&NodeId::synset(1)],
            Some(NodeKind::synset("cat", crate::drg::Pos::Noun, "01"))
        );
    }

    #[test]
    fn apply_renames_colliding_ids() {
        let head = SGraph::parse("(s0<root> / sleep.v.01 :Agent (s1<s>))").unwrap();
        let arg = SGraph::parse("(s0<root> / cat.n.01 :Attribute (s1 / little.a.01))").unwrap();
        let g = apply(&head, &arg, &src("s")).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn missing_source() {
        let head = SGraph::parse("(s0<root> / sleep.v.01)").unwrap();
        let arg = SGraph::parse("(s1<root> / cat.n.01)").unwrap();
        assert_eq!(
            apply(&head, &arg, &src("o")),
            Err(AlgebraError::MissingSource(src("o")))
        );
        assert_eq!(
            modify(&head, &arg, &src("m")),
            Err(AlgebraError::MissingSource(src("m")))
        );
    }

    #[test]
    fn label_clash() {
        let head = SGraph::parse("(s0<root> / sleep.v.01 :Agent (s1<s> / dog.n.01))").unwrap();
        let arg = SGraph::parse("(s1<root> / cat.n.01)").unwrap();
        assert!(matches!(
            apply(&head, &arg, &src("s")),
            Err(AlgebraError::SourceClash { .. })
        ));
    }

    #[test]
    fn modifier_sources_must_be_in_head() {
        let head = SGraph::parse("(s0<root> / cat.n.01)").unwrap();
        let m =
            SGraph::parse("(s1<root> / little.a.01 :Attribute-of (s0<m>) :Theme (s2<o>))").unwrap();
        assert_eq!(
            modify(&head, &m, &src("m")),
            Err(AlgebraError::ModifierSourceNotInHead(src("o")))
        );
    }

    #[test]
    fn single_constant_tree() {
        let c = SGraph::parse("(b0<root> / box :member (s0 / cat.n.01))").unwrap();
        let t = AmDependencyTree {
            tokens: vec!["START".into(), "cat".into()],
            constants: BTreeMap::from([(1, c.clone())]),
            edges: vec![],
        };
        assert_eq!(t.evaluate().unwrap(), c);
        let text = write_am_trees(std::slice::from_ref(&t)).unwrap();
        assert_eq!(read_am_trees(&text).unwrap(), vec![t]);
    }

    #[test]
    fn malformed_trees() {
        let c = SGraph::parse("(s0<root> / cat.n.01)").unwrap();
        let t = AmDependencyTree {
            tokens: vec!["START".into(), "a".into(), "b".into()],
            constants: BTreeMap::from([(1, c.clone()), (2, c)]),
            edges: vec![],
        };
        assert!(matches!(t.evaluate(), Err(AlgebraError::MalformedTree(_))));
    }
}
