//! Discourse representation graphs.
//!
//! A [`Drg`] is a rooted DAG over three kinds of nodes: boxes, synset
//! predicates and constants. Role edges connect predicates to their
//! arguments, scope (`:member`) edges place a node inside a box, and
//! `ANA` edges mark coreference. Boxes are linked to each other by box
//! edges (any non-`ANA` edge whose endpoints are both boxes, usually a
//! discourse relation such as `NEGATION`); those edges form the box tree.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use petgraph::graph::DiGraph;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Namespace {
    Box,
    Synset,
    Constant,
}

impl Namespace {
    pub fn prefix(self) -> char {
        match self {
            Namespace::Box => 'b',
            Namespace::Synset => 's',
            Namespace::Constant => 'c',
        }
    }

    pub fn from_prefix(c: char) -> Option<Self> {
        match c {
            'b' => Some(Namespace::Box),
            's' => Some(Namespace::Synset),
            'c' => Some(Namespace::Constant),
            _ => None,
        }
    }
}

/// Node identifier such as `b0`, `s3` or `c1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub namespace: Namespace,
    pub index: u32,
}

impl NodeId {
    pub const fn new(namespace: Namespace, index: u32) -> Self {
        NodeId { namespace, index }
    }

    pub const fn boxed(index: u32) -> Self {
        NodeId::new(Namespace::Box, index)
    }

    pub const fn synset(index: u32) -> Self {
        NodeId::new(Namespace::Synset, index)
    }

    pub const fn constant(index: u32) -> Self {
        NodeId::new(Namespace::Constant, index)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.namespace.prefix(), self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid node id `{0}`")]
pub struct ParseNodeIdError(pub String);

impl FromStr for NodeId {
    type Err = ParseNodeIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let ns = chars
            .next()
            .and_then(Namespace::from_prefix)
            .ok_or_else(|| ParseNodeIdError(s.to_string()))?;
        let rest = chars.as_str();
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseNodeIdError(s.to_string()));
        }
        let index = rest.parse().map_err(|_| ParseNodeIdError(s.to_string()))?;
        Ok(NodeId::new(ns, index))
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// WordNet-style lexical category of a synset. `Pronoun` only exists
/// while coreference is folded into node labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Satellite,
    Pronoun,
}

impl Pos {
    pub fn as_char(self) -> char {
        match self {
            Pos::Noun => 'n',
            Pos::Verb => 'v',
            Pos::Adjective => 'a',
            Pos::Adverb => 'r',
            Pos::Satellite => 's',
            Pos::Pronoun => 'p',
        }
    }

    pub fn from_str_tag(s: &str) -> Option<Self> {
        match s {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            "a" => Some(Pos::Adjective),
            "r" => Some(Pos::Adverb),
            "s" => Some(Pos::Satellite),
            "p" => Some(Pos::Pronoun),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Synset {
    pub lemma: String,
    pub pos: Pos,
    pub sense: String,
}

impl Synset {
    pub fn new(lemma: impl Into<String>, pos: Pos, sense: impl Into<String>) -> Self {
        Synset {
            lemma: lemma.into(),
            pos,
            sense: sense.into(),
        }
    }
}

impl fmt::Display for Synset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.lemma, self.pos, self.sense)
    }
}

impl FromStr for Synset {
    type Err = String;

    /// Parses `lemma.pos.sense`; the lemma itself may contain dots.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, '.');
        let sense = parts.next().unwrap_or_default();
        let pos = parts
            .next()
            .ok_or_else(|| format!("`{s}` is not lemma.pos.sense"))?;
        let lemma = parts
            .next()
            .ok_or_else(|| format!("`{s}` is not lemma.pos.sense"))?;
        let pos =
            Pos::from_str_tag(pos).ok_or_else(|| format!("unknown category `{pos}` in `{s}`"))?;
        if lemma.is_empty() || sense.is_empty() {
            return Err(format!("`{s}` is not lemma.pos.sense"));
        }
        Ok(Synset::new(lemma, pos, sense))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Box,
    Synset(Synset),
    Constant(String),
}

impl NodeKind {
    pub fn synset(lemma: &str, pos: Pos, sense: &str) -> Self {
        NodeKind::Synset(Synset::new(lemma, pos, sense))
    }

    pub fn constant(value: impl Into<String>) -> Self {
        NodeKind::Constant(value.into())
    }

    pub fn as_synset(&self) -> Option<&Synset> {
        match self {
            NodeKind::Synset(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, NodeKind::Box)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, NodeKind::Constant(_))
    }

    pub fn namespace(&self) -> Namespace {
        match self {
            NodeKind::Box => Namespace::Box,
            NodeKind::Synset(_) => Namespace::Synset,
            NodeKind::Constant(_) => Namespace::Constant,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Box => write!(f, "box"),
            NodeKind::Synset(s) => write!(f, "{s}"),
            NodeKind::Constant(c) => write!(f, "\"{c}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Role(String),
    Scope,
    Ana,
}

impl EdgeLabel {
    pub fn role(name: &str) -> Self {
        EdgeLabel::Role(name.to_string())
    }

    /// Maps a Penman relation name (without the leading colon).
    pub fn from_relation(name: &str) -> Self {
        match name {
            "member" => EdgeLabel::Scope,
            "ANA" => EdgeLabel::Ana,
            other => EdgeLabel::Role(other.to_string()),
        }
    }

    pub fn relation(&self) -> &str {
        match self {
            EdgeLabel::Role(r) => r,
            EdgeLabel::Scope => "member",
            EdgeLabel::Ana => "ANA",
        }
    }

    pub fn is_scope(&self) -> bool {
        matches!(self, EdgeLabel::Scope)
    }

    pub fn is_role(&self) -> bool {
        matches!(self, EdgeLabel::Role(_))
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.relation())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DrgEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub label: EdgeLabel,
}

impl DrgEdge {
    pub fn new(source: NodeId, target: NodeId, label: EdgeLabel) -> Self {
        DrgEdge {
            source,
            target,
            label,
        }
    }

    pub fn scope(source: NodeId, target: NodeId) -> Self {
        DrgEdge::new(source, target, EdgeLabel::Scope)
    }

    pub fn role(source: NodeId, name: &str, target: NodeId) -> Self {
        DrgEdge::new(source, target, EdgeLabel::role(name))
    }
}

impl fmt::Display for DrgEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :{} {}", self.source, self.label, self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DrgError {
    #[error("node {0} is defined twice")]
    DuplicateNode(NodeId),
    #[error("edge `{0}` refers to a node that is not in the graph")]
    DanglingEdge(DrgEdge),
    #[error("node {0} has namespace `{1}` but kind `{2}`")]
    NamespaceMismatch(NodeId, char, String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// A discourse representation graph. Immutable once built; the
/// transformations in this crate return new graphs.
///
/// Edges are kept sorted so that structural equality is plain `==`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Drg {
    nodes: BTreeMap<NodeId, NodeKind>,
    edges: Vec<DrgEdge>,
}

impl Drg {
    pub fn new(
        nodes: impl IntoIterator<Item = (NodeId, NodeKind)>,
        edges: impl IntoIterator<Item = DrgEdge>,
    ) -> Result<Self, DrgError> {
        let mut map = BTreeMap::new();
        for (id, kind) in nodes {
            if id.namespace != kind.namespace() {
                return Err(DrgError::NamespaceMismatch(
                    id,
                    id.namespace.prefix(),
                    kind.to_string(),
                ));
            }
            if map.insert(id, kind).is_some() {
                return Err(DrgError::DuplicateNode(id));
            }
        }
        Drg::from_parts(map, edges.into_iter().collect())
    }

    pub fn from_parts(
        nodes: BTreeMap<NodeId, NodeKind>,
        mut edges: Vec<DrgEdge>,
    ) -> Result<Self, DrgError> {
        for e in &edges {
            if !nodes.contains_key(&e.source) || !nodes.contains_key(&e.target) {
                return Err(DrgError::DanglingEdge(e.clone()));
            }
        }
        edges.sort();
        Ok(Drg { nodes, edges })
    }

    /// Same nodes, different edge set.
    pub fn with_edges(&self, edges: Vec<DrgEdge>) -> Result<Self, DrgError> {
        Drg::from_parts(self.nodes.clone(), edges)
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeKind> {
        &self.nodes
    }

    pub fn edges(&self) -> &[DrgEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self, id: NodeId) -> Option<&NodeKind> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn is_box(&self, id: NodeId) -> bool {
        matches!(self.nodes.get(&id), Some(NodeKind::Box))
    }

    pub fn is_constant(&self, id: NodeId) -> bool {
        matches!(self.nodes.get(&id), Some(NodeKind::Constant(_)))
    }

    pub fn boxes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|(_, k)| k.is_box())
            .map(|(id, _)| *id)
    }

    pub fn box_count(&self) -> usize {
        self.boxes().count()
    }

    /// Edges linking two boxes; these make up the box hierarchy.
    pub fn is_box_edge(&self, e: &DrgEdge) -> bool {
        e.label != EdgeLabel::Ana && self.is_box(e.source) && self.is_box(e.target)
    }

    pub fn box_edges(&self) -> impl Iterator<Item = &DrgEdge> + '_ {
        self.edges.iter().filter(move |e| self.is_box_edge(e))
    }

    pub fn incoming(&self, id: NodeId) -> impl Iterator<Item = &DrgEdge> + '_ {
        self.edges.iter().filter(move |e| e.target == id)
    }

    pub fn outgoing(&self, id: NodeId) -> impl Iterator<Item = &DrgEdge> + '_ {
        self.edges.iter().filter(move |e| e.source == id)
    }

    /// Scope edges whose target is not a box (the membership relation).
    pub fn membership_edges(&self) -> impl Iterator<Item = &DrgEdge> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.label.is_scope() && !self.is_box(e.target))
    }

    /// The top box: the unique box without an incoming box edge.
    pub fn root(&self) -> Option<NodeId> {
        let roots = self.root_candidates();
        if roots.len() == 1 {
            Some(roots[0])
        } else {
            None
        }
    }

    fn root_candidates(&self) -> Vec<NodeId> {
        let with_parent: BTreeSet<NodeId> = self.box_edges().map(|e| e.target).collect();
        self.boxes().filter(|b| !with_parent.contains(b)).collect()
    }

    /// Parents via role edges (`ANA` and scope edges do not count).
    pub fn role_parents(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.incoming(id)
            .filter(|e| e.label.is_role())
            .map(|e| e.source)
    }

    /// Boxes that have a scope edge into `n`.
    pub fn scope_of(&self, n: NodeId) -> Result<BTreeSet<NodeId>, DrgError> {
        if !self.contains(n) {
            return Err(DrgError::UnknownNode(n));
        }
        Ok(self
            .incoming(n)
            .filter(|e| e.label.is_scope() && self.is_box(e.source))
            .map(|e| e.source)
            .collect())
    }

    /// Number of weakly connected components.
    pub fn component_count(&self) -> usize {
        component_count(self.nodes.keys().copied(), self.edges.iter())
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Box children of a box, in node-id order.
    pub fn box_children(&self, b: NodeId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self
            .box_edges()
            .filter(|e| e.source == b)
            .map(|e| e.target)
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

pub(crate) fn component_count<'a>(
    nodes: impl Iterator<Item = NodeId>,
    edges: impl Iterator<Item = &'a DrgEdge>,
) -> usize {
    let nodes: Vec<NodeId> = nodes.collect();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = nodes.len();
    for e in edges {
        let (Some(&a), Some(&b)) = (index.get(&e.source), index.get(&e.target)) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            comps -= 1;
        }
    }
    comps
}

/// Roles from the head/argument and head/modifier edge tables.
pub const APP_ROLES: &[&str] = &[
    "Agent",
    "Bearer",
    "Participant",
    "Creator",
    "Proposition",
    "Stimulus",
    "Beneficiary",
    "Co-Agent",
    "Co-Patient",
    "Co-Theme",
    "Experiencer",
    "Patient",
    "Pivot",
    "Product",
    "Recipient",
    "Theme",
    "Owner",
    "OF",
    "User",
    "Role",
    "NEQ",
    "APX",
    "EQU",
    "TPR",
];

pub const MOD_ROLES: &[&str] = &[
    "Consumer",
    "Topic",
    "Result",
    "Sub",
    "Source",
    "Destination",
    "Goal",
    "Product",
    "ALTERNATION",
    "ATTRIBUTION",
    "CONDITION",
    "CONSEQUENCE",
    "CONTINUATION",
    "CONTRAST",
    "EXPLANATION",
    "NECESSITY",
    "NEGATION",
    "POSSIBILITY",
    "PRECONDITION",
    "RESULT",
    "SOURCE",
];

/// Naming and comparison relations that are known but not in either table.
pub const EXTRA_ROLES: &[&str] = &[
    "Name", "Time", "LES", "LEQ", "TAB", "TIN", "SZP", "SZN", "SXP", "SXN", "STI", "STO", "SY1",
    "SY2", "SXY",
];

pub fn is_known_role(name: &str) -> bool {
    APP_ROLES.contains(&name) || MOD_ROLES.contains(&name) || EXTRA_ROLES.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every predicate sits in a box.
    Full,
    /// Scope edges may be missing (compact and scopeless graphs).
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("graph has no nodes")]
    Empty,
    #[error("no root box")]
    NoRoot,
    #[error("several boxes lack a parent box: {0:?}")]
    MultipleRoots(Vec<NodeId>),
    #[error("box {node} has several parent boxes: {parents:?}")]
    MultipleBoxParents { node: NodeId, parents: Vec<NodeId> },
    #[error("boxes not reachable from the root box (cycle): {0:?}")]
    BoxCycle(Vec<NodeId>),
    #[error("graph has {0} weakly connected components")]
    Disconnected(usize),
    #[error("scope edge `{0}` does not start at a box")]
    ScopeFromNonBox(DrgEdge),
    #[error("scope edge `{0}` points to a constant")]
    ScopeOnConstant(DrgEdge),
    #[error("constant has an outgoing edge `{0}`")]
    ConstantHasOutgoing(DrgEdge),
    #[error("ANA edge `{0}` does not link two identical synsets")]
    AnaMismatch(DrgEdge),
    #[error("node {0} is not in any box")]
    Unscoped(NodeId),
    #[error("node {0} is in more than one box")]
    MultipleScopes(NodeId),
    #[error("unknown role in `{0}`")]
    UnknownRole(DrgEdge),
    #[error("node {0} still carries the coreference category p")]
    PronounCategory(NodeId),
}

impl Violation {
    pub fn severity(&self) -> Severity {
        match self {
            Violation::UnknownRole(_) | Violation::PronounCategory(_) => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity() == Severity::Error
    }
}

/// Checks the well-formedness invariants. Warnings (unknown roles, a
/// leftover `p` category) are reported but do not make a graph ill-formed.
pub fn validate(g: &Drg, mode: Mode) -> Vec<Violation> {
    let mut out = Vec::new();
    if g.nodes.is_empty() {
        out.push(Violation::Empty);
        return out;
    }

    let roots = g.root_candidates();
    match roots.len() {
        0 => out.push(Violation::NoRoot),
        1 => {}
        _ => out.push(Violation::MultipleRoots(roots.clone())),
    }

    let mut parents: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for e in g.box_edges() {
        parents.entry(e.target).or_default().insert(e.source);
    }
    for (node, ps) in &parents {
        if ps.len() > 1 {
            out.push(Violation::MultipleBoxParents {
                node: *node,
                parents: ps.iter().copied().collect(),
            });
        }
    }
    // every box must hang below some root through box edges
    let mut seen: BTreeSet<NodeId> = roots.iter().copied().collect();
    let mut queue: VecDeque<NodeId> = roots.iter().copied().collect();
    while let Some(b) = queue.pop_front() {
        for c in g.box_children(b) {
            if seen.insert(c) {
                queue.push_back(c);
            }
        }
    }
    let unreachable: Vec<NodeId> = g.boxes().filter(|b| !seen.contains(b)).collect();
    if !unreachable.is_empty() {
        out.push(Violation::BoxCycle(unreachable));
    }

    let comps = g.component_count();
    if comps > 1 {
        out.push(Violation::Disconnected(comps));
    }

    for e in &g.edges {
        match &e.label {
            EdgeLabel::Scope => {
                if !g.is_box(e.source) {
                    out.push(Violation::ScopeFromNonBox(e.clone()));
                } else if g.is_constant(e.target) {
                    out.push(Violation::ScopeOnConstant(e.clone()));
                }
            }
            EdgeLabel::Ana => {
                let ok = match (g.kind(e.source), g.kind(e.target)) {
                    (Some(NodeKind::Synset(a)), Some(NodeKind::Synset(b))) => a == b,
                    _ => false,
                };
                if !ok {
                    out.push(Violation::AnaMismatch(e.clone()));
                }
            }
            EdgeLabel::Role(name) => {
                if !is_known_role(name) {
                    out.push(Violation::UnknownRole(e.clone()));
                }
            }
        }
        if g.is_constant(e.source) {
            out.push(Violation::ConstantHasOutgoing(e.clone()));
        }
    }

    for (id, kind) in &g.nodes {
        if let NodeKind::Synset(s) = kind {
            if s.pos == Pos::Pronoun {
                out.push(Violation::PronounCategory(*id));
            }
        }
        if mode == Mode::Full && !kind.is_box() && !kind.is_constant() {
            let scopes = g
                .incoming(*id)
                .filter(|e| e.label.is_scope() && g.is_box(e.source))
                .count();
            match scopes {
                0 => out.push(Violation::Unscoped(*id)),
                1 => {}
                _ => out.push(Violation::MultipleScopes(*id)),
            }
        }
    }
    out
}

/// True when `validate` reports no error-severity violation.
pub fn is_well_formed(g: &Drg, mode: Mode) -> bool {
    validate(g, mode).iter().all(|v| !v.is_error())
}

/// Hierarchical box numbers: the root box gets 1 and every box gets a
/// larger number than its parent (depth-first preorder). Siblings are
/// visited by aligned token index when `token_of` knows the box, then by
/// node id.
pub fn canonical_box_numbers(
    g: &Drg,
    token_of: Option<&BTreeMap<NodeId, usize>>,
) -> BTreeMap<NodeId, u32> {
    let key = |b: &NodeId| {
        (
            token_of
                .and_then(|a| a.get(b).copied())
                .unwrap_or(usize::MAX),
            *b,
        )
    };
    let mut numbers = BTreeMap::new();
    let mut next = 1u32;
    let mut roots = g.root_candidates();
    roots.sort_by_key(key);
    let mut stack: Vec<NodeId> = roots.into_iter().rev().collect();
    while let Some(b) = stack.pop() {
        if numbers.contains_key(&b) {
            continue;
        }
        numbers.insert(b, next);
        next += 1;
        let mut children = g.box_children(b);
        children.sort_by_key(key);
        for c in children.into_iter().rev() {
            if !numbers.contains_key(&c) {
                stack.push(c);
            }
        }
    }
    for b in g.boxes() {
        numbers.entry(b).or_insert_with(|| {
            next += 1;
            next - 1
        });
    }
    numbers
}

/// Renames the boxes of `g` to their canonical numbers (`b1` is the root).
/// Other nodes keep their ids. Returns the graph and the old-to-new map.
pub fn canonical_box_numbering(
    g: &Drg,
    token_of: Option<&BTreeMap<NodeId, usize>>,
) -> (Drg, BTreeMap<NodeId, NodeId>) {
    let numbers = canonical_box_numbers(g, token_of);
    let rename: BTreeMap<NodeId, NodeId> = numbers
        .iter()
        .map(|(b, n)| (*b, NodeId::boxed(*n)))
        .collect();
    (rename_nodes(g, &rename), rename)
}

/// Applies a node renaming (ids missing from `rename` are kept).
pub fn rename_nodes(g: &Drg, rename: &BTreeMap<NodeId, NodeId>) -> Drg {
    let r = |id: NodeId| rename.get(&id).copied().unwrap_or(id);
    let nodes = g.nodes.iter().map(|(id, k)| (r(*id), k.clone())).collect();
    let edges = g
        .edges
        .iter()
        .map(|e| DrgEdge::new(r(e.source), r(e.target), e.label.clone()))
        .collect();
    Drg::from_parts(nodes, edges).expect("renaming keeps edges attached")
}

/// Label-preserving graph isomorphism (node kinds and edge labels must
/// match; node ids are ignored).
pub fn is_isomorphic(a: &Drg, b: &Drg) -> bool {
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let mut ka: Vec<&NodeKind> = a.nodes.values().collect();
    let mut kb: Vec<&NodeKind> = b.nodes.values().collect();
    ka.sort();
    kb.sort();
    if ka != kb {
        return false;
    }
    let ga = to_petgraph(a);
    let gb = to_petgraph(b);
    petgraph::algo::is_isomorphic_matching(&ga, &gb, |x, y| x == y, |x, y| x == y)
}

fn to_petgraph(g: &Drg) -> DiGraph<NodeKind, EdgeLabel> {
    let mut pg = DiGraph::new();
    let mut idx = BTreeMap::new();
    for (id, kind) in &g.nodes {
        idx.insert(*id, pg.add_node(kind.clone()));
    }
    for e in &g.edges {
        pg.add_edge(idx[&e.source], idx[&e.target], e.label.clone());
    }
    pg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Drg {
        Drg::new(
            [
                (NodeId::boxed(0), NodeKind::Box),
                (NodeId::synset(0), NodeKind::synset("cat", Pos::Noun, "01")),
            ],
            [DrgEdge::scope(NodeId::boxed(0), NodeId::synset(0))],
        )
        .unwrap()
    }

    #[test]
    fn node_id_round_trip() {
        for s in ["b0", "s12", "c3"] {
            assert_eq!(s.parse::<NodeId>().unwrap().to_string(), s);
        }
        assert!("x1".parse::<NodeId>().is_err());
        assert!("b".parse::<NodeId>().is_err());
        assert!("b1a".parse::<NodeId>().is_err());
    }

    #[test]
    fn synset_label_parsing() {
        let s: Synset = "time.n.08".parse().unwrap();
        assert_eq!(s, Synset::new("time", Pos::Noun, "08"));
        let dotted: Synset = "a.m..n.01".parse().unwrap();
        assert_eq!(dotted.lemma, "a.m.");
        assert!("box".parse::<Synset>().is_err());
        assert!("x.q.01".parse::<Synset>().is_err());
    }

    #[test]
    fn namespace_must_match_kind() {
        let err = Drg::new([(NodeId::synset(0), NodeKind::Box)], []).unwrap_err();
        assert!(matches!(err, DrgError::NamespaceMismatch(..)));
    }

    #[test]
    fn dangling_edge_rejected() {
        let err = Drg::new(
            [(NodeId::boxed(0), NodeKind::Box)],
            [DrgEdge::scope(NodeId::boxed(0), NodeId::synset(9))],
        )
        .unwrap_err();
        assert!(matches!(err, DrgError::DanglingEdge(_)));
    }

    #[test]
    fn tiny_graph_is_valid() {
        let g = tiny();
        assert!(validate(&g, Mode::Full).is_empty());
        assert_eq!(g.root(), Some(NodeId::boxed(0)));
    }

    #[test]
    fn two_parentless_boxes() {
        let g = Drg::new(
            [
                (NodeId::boxed(0), NodeKind::Box),
                (NodeId::boxed(1), NodeKind::Box),
                (NodeId::synset(0), NodeKind::synset("cat", Pos::Noun, "01")),
            ],
            [
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(0)),
                DrgEdge::scope(NodeId::boxed(1), NodeId::synset(0)),
            ],
        )
        .unwrap();
        let v = validate(&g, Mode::Simplified);
        assert_eq!(
            v,
            vec![Violation::MultipleRoots(vec![
                NodeId::boxed(0),
                NodeId::boxed(1)
            ])]
        );
        assert!(validate(&g, Mode::Full).contains(&Violation::MultipleScopes(NodeId::synset(0))));
    }

    #[test]
    fn unscoped_only_matters_in_full_mode() {
        let g = Drg::new(
            [
                (NodeId::boxed(0), NodeKind::Box),
                (NodeId::synset(0), NodeKind::synset("cat", Pos::Noun, "01")),
                (
                    NodeId::synset(1),
                    NodeKind::synset("sleep", Pos::Verb, "01"),
                ),
            ],
            [
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(1)),
                DrgEdge::role(NodeId::synset(1), "Agent", NodeId::synset(0)),
            ],
        )
        .unwrap();
        assert!(validate(&g, Mode::Simplified).is_empty());
        assert_eq!(
            validate(&g, Mode::Full),
            vec![Violation::Unscoped(NodeId::synset(0))]
        );
        assert_eq!(g.scope_of(NodeId::synset(0)).unwrap(), BTreeSet::new());
        assert!(matches!(
            g.scope_of(NodeId::synset(7)),
            Err(DrgError::UnknownNode(_))
        ));
    }

    #[test]
    fn structural_errors_are_reported() {
        let g = Drg::new(
            [
                (NodeId::boxed(0), NodeKind::Box),
                (NodeId::synset(0), NodeKind::synset("cat", Pos::Noun, "01")),
                (NodeId::synset(1), NodeKind::synset("dog", Pos::Noun, "01")),
                (NodeId::constant(0), NodeKind::constant("now")),
            ],
            [
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(0)),
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(1)),
                DrgEdge::scope(NodeId::synset(0), NodeId::synset(1)),
                DrgEdge::new(NodeId::synset(1), NodeId::synset(0), EdgeLabel::Ana),
                DrgEdge::role(NodeId::constant(0), "Name", NodeId::synset(0)),
                DrgEdge::role(NodeId::synset(0), "Colour", NodeId::constant(0)),
            ],
        )
        .unwrap();
        let v = validate(&g, Mode::Simplified);
        assert!(v.iter().any(|x| matches!(x, Violation::ScopeFromNonBox(_))));
        assert!(v.iter().any(|x| matches!(x, Violation::AnaMismatch(_))));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::ConstantHasOutgoing(_))));
        let unknown = v
            .iter()
            .find(|x| matches!(x, Violation::UnknownRole(_)))
            .unwrap();
        assert_eq!(unknown.severity(), Severity::Warning);
    }

    #[test]
    fn disconnected_and_cyclic_boxes() {
        let g = Drg::new(
            [
                (NodeId::boxed(0), NodeKind::Box),
                (NodeId::boxed(1), NodeKind::Box),
                (NodeId::boxed(2), NodeKind::Box),
                (NodeId::synset(0), NodeKind::synset("cat", Pos::Noun, "01")),
            ],
            [
                DrgEdge::role(NodeId::boxed(1), "NEGATION", NodeId::boxed(2)),
                DrgEdge::role(NodeId::boxed(2), "NEGATION", NodeId::boxed(1)),
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(0)),
            ],
        )
        .unwrap();
        let v = validate(&g, Mode::Full);
        assert!(v.contains(&Violation::BoxCycle(vec![
            NodeId::boxed(1),
            NodeId::boxed(2)
        ])));
        assert!(v.contains(&Violation::Disconnected(2)));
    }

    #[test]
    fn canonical_numbering_single_box() {
        let (g, map) = canonical_box_numbering(&tiny(), None);
        assert_eq!(g.root(), Some(NodeId::boxed(1)));
        assert_eq!(map[&NodeId::boxed(0)], NodeId::boxed(1));
        let (again, _) = canonical_box_numbering(&g, None);
        assert_eq!(again, g);
    }

    #[test]
    fn isomorphism_ignores_ids() {
        let a = tiny();
        let b = Drg::new(
            [
                (NodeId::boxed(4), NodeKind::Box),
                (NodeId::synset(7), NodeKind::synset("cat", Pos::Noun, "01")),
            ],
            [DrgEdge::scope(NodeId::boxed(4), NodeId::synset(7))],
        )
        .unwrap();
        assert!(is_isomorphic(&a, &b));
        let c = Drg::new(
            [
                (NodeId::boxed(4), NodeKind::Box),
                (NodeId::synset(7), NodeKind::synset("dog", Pos::Noun, "01")),
            ],
            [DrgEdge::scope(NodeId::boxed(4), NodeId::synset(7))],
        )
        .unwrap();
        assert!(!is_isomorphic(&a, &c));
    }
}
