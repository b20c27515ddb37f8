//! Penman reader and writer for DRGs.
//!
//! Two layouts are supported. The *lenient* one spells out synsets as
//! `(s0 / "synset" :lemma "person" :pos "n" :sense "01")` and gives
//! constants their own variables; the *strict* one writes a synset as a
//! single `person.n.01` concept and inlines constants as quoted attribute
//! values. The reader accepts both, quoted or bare.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::drg::{
    validate, Drg, DrgEdge, DrgError, EdgeLabel, Mode, Namespace, NodeId, NodeKind, Pos, Synset,
    Violation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    Lenient,
    #[default]
    Strict,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lenient" => Ok(Variant::Lenient),
            "strict" => Ok(Variant::Strict),
            other => Err(format!("unknown Penman variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PenmanError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: variable `{var}` is defined twice")]
    DuplicateVariable {
        var: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: variable `{var}` is never defined")]
    UndefinedVariable {
        var: String,
        line: usize,
        col: usize,
    },
    #[error("node {0} is not in any box")]
    NotFullyScoped(NodeId),
    #[error("graph is ill-formed: {0}")]
    IllFormed(String),
    #[error("graph has no root box")]
    NoRoot,
    #[error("graph is not connected")]
    Disconnected,
    #[error(transparent)]
    Graph(#[from] DrgError),
}

// ---------------------------------------------------------------------------
// lexing and tree parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Quoted(String),
    Atom(String),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Pos2 {
    pub line: usize,
    pub col: usize,
}

fn lex(text: &str, first_line: usize) -> Result<Vec<(Tok, Pos2)>, PenmanError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, first_line, 1usize);
    let syntax = |line, col, message: &str| PenmanError::Syntax {
        line,
        col,
        message: message.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let here = Pos2 { line, col };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '#' if col == 1 => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => out.push((Tok::Open, here)),
            ')' => out.push((Tok::Close, here)),
            '/' => out.push((Tok::Slash, here)),
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(syntax(here.line, here.col, "unterminated string")),
                        Some('"') => break,
                        Some('\\') if i + 1 < chars.len() => {
                            s.push(chars[i + 1]);
                            i += 2;
                            col += 2;
                        }
                        Some('\n') => return Err(syntax(here.line, here.col, "newline in string")),
                        Some(ch) => {
                            s.push(*ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push((Tok::Quoted(s), here));
            }
            _ => {
                let start = i;
                while i < chars.len() {
                    let ch = chars[i];
                    if ch.is_whitespace()
                        || matches!(ch, '(' | ')' | '"')
                        || (ch == '/' && i > start && c != ':')
                    {
                        break;
                    }
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                if let Some(role) = word.strip_prefix(':') {
                    if role.is_empty() {
                        return Err(syntax(here.line, here.col, "empty role name"));
                    }
                    out.push((Tok::Role(role.to_string()), here));
                } else {
                    out.push((Tok::Atom(word), here));
                }
                continue;
            }
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub(crate) enum Concept {
    Atom(String),
    Quoted(String),
}

#[derive(Debug, Clone)]
pub(crate) enum Value {
    Node(PNode),
    Atom(String, Pos2),
    Quoted(String),
}

/// One parenthesised node of a Penman tree.
#[derive(Debug, Clone)]
pub(crate) struct PNode {
    pub var: String,
    pub sources: Vec<String>,
    pub concept: Option<Concept>,
    pub relations: Vec<(String, Value)>,
    pub pos: Pos2,
}

struct TreeParser {
    toks: Vec<(Tok, Pos2)>,
    at: usize,
    eof: Pos2,
}

impl TreeParser {
    fn err(&self, message: impl Into<String>) -> PenmanError {
        let p = self.toks.get(self.at).map(|t| t.1).unwrap_or(self.eof);
        PenmanError::Syntax {
            line: p.line,
            col: p.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn node(&mut self) -> Result<PNode, PenmanError> {
        if self.peek() != Some(&Tok::Open) {
            return Err(self.err("expected `(`"));
        }
        self.at += 1;
        let (var, pos) = match self.toks.get(self.at) {
            Some((Tok::Atom(v), p)) => (v.clone(), *p),
            _ => return Err(self.err("expected a variable")),
        };
        self.at += 1;
        let (var, sources) = split_sources(&var).map_err(|m| PenmanError::Syntax {
            line: pos.line,
            col: pos.col,
            message: m,
        })?;
        let mut concept = None;
        if self.peek() == Some(&Tok::Slash) {
            self.at += 1;
            concept = match self.toks.get(self.at) {
                Some((Tok::Atom(a), _)) => Some(Concept::Atom(a.clone())),
                Some((Tok::Quoted(q), _)) => Some(Concept::Quoted(q.clone())),
                _ => return Err(self.err("expected a concept after `/`")),
            };
            self.at += 1;
        }
        let mut relations = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Close) => {
                    self.at += 1;
                    break;
                }
                Some(Tok::Role(r)) => {
                    let role = r.clone();
                    self.at += 1;
                    let value = match self.toks.get(self.at) {
                        Some((Tok::Open, _)) => Value::Node(self.node()?),
                        Some((Tok::Atom(a), p)) => {
                            let v = Value::Atom(a.clone(), *p);
                            self.at += 1;
                            v
                        }
                        Some((Tok::Quoted(q), _)) => {
                            let v = Value::Quoted(q.clone());
                            self.at += 1;
                            v
                        }
                        _ => return Err(self.err(format!("missing value for `:{role}`"))),
                    };
                    relations.push((role, value));
                }
                None => return Err(self.err("unbalanced parentheses")),
                Some(_) => return Err(self.err("expected a role or `)`")),
            }
        }
        Ok(PNode {
            var,
            sources,
            concept,
            relations,
            pos,
        })
    }
}

/// Splits `s0<root><m1>` into the variable and its source names.
fn split_sources(atom: &str) -> Result<(String, Vec<String>), String> {
    let Some(open) = atom.find('<') else {
        return Ok((atom.to_string(), Vec::new()));
    };
    let var = atom[..open].to_string();
    let mut rest = &atom[open..];
    let mut sources = Vec::new();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('<')
            .and_then(|r| r.find('>').map(|end| (&r[..end], &r[end + 1..])));
        let Some((name, tail)) = inner else {
            return Err(format!("malformed source annotation in `{atom}`"));
        };
        for part in name.split(',') {
            if part.is_empty() {
                return Err(format!("empty source name in `{atom}`"));
            }
            sources.push(part.to_string());
        }
        rest = tail;
    }
    if var.is_empty() {
        return Err(format!("missing variable in `{atom}`"));
    }
    Ok((var, sources))
}

/// Parses exactly one Penman tree.
pub(crate) fn parse_tree(text: &str, first_line: usize) -> Result<PNode, PenmanError> {
    let toks = lex(text, first_line)?;
    let eof = toks.last().map(|t| t.1).unwrap_or(Pos2 {
        line: first_line,
        col: 1,
    });
    let mut p = TreeParser { toks, at: 0, eof };
    let node = p.node()?;
    if p.at != p.toks.len() {
        return Err(p.err("unexpected text after the graph"));
    }
    Ok(node)
}

/// A blank-line separated chunk of a Penman file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub text: String,
    /// 1-based line of the first line of the block.
    pub line: usize,
}

/// Splits a file into graph blocks. Lines starting with `#` are metadata
/// and never start a block on their own.
pub fn split_blocks(text: &str) -> Vec<Block> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut has_graph = false;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if has_graph {
                out.push(Block {
                    text: std::mem::take(&mut current),
                    line: start,
                });
            }
            current.clear();
            has_graph = false;
            continue;
        }
        if current.is_empty() {
            start = i + 1;
        }
        if !line.trim_start().starts_with('#') {
            has_graph = true;
        }
        current.push_str(line);
        current.push('\n');
    }
    if has_graph {
        out.push(Block {
            text: current,
            line: start,
        });
    }
    out
}

// ---------------------------------------------------------------------------
// tree -> Drg

pub(crate) struct Builder {
    nodes: Vec<(String, NodeKind, Pos2)>,
    edges: Vec<(usize, String, Target)>,
    defined: BTreeMap<String, usize>,
}

enum Target {
    Node(usize),
    Var(String, Pos2),
}

impl Builder {
    pub(crate) fn concept_kind(node: &mut PNode) -> Result<NodeKind, PenmanError> {
        let syntax = |message: String| PenmanError::Syntax {
            line: node.pos.line,
            col: node.pos.col,
            message,
        };
        let concept = match &node.concept {
            Some(Concept::Atom(a)) => a.clone(),
            Some(Concept::Quoted(q)) => {
                if q != "box" && q != "synset" {
                    return Ok(NodeKind::Constant(q.clone()));
                }
                q.clone()
            }
            None => return Err(syntax(format!("node `{}` has no concept", node.var))),
        };
        match concept.as_str() {
            "box" => Ok(NodeKind::Box),
            "synset" => {
                let mut take = |name: &str| -> Result<String, PenmanError> {
                    let at = node
                        .relations
                        .iter()
                        .position(|(r, _)| r == name)
                        .ok_or_else(|| syntax(format!("synset `{}` lacks :{name}", node.var)))?;
                    match node.relations.remove(at).1 {
                        Value::Quoted(s) | Value::Atom(s, _) => Ok(s),
                        Value::Node(_) => Err(syntax(format!(":{name} must be a string"))),
                    }
                };
                let lemma = take("lemma")?;
                let pos = take("pos")?;
                let sense = take("sense")?;
                let pos = Pos::from_str_tag(&pos)
                    .ok_or_else(|| syntax(format!("unknown category `{pos}`")))?;
                Ok(NodeKind::Synset(Synset::new(lemma, pos, sense)))
            }
            other => other
                .parse::<Synset>()
                .map(NodeKind::Synset)
                .map_err(syntax),
        }
    }

    fn visit(&mut self, mut node: PNode) -> Result<usize, PenmanError> {
        let kind = Builder::concept_kind(&mut node)?;
        if self.defined.contains_key(&node.var) {
            return Err(PenmanError::DuplicateVariable {
                var: node.var,
                line: node.pos.line,
                col: node.pos.col,
            });
        }
        let me = self.nodes.len();
        self.defined.insert(node.var.clone(), me);
        self.nodes.push((node.var.clone(), kind, node.pos));
        for (role, value) in node.relations {
            let target = match value {
                Value::Node(child) => Target::Node(self.visit(child)?),
                Value::Atom(a, p) => Target::Var(a, p),
                Value::Quoted(q) => {
                    let c = self.nodes.len();
                    self.nodes
                        .push((String::new(), NodeKind::Constant(q), node.pos));
                    Target::Node(c)
                }
            };
            self.edges.push((me, role, target));
        }
        Ok(me)
    }

    fn finish(self) -> Result<Drg, PenmanError> {
        // explicit ids first, then fresh ids per namespace in document order
        let mut ids: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut used: BTreeSet<NodeId> = BTreeSet::new();
        for (i, (var, kind, _)) in self.nodes.iter().enumerate() {
            if let Ok(id) = var.parse::<NodeId>() {
                if id.namespace == kind.namespace() && used.insert(id) {
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
                let n = next.entry(kind.namespace()).or_insert(0);
                ids[i] = Some(NodeId::new(kind.namespace(), *n));
                *n += 1;
            }
        }
        let ids: Vec<NodeId> = ids.into_iter().map(Option::unwrap).collect();

        let mut edges = Vec::new();
        for (src, role, target) in self.edges {
            let tgt = match target {
                Target::Node(t) => t,
                Target::Var(v, p) => match self.defined.get(&v) {
                    Some(t) => *t,
                    None => {
                        if v.parse::<f64>().is_ok() {
                            // bare numbers are constants
                            return Err(PenmanError::Syntax {
                                line: p.line,
                                col: p.col,
                                message: format!("numeric value `{v}` must be quoted"),
                            });
                        }
                        return Err(PenmanError::UndefinedVariable {
                            var: v,
                            line: p.line,
                            col: p.col,
                        });
                    }
                },
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
        Ok(Drg::new(nodes, edges)?)
    }
}

/// Parses one graph in either layout.
pub fn parse_penman(text: &str) -> Result<Drg, PenmanError> {
    parse_penman_at(text, 1)
}

/// As [`parse_penman`], reporting line numbers relative to `first_line`.
pub fn parse_penman_at(text: &str, first_line: usize) -> Result<Drg, PenmanError> {
    let tree = parse_tree(text, first_line)?;
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        defined: BTreeMap::new(),
    };
    b.visit(tree)?;
    b.finish()
}

/// Parses every block of a file; errors are kept per block.
pub fn parse_documents(text: &str) -> Vec<Result<Drg, PenmanError>> {
    split_blocks(text)
        .into_iter()
        .map(|b| parse_penman_at(&b.text, b.line))
        .collect()
}

// ---------------------------------------------------------------------------
// Drg -> text

#[derive(Debug, Clone, Copy, Default)]
pub struct Writer {
    pub variant: Variant,
    /// Rename nodes to `b`/`s`/`c` plus document-order indices.
    pub renumber: bool,
}

pub(crate) struct Layout {
    /// Edge indices that nest their other endpoint, keyed by the node they
    /// are printed under; `true` marks an inverted (`-of`) edge.
    pub children: BTreeMap<NodeId, Vec<(usize, bool)>>,
    pub tree_edges: BTreeSet<usize>,
}

/// Spanning tree used for printing: a directed depth-first search from the
/// root, then inverted edges for whatever it did not reach.
pub(crate) fn layout(
    edges: &[DrgEdge],
    node_count: usize,
    root: NodeId,
) -> Result<Layout, PenmanError> {
    let mut out_idx: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    let mut in_idx: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        out_idx.entry(e.source).or_default().push(i);
        in_idx.entry(e.target).or_default().push(i);
    }
    let order_key = |i: &usize, inverse: bool| {
        let e = &edges[*i];
        let other = if inverse { e.source } else { e.target };
        (other, e.label.clone(), inverse)
    };
    for v in out_idx.values_mut() {
        v.sort_by_key(|i| order_key(i, false));
    }
    for v in in_idx.values_mut() {
        v.sort_by_key(|i| order_key(i, true));
    }

    let mut visited: BTreeSet<NodeId> = BTreeSet::new();
    let mut order: Vec<NodeId> = Vec::new();
    let mut tree: Vec<(NodeId, usize, bool)> = Vec::new();

    fn dfs(
        n: NodeId,
        edges: &[DrgEdge],
        out_idx: &BTreeMap<NodeId, Vec<usize>>,
        visited: &mut BTreeSet<NodeId>,
        order: &mut Vec<NodeId>,
        tree: &mut Vec<(NodeId, usize, bool)>,
    ) {
        for &i in out_idx.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            let t = edges[i].target;
            if visited.insert(t) {
                order.push(t);
                tree.push((n, i, false));
                dfs(t, edges, out_idx, visited, order, tree);
            }
        }
    }

    visited.insert(root);
    order.push(root);
    dfs(root, edges, &out_idx, &mut visited, &mut order, &mut tree);
    while visited.len() < node_count {
        let mut attached = None;
        'scan: for &n in &order {
            for &i in in_idx.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
                if !visited.contains(&edges[i].source) {
                    attached = Some((n, i));
                    break 'scan;
                }
            }
        }
        let Some((n, i)) = attached else {
            return Err(PenmanError::Disconnected);
        };
        let s = edges[i].source;
        visited.insert(s);
        order.push(s);
        tree.push((n, i, true));
        dfs(s, edges, &out_idx, &mut visited, &mut order, &mut tree);
    }

    let tree_edges: BTreeSet<usize> = tree.iter().map(|t| t.1).collect();
    let inverse_tree: BTreeSet<usize> = tree.iter().filter(|t| t.2).map(|t| t.1).collect();
    let mut children: BTreeMap<NodeId, Vec<(usize, bool)>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        if inverse_tree.contains(&i) {
            children.entry(e.target).or_default().push((i, true));
        } else {
            children.entry(e.source).or_default().push((i, false));
        }
    }
    for v in children.values_mut() {
        v.sort_by_key(|(i, inv)| order_key(i, *inv));
    }
    Ok(Layout {
        children,
        tree_edges,
    })
}

pub(crate) fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

impl Writer {
    pub fn new(variant: Variant) -> Self {
        Writer {
            variant,
            renumber: false,
        }
    }

    /// Serialises any connected graph with a root box (simplified graphs
    /// included).
    pub fn write(&self, g: &Drg) -> Result<String, PenmanError> {
        let root = g.root().ok_or(PenmanError::NoRoot)?;
        if self.renumber {
            let order = self.document_order(g, root)?;
            let mut next: BTreeMap<Namespace, u32> = BTreeMap::new();
            let rename: BTreeMap<NodeId, NodeId> = order
                .into_iter()
                .map(|n| {
                    let k = next.entry(n.namespace).or_insert(0);
                    *k += 1;
                    (n, NodeId::new(n.namespace, *k - 1))
                })
                .collect();
            let renamed = crate::drg::rename_nodes(g, &rename);
            return Writer::new(self.variant).write(&renamed);
        }
        let lay = layout(g.edges(), g.node_count(), root)?;
        let mut out = String::new();
        self.write_node(g, &lay, root, 0, &mut out);
        Ok(out)
    }

    fn document_order(&self, g: &Drg, root: NodeId) -> Result<Vec<NodeId>, PenmanError> {
        let text = Writer::new(Variant::Lenient).write(g)?;
        let tree = parse_tree(&text, 1)?;
        let mut order = Vec::new();
        fn walk(n: &PNode, order: &mut Vec<NodeId>) {
            if let Ok(id) = n.var.parse() {
                order.push(id);
            }
            for (_, v) in &n.relations {
                if let Value::Node(c) = v {
                    walk(c, order);
                }
            }
        }
        walk(&tree, &mut order);
        debug_assert_eq!(order.first(), Some(&root));
        Ok(order)
    }

    fn inline_constant(g: &Drg, n: NodeId) -> bool {
        g.is_constant(n) && g.incoming(n).count() == 1
    }

    fn write_node(&self, g: &Drg, lay: &Layout, n: NodeId, depth: usize, out: &mut String) {
        let kind = g.kind(n).expect("layout only visits graph nodes");
        let concept = match (self.variant, kind) {
            (Variant::Strict, NodeKind::Box) => "box".to_string(),
            (Variant::Lenient, NodeKind::Box) => quote("box"),
            (Variant::Strict, NodeKind::Synset(s)) => s.to_string(),
            (Variant::Lenient, NodeKind::Synset(_)) => quote("synset"),
            (_, NodeKind::Constant(c)) => quote(c),
        };
        let _ = write!(out, "({n} / {concept}");
        let indent = "  ".repeat(depth + 1);
        if let (Variant::Lenient, NodeKind::Synset(s)) = (self.variant, kind) {
            let _ = write!(out, "\n{indent}:lemma {}", quote(&s.lemma));
            let _ = write!(out, "\n{indent}:pos {}", quote(&s.pos.to_string()));
            let _ = write!(out, "\n{indent}:sense {}", quote(&s.sense));
        }
        for &(i, inverse) in lay.children.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            let e = &g.edges()[i];
            let (other, role) = if inverse {
                (e.source, format!("{}-of", e.label.relation()))
            } else {
                (e.target, e.label.relation().to_string())
            };
            let _ = write!(out, "\n{indent}:{role} ");
            if lay.tree_edges.contains(&i) {
                if self.variant == Variant::Strict && !inverse && Writer::inline_constant(g, other)
                {
                    if let Some(NodeKind::Constant(c)) = g.kind(other) {
                        out.push_str(&quote(c));
                    }
                } else {
                    self.write_node(g, lay, other, depth + 1, out);
                }
            } else {
                let _ = write!(out, "{other}");
            }
        }
        out.push(')');
    }
}

/// Strict serialisation of a fully scoped graph.
pub fn serialize_strict(g: &Drg) -> Result<String, PenmanError> {
    check_full(g)?;
    Writer::new(Variant::Strict).write(g)
}

/// Lenient serialisation of a fully scoped graph.
pub fn serialize_lenient(g: &Drg) -> Result<String, PenmanError> {
    check_full(g)?;
    Writer::new(Variant::Lenient).write(g)
}

fn check_full(g: &Drg) -> Result<(), PenmanError> {
    let errors: Vec<Violation> = validate(g, Mode::Full)
        .into_iter()
        .filter(Violation::is_error)
        .collect();
    if let Some(Violation::Unscoped(n)) =
        errors.iter().find(|v| matches!(v, Violation::Unscoped(_)))
    {
        return Err(PenmanError::NotFullyScoped(*n));
    }
    if let Some(v) = errors.first() {
        return Err(PenmanError::IllFormed(v.to_string()));
    }
    Ok(())
}

/// Re-reads a lenient graph and writes it in strict layout.
pub fn lenient_to_strict(text: &str) -> Result<String, PenmanError> {
    serialize_strict(&parse_penman(text)?)
}

/// Token stream of a Penman text joined by single spaces; two documents
/// with the same normal form differ only in layout.
pub fn normalize_whitespace(text: &str) -> Result<String, PenmanError> {
    let toks = lex(text, 1)?;
    let parts: Vec<String> = toks
        .into_iter()
        .map(|(t, _)| match t {
            Tok::Open => "(".to_string(),
            Tok::Close => ")".to_string(),
            Tok::Slash => "/".to_string(),
            Tok::Role(r) => format!(":{r}"),
            Tok::Quoted(q) => quote(&q),
            Tok::Atom(a) => a,
        })
        .collect();
    Ok(parts.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_box() {
        let g = parse_penman("(b0 / box)").unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(serialize_strict(&g).unwrap(), "(b0 / box)");
        assert_eq!(
            Writer::new(Variant::Lenient).write(&g).unwrap(),
            "(b0 / \"box\")"
        );
    }

    #[test]
    fn quoted_and_bare_concepts() {
        let a = parse_penman("(b0 / \"box\")").unwrap();
        let b = parse_penman("(b0 / box)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn syntax_errors_have_positions() {
        let err = parse_penman("(b0 / box\n  :member (s0 / cat.n.01)").unwrap_err();
        assert!(
            matches!(err, PenmanError::Syntax { line: 2, .. }),
            "{err:?}"
        );
        let err = parse_penman("(b0 / box :member)").unwrap_err();
        assert!(
            matches!(
                err,
                PenmanError::Syntax {
                    line: 1,
                    col: 18,
                    ..
                }
            ),
            "{err:?}"
        );
        let err = parse_penman("(b0 / box) (b1 / box)").unwrap_err();
        assert!(matches!(err, PenmanError::Syntax { .. }));
    }

    #[test]
    fn duplicate_and_undefined_variables() {
        let err =
            parse_penman("(b0 / box :member (s0 / cat.n.01) :member (s0 / dog.n.01))").unwrap_err();
        assert!(matches!(err, PenmanError::DuplicateVariable { ref var, .. } if var == "s0"));
        let err = parse_penman("(b0 / box :member (s0 / cat.n.01 :Agent s9))").unwrap_err();
        assert!(
            matches!(err, PenmanError::UndefinedVariable { ref var, line: 1, .. } if var == "s9")
        );
    }

    #[test]
    fn inverse_roles() {
        let g =
            parse_penman("(b0 / box :member (s0 / time.n.08 :Time-of (s1 / sleep.v.01)))").unwrap();
        assert!(g
            .edges()
            .contains(&DrgEdge::role(NodeId::synset(1), "Time", NodeId::synset(0))));
    }

    #[test]
    fn unreachable_nodes_are_written_with_inverse_roles() {
        let g =
            parse_penman("(b0 / box :member (s0 / time.n.08 :Time-of (s1 / sleep.v.01)))").unwrap();
        let text = Writer::new(Variant::Strict).write(&g).unwrap();
        assert!(text.contains(":Time-of (s1 / sleep.v.01)"), "{text}");
        assert_eq!(parse_penman(&text).unwrap(), g);
        assert!(matches!(
            serialize_strict(&g),
            Err(PenmanError::NotFullyScoped(_))
        ));
    }

    #[test]
    fn shared_constants_keep_a_variable() {
        let g = Drg::new(
            [
                (NodeId::boxed(0), NodeKind::Box),
                (NodeId::synset(0), NodeKind::synset("time", Pos::Noun, "08")),
                (NodeId::synset(1), NodeKind::synset("time", Pos::Noun, "08")),
                (NodeId::constant(0), NodeKind::constant("now")),
            ],
            [
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(0)),
                DrgEdge::scope(NodeId::boxed(0), NodeId::synset(1)),
                DrgEdge::role(NodeId::synset(0), "EQU", NodeId::constant(0)),
                DrgEdge::role(NodeId::synset(1), "EQU", NodeId::constant(0)),
            ],
        )
        .unwrap();
        let text = serialize_strict(&g).unwrap();
        assert!(text.contains("(c0 / \"now\")"), "{text}");
        assert_eq!(parse_penman(&text).unwrap(), g);
    }

    #[test]
    fn escaped_strings() {
        let g = parse_penman(r#"(b0 / box :member (s0 / person.n.01 :Name "a \"b\" c"))"#).unwrap();
        let text = serialize_strict(&g).unwrap();
        assert!(text.contains(r#":Name "a \"b\" c""#));
        assert_eq!(parse_penman(&text).unwrap(), g);
    }

    #[test]
    fn blocks_and_metadata() {
        let text = "# ::id 1\n(b0 / box)\n\n\n# ::id 2\n(b0 / box\n  :member (s0 / cat.n.01))\n";
        let blocks = split_blocks(text);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[1].line, 5);
        let parsed = parse_documents(text);
        assert!(parsed.iter().all(Result::is_ok));
        assert!(split_blocks("").is_empty());
    }

    #[test]
    fn source_annotations() {
        let t = parse_tree("(s0<root> / cat.n.01 :member-of (u<m1,m2>))", 1).unwrap();
        assert_eq!(t.sources, vec!["root"]);
        let Value::Node(child) = &t.relations[0].1 else {
            panic!()
        };
        assert_eq!(child.var, "u");
        assert_eq!(child.sources, vec!["m1", "m2"]);
        assert!(child.concept.is_none());
    }

    #[test]
    fn renumbering_uses_document_order() {
        let g = parse_penman(
            "(b3 / box :member (s7 / cat.n.01 :Name \"Tom\") :member (s2 / dog.n.01))",
        )
        .unwrap();
        let w = Writer {
            variant: Variant::Strict,
            renumber: true,
        };
        let text = w.write(&g).unwrap();
        assert_eq!(
            normalize_whitespace(&text).unwrap(),
            "( b0 / box :member ( s0 / dog.n.01 ) :member ( s1 / cat.n.01 :Name \"Tom\" ) )"
        );
    }
}
