//! Scope dependency graphs and scope resolution.
//!
//! Projection turns the membership edges of a fully scoped DRG into edges
//! between tokens: if a node of token `t` sits in a box of token `h`, the
//! graph gets an edge `h -> t` whose label names the box by its canonical
//! number. When several nodes of `t` are scoped by boxes of `h`, the label
//! lists one box per node, top-down (`scope_b3_b2`).
//!
//! Resolution goes the other way, adding membership edges to a simplified
//! DRG either by inheriting the box of a parent or by reading a predicted
//! dependency graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::alignment::{Alignment, AlignmentError, START};
use crate::drg::{canonical_box_numbers, Drg, DrgEdge, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScopeLabel {
    Root,
    NoScope,
    /// One canonical box number per scoped node, top-down.
    Scope(Vec<u32>),
}

impl fmt::Display for ScopeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScopeLabel::Root => f.write_str("root"),
            ScopeLabel::NoScope => f.write_str("no_scope"),
            ScopeLabel::Scope(boxes) => {
                f.write_str("scope")?;
                for b in boxes {
                    write!(f, "_b{b}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ScopeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "root" => return Ok(ScopeLabel::Root),
            "no_scope" => return Ok(ScopeLabel::NoScope),
            _ => {}
        }
        let rest = s
            .strip_prefix("scope_")
            .ok_or_else(|| format!("unknown scope label `{s}`"))?;
        let boxes = rest
            .split('_')
            .map(|part| {
                part.strip_prefix('b')
                    .and_then(|n| n.parse::<u32>().ok())
                    .ok_or_else(|| format!("bad box reference `{part}` in `{s}`"))
            })
            .collect::<Result<Vec<u32>, String>>()?;
        Ok(ScopeLabel::Scope(boxes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScopeEdge {
    pub head: usize,
    pub dependent: usize,
    pub label: ScopeLabel,
}

/// Token-level scope graph. Token 0 is `START` and carries the root mark.
/// A token may have several heads, and the graph need not be connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeDepGraph {
    pub tokens: Vec<String>,
    edges: Vec<ScopeEdge>,
}

impl ScopeDepGraph {
    pub fn new(tokens: Vec<String>, edges: impl IntoIterator<Item = ScopeEdge>) -> Self {
        let mut edges: Vec<ScopeEdge> = edges.into_iter().collect();
        edges.sort_by(|a, b| (a.dependent, a.head, &a.label).cmp(&(b.dependent, b.head, &b.label)));
        edges.dedup();
        ScopeDepGraph { tokens, edges }
    }

    pub fn edges(&self) -> &[ScopeEdge] {
        &self.edges
    }

    /// Edges carrying box content (everything except `no_scope`).
    pub fn scope_edges(&self) -> impl Iterator<Item = &ScopeEdge> {
        self.edges
            .iter()
            .filter(|e| matches!(e.label, ScopeLabel::Scope(_)))
    }

    pub fn heads_of(&self, t: usize) -> impl Iterator<Item = &ScopeEdge> {
        self.edges.iter().filter(move |e| e.dependent == t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error(transparent)]
    MissingAlignment(#[from] AlignmentError),
    #[error("node {0} has no scoped ancestor")]
    Unresolvable(NodeId),
    #[error("token {head} has no box numbered b{number}")]
    BoxIndexOutOfRange { head: usize, number: u32 },
    #[error("graph has no root box")]
    NoRoot,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Non-fatal problems met while resolving with dependencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScopeIssue {
    /// The label named a box the head token does not have; edge skipped.
    BoxIndexOutOfRange {
        head: usize,
        dependent: usize,
        number: u32,
    },
    /// Label entries and nodes of the dependent differ in number.
    LengthMismatch {
        dependent: usize,
        entries: usize,
        nodes: usize,
    },
    /// The dependent has several heads; entries were used in head order.
    MultipleHeads { dependent: usize },
}

/// Content nodes (not boxes, not constants) owned by `t`, top-down: depth
/// along role edges inside the token's graph, then node id.
fn top_down(g: &Drg, owned: &BTreeSet<NodeId>) -> Vec<NodeId> {
    let content: BTreeSet<NodeId> = owned
        .iter()
        .copied()
        .filter(|n| !g.is_box(*n) && !g.is_constant(*n))
        .collect();
    let internal: Vec<&DrgEdge> = g
        .edges()
        .iter()
        .filter(|e| e.label.is_role() && content.contains(&e.source) && content.contains(&e.target))
        .collect();
    // longest-path depth; bounded passes guard against role cycles
    let mut depth: BTreeMap<NodeId, usize> = content.iter().map(|n| (*n, 0)).collect();
    for _ in 0..content.len() {
        let mut changed = false;
        for e in &internal {
            let d = depth[&e.source] + 1;
            if d > depth[&e.target] && d < content.len() {
                depth.insert(e.target, d);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut v: Vec<NodeId> = content.into_iter().collect();
    v.sort_by_key(|n| (depth[n], *n));
    v
}

struct Context {
    owner: BTreeMap<NodeId, usize>,
    numbers: BTreeMap<NodeId, u32>,
    by_token: BTreeMap<usize, BTreeSet<NodeId>>,
}

impl Context {
    fn new(g: &Drg, a: &Alignment) -> Result<Self, ScopeError> {
        let owner = a.owners(g)?;
        let box_tokens: BTreeMap<NodeId, usize> = owner
            .iter()
            .filter(|(n, _)| g.is_box(**n))
            .map(|(n, t)| (*n, *t))
            .collect();
        let numbers = canonical_box_numbers(g, Some(&box_tokens));
        let mut by_token: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
        for (n, t) in &owner {
            by_token.entry(*t).or_default().insert(*n);
        }
        Ok(Context {
            owner,
            numbers,
            by_token,
        })
    }

    fn owned(&self, t: usize) -> BTreeSet<NodeId> {
        self.by_token.get(&t).cloned().unwrap_or_default()
    }

    fn owns_box(&self, g: &Drg, t: usize) -> bool {
        self.owned(t).iter().any(|n| g.is_box(*n))
    }
}

/// Projects the membership edges of a fully scoped graph onto its tokens.
pub fn project(g: &Drg, a: &Alignment) -> Result<ScopeDepGraph, ScopeError> {
    let ctx = Context::new(g, a)?;
    let mut labels: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
    for (t, owned) in &ctx.by_token {
        for n in top_down(g, owned) {
            let mut boxes: Vec<NodeId> = g
                .incoming(n)
                .filter(|e| e.label.is_scope() && g.is_box(e.source))
                .map(|e| e.source)
                .collect();
            boxes.sort_by_key(|b| ctx.numbers[b]);
            for b in boxes {
                let h = ctx.owner[&b];
                if h != *t {
                    labels.entry((h, *t)).or_default().push(ctx.numbers[&b]);
                }
            }
        }
    }
    let mut edges: Vec<ScopeEdge> = labels
        .into_iter()
        .map(|((head, dependent), boxes)| ScopeEdge {
            head,
            dependent,
            label: ScopeLabel::Scope(boxes),
        })
        .collect();
    let has_head: BTreeSet<usize> = edges.iter().map(|e| e.dependent).collect();
    let edge_tokens: BTreeSet<usize> = a.edges.iter().map(|e| e.token).collect();
    for t in 1..a.tokens.len() {
        let content = ctx.by_token.contains_key(&t) || edge_tokens.contains(&t);
        if content && !has_head.contains(&t) && !ctx.owns_box(g, t) {
            edges.push(ScopeEdge {
                head: 0,
                dependent: t,
                label: ScopeLabel::NoScope,
            });
        }
    }
    Ok(ScopeDepGraph::new(a.tokens.clone(), edges))
}

fn add_scope(edges: &mut Vec<DrgEdge>, b: NodeId, n: NodeId) {
    let e = DrgEdge::scope(b, n);
    if !edges.contains(&e) {
        edges.push(e);
    }
}

/// Gives every unscoped content node the box of one of its role parents,
/// parents first. With several scoped parents the one whose box has the
/// smallest canonical number wins, then the smallest parent id.
pub fn resolve_rule_based(g: &Drg) -> Result<Drg, ScopeError> {
    g.root().ok_or(ScopeError::NoRoot)?;
    let numbers = canonical_box_numbers(g, None);
    let content: Vec<NodeId> = g
        .nodes()
        .iter()
        .filter(|(_, k)| !k.is_box() && !k.is_constant())
        .map(|(n, _)| *n)
        .collect();
    let mut scope: BTreeMap<NodeId, BTreeSet<NodeId>> = content
        .iter()
        .map(|n| (*n, g.scope_of(*n).expect("node exists")))
        .collect();
    let mut edges = g.edges().to_vec();
    let mut pending: Vec<NodeId> = content
        .iter()
        .copied()
        .filter(|n| scope[n].is_empty())
        .collect();
    // repeated passes settle parents before children without needing a
    // topological sort, and terminate on role cycles
    loop {
        let mut progress = false;
        let mut still = Vec::new();
        for n in pending {
            let best = g
                .role_parents(n)
                .filter(|p| !g.is_box(*p))
                .filter_map(|p| {
                    scope
                        .get(&p)
                        .and_then(|s| s.iter().min_by_key(|b| numbers[*b]).copied())
                        .map(|b| (numbers[&b], p, b))
                })
                .min();
            match best {
                Some((_, _, b)) => {
                    scope.insert(n, BTreeSet::from([b]));
                    add_scope(&mut edges, b, n);
                    progress = true;
                }
                None => still.push(n),
            }
        }
        if still.is_empty() {
            break;
        }
        if !progress {
            return Err(ScopeError::Unresolvable(still[0]));
        }
        pending = still;
    }
    Ok(g.with_edges(edges).expect("new edges join existing nodes"))
}

/// Resolution from a scope dependency graph, then inheritance for whatever
/// is left. Existing membership edges always win over the dependencies.
pub fn resolve_with_dependencies(
    g: &Drg,
    d: &ScopeDepGraph,
    a: &Alignment,
) -> Result<Drg, ScopeError> {
    resolve_with_dependencies_report(g, d, a).map(|(g, _)| g)
}

pub fn resolve_with_dependencies_report(
    g: &Drg,
    d: &ScopeDepGraph,
    a: &Alignment,
) -> Result<(Drg, Vec<ScopeIssue>), ScopeError> {
    let ctx = Context::new(g, a)?;
    let mut issues = Vec::new();
    let mut edges = g.edges().to_vec();
    let dependents: BTreeSet<usize> = d.scope_edges().map(|e| e.dependent).collect();
    for t in dependents {
        let owned = ctx.owned(t);
        let own_boxes: BTreeSet<NodeId> = owned.iter().copied().filter(|n| g.is_box(*n)).collect();
        let targets: Vec<NodeId> = top_down(g, &owned)
            .into_iter()
            .filter(|n| {
                g.scope_of(*n)
                    .map(|s| s.is_disjoint(&own_boxes))
                    .unwrap_or(false)
            })
            .collect();
        let heads: Vec<&ScopeEdge> = d.scope_edges().filter(|e| e.dependent == t).collect();
        if heads.len() > 1 {
            log::warn!(
                "token {t} has {} scope heads; using them in head order",
                heads.len()
            );
            issues.push(ScopeIssue::MultipleHeads { dependent: t });
        }
        let mut entries: Vec<(usize, u32)> = Vec::new();
        for e in &heads {
            if let ScopeLabel::Scope(boxes) = &e.label {
                entries.extend(boxes.iter().map(|b| (e.head, *b)));
            }
        }
        if entries.len() != targets.len() {
            log::warn!(
                "token {t}: {} label entries for {} nodes",
                entries.len(),
                targets.len()
            );
            issues.push(ScopeIssue::LengthMismatch {
                dependent: t,
                entries: entries.len(),
                nodes: targets.len(),
            });
        }
        for ((head, number), n) in entries.into_iter().zip(targets) {
            let found = ctx
                .owned(head)
                .into_iter()
                .find(|b| g.is_box(*b) && ctx.numbers.get(b) == Some(&number));
            let Some(b) = found else {
                log::warn!("token {head} has no box b{number}; edge to token {t} skipped");
                issues.push(ScopeIssue::BoxIndexOutOfRange {
                    head,
                    dependent: t,
                    number,
                });
                continue;
            };
            // rule 1: membership already in the graph takes precedence
            if g.scope_of(n).map(|s| s.is_empty()).unwrap_or(false) {
                add_scope(&mut edges, b, n);
            }
        }
    }
    let with_deps = g.with_edges(edges).expect("new edges join existing nodes");
    Ok((resolve_rule_based(&with_deps)?, issues))
}

// ---------------------------------------------------------------------------
// file format

/// Reads scope dependency files. Each sentence is a block of tab separated
/// lines `index token heads labels`; several heads and labels are joined
/// with `|`, and `_ _` means no incoming edge. Line 0 is `0 START _ root`.
/// Blocks are separated by blank lines; lines starting with `#` are
/// comments.
pub fn read_scope_file(text: &str) -> Result<Vec<ScopeDepGraph>, ScopeError> {
    let mut out = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut edges: Vec<ScopeEdge> = Vec::new();
    let flush =
        |tokens: &mut Vec<String>, edges: &mut Vec<ScopeEdge>, out: &mut Vec<ScopeDepGraph>| {
            if !tokens.is_empty() {
                out.push(ScopeDepGraph::new(
                    std::mem::take(tokens),
                    std::mem::take(edges),
                ));
            }
        };
    for (i, line) in text.lines().enumerate() {
        let fail = |message: String| ScopeError::Format {
            line: i + 1,
            message,
        };
        if line.trim().is_empty() {
            flush(&mut tokens, &mut edges, &mut out);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(fail(format!(
                "expected 4 tab separated columns, found {}",
                cols.len()
            )));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| fail(format!("bad index `{}`", cols[0])))?;
        if index != tokens.len() {
            return Err(fail(format!(
                "expected index {}, found {index}",
                tokens.len()
            )));
        }
        let token = cols[1].to_string();
        if index == 0 {
            if token != START || cols[2] != "_" || cols[3] != "root" {
                return Err(fail("first line must be `0 START _ root`".into()));
            }
            tokens.push(token);
            continue;
        }
        tokens.push(token);
        if cols[2] == "_" && cols[3] == "_" {
            continue;
        }
        let heads: Vec<&str> = cols[2].split('|').collect();
        let labels: Vec<&str> = cols[3].split('|').collect();
        if heads.len() != labels.len() {
            return Err(fail("heads and labels differ in number".into()));
        }
        for (h, l) in heads.into_iter().zip(labels) {
            let head: usize = h.parse().map_err(|_| fail(format!("bad head `{h}`")))?;
            let label: ScopeLabel = l.parse().map_err(fail)?;
            if label == ScopeLabel::Root {
                return Err(fail("only START carries `root`".into()));
            }
            edges.push(ScopeEdge {
                head,
                dependent: index,
                label,
            });
        }
    }
    flush(&mut tokens, &mut edges, &mut out);
    for (k, g) in out.iter().enumerate() {
        for e in g.edges() {
            if e.head >= g.tokens.len() {
                return Err(ScopeError::Format {
                    line: 0,
                    message: format!("sentence {}: head {} out of range", k + 1, e.head),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_scope_file(graphs: &[ScopeDepGraph]) -> String {
    let mut out = String::new();
    for (k, g) in graphs.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (i, tok) in g.tokens.iter().enumerate() {
            if i == 0 {
                out.push_str(&format!("0\t{tok}\t_\troot\n"));
                continue;
            }
            let heads: Vec<&ScopeEdge> = g.heads_of(i).collect();
            if heads.is_empty() {
                out.push_str(&format!("{i}\t{tok}\t_\t_\n"));
            } else {
                let h: Vec<String> = heads.iter().map(|e| e.head.to_string()).collect();
                let l: Vec<String> = heads.iter().map(|e| e.label.to_string()).collect();
                out.push_str(&format!("{i}\t{tok}\t{}\t{}\n", h.join("|"), l.join("|")));
            }
        }
    }
    out
}

/// Unlabeled and labeled edge F1 between two scope graphs over the same
/// tokens (graphs are not trees, so attachment is scored as edge overlap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachmentScores {
    pub unlabeled: f64,
    pub labeled: f64,
}

pub fn attachment_scores(gold: &[ScopeDepGraph], pred: &[ScopeDepGraph]) -> AttachmentScores {
    let (mut g_n, mut p_n, mut u, mut l) = (0usize, 0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(pred) {
        let gu: BTreeSet<(usize, usize)> =
            g.edges().iter().map(|e| (e.head, e.dependent)).collect();
        let pu: BTreeSet<(usize, usize)> =
            p.edges().iter().map(|e| (e.head, e.dependent)).collect();
        let gl: BTreeSet<&ScopeEdge> = g.edges().iter().collect();
        let pl: BTreeSet<&ScopeEdge> = p.edges().iter().collect();
        g_n += gl.len();
        p_n += pl.len();
        u += gu.intersection(&pu).count();
        l += gl.intersection(&pl).count();
    }
    let f1 = |hit: usize| {
        if g_n + p_n == 0 {
            1.0
        } else {
            2.0 * hit as f64 / (g_n + p_n) as f64
        }
    };
    AttachmentScores {
        unlabeled: f1(u),
        labeled: f1(l),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drg::{NodeKind, Pos};

    fn b(i: u32) -> NodeId {
        NodeId::boxed(i)
    }
    fn s(i: u32) -> NodeId {
        NodeId::synset(i)
    }

    #[test]
    fn label_text() {
        for text in ["root", "no_scope", "scope_b2", "scope_b3_b2"] {
            assert_eq!(text.parse::<ScopeLabel>().unwrap().to_string(), text);
        }
        assert!("scope_".parse::<ScopeLabel>().is_err());
        assert!("scope_x2".parse::<ScopeLabel>().is_err());
        assert!("bogus".parse::<ScopeLabel>().is_err());
    }

    fn single() -> (Drg, Alignment) {
        let g = Drg::new(
            [
                (b(0), NodeKind::Box),
                (s(0), NodeKind::synset("rain", Pos::Verb, "01")),
            ],
            [DrgEdge::scope(b(0), s(0))],
        )
        .unwrap();
        let a = Alignment::new(["rains"]).align(b(0), 0).align(s(0), 1);
        (g, a)
    }

    #[test]
    fn single_box_projects_to_b1() {
        let (g, a) = single();
        let d = project(&g, &a).unwrap();
        assert_eq!(
            d.edges(),
            &[ScopeEdge {
                head: 0,
                dependent: 1,
                label: ScopeLabel::Scope(vec![1])
            }]
        );
    }

    #[test]
    fn empty_dependencies_match_rule_based() {
        let (g, a) = single();
        let c = g.with_edges(vec![]).unwrap();
        // nothing to inherit from: the lone predicate is unresolvable
        assert_eq!(resolve_rule_based(&c), Err(ScopeError::Unresolvable(s(0))));
        let empty = ScopeDepGraph::new(a.tokens.clone(), []);
        assert_eq!(
            resolve_with_dependencies(&g, &empty, &a).unwrap(),
            resolve_rule_based(&g).unwrap()
        );
    }

    #[test]
    fn wrong_box_number_is_skipped() {
        let (g, a) = single();
        let c = g.with_edges(vec![]).unwrap();
        let d = ScopeDepGraph::new(
            a.tokens.clone(),
            [ScopeEdge {
                head: 0,
                dependent: 1,
                label: ScopeLabel::Scope(vec![4]),
            }],
        );
        let err = resolve_with_dependencies_report(&c, &d, &a).unwrap_err();
        assert_eq!(err, ScopeError::Unresolvable(s(0)));
        let fixed = ScopeDepGraph::new(
            a.tokens.clone(),
            [ScopeEdge {
                head: 0,
                dependent: 1,
                label: ScopeLabel::Scope(vec![1]),
            }],
        );
        assert_eq!(resolve_with_dependencies(&c, &fixed, &a).unwrap(), g);
    }

    #[test]
    fn file_round_trip() {
        let (g, a) = single();
        let d = project(&g, &a).unwrap();
        let text = write_scope_file(&[d.clone(), d.clone()]);
        assert_eq!(read_scope_file(&text).unwrap(), vec![d.clone(), d]);
        assert!(read_scope_file("").unwrap().is_empty());
    }

    #[test]
    fn malformed_files() {
        let err = read_scope_file("0\tSTART\t_\troot\n2\tx\t_\t_\n").unwrap_err();
        assert!(matches!(err, ScopeError::Format { line: 2, .. }));
        let err = read_scope_file("0\tSTART\t_\troot\n1\tx\t0\n").unwrap_err();
        assert!(matches!(err, ScopeError::Format { line: 2, .. }));
        let err = read_scope_file("0\tSTART\t_\troot\n1\tx\t0|0\tscope_b1\n").unwrap_err();
        assert!(matches!(err, ScopeError::Format { line: 2, .. }));
        let err = read_scope_file("1\tSTART\t_\troot\n").unwrap_err();
        assert!(matches!(err, ScopeError::Format { line: 1, .. }));
    }

    #[test]
    fn multiple_heads_in_file() {
        let text = "0\tSTART\t_\troot\n1\ta\t_\t_\n2\tb\t1|0\tscope_b2|no_scope\n";
        let d = read_scope_file(text).unwrap();
        assert_eq!(d[0].heads_of(2).count(), 2);
        assert_eq!(
            write_scope_file(&d),
            "0\tSTART\t_\troot\n1\ta\t_\t_\n2\tb\t0|1\tno_scope|scope_b2\n"
        );
    }

    #[test]
    fn attachment() {
        let (g, a) = single();
        let d = project(&g, &a).unwrap();
        let s = attachment_scores(std::slice::from_ref(&d), std::slice::from_ref(&d));
        assert_eq!((s.unlabeled, s.labeled), (1.0, 1.0));
        let other = ScopeDepGraph::new(
            d.tokens.clone(),
            [ScopeEdge {
                head: 0,
                dependent: 1,
                label: ScopeLabel::NoScope,
            }],
        );
        let s = attachment_scores(&[d], &[other]);
        assert_eq!((s.unlabeled, s.labeled), (1.0, 0.0));
    }
}
