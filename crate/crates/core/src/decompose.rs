//! Splitting a DRG into per-token graph constants and searching for an AM
//! dependency tree over them.
//!
//! The search is a memoised dynamic program over sets of tokens. A state
//! `(S, t, r)` asks whether the tokens in `S` can form a subtree headed by
//! token `t` whose value has root node `r`. A subtree's value owns the nodes
//! of its tokens and keeps a source on every node it refers to but does not
//! own, so the two sides of each operation are constrained by which nodes
//! they own and which they still miss. Source names are handed out after a
//! tree is found.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AmDependencyTree, AmEdge, Operation, SGraph, SourceName};
use crate::alignment::{Alignment, AlignmentError};
use crate::coref::preprocess_coref;
use crate::drg::{is_isomorphic, Drg, DrgEdge, EdgeLabel, NodeId, APP_ROLES, MOD_ROLES};
use crate::simplify::{to_compact, to_scopeless};

/// Source names available to the search, in preference order.
pub const SOURCE_INVENTORY: [&str; 7] = ["s", "o", "o2", "m", "m1", "m2", "m3"];

pub const DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberMode {
    /// Membership edges stay with the box.
    App,
    /// Membership edges go with the content node.
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownLabels {
    /// Treat as an argument edge and log a warning.
    App,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeAttachmentPolicy {
    pub app_labels: BTreeSet<String>,
    pub mod_labels: BTreeSet<String>,
    pub member_mode: MemberMode,
    pub unknown: UnknownLabels,
}

impl Default for EdgeAttachmentPolicy {
    /// The head/argument and head/modifier tables. `Product` is listed in
    /// both and kept only as an argument edge; `Attribute` is a modifier
    /// edge.
    fn default() -> Self {
        let app_labels: BTreeSet<String> = APP_ROLES.iter().map(|s| s.to_string()).collect();
        let mut mod_labels: BTreeSet<String> = MOD_ROLES
            .iter()
            .filter(|r| !app_labels.contains(**r))
            .map(|s| s.to_string())
            .collect();
        mod_labels.insert("Attribute".to_string());
        EdgeAttachmentPolicy {
            app_labels,
            mod_labels,
            member_mode: MemberMode::Mod,
            unknown: UnknownLabels::App,
        }
    }
}

/// Which endpoint's token an edge is grouped with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attach {
    Source,
    Target,
}

impl EdgeAttachmentPolicy {
    pub fn with_member_mode(mut self, mode: MemberMode) -> Self {
        self.member_mode = mode;
        self
    }

    /// Where `label` is attached; `None` for a role in neither list.
    pub fn attach(&self, label: &EdgeLabel) -> Option<Attach> {
        match label {
            EdgeLabel::Scope => Some(match self.member_mode {
                MemberMode::App => Attach::Source,
                MemberMode::Mod => Attach::Target,
            }),
            EdgeLabel::Ana => Some(Attach::Source),
            EdgeLabel::Role(r) if self.app_labels.contains(r) => Some(Attach::Source),
            EdgeLabel::Role(r) if self.mod_labels.contains(r) => Some(Attach::Target),
            EdgeLabel::Role(_) => None,
        }
    }

    /// Reads a policy file:
    ///
    /// ```text
    /// # comment
    /// app: Agent, Patient, Theme
    /// mod: Attribute NEGATION
    /// member: mod
    /// unknown: app
    /// ```
    ///
    /// Missing lines keep their defaults. `member` inside a label list sets
    /// the member mode unless a `member:` line says otherwise.
    pub fn parse(text: &str) -> Result<Self, DecomposeError> {
        let mut p = EdgeAttachmentPolicy::default();
        let mut member_line = None;
        let mut member_in_list = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |m: String| DecomposeError::Policy {
                line: i + 1,
                message: m,
            };
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| fail(format!("expected `key: value`, got `{line}`")))?;
            let items = || -> BTreeSet<String> {
                value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            };
            match key.trim() {
                "app" => {
                    let mut set = items();
                    if set.remove("member") {
                        member_in_list = Some(MemberMode::App);
                    }
                    p.app_labels = set;
                }
                "mod" => {
                    let mut set = items();
                    if set.remove("member") {
                        member_in_list = Some(MemberMode::Mod);
                    }
                    p.mod_labels = set;
                }
                "member" => {
                    member_line = Some(match value.trim() {
                        "app" | "APP" => MemberMode::App,
                        "mod" | "MOD" => MemberMode::Mod,
                        other => {
                            return Err(fail(format!("member must be app or mod, got `{other}`")))
                        }
                    })
                }
                "unknown" => {
                    p.unknown = match value.trim() {
                        "app" => UnknownLabels::App,
                        "reject" => UnknownLabels::Reject,
                        other => {
                            return Err(fail(format!(
                                "unknown must be app or reject, got `{other}`"
                            )))
                        }
                    }
                }
                other => return Err(fail(format!("unknown key `{other}`"))),
            }
        }
        if let Some(m) = member_line.or(member_in_list) {
            p.member_mode = m;
        }
        let both: Vec<String> = p.app_labels.intersection(&p.mod_labels).cloned().collect();
        if !both.is_empty() {
            return Err(DecomposeError::OverlappingLabels(both));
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
        format!(
            "app: {}\nmod: {}\nmember: {}\nunknown: {}\n",
            join(&self.app_labels),
            join(&self.mod_labels),
            match self.member_mode {
                MemberMode::App => "app",
                MemberMode::Mod => "mod",
            },
            match self.unknown {
                UnknownLabels::App => "app",
                UnknownLabels::Reject => "reject",
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("edge label `{0}` is in neither label list")]
    UnknownEdgeLabel(String),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error("labels in both lists: {0:?}")]
    OverlappingLabels(Vec<String>),
    #[error("policy line {line}: {message}")]
    Policy { line: usize, message: String },
    #[error("not decomposable ({0})")]
    NotDecomposable(FailureKind),
    #[error("search budget exhausted")]
    BudgetExhausted,
    #[error("graph is too large for the search ({0})")]
    TooLarge(String),
    #[error("tree does not evaluate back to the graph: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// Some token's graph needs more sources than the inventory has.
    SourceLimit,
    /// The tokens do not connect through shared nodes.
    Disconnected,
    /// No tree satisfies the operation constraints.
    NoTree,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::SourceLimit => "source-limit",
            FailureKind::Disconnected => "disconnected",
            FailureKind::NoTree => "no-tree",
        })
    }
}

/// The part of a DRG assigned to one token. Placeholders stand for nodes of
/// other tokens that this token's edges touch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexicalGraph {
    pub token: usize,
    pub owned: BTreeSet<NodeId>,
    pub placeholders: BTreeSet<NodeId>,
    pub edges: Vec<DrgEdge>,
}

impl LexicalGraph {
    /// The constant as an s-graph with the given root and placeholder
    /// source names.
    pub fn to_sgraph(&self, g: &Drg, root: NodeId, names: &BTreeMap<NodeId, SourceName>) -> SGraph {
        let nodes = self
            .owned
            .iter()
            .map(|n| (*n, g.kind(*n).cloned()))
            .chain(self.placeholders.iter().map(|n| (*n, None)));
        let sources = self
            .placeholders
            .iter()
            .filter_map(|n| names.get(n).map(|s| (s.clone(), *n)));
        SGraph::new(nodes, self.edges.iter().cloned(), root, sources)
            .expect("partition is consistent")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub tokens: Vec<String>,
    pub graphs: BTreeMap<usize, LexicalGraph>,
    pub owner: BTreeMap<NodeId, usize>,
    /// Role labels that were in neither list (attached as arguments).
    pub unknown_labels: BTreeSet<String>,
}

/// Assigns every node to its aligned token and every edge to one endpoint
/// per the policy.
pub fn partition(
    g: &Drg,
    a: &Alignment,
    p: &EdgeAttachmentPolicy,
) -> Result<Partition, DecomposeError> {
    let owner = a.owners(g)?;
    let mut graphs: BTreeMap<usize, LexicalGraph> = BTreeMap::new();
    for (n, t) in &owner {
        graphs
            .entry(*t)
            .or_insert_with(|| LexicalGraph {
                token: *t,
                owned: BTreeSet::new(),
                placeholders: BTreeSet::new(),
                edges: Vec::new(),
            })
            .owned
            .insert(*n);
    }
    let mut unknown_labels = BTreeSet::new();
    for e in g.edges() {
        let side = match p.attach(&e.label) {
            Some(s) => s,
            None => {
                let name = e.label.relation().to_string();
                if p.unknown == UnknownLabels::Reject {
                    return Err(DecomposeError::UnknownEdgeLabel(name));
                }
                unknown_labels.insert(name);
                Attach::Source
            }
        };
        let t = match side {
            Attach::Source => owner[&e.source],
            Attach::Target => owner[&e.target],
        };
        let lg = graphs.get_mut(&t).expect("endpoint token has a graph");
        for n in [e.source, e.target] {
            if owner[&n] != t {
                lg.placeholders.insert(n);
            }
        }
        lg.edges.push(e.clone());
    }
    for l in &unknown_labels {
        log::warn!("edge label `{l}` is in neither label list; attached as an argument edge");
    }
    Ok(Partition {
        tokens: a.tokens.clone(),
        graphs,
        owner,
        unknown_labels,
    })
}

// ---------------------------------------------------------------------------
// search

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    App,
    Mod,
}

#[derive(Debug, Clone, Copy)]
enum Split {
    Leaf,
    Combine {
        h: u64,
        d: u64,
        dt: u8,
        rd: u8,
        op: Op,
    },
}

struct Search {
    m: usize,
    own: Vec<u128>,
    open: Vec<u128>,
    adj: Vec<u64>,
    node_owner: Vec<u8>,
    in_edges: Vec<u128>,
    k: u32,
    steps: u64,
    budget: u64,
    memo: HashMap<(u64, u8, u8), Option<Split>>,
    any_memo: HashMap<u64, Option<(u8, u8)>>,
}

struct Exhausted;

impl Search {
    fn own_of(&self, s: u64) -> u128 {
        bits(s).fold(0, |acc, i| acc | self.own[i])
    }

    fn open_of(&self, s: u64, own: u128) -> u128 {
        bits(s).fold(0, |acc, i| acc | self.open[i]) & !own
    }

    fn connected(&self, s: u64) -> bool {
        let start = s.trailing_zeros() as usize;
        let mut seen = 1u64 << start;
        let mut frontier = seen;
        while frontier != 0 {
            let mut next = 0u64;
            for i in bits(frontier) {
                next |= self.adj[i] & s & !seen;
            }
            seen |= next;
            frontier = next;
        }
        seen == s
    }

    /// Candidate roots of a set, most head-like first: fewest incoming
    /// edges from inside the set, then token, then node.
    fn roots(&self, s: u64) -> Vec<(u8, u8)> {
        let own = self.own_of(s);
        let mut v: Vec<(u32, u8, u8)> = bits128(own)
            .map(|n| {
                (
                    (self.in_edges[n] & own).count_ones(),
                    self.node_owner[n],
                    n as u8,
                )
            })
            .collect();
        v.sort();
        v.into_iter().map(|(_, t, n)| (t, n)).collect()
    }

    fn tick(&mut self) -> Result<(), Exhausted> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    fn valid(&mut self, s: u64, t: u8, rt: u8) -> Result<bool, Exhausted> {
        if let Some(r) = self.memo.get(&(s, t, rt)) {
            return Ok(r.is_some());
        }
        self.tick()?;
        let found = self.search(s, t, rt)?;
        self.memo.insert((s, t, rt), found);
        Ok(found.is_some())
    }

    fn search(&mut self, s: u64, t: u8, rt: u8) -> Result<Option<Split>, Exhausted> {
        let tb = 1u64 << t;
        if s == tb {
            let ok =
                self.own[t as usize] >> rt & 1 == 1 && self.open[t as usize].count_ones() <= self.k;
            return Ok(ok.then_some(Split::Leaf));
        }
        let rest = s & !tb;
        let rt_bit = 1u128 << rt;
        let mut d = rest;
        while d != 0 {
            self.tick()?;
            let h = s & !d;
            let own_d = self.own_of(d);
            let own_h = self.own_of(h);
            let open_d = self.open_of(d, own_d);
            let open_h = self.open_of(h, own_h);
            if (open_h | open_d).count_ones() <= self.k && self.connected(d) && self.connected(h) {
                let x = open_h & own_d;
                if x.count_ones() == 1 && open_d & own_h == 0 {
                    let rd = x.trailing_zeros() as u8;
                    let dt = self.node_owner[rd as usize];
                    if self.valid(d, dt, rd)? && self.valid(h, t, rt)? {
                        return Ok(Some(Split::Combine {
                            h,
                            d,
                            dt,
                            rd,
                            op: Op::App,
                        }));
                    }
                }
                if open_d & own_h == rt_bit
                    && open_d & !rt_bit & !open_h == 0
                    && open_h & own_d == 0
                {
                    if let Some((dt, rd)) = self.any(d)? {
                        if self.valid(h, t, rt)? {
                            return Ok(Some(Split::Combine {
                                h,
                                d,
                                dt,
                                rd,
                                op: Op::Mod,
                            }));
                        }
                    }
                }
            }
            d = (d - 1) & rest;
        }
        Ok(None)
    }

    /// Any root for which `s` forms a subtree.
    fn any(&mut self, s: u64) -> Result<Option<(u8, u8)>, Exhausted> {
        if let Some(r) = self.any_memo.get(&s) {
            return Ok(*r);
        }
        let mut found = None;
        for (t, n) in self.roots(s) {
            if self.valid(s, t, n)? {
                found = Some((t, n));
                break;
            }
        }
        self.any_memo.insert(s, found);
        Ok(found)
    }
}

fn bits(mut x: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if x == 0 {
            None
        } else {
            let i = x.trailing_zeros() as usize;
            x &= x - 1;
            Some(i)
        }
    })
}

fn bits128(mut x: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if x == 0 {
            None
        } else {
            let i = x.trailing_zeros() as usize;
            x &= x - 1;
            Some(i)
        }
    })
}

/// A found derivation: leaf or binary combination, head side first.
#[derive(Debug)]
enum Term {
    Leaf {
        token: u8,
        root: u8,
    },
    Combine {
        head: Box<Term>,
        dep: Box<Term>,
        op: Op,
        rd: u8,
        rt: u8,
    },
}

impl Term {
    fn head_token(&self) -> u8 {
        match self {
            Term::Leaf { token, .. } => *token,
            Term::Combine { head, .. } => head.head_token(),
        }
    }
}

fn build_term(search: &Search, s: u64, t: u8, rt: u8) -> Term {
    match search.memo.get(&(s, t, rt)).copied().flatten() {
        Some(Split::Leaf) => Term::Leaf { token: t, root: rt },
        Some(Split::Combine { h, d, dt, rd, op }) => Term::Combine {
            head: Box::new(build_term(search, h, t, rt)),
            dep: Box::new(build_term(search, d, dt, rd)),
            op,
            rd,
            rt,
        },
        None => unreachable!("only successful states are rebuilt"),
    }
}

/// Names placeholder classes so that classes alive in the same graph get
/// different names. Every class lives on a connected part of the term tree,
/// so colouring them from the top down never needs more names than the
/// largest set of simultaneously open sources.
struct Naming {
    parent: Vec<usize>,
    kind: Vec<Option<Op>>,
    top: Vec<usize>,
    cliques: Vec<Vec<usize>>,
    leaf_class: BTreeMap<(u8, u8), usize>,
    edge_class: Vec<(u8, u8, Op, usize)>,
}

impl Naming {
    fn class(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.kind.push(None);
        self.top.push(usize::MAX);
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.parent[b] = a;
        }
        a
    }

    /// Open placeholders of the term's value, node -> class.
    fn walk(&mut self, term: &Term, open: &[u128], depth: usize) -> BTreeMap<u8, usize> {
        match term {
            Term::Leaf { token, .. } => {
                let mut out = BTreeMap::new();
                for n in bits128(open[*token as usize]) {
                    let c = self.class();
                    self.leaf_class.insert((*token, n as u8), c);
                    out.insert(n as u8, c);
                }
                self.cliques.push(out.values().copied().collect());
                out
            }
            Term::Combine {
                head,
                dep,
                op,
                rd,
                rt,
            } => {
                let mut h = self.walk(head, open, depth + 1);
                let mut d = self.walk(dep, open, depth + 1);
                for (n, c) in d.iter_mut() {
                    if let Some(hc) = h.get(n) {
                        *c = self.union(*hc, *c);
                    }
                }
                let mut all: BTreeMap<u8, usize> = h.clone();
                all.extend(d.iter().map(|(n, c)| (*n, *c)));
                let clique: Vec<usize> = all.values().copied().collect();
                self.cliques.push(clique);
                let consumed = match op {
                    Op::App => h.remove(rd).expect("head misses the argument root"),
                    Op::Mod => d.remove(rt).expect("modifier misses the head root"),
                };
                let c = self.find(consumed);
                self.kind[c] = Some(*op);
                self.top[c] = depth;
                self.edge_class
                    .push((head.head_token(), dep.head_token(), *op, c));
                for (n, c) in d {
                    h.insert(n, c);
                }
                h
            }
        }
    }

    fn colour(&mut self, inventory: &[SourceName]) -> Option<BTreeMap<usize, SourceName>> {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).map(|i| self.find(i)).collect();
        let mut neighbours: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for clique in &self.cliques {
            let cs: BTreeSet<usize> = clique.iter().map(|c| roots[*c]).collect();
            for a in &cs {
                neighbours
                    .entry(*a)
                    .or_default()
                    .extend(cs.iter().filter(|b| *b != a));
            }
        }
        let mut classes: Vec<usize> = roots
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        classes.sort_by_key(|c| (self.top[*c], *c));
        let mut names: BTreeMap<usize, SourceName> = BTreeMap::new();
        for c in classes {
            let taken: BTreeSet<&SourceName> = neighbours
                .get(&c)
                .into_iter()
                .flatten()
                .filter_map(|o| names.get(o))
                .collect();
            let prefers_mod = self.kind[c] == Some(Op::Mod);
            let mut order: Vec<&SourceName> = inventory.iter().collect();
            order.sort_by_key(|s| (s.as_str().starts_with('m') != prefers_mod) as u8);
            let name = order.into_iter().find(|s| !taken.contains(s))?;
            names.insert(c, name.clone());
        }
        Some(names)
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub budget: u64,
    pub inventory: Vec<SourceName>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: DEFAULT_BUDGET,
            inventory: SOURCE_INVENTORY
                .iter()
                .map(|s| SourceName::new(s).expect("valid names"))
                .collect(),
        }
    }
}

/// Searches for an AM dependency tree that evaluates to `g`.
pub fn find_am_tree(
    g: &Drg,
    a: &Alignment,
    p: &EdgeAttachmentPolicy,
    budget: u64,
) -> Result<AmDependencyTree, DecomposeError> {
    find_am_tree_with(
        g,
        a,
        p,
        &SearchConfig {
            budget,
            ..SearchConfig::default()
        },
    )
}

pub fn find_am_tree_with(
    g: &Drg,
    a: &Alignment,
    p: &EdgeAttachmentPolicy,
    config: &SearchConfig,
) -> Result<AmDependencyTree, DecomposeError> {
    let part = partition(g, a, p)?;
    let tokens: Vec<usize> = part.graphs.keys().copied().collect();
    let nodes: Vec<NodeId> = g.nodes().keys().copied().collect();
    if tokens.len() > 63 {
        return Err(DecomposeError::TooLarge(format!("{} tokens", tokens.len())));
    }
    if nodes.len() > 128 {
        return Err(DecomposeError::TooLarge(format!("{} nodes", nodes.len())));
    }
    let node_ix: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let m = tokens.len();
    let mut own = vec![0u128; m];
    let mut open = vec![0u128; m];
    let mut node_owner = vec![0u8; nodes.len()];
    for (i, t) in tokens.iter().enumerate() {
        let lg = &part.graphs[t];
        for n in &lg.owned {
            own[i] |= 1 << node_ix[n];
            node_owner[node_ix[n]] = i as u8;
        }
        for n in &lg.placeholders {
            open[i] |= 1 << node_ix[n];
        }
    }
    let mut adj = vec![0u64; m];
    for i in 0..m {
        for n in bits128(open[i]) {
            let j = node_owner[n] as usize;
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
    }
    let mut in_edges = vec![0u128; nodes.len()];
    for e in g.edges() {
        in_edges[node_ix[&e.target]] |= 1 << node_ix[&e.source];
    }
    let k = config.inventory.len() as u32;
    let mut search = Search {
        m,
        own,
        open,
        adj,
        node_owner,
        in_edges,
        k,
        steps: 0,
        budget: config.budget,
        memo: HashMap::new(),
        any_memo: HashMap::new(),
    };
    let all: u64 = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let diagnose = |s: &Search| {
        if s.open.iter().any(|o| o.count_ones() > s.k) {
            FailureKind::SourceLimit
        } else if s.m > 0 && !s.connected(all) {
            FailureKind::Disconnected
        } else {
            FailureKind::NoTree
        }
    };
    if m == 0 || diagnose(&search) != FailureKind::NoTree {
        return Err(DecomposeError::NotDecomposable(diagnose(&search)));
    }
    let root = match search.any(all) {
        Ok(Some(r)) => r,
        Ok(None) => return Err(DecomposeError::NotDecomposable(FailureKind::NoTree)),
        Err(Exhausted) => return Err(DecomposeError::BudgetExhausted),
    };
    let term = build_term(&search, all, root.0, root.1);

    let mut naming = Naming {
        parent: Vec::new(),
        kind: Vec::new(),
        top: Vec::new(),
        cliques: Vec::new(),
        leaf_class: BTreeMap::new(),
        edge_class: Vec::new(),
    };
    let left = naming.walk(&term, &search.open, 0);
    debug_assert!(left.is_empty());
    let names = naming
        .colour(&config.inventory)
        .ok_or(DecomposeError::NotDecomposable(FailureKind::SourceLimit))?;

    let mut roots: BTreeMap<u8, u8> = BTreeMap::new();
    collect_roots(&term, &mut roots);
    let mut constants = BTreeMap::new();
    for (i, t) in tokens.iter().enumerate() {
        let mut placeholder_names = BTreeMap::new();
        for n in bits128(search.open[i]) {
            let c = naming.leaf_class[&(i as u8, n as u8)];
            let c = naming.find(c);
            placeholder_names.insert(nodes[n], names[&c].clone());
        }
        let root = nodes[roots[&(i as u8)] as usize];
        constants.insert(*t, part.graphs[t].to_sgraph(g, root, &placeholder_names));
    }
    let mut edges = Vec::new();
    for (h, d, op, c) in naming.edge_class.clone() {
        let c = naming.find(c);
        let src = names[&c].clone();
        edges.push(AmEdge {
            head: tokens[h as usize],
            dependent: tokens[d as usize],
            op: match op {
                Op::App => Operation::App(src),
                Op::Mod => Operation::Mod(src),
            },
        });
    }
    // derivation order, so that evaluation retraces the search
    let tree = AmDependencyTree {
        tokens: a.tokens.clone(),
        constants,
        edges,
    };
    match tree.evaluate_to_drg() {
        Ok(back) if is_isomorphic(&back, g) => Ok(tree),
        Ok(_) => Err(DecomposeError::Inconsistent(
            "result differs from the input".into(),
        )),
        Err(e) => Err(DecomposeError::Inconsistent(e.to_string())),
    }
}

fn collect_roots(term: &Term, out: &mut BTreeMap<u8, u8>) {
    match term {
        Term::Leaf { token, root } => {
            out.insert(*token, *root);
        }
        Term::Combine { head, dep, .. } => {
            collect_roots(head, out);
            collect_roots(dep, out);
        }
    }
}

// ---------------------------------------------------------------------------
// corpus statistics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    NoPrep,
    Cpt,
    Scpl,
}

impl std::str::FromStr for Preprocessing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noprep" => Ok(Preprocessing::NoPrep),
            "cpt" => Ok(Preprocessing::Cpt),
            "scpl" => Ok(Preprocessing::Scpl),
            other => Err(format!(
                "unknown mode `{other}` (expected noprep, cpt or scpl)"
            )),
        }
    }
}

/// Applies the simplification of `mode`. The simplified modes also remove
/// coreference edges first.
pub fn prepare(g: &Drg, mode: Preprocessing) -> Result<Drg, String> {
    match mode {
        Preprocessing::NoPrep => Ok(g.clone()),
        Preprocessing::Cpt => to_compact(&preprocess_coref(g)).map_err(|e| e.to_string()),
        Preprocessing::Scpl => to_scopeless(&preprocess_coref(g)).map_err(|e| e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Decomposable,
    NotDecomposable { reason: FailureKind },
    BudgetExhausted,
    Error { message: String },
}

impl Outcome {
    pub fn category(&self) -> String {
        match self {
            Outcome::Decomposable => "decomposable".into(),
            Outcome::NotDecomposable { reason } => reason.to_string(),
            Outcome::BudgetExhausted => "budget-exhausted".into(),
            Outcome::Error { .. } => "error".into(),
        }
    }
}

pub fn decompose_instance(
    g: &Drg,
    a: &Alignment,
    p: &EdgeAttachmentPolicy,
    mode: Preprocessing,
    budget: u64,
) -> Outcome {
    let g = match prepare(g, mode) {
        Ok(g) => g,
        Err(message) => return Outcome::Error { message },
    };
    match find_am_tree(&g, a, p, budget) {
        Ok(_) => Outcome::Decomposable,
        Err(DecomposeError::NotDecomposable(reason)) => Outcome::NotDecomposable { reason },
        Err(DecomposeError::BudgetExhausted) => Outcome::BudgetExhausted,
        Err(e) => Outcome::Error {
            message: e.to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposabilityReport {
    pub total: usize,
    pub decomposable: usize,
    /// Percentage of decomposable instances.
    pub rate: f64,
    pub outcomes: Vec<Outcome>,
    /// Count per failure category.
    pub failures: BTreeMap<String, usize>,
}

impl DecomposabilityReport {
    pub fn from_outcomes(outcomes: Vec<Outcome>) -> Self {
        let total = outcomes.len();
        let decomposable = outcomes
            .iter()
            .filter(|o| **o == Outcome::Decomposable)
            .count();
        let mut failures = BTreeMap::new();
        for o in &outcomes {
            if *o != Outcome::Decomposable {
                *failures.entry(o.category()).or_insert(0) += 1;
            }
        }
        let rate = if total == 0 {
            0.0
        } else {
            100.0 * decomposable as f64 / total as f64
        };
        DecomposabilityReport {
            total,
            decomposable,
            rate,
            outcomes,
            failures,
        }
    }
}

pub fn decomposability_rate(
    corpus: &[(Drg, Alignment)],
    p: &EdgeAttachmentPolicy,
    mode: Preprocessing,
) -> DecomposabilityReport {
    DecomposabilityReport::from_outcomes(
        corpus
            .iter()
            .map(|(g, a)| decompose_instance(g, a, p, mode, DEFAULT_BUDGET))
            .collect(),
    )
}
