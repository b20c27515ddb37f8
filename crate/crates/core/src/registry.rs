//! Simplifiers and scope resolvers looked up by name.

use crate::alignment::Alignment;
use crate::coref::preprocess_coref;
use crate::drg::{Drg, DrgEdge, NodeId};
use crate::scope::{resolve_rule_based, resolve_with_dependencies, ScopeDepGraph, ScopeError};
use crate::simplify::{require_full, to_compact, to_scopeless, SimplifyError};

pub trait Simplifier: Send + Sync {
    fn name(&self) -> &'static str;
    fn simplify(&self, g: &Drg) -> Result<Drg, SimplifyError>;
}

/// Leaves the graph as it is (after checking it is fully scoped).
pub struct NoPrep;
/// Compact DRGs.
pub struct Compact;
/// Scopeless DRGs.
pub struct Scopeless;

impl Simplifier for NoPrep {
    fn name(&self) -> &'static str {
        "noprep"
    }
    fn simplify(&self, g: &Drg) -> Result<Drg, SimplifyError> {
        require_full(g)?;
        Ok(g.clone())
    }
}

impl Simplifier for Compact {
    fn name(&self) -> &'static str {
        "cpt"
    }
    fn simplify(&self, g: &Drg) -> Result<Drg, SimplifyError> {
        to_compact(g)
    }
}

impl Simplifier for Scopeless {
    fn name(&self) -> &'static str {
        "scpl"
    }
    fn simplify(&self, g: &Drg) -> Result<Drg, SimplifyError> {
        to_scopeless(g)
    }
}

/// Optional coreference folding in front of another simplifier.
pub struct WithCoref(pub Box<dyn Simplifier>);

impl Simplifier for WithCoref {
    fn name(&self) -> &'static str {
        self.0.name()
    }
    fn simplify(&self, g: &Drg) -> Result<Drg, SimplifyError> {
        self.0.simplify(&preprocess_coref(g))
    }
}

/// What a resolver may consult besides the graph.
#[derive(Debug, Clone, Copy, Default)]
pub struct ResolveInput<'a> {
    pub deps: Option<&'a ScopeDepGraph>,
    pub alignment: Option<&'a Alignment>,
}

pub trait ScopeResolver: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether `resolve` needs dependencies and an alignment.
    fn needs_dependencies(&self) -> bool {
        false
    }
    fn resolve(&self, g: &Drg, input: ResolveInput<'_>) -> Result<Drg, ScopeError>;
}

pub struct RuleBased;
pub struct DependencyBased;

impl ScopeResolver for RuleBased {
    fn name(&self) -> &'static str {
        "rule"
    }
    fn resolve(&self, g: &Drg, _: ResolveInput<'_>) -> Result<Drg, ScopeError> {
        resolve_rule_based(g)
    }
}

impl ScopeResolver for DependencyBased {
    fn name(&self) -> &'static str {
        "dep"
    }
    fn needs_dependencies(&self) -> bool {
        true
    }
    fn resolve(&self, g: &Drg, input: ResolveInput<'_>) -> Result<Drg, ScopeError> {
        match (input.deps, input.alignment) {
            (Some(d), Some(a)) => resolve_with_dependencies(g, d, a),
            _ => resolve_rule_based(g),
        }
    }
}

pub const SIMPLIFIERS: [&str; 3] = ["noprep", "cpt", "scpl"];
pub const RESOLVERS: [&str; 2] = ["rule", "dep"];

pub fn simplifier(name: &str) -> Option<Box<dyn Simplifier>> {
    match name {
        "noprep" => Some(Box::new(NoPrep)),
        "cpt" => Some(Box::new(Compact)),
        "scpl" => Some(Box::new(Scopeless)),
        _ => None,
    }
}

pub fn scope_resolver(name: &str) -> Option<Box<dyn ScopeResolver>> {
    match name {
        "rule" => Some(Box::new(RuleBased)),
        "dep" => Some(Box::new(DependencyBased)),
        _ => None,
    }
}

/// Runs `resolver`; whenever a node has no scoped ancestor it is put in
/// the root box and resolution starts again, so that the output is always
/// fully scoped. Returns the nodes placed this way.
pub fn resolve_with_fallback(
    resolver: &dyn ScopeResolver,
    g: &Drg,
    input: ResolveInput<'_>,
) -> Result<(Drg, Vec<NodeId>), ScopeError> {
    let root = g.root().ok_or(ScopeError::NoRoot)?;
    let mut current = g.clone();
    let mut placed = Vec::new();
    loop {
        match resolver.resolve(&current, input) {
            Ok(out) => return Ok((out, placed)),
            Err(ScopeError::Unresolvable(n)) if !placed.contains(&n) => {
                log::warn!("node {n} has no scoped ancestor; placed in the root box");
                placed.push(n);
                let mut edges = current.edges().to_vec();
                edges.push(DrgEdge::scope(root, n));
                current = current
                    .with_edges(edges)
                    .expect("new edge joins existing nodes");
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drg::{is_well_formed, Mode, NodeKind, Pos};

    #[test]
    fn every_name_resolves() {
        for n in SIMPLIFIERS {
            assert_eq!(simplifier(n).unwrap().name(), n);
        }
        for n in RESOLVERS {
            assert_eq!(scope_resolver(n).unwrap().name(), n);
        }
        assert!(simplifier("bogus").is_none());
        assert!(scope_resolver("bogus").is_none());
        assert!(scope_resolver("dep").unwrap().needs_dependencies());
    }

    #[test]
    fn fallback_places_orphans_in_the_root_box() {
        let (b, s) = (NodeId::boxed, NodeId::synset);
        // s1 is only reachable as the parent of s0, so inheritance cannot
        // reach it
        let g = Drg::new(
            [
                (b(0), NodeKind::Box),
                (s(0), NodeKind::synset("cat", Pos::Noun, "01")),
                (s(1), NodeKind::synset("sleep", Pos::Verb, "01")),
                (s(2), NodeKind::synset("dog", Pos::Noun, "01")),
            ],
            [
                DrgEdge::scope(b(0), s(0)),
                DrgEdge::role(s(1), "Agent", s(0)),
                DrgEdge::role(s(1), "Theme", s(2)),
            ],
        )
        .unwrap();
        assert!(matches!(
            RuleBased.resolve(&g, ResolveInput::default()),
            Err(ScopeError::Unresolvable(_))
        ));
        let (out, placed) = resolve_with_fallback(&RuleBased, &g, ResolveInput::default()).unwrap();
        assert_eq!(placed, [s(1)]);
        assert!(is_well_formed(&out, Mode::Full));
        assert!(out.edges().contains(&DrgEdge::scope(b(0), s(2))));
    }
}
