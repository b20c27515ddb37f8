//! Compact and scopeless DRGs.
//!
//! Both transforms only delete membership edges; nodes, role edges, `ANA`
//! edges and the box hierarchy are left alone.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::drg::{
    canonical_box_numbers, component_count, validate, Drg, DrgEdge, Mode, NodeId, Violation,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimplifyError {
    #[error("node {0} is not in any box")]
    NotFullyScoped(NodeId),
    #[error("graph is ill-formed: {0}")]
    IllFormed(String),
}

pub(crate) fn require_full(g: &Drg) -> Result<(), SimplifyError> {
    let errors: Vec<Violation> = validate(g, Mode::Full)
        .into_iter()
        .filter(Violation::is_error)
        .collect();
    for v in &errors {
        if let Violation::Unscoped(n) = v {
            return Err(SimplifyError::NotFullyScoped(*n));
        }
    }
    match errors.first() {
        Some(v) => Err(SimplifyError::IllFormed(v.to_string())),
        None => Ok(()),
    }
}

/// Drops the membership edge of every node whose role parents all sit in
/// the same box as the node itself. Nodes without role parents keep theirs.
pub fn to_compact(g: &Drg) -> Result<Drg, SimplifyError> {
    require_full(g)?;
    let mut removed: BTreeSet<&DrgEdge> = BTreeSet::new();
    for e in g.membership_edges() {
        let n = e.target;
        let parents: Vec<NodeId> = g.role_parents(n).filter(|p| !g.is_box(*p)).collect();
        if parents.is_empty() {
            continue;
        }
        let mine = BTreeSet::from([e.source]);
        let same = parents
            .iter()
            .all(|p| g.scope_of(*p).map(|s| s == mine).unwrap_or(false));
        if same {
            removed.insert(e);
        }
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| !removed.contains(e))
        .cloned()
        .collect();
    Ok(g.with_edges(edges).expect("subset of existing edges"))
}

/// Removes membership edges one at a time, in order of the source box's
/// canonical number and then target id, whenever the graph stays
/// connected without it.
pub fn to_scopeless(g: &Drg) -> Result<Drg, SimplifyError> {
    require_full(g)?;
    let numbers = canonical_box_numbers(g, None);
    let mut candidates: Vec<&DrgEdge> = g.membership_edges().collect();
    candidates.sort_by_key(|e| (numbers.get(&e.source).copied(), e.target, e.source));
    let mut kept: Vec<DrgEdge> = g.edges().to_vec();
    for e in candidates {
        let pos = kept
            .iter()
            .position(|k| k == e)
            .expect("edge still present");
        let without: Vec<DrgEdge> = kept
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, k)| k.clone())
            .collect();
        if component_count(g.nodes().keys().copied(), without.iter()) == 1 {
            kept = without;
        }
    }
    Ok(g.with_edges(kept).expect("subset of existing edges"))
}
