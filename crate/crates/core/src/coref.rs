//! Coreference rewriting around parsing.
//!
//! Before decomposition every node touching an `ANA` edge is re-tagged with
//! the pronoun category `p` and the `ANA` edges are dropped. Afterwards,
//! `p` nodes with the same lemma and sense are linked again, each one
//! pointing at the lowest-numbered member of its group.

use std::collections::{BTreeMap, BTreeSet};

use crate::drg::{Drg, DrgEdge, EdgeLabel, NodeId, NodeKind, Pos};

fn retag(g: &Drg, nodes: &BTreeSet<NodeId>, pos: Pos) -> BTreeMap<NodeId, NodeKind> {
    g.nodes()
        .iter()
        .map(|(id, k)| {
            let k = match k {
                NodeKind::Synset(s) if nodes.contains(id) => {
                    let mut s = s.clone();
                    s.pos = pos;
                    NodeKind::Synset(s)
                }
                other => other.clone(),
            };
            (*id, k)
        })
        .collect()
}

pub fn preprocess_coref(g: &Drg) -> Drg {
    let touched: BTreeSet<NodeId> = g
        .edges()
        .iter()
        .filter(|e| e.label == EdgeLabel::Ana)
        .flat_map(|e| [e.source, e.target])
        .collect();
    if touched.is_empty() {
        return g.clone();
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| e.label != EdgeLabel::Ana)
        .cloned()
        .collect();
    Drg::from_parts(retag(g, &touched, Pos::Pronoun), edges).expect("same node set")
}

pub fn postprocess_coref(g: &Drg) -> Drg {
    let mut groups: BTreeMap<(String, String), Vec<NodeId>> = BTreeMap::new();
    for (id, k) in g.nodes() {
        if let NodeKind::Synset(s) = k {
            if s.pos == Pos::Pronoun {
                groups
                    .entry((s.lemma.clone(), s.sense.clone()))
                    .or_default()
                    .push(*id);
            }
        }
    }
    if groups.is_empty() {
        return g.clone();
    }
    let mut edges = g.edges().to_vec();
    let mut pronouns = BTreeSet::new();
    for members in groups.values_mut() {
        members.sort_by_key(|n| (n.index, n.namespace));
        pronouns.extend(members.iter().copied());
        let lowest = members[0];
        for n in &members[1..] {
            edges.push(DrgEdge::new(*n, lowest, EdgeLabel::Ana));
        }
    }
    Drg::from_parts(retag(g, &pronouns, Pos::Noun), edges).expect("same node set")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(i: u32) -> NodeId {
        NodeId::synset(i)
    }

    fn pronouns(n: usize) -> Drg {
        let b = NodeId::boxed(0);
        let mut nodes = vec![(b, NodeKind::Box)];
        let mut edges = vec![];
        for i in 0..n as u32 {
            nodes.push((s(i), NodeKind::synset("female", Pos::Pronoun, "02")));
            edges.push(DrgEdge::scope(b, s(i)));
        }
        Drg::new(nodes, edges).unwrap()
    }

    #[test]
    fn lone_pronoun_gets_no_edge() {
        let g = postprocess_coref(&pronouns(1));
        assert_eq!(
            g.kind(s(0)),
            Some(&NodeKind::synset("female", Pos::Noun, "02"))
        );
        assert!(g.edges().iter().all(|e| e.label != EdgeLabel::Ana));
    }

    #[test]
    fn groups_form_a_star() {
        let g = postprocess_coref(&pronouns(3));
        let ana: Vec<&DrgEdge> = g
            .edges()
            .iter()
            .filter(|e| e.label == EdgeLabel::Ana)
            .collect();
        assert_eq!(ana.len(), 2);
        assert!(ana.iter().all(|e| e.target == s(0) && e.source.index > 0));
        assert!(g
            .nodes()
            .values()
            .all(|k| k.as_synset().is_none_or(|s| s.pos != Pos::Pronoun)));
    }

    #[test]
    fn no_ana_is_identity() {
        let g = postprocess_coref(&pronouns(0));
        assert_eq!(preprocess_coref(&g), g);
    }
}
