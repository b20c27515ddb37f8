use std::collections::BTreeSet;

use drg_core::algebra::read_am_trees;
use drg_core::alignment::read_alignments;
use drg_core::coref::{postprocess_coref, preprocess_coref};
use drg_core::decompose::{
    find_am_tree, DecomposeError, EdgeAttachmentPolicy, FailureKind, DEFAULT_BUDGET,
};
use drg_core::penman::{lenient_to_strict, normalize_whitespace, parse_penman};
use drg_core::scope::{project, read_scope_file, resolve_with_dependencies};
use drg_core::*;

fn graph(text: &str) -> Drg {
    parse_penman(text).unwrap()
}

fn alignment(text: &str) -> Alignment {
    read_alignments(text.as_bytes()).unwrap().remove(0)
}

const EVERY: &str = include_str!("../../../testdata/every_child.penman");
const EVERY_ALIGN: &str = include_str!("../../../testdata/every_child.align.jsonl");
const EVERY_COMPACT: &str = include_str!("../../../testdata/every_child.compact.penman");
const EVERY_SCOPELESS: &str = include_str!("../../../testdata/every_child.scopeless.penman");
const EVERY_SCOPE: &str = include_str!("../../../testdata/every_child.scope");

#[test]
fn every_child_is_well_formed() {
    let g = graph(EVERY);
    assert!(is_well_formed(&g, Mode::Full));
    assert_eq!(g.box_count(), 3);
    alignment(EVERY_ALIGN).check(&g).unwrap();
}

#[test]
fn every_child_compact() {
    let c = to_compact(&graph(EVERY)).unwrap();
    assert_eq!(c, graph(EVERY_COMPACT));
    assert_eq!(resolve_rule_based(&c).unwrap(), graph(EVERY));
}

#[test]
fn every_child_scopeless() {
    let s = to_scopeless(&graph(EVERY)).unwrap();
    assert_eq!(s, graph(EVERY_SCOPELESS));
    assert_eq!(s.membership_edges().count(), 1);
}

#[test]
fn every_child_projection() {
    let d = project(&graph(EVERY), &alignment(EVERY_ALIGN)).unwrap();
    assert_eq!(d, read_scope_file(EVERY_SCOPE).unwrap().remove(0));
    let labels: Vec<String> = d
        .edges()
        .iter()
        .map(|e| format!("{}>{}:{}", e.head, e.dependent, e.label))
        .collect();
    assert_eq!(labels, ["1>2:scope_b2", "1>3:scope_b3", "1>4:scope_b3"]);
}

#[test]
fn every_child_recovered_from_dependencies() {
    let g = graph(EVERY);
    let a = alignment(EVERY_ALIGN);
    let d = read_scope_file(EVERY_SCOPE).unwrap().remove(0);
    let back = resolve_with_dependencies(&graph(EVERY_SCOPELESS), &d, &a).unwrap();
    assert_eq!(back, g);
    assert_eq!(smatch_score(&g, &back, 16, 0).f1, 1.0);
}

#[test]
fn every_child_decomposability() {
    let g = graph(EVERY);
    let a = alignment(EVERY_ALIGN);
    let p = EdgeAttachmentPolicy::default();
    assert!(matches!(
        find_am_tree(&g, &a, &p, DEFAULT_BUDGET),
        Err(DecomposeError::NotDecomposable(FailureKind::NoTree))
    ));
    let s = to_scopeless(&g).unwrap();
    let tree = find_am_tree(&s, &a, &p, DEFAULT_BUDGET).unwrap();
    assert!(is_isomorphic(&tree.evaluate_to_drg().unwrap(), &s));
}

#[test]
fn all_children_projection() {
    let g = graph(include_str!("../../../testdata/all_children.penman"));
    assert!(is_well_formed(&g, Mode::Full));
    let a = alignment(include_str!("../../../testdata/all_children.align.jsonl"));
    let d = project(&g, &a).unwrap();
    let expected = read_scope_file(include_str!("../../../testdata/all_children.scope"))
        .unwrap()
        .remove(0);
    assert_eq!(d, expected);
    let labels: BTreeSet<String> = d.edges().iter().map(|e| e.label.to_string()).collect();
    assert!(labels.contains("scope_b2_b2") && labels.contains("scope_b3_b2"));
    assert_eq!(d.edges().len(), 7);
}

#[test]
fn little_cat_tree_evaluates_to_graph() {
    let tree = read_am_trees(include_str!("../../../testdata/little_cat.amtree.jsonl"))
        .unwrap()
        .remove(0);
    let g = graph(include_str!("../../../testdata/little_cat.penman"));
    assert!(is_isomorphic(&tree.evaluate_to_drg().unwrap(), &g));
}

#[test]
fn little_cat_tree_is_found() {
    let g = graph(include_str!("../../../testdata/little_cat.penman"));
    let a = alignment(include_str!("../../../testdata/little_cat.align.jsonl"));
    let found = find_am_tree(&g, &a, &EdgeAttachmentPolicy::default(), DEFAULT_BUDGET).unwrap();
    let shape = |edges: &[algebra::AmEdge]| -> BTreeSet<(usize, usize, bool)> {
        edges
            .iter()
            .map(|e| (e.head, e.dependent, e.op.is_app()))
            .collect()
    };
    let expected = read_am_trees(include_str!("../../../testdata/little_cat.amtree.jsonl"))
        .unwrap()
        .remove(0);
    assert_eq!(shape(&found.edges), shape(&expected.edges));
    assert!(is_isomorphic(&found.evaluate_to_drg().unwrap(), &g));
}

#[test]
fn lenient_and_strict_formats_agree() {
    let lenient = include_str!("../../../testdata/who_defeated.lenient.penman");
    let strict = include_str!("../../../testdata/who_defeated.strict.penman");
    assert_eq!(graph(lenient), graph(strict));
    assert_eq!(
        normalize_whitespace(&lenient_to_strict(lenient).unwrap()).unwrap(),
        normalize_whitespace(strict).unwrap()
    );
}

#[test]
fn lipstick_coreference_round_trip() {
    let g = graph(include_str!("../../../testdata/lipstick.penman"));
    let pre = graph(include_str!("../../../testdata/lipstick.pre.penman"));
    assert_eq!(preprocess_coref(&g), pre);
    let back = postprocess_coref(&pre);
    assert_eq!(back, g);
    assert!(back.edges().contains(&DrgEdge::new(
        NodeId::synset(3),
        NodeId::synset(0),
        EdgeLabel::Ana
    )));
}
