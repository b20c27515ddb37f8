//! Brute-force oracles for the search procedures.

use std::collections::{BTreeMap, BTreeSet};

use drg_core::algebra::{AmDependencyTree, AmEdge, Operation, SourceName};
use drg_core::decompose::{
    find_am_tree_with, partition, DecomposeError, EdgeAttachmentPolicy, MemberMode, SearchConfig,
};
use drg_core::gensuite::{generate, perturb, GenParams};
use drg_core::smatch::{scope_only_score_with, smatch_score, ScopeMapping, TripleSet};
use drg_core::*;

// ---------------------------------------------------------------------------
// SMATCH

type Triple = (String, String, String);

/// Triples with variables renamed through `f`; unmapped variables make
/// their triples unmatchable.
fn named(t: &TripleSet, f: &dyn Fn(usize) -> Option<String>) -> Vec<Option<Triple>> {
    let mut out = Vec::new();
    for (v, c) in &t.instances {
        out.push(f(*v).map(|v| ("instance".to_string(), v, c.clone())));
    }
    for (v, l, c) in &t.attributes {
        out.push(f(*v).map(|v| (l.clone(), v, format!("={c}"))));
    }
    for (l, a, b) in &t.relations {
        out.push(f(*a).zip(f(*b)).map(|(a, b)| (l.clone(), a, b)));
    }
    out
}

fn matches_under(gold: &TripleSet, pred: &TripleSet, map: &[Option<usize>]) -> usize {
    let g = named(gold, &|v| map[v].map(|w| format!("x{w}")));
    let p = named(pred, &|v| Some(format!("x{v}")));
    let mut pool: Vec<Triple> = p.into_iter().flatten().collect();
    let mut hit = 0;
    for t in g.into_iter().flatten() {
        if let Some(i) = pool.iter().position(|u| *u == t) {
            pool.swap_remove(i);
            hit += 1;
        }
    }
    hit
}

fn injective_maps(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn go(
        i: usize,
        n: usize,
        m: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(i + 1, n, m, used, cur, out);
        cur.pop();
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                go(i + 1, n, m, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

fn brute_force_best(gold: &TripleSet, pred: &TripleSet) -> usize {
    injective_maps(gold.vars.len(), pred.vars.len())
        .iter()
        .map(|map| matches_under(gold, pred, map))
        .max()
        .unwrap_or(0)
}

fn small_pairs(count: usize) -> Vec<(Drg, Drg)> {
    let p = GenParams {
        max_boxes: 2,
        max_predicates: 3,
        pair_probability: 0.2,
        coref_probability: 0.0,
        ..GenParams::default()
    };
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        let (g, _) = generate(seed, &p);
        let h = perturb(&g, seed ^ 0x5eed, 1 + (seed % 3) as usize);
        seed += 1;
        if TripleSet::from_drg(&g).vars.len() <= 6 && TripleSet::from_drg(&h).vars.len() <= 6 {
            out.push((g, h));
        }
    }
    out
}

#[test]
fn hill_climbing_reaches_brute_force_optimum() {
    for (g, h) in small_pairs(60) {
        let (gt, ht) = (TripleSet::from_drg(&g), TripleSet::from_drg(&h));
        let best = brute_force_best(&gt, &ht);
        let r = smatch_score(&g, &h, 16, 0);
        assert_eq!(r.matched, best);
    }
}

#[test]
fn reported_mapping_explains_the_count() {
    for (g, h) in small_pairs(20) {
        let (gt, ht) = (TripleSet::from_drg(&g), TripleSet::from_drg(&h));
        let r = smatch_score(&g, &h, 16, 0);
        let map: Vec<Option<usize>> = gt
            .vars
            .iter()
            .map(|v| {
                r.mapping
                    .get(v)
                    .map(|w| ht.vars.iter().position(|x| x == w).unwrap())
            })
            .collect();
        assert_eq!(matches_under(&gt, &ht, &map), r.matched);
    }
}

fn three_boxes() -> Drg {
    let (b, s) = (NodeId::boxed, NodeId::synset);
    Drg::new(
        [
            (b(0), NodeKind::Box),
            (b(1), NodeKind::Box),
            (b(2), NodeKind::Box),
            (s(0), NodeKind::synset("cat", Pos::Noun, "01")),
            (s(1), NodeKind::synset("sleep", Pos::Verb, "01")),
            (s(2), NodeKind::synset("dog", Pos::Noun, "01")),
        ],
        [
            DrgEdge::role(b(0), "NEGATION", b(1)),
            DrgEdge::role(b(1), "NEGATION", b(2)),
            DrgEdge::scope(b(1), s(0)),
            DrgEdge::scope(b(2), s(1)),
            DrgEdge::scope(b(0), s(2)),
            DrgEdge::role(s(1), "Agent", s(0)),
            DrgEdge::role(s(1), "Theme", s(2)),
        ],
    )
    .unwrap()
}

#[test]
fn scope_score_of_one_moved_membership() {
    let g = three_boxes();
    let mut edges = g.edges().to_vec();
    let i = edges
        .iter()
        .position(|e| *e == DrgEdge::scope(NodeId::boxed(2), NodeId::synset(1)))
        .unwrap();
    edges[i].source = NodeId::boxed(1);
    let h = g.with_edges(edges).unwrap();
    let (gt, ht) = (TripleSet::from_drg(&g), TripleSet::from_drg(&h));
    let (gs, hs) = (gt.scope_only(), ht.scope_only());
    let f1 = |m: usize| 2.0 * m as f64 / (gs.len() + hs.len()) as f64;

    // shared mapping: the scope triples matched under every optimal full
    // mapping (here the identity is the only one)
    let best = brute_force_best(&gt, &ht);
    let optimal: Vec<Vec<Option<usize>>> = injective_maps(gt.vars.len(), ht.vars.len())
        .into_iter()
        .filter(|m| matches_under(&gt, &ht, m) == best)
        .collect();
    assert_eq!(optimal.len(), 1);
    let shared = matches_under(&gs, &hs, &optimal[0]);
    assert_eq!(
        scope_only_score_with(&g, &h, 16, 0, ScopeMapping::Shared),
        f1(shared)
    );

    let reopt = brute_force_best(&gs, &hs);
    assert_eq!(
        scope_only_score_with(&g, &h, 16, 0, ScopeMapping::Reoptimized),
        f1(reopt)
    );
    assert!(reopt >= shared);
}

// ---------------------------------------------------------------------------
// decomposability

/// Tries every dependency tree over the tokens, every operation on every
/// edge and every root choice. Placeholders are named after the node they
/// stand for, so sources merge exactly when they denote the same node.
fn brute_force_decomposable(g: &Drg, a: &Alignment, p: &EdgeAttachmentPolicy) -> bool {
    let part = partition(g, a, p).unwrap();
    let tokens: Vec<usize> = part.graphs.keys().copied().collect();
    let name = |n: NodeId| SourceName::new(&n.to_string()).unwrap();
    let k = tokens.len();
    if k == 1 {
        let lg = &part.graphs[&tokens[0]];
        return lg.placeholders.is_empty();
    }
    // every parent assignment; validity (single root, acyclic) is checked
    // by the tree itself
    let mut heads = vec![0usize; k];
    loop {
        if let Some(found) = try_heads(g, &part, &tokens, &heads, &name) {
            return found;
        }
        let mut i = 0;
        loop {
            if i == k {
                return false;
            }
            heads[i] += 1;
            if heads[i] <= k {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
    }
}

/// `heads[i] == 0` marks the root; otherwise the head is `tokens[heads[i] - 1]`.
fn try_heads(
    g: &Drg,
    part: &drg_core::decompose::Partition,
    tokens: &[usize],
    heads: &[usize],
    name: &dyn Fn(NodeId) -> SourceName,
) -> Option<bool> {
    if heads.iter().filter(|h| **h == 0).count() != 1 {
        return None;
    }
    if heads.iter().enumerate().any(|(i, h)| *h == i + 1) {
        return None;
    }
    let root_choices: Vec<Vec<NodeId>> = tokens
        .iter()
        .map(|t| part.graphs[t].owned.iter().copied().collect())
        .collect();
    let mut pick = vec![0usize; tokens.len()];
    loop {
        let roots: Vec<NodeId> = pick
            .iter()
            .enumerate()
            .map(|(i, j)| root_choices[i][*j])
            .collect();
        // with placeholders named after nodes, the source of an edge is
        // fixed by its operation
        let mut options: Vec<Vec<Operation>> = Vec::new();
        for (i, h) in heads.iter().enumerate() {
            if *h != 0 {
                options.push(vec![
                    Operation::App(name(roots[i])),
                    Operation::Mod(name(roots[h - 1])),
                ]);
            }
        }
        {
            let deps: Vec<usize> = (0..tokens.len()).filter(|i| heads[*i] != 0).collect();
            let mut choice = vec![0usize; deps.len()];
            loop {
                let edges: Vec<AmEdge> = deps
                    .iter()
                    .zip(&choice)
                    .enumerate()
                    .map(|(e, (i, c))| AmEdge {
                        head: tokens[heads[*i] - 1],
                        dependent: tokens[*i],
                        op: options[e][*c].clone(),
                    })
                    .collect();
                let constants = tokens
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let lg = &part.graphs[t];
                        let names: BTreeMap<NodeId, SourceName> =
                            lg.placeholders.iter().map(|n| (*n, name(*n))).collect();
                        (*t, lg.to_sgraph(g, roots[i], &names))
                    })
                    .collect();
                let tree = AmDependencyTree {
                    tokens: (0..=*tokens.iter().max().unwrap())
                        .map(|i| format!("t{i}"))
                        .collect(),
                    constants,
                    edges,
                };
                if let Ok(back) = tree.evaluate_to_drg() {
                    if is_isomorphic(&back, g) {
                        return Some(true);
                    }
                }
                let mut j = 0;
                loop {
                    if j == choice.len() {
                        break;
                    }
                    choice[j] += 1;
                    if choice[j] < options[j].len() {
                        break;
                    }
                    choice[j] = 0;
                    j += 1;
                }
                if j == choice.len() {
                    break;
                }
            }
        }
        let mut i = 0;
        loop {
            if i == pick.len() {
                return None;
            }
            pick[i] += 1;
            if pick[i] < root_choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn search_agrees_with_brute_force() {
    let params = GenParams {
        max_boxes: 2,
        max_predicates: 3,
        pair_probability: 0.3,
        constant_probability: 0.2,
        coref_probability: 0.0,
        ..GenParams::default()
    };
    let config = SearchConfig::default();
    let mut checked = 0;
    let mut decomposable = 0;
    for seed in 0..400u64 {
        let (g, a) = generate(seed, &params);
        let tokens: BTreeSet<usize> = a.nodes.values().copied().collect();
        if tokens.len() > 5 || g.node_count() > config.inventory.len() {
            continue;
        }
        for mode in [MemberMode::App, MemberMode::Mod] {
            let p = EdgeAttachmentPolicy::default().with_member_mode(mode);
            let expected = brute_force_decomposable(&g, &a, &p);
            let got = match find_am_tree_with(&g, &a, &p, &config) {
                Ok(_) => true,
                Err(DecomposeError::NotDecomposable(_)) => false,
                Err(e) => panic!("seed {seed}: {e}"),
            };
            assert_eq!(got, expected, "seed {seed}, {mode:?}");
            checked += 1;
            decomposable += got as usize;
        }
    }
    assert!(checked >= 100, "only {checked} small graphs");
    assert!(decomposable > 0 && decomposable < checked);
}
