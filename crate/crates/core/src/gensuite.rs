//! Random well-formed DRGs with alignments.
//!
//! The box tree is grown first: every new box hangs below an existing one,
//! either alone (owned by a fresh `not` token) or as a negation pair owned
//! by a single `every` token. Predicates are then dropped into random boxes
//! and linked by role edges that always point from an earlier predicate to
//! a later one, so the role graph is acyclic. Some tokens own two nodes,
//! some predicates get a constant, and a coreferent pair may be added.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alignment::Alignment;
use crate::drg::{canonical_box_numbers, Drg, DrgEdge, EdgeLabel, NodeId, NodeKind, Pos};

pub const MAX_BOXES: usize = 6;
pub const MAX_PREDICATES: usize = 12;

const NOUNS: &[&str] = &[
    "cat", "dog", "child", "house", "tree", "book", "city", "river",
];
const VERBS: &[&str] = &[
    "sleep", "see", "give", "want", "run", "eat", "build", "read",
];
const ADJECTIVES: &[&str] = &["little", "red", "old", "happy"];
const ADVERBS: &[&str] = &["often", "quickly", "again"];
const BOX_RELATIONS: &[&str] = &[
    "NEGATION",
    "CONTINUATION",
    "POSSIBILITY",
    "NECESSITY",
    "CONDITION",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// Upper bound on the number of boxes, 1 to 6.
    pub max_boxes: usize,
    /// Upper bound on the number of tokens carrying predicates, 1 to 12.
    pub max_predicates: usize,
    pub roles: Vec<String>,
    pub coref_probability: f64,
    /// Chance that a predicate token also owns a second node below it.
    pub pair_probability: f64,
    /// Chance that a predicate gets a `Name` constant.
    pub constant_probability: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_boxes: 4,
            max_predicates: 6,
            roles: [
                "Agent",
                "Patient",
                "Theme",
                "Experiencer",
                "Recipient",
                "Topic",
                "Destination",
                "Attribute",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            coref_probability: 0.2,
            pair_probability: 0.25,
            constant_probability: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("max_boxes must be between 1 and {MAX_BOXES}")]
    Boxes,
    #[error("max_predicates must be between 1 and {MAX_PREDICATES}")]
    Predicates,
    #[error("the role inventory is empty")]
    NoRoles,
    #[error("probabilities must lie in [0, 1]")]
    Probability,
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(1..=MAX_BOXES).contains(&self.max_boxes) {
            return Err(GenError::Boxes);
        }
        if !(1..=MAX_PREDICATES).contains(&self.max_predicates) {
            return Err(GenError::Predicates);
        }
        if self.roles.is_empty() {
            return Err(GenError::NoRoles);
        }
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(self.coref_probability)
            && ok(self.pair_probability)
            && ok(self.constant_probability))
        {
            return Err(GenError::Probability);
        }
        Ok(())
    }
}

struct Builder {
    rng: ChaCha8Rng,
    nodes: Vec<(NodeId, NodeKind)>,
    edges: Vec<DrgEdge>,
    words: Vec<String>,
    align: BTreeMap<NodeId, usize>,
    boxes: Vec<NodeId>,
    synsets: u32,
    constants: u32,
}

impl Builder {
    fn token(&mut self, word: String) -> usize {
        self.words.push(word);
        self.words.len()
    }

    fn new_box(&mut self, token: usize) -> NodeId {
        let b = NodeId::boxed(self.boxes.len() as u32);
        self.nodes.push((b, NodeKind::Box));
        self.boxes.push(b);
        self.align.insert(b, token);
        b
    }

    fn new_synset(&mut self, kind: NodeKind, token: usize) -> NodeId {
        let s = NodeId::synset(self.synsets);
        self.synsets += 1;
        self.nodes.push((s, kind));
        self.align.insert(s, token);
        let b = *self.boxes.choose(&mut self.rng).expect("root box exists");
        self.edges.push(DrgEdge::scope(b, s));
        s
    }

    fn random_synset(&mut self) -> NodeKind {
        let (pos, lemmas) = *[
            (Pos::Noun, NOUNS),
            (Pos::Verb, VERBS),
            (Pos::Adjective, ADJECTIVES),
            (Pos::Adverb, ADVERBS),
        ]
        .choose(&mut self.rng)
        .expect("non-empty");
        let lemma = lemmas.choose(&mut self.rng).expect("non-empty");
        NodeKind::synset(lemma, pos, "01")
    }
}

/// One random graph. The same seed and parameters always give the same
/// graph and alignment. Boxes are numbered canonically (`b0` is the root)
/// and constants in the order the strict Penman form lists them.
///
/// # Panics
///
/// When `params` fails [`GenParams::validate`].
pub fn generate(seed: u64, params: &GenParams) -> (Drg, Alignment) {
    params
        .validate()
        .expect("generator parameters out of range");
    let mut g = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
        edges: Vec::new(),
        words: Vec::new(),
        align: BTreeMap::new(),
        boxes: Vec::new(),
        synsets: 0,
        constants: 0,
    };
    g.boxes.push(NodeId::boxed(0));
    g.nodes.push((NodeId::boxed(0), NodeKind::Box));
    g.align.insert(NodeId::boxed(0), 0);

    let box_target = g.rng.gen_range(1..=params.max_boxes);
    while g.boxes.len() < box_target {
        let parent = *g.boxes.choose(&mut g.rng).expect("root box exists");
        if box_target - g.boxes.len() >= 2 && g.rng.gen_bool(0.5) {
            let t = g.token(format!("every{}", g.words.len()));
            let first = g.new_box(t);
            let second = g.new_box(t);
            g.edges.push(DrgEdge::role(parent, "NEGATION", first));
            g.edges.push(DrgEdge::role(first, "NEGATION", second));
        } else {
            let t = g.token(format!("not{}", g.words.len()));
            let b = g.new_box(t);
            let rel = *BOX_RELATIONS.choose(&mut g.rng).expect("non-empty");
            g.edges.push(DrgEdge::role(parent, rel, b));
        }
    }

    let predicates = g.rng.gen_range(1..=params.max_predicates);
    let mut heads: Vec<NodeId> = Vec::new();
    for _ in 0..predicates {
        let t = g.token(format!("w{}", g.words.len()));
        let kind = g.random_synset();
        let n = g.new_synset(kind, t);
        if !heads.is_empty() && g.rng.gen_bool(0.8) {
            let parent = *heads.choose(&mut g.rng).expect("non-empty");
            let role = params.roles.choose(&mut g.rng).expect("validated").clone();
            g.edges.push(DrgEdge::role(parent, &role, n));
        }
        heads.push(n);
        if g.rng.gen_bool(params.pair_probability) {
            let kind = g.random_synset();
            let second = g.new_synset(kind, t);
            g.edges.push(DrgEdge::role(n, "Role", second));
        }
        if g.rng.gen_bool(params.constant_probability) {
            let c = NodeId::constant(g.constants);
            g.constants += 1;
            g.nodes
                .push((c, NodeKind::constant(format!("N{}", c.index))));
            g.edges.push(DrgEdge::role(n, "Name", c));
        }
    }

    if g.rng.gen_bool(params.coref_probability) {
        let mut pair = Vec::new();
        for _ in 0..2 {
            let t = g.token(format!("she{}", g.words.len()));
            let n = g.new_synset(NodeKind::synset("female", Pos::Noun, "02"), t);
            let parent = *heads.choose(&mut g.rng).expect("at least one predicate");
            let role = params.roles.choose(&mut g.rng).expect("validated").clone();
            g.edges.push(DrgEdge::role(parent, &role, n));
            pair.push(n);
        }
        g.edges.push(DrgEdge::new(pair[1], pair[0], EdgeLabel::Ana));
    }

    // shuffle the surface order of the non-START tokens
    let mut order: Vec<usize> = (1..=g.words.len()).collect();
    order.shuffle(&mut g.rng);
    let position: BTreeMap<usize, usize> =
        order.iter().enumerate().map(|(i, t)| (*t, i + 1)).collect();
    let words: Vec<String> = order.iter().map(|t| g.words[t - 1].clone()).collect();
    let mut alignment = Alignment::new(words);
    for (n, t) in &g.align {
        let t = if *t == 0 { 0 } else { position[t] };
        alignment = alignment.align(*n, t);
    }

    let drg = Drg::new(g.nodes, g.edges).expect("generated edges join generated nodes");
    let box_tokens: BTreeMap<NodeId, usize> =
        drg.boxes().map(|b| (b, alignment.nodes[&b])).collect();
    let rename: BTreeMap<NodeId, NodeId> = canonical_box_numbers(&drg, Some(&box_tokens))
        .into_iter()
        .map(|(b, k)| (b, NodeId::boxed(k - 1)))
        .collect();
    let drg = crate::drg::rename_nodes(&drg, &rename);
    // number constants in strict document order, where they have no ids
    let text = crate::penman::serialize_strict(&drg).expect("generated graphs are fully scoped");
    let drg = crate::penman::parse_penman(&text).expect("serialised graphs read back");
    (drg, alignment.renamed(&rename))
}

/// Graphs for every seed in `seeds`.
pub fn generate_corpus(
    seeds: impl IntoIterator<Item = u64>,
    params: &GenParams,
) -> Vec<(Drg, Alignment)> {
    seeds.into_iter().map(|s| generate(s, params)).collect()
}

/// A noisy copy of `g` for scorer tests: `edits` random changes among
/// relabelling a synset, renaming a role, moving a node to another box,
/// dropping a role edge and changing a constant. The result keeps the node
/// set but need not be well-formed.
pub fn perturb(g: &Drg, seed: u64, edits: usize) -> Drg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: BTreeMap<NodeId, NodeKind> = g.nodes().clone();
    let mut edges: Vec<DrgEdge> = g.edges().to_vec();
    let boxes: Vec<NodeId> = g.boxes().collect();
    for _ in 0..edits {
        match rng.gen_range(0..5) {
            0 => {
                let synsets: Vec<NodeId> = nodes
                    .iter()
                    .filter(|(_, k)| k.as_synset().is_some())
                    .map(|(n, _)| *n)
                    .collect();
                if let Some(n) = synsets.choose(&mut rng) {
                    let lemma = NOUNS.choose(&mut rng).expect("non-empty");
                    nodes.insert(*n, NodeKind::synset(lemma, Pos::Noun, "01"));
                }
            }
            1 => {
                let roles: Vec<usize> = (0..edges.len())
                    .filter(|i| edges[*i].label.is_role())
                    .collect();
                if let Some(i) = roles.choose(&mut rng) {
                    let name = ["Agent", "Patient", "Theme", "Topic"]
                        .choose(&mut rng)
                        .expect("non-empty");
                    edges[*i].label = EdgeLabel::role(name);
                }
            }
            2 => {
                let members: Vec<usize> = (0..edges.len())
                    .filter(|i| edges[*i].label.is_scope())
                    .collect();
                if let (Some(i), Some(b)) = (members.choose(&mut rng), boxes.choose(&mut rng)) {
                    edges[*i].source = *b;
                }
            }
            3 => {
                let roles: Vec<usize> = (0..edges.len())
                    .filter(|i| edges[*i].label.is_role() && !g.is_box(edges[*i].source))
                    .collect();
                if let Some(i) = roles.choose(&mut rng) {
                    edges.remove(*i);
                }
            }
            _ => {
                let constants: Vec<NodeId> = nodes
                    .iter()
                    .filter(|(_, k)| k.is_constant())
                    .map(|(n, _)| *n)
                    .collect();
                if let Some(c) = constants.choose(&mut rng) {
                    nodes.insert(*c, NodeKind::constant(format!("X{}", rng.gen_range(0..3))));
                }
            }
        }
    }
    edges.sort();
    edges.dedup();
    Drg::from_parts(nodes, edges).expect("same node set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drg::{is_well_formed, Mode};

    #[test]
    fn deterministic() {
        let p = GenParams::default();
        assert_eq!(generate(7, &p), generate(7, &p));
    }

    #[test]
    fn seed_zero_is_well_formed() {
        let (g, a) = generate(0, &GenParams::default());
        assert!(is_well_formed(&g, Mode::Full));
        a.owners(&g).unwrap();
    }

    #[test]
    fn single_box_when_asked() {
        let p = GenParams {
            max_boxes: 1,
            ..GenParams::default()
        };
        for seed in 0..50 {
            assert_eq!(generate(seed, &p).0.box_count(), 1);
        }
    }

    #[test]
    fn canonical_box_ids() {
        for seed in 0..50 {
            let (g, a) = generate(seed, &GenParams::default());
            let tokens: BTreeMap<NodeId, usize> = g.boxes().map(|b| (b, a.nodes[&b])).collect();
            for (b, k) in canonical_box_numbers(&g, Some(&tokens)) {
                assert_eq!(b, NodeId::boxed(k - 1));
            }
        }
    }

    #[test]
    fn perturbation_keeps_nodes() {
        let (g, _) = generate(3, &GenParams::default());
        let p = perturb(&g, 1, 3);
        assert_eq!(p.node_count(), g.node_count());
        assert_eq!(perturb(&g, 1, 3), p);
        assert_eq!(perturb(&g, 1, 0), g);
    }

    #[test]
    fn bad_params() {
        let p = GenParams {
            max_boxes: 7,
            ..GenParams::default()
        };
        assert_eq!(p.validate(), Err(GenError::Boxes));
        let p = GenParams {
            roles: vec![],
            ..GenParams::default()
        };
        assert_eq!(p.validate(), Err(GenError::NoRoles));
    }
}
