//! SMATCH scoring of DRGs.
//!
//! A graph is read as the triples of its strict Penman form: one instance
//! triple per variable, attribute triples for constants that hang off a
//! single parent, relation triples for every other edge, and a `TOP`
//! attribute on the root box. The best variable mapping is found by hill
//! climbing from a concept-matching start plus a number of random starts.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::drg::{is_well_formed, Drg, EdgeLabel, Mode, NodeId, NodeKind};
use crate::penman::{parse_penman_at, split_blocks, PenmanError};

pub const DEFAULT_RESTARTS: usize = 16;

const MEMBER: &str = "member";

fn relation_name(label: &EdgeLabel) -> String {
    match label {
        EdgeLabel::Scope => MEMBER.to_string(),
        other => other.relation().to_string(),
    }
}

/// Triples of one graph, with variables numbered `0..vars.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleSet {
    pub vars: Vec<NodeId>,
    pub instances: Vec<(usize, String)>,
    pub attributes: Vec<(usize, String, String)>,
    pub relations: Vec<(String, usize, usize)>,
}

impl TripleSet {
    pub fn from_drg(g: &Drg) -> Self {
        let inline = |n: NodeId| g.is_constant(n) && g.incoming(n).count() == 1;
        let vars: Vec<NodeId> = g.nodes().keys().copied().filter(|n| !inline(*n)).collect();
        let index: BTreeMap<NodeId, usize> =
            vars.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let instances = vars
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let concept = match g.kind(*n).expect("node exists") {
                    NodeKind::Box => "box".to_string(),
                    NodeKind::Synset(s) => s.to_string(),
                    NodeKind::Constant(v) => format!("\"{v}\""),
                };
                (i, concept)
            })
            .collect();
        let mut attributes = Vec::new();
        let mut relations = Vec::new();
        for e in g.edges() {
            let label = relation_name(&e.label);
            if inline(e.target) {
                let value = match g.kind(e.target) {
                    Some(NodeKind::Constant(v)) => v.clone(),
                    _ => unreachable!("inline nodes are constants"),
                };
                attributes.push((index[&e.source], label, value));
            } else {
                relations.push((label, index[&e.source], index[&e.target]));
            }
        }
        if let Some(r) = g.root() {
            attributes.push((index[&r], "TOP".to_string(), "top".to_string()));
        }
        attributes.sort();
        relations.sort();
        TripleSet {
            vars,
            instances,
            attributes,
            relations,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len() + self.attributes.len() + self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Only the box instances and the membership relations.
    pub fn scope_only(&self) -> TripleSet {
        TripleSet {
            vars: self.vars.clone(),
            instances: self
                .instances
                .iter()
                .filter(|(_, c)| c == "box")
                .cloned()
                .collect(),
            attributes: Vec::new(),
            relations: self
                .relations
                .iter()
                .filter(|(l, _, _)| l == MEMBER)
                .cloned()
                .collect(),
        }
    }

    /// Number of triples of `self` matched in `other` under `mapping`
    /// (index `i` of `self` maps to `mapping[i]` of `other`). Each triple of
    /// `other` is used at most once.
    pub fn matched(&self, other: &TripleSet, mapping: &[Option<usize>]) -> usize {
        fn count<T: Ord + Clone>(mine: Vec<T>, theirs: &[T]) -> usize {
            let mut pool: BTreeMap<T, usize> = BTreeMap::new();
            for t in theirs {
                *pool.entry(t.clone()).or_insert(0) += 1;
            }
            let mut hit = 0;
            for t in mine {
                if let Some(c) = pool.get_mut(&t) {
                    if *c > 0 {
                        *c -= 1;
                        hit += 1;
                    }
                }
            }
            hit
        }
        let inst = count(
            self.instances
                .iter()
                .filter_map(|(v, c)| mapping[*v].map(|w| (w, c.clone())))
                .collect(),
            &other.instances,
        );
        let attr = count(
            self.attributes
                .iter()
                .filter_map(|(v, l, c)| mapping[*v].map(|w| (w, l.clone(), c.clone())))
                .collect(),
            &other.attributes,
        );
        let rel = count(
            self.relations
                .iter()
                .filter_map(|(l, a, b)| Some((l.clone(), mapping[*a]?, mapping[*b]?)))
                .collect(),
            &other.relations,
        );
        inst + attr + rel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(matched: usize, gold: usize, pred: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (precision, recall) = if gold == 0 && pred == 0 {
            (1.0, 1.0)
        } else {
            (ratio(matched, pred), ratio(matched, gold))
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmatchResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub gold_triples: usize,
    pub pred_triples: usize,
    /// Gold node to predicted node.
    pub mapping: BTreeMap<NodeId, NodeId>,
}

/// Match counts split so that a single reassignment can be scored locally:
/// `node[i][j]` counts the instance, attribute and self-loop triples that
/// match when gold `i` maps to predicted `j`, and `pair[i][j]` lists the
/// `(k, l)` pairs whose joint mapping completes a relation triple.
struct Weights {
    m: usize,
    node: Vec<i64>,
    pair: Vec<Vec<(usize, usize)>>,
}

impl Weights {
    fn new(gold: &TripleSet, pred: &TripleSet) -> Self {
        let (n, m) = (gold.vars.len(), pred.vars.len());
        let mut node = vec![0i64; n * m];
        let mut pair: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n * m];
        for (i, c) in &gold.instances {
            for (j, d) in &pred.instances {
                if c == d {
                    node[i * m + j] += 1;
                }
            }
        }
        // multisets: a gold attribute can match at most as many copies as
        // exist, which the per-pair count below already respects
        let mut pa: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
        for (v, l, c) in &pred.attributes {
            pa.entry((l, c)).or_default().push(*v);
        }
        let mut ga: BTreeMap<(usize, &str, &str), usize> = BTreeMap::new();
        for (v, l, c) in &gold.attributes {
            *ga.entry((*v, l, c)).or_insert(0) += 1;
        }
        for ((i, l, c), gcount) in ga {
            if let Some(ws) = pa.get(&(l, c)) {
                let mut per: BTreeMap<usize, usize> = BTreeMap::new();
                for w in ws {
                    *per.entry(*w).or_insert(0) += 1;
                }
                for (j, pcount) in per {
                    node[i * m + j] += gcount.min(pcount) as i64;
                }
            }
        }
        let mut pr: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
        for (l, a, b) in &pred.relations {
            pr.entry(l).or_default().push((*a, *b));
        }
        for (l, a, b) in &gold.relations {
            let Some(cands) = pr.get(l.as_str()) else {
                continue;
            };
            for (c, d) in cands {
                if a == b {
                    if c == d {
                        node[a * m + c] += 1;
                    }
                } else if c != d {
                    pair[a * m + c].push((*b, *d));
                    pair[b * m + d].push((*a, *c));
                }
            }
        }
        Weights { m, node, pair }
    }

    /// Score contributed by the gold variables in `vars`; relations between
    /// two of them are counted once.
    fn local(&self, map: &[Option<usize>], vars: &[usize]) -> i64 {
        let mut total = 0;
        for &v in vars {
            let Some(j) = map[v] else { continue };
            total += self.node[v * self.m + j];
            for &(k, l) in &self.pair[v * self.m + j] {
                if map[k] == Some(l) && (!vars.contains(&k) || k > v) {
                    total += 1;
                }
            }
        }
        total
    }

    fn total(&self, map: &[Option<usize>]) -> i64 {
        let all: Vec<usize> = (0..map.len()).collect();
        self.local(map, &all)
    }
}

/// Steepest-ascent hill climbing over reassignments and swaps.
fn climb(w: &Weights, map: &mut [Option<usize>]) {
    let (n, m) = (map.len(), w.m);
    loop {
        let mut used: Vec<Option<usize>> = vec![None; m];
        for (i, j) in map.iter().enumerate() {
            if let Some(j) = j {
                used[*j] = Some(i);
            }
        }
        let mut best: (i64, usize, usize) = (0, 0, 0);
        for i in 0..n {
            for (j, owner) in used.iter().enumerate() {
                if map[i] == Some(j) {
                    continue;
                }
                let gain = match *owner {
                    None => {
                        let before = w.local(map, &[i]);
                        let old = map[i];
                        map[i] = Some(j);
                        let after = w.local(map, &[i]);
                        map[i] = old;
                        after - before
                    }
                    Some(k) => {
                        let before = w.local(map, &[i, k]);
                        let (oi, ok) = (map[i], map[k]);
                        map[i] = ok;
                        map[k] = oi;
                        let after = w.local(map, &[i, k]);
                        map[i] = oi;
                        map[k] = ok;
                        after - before
                    }
                };
                if gain > best.0 {
                    best = (gain, i, j);
                }
            }
        }
        if best.0 <= 0 {
            return;
        }
        let (_, i, j) = best;
        match used[j] {
            None => map[i] = Some(j),
            Some(k) => {
                map[k] = map[i];
                map[i] = Some(j);
            }
        }
    }
}

fn smart_start(gold: &TripleSet, pred: &TripleSet) -> Vec<Option<usize>> {
    let mut map = vec![None; gold.vars.len()];
    let mut taken = BTreeSet::new();
    for (i, c) in &gold.instances {
        if let Some((j, _)) = pred
            .instances
            .iter()
            .find(|(j, d)| d == c && !taken.contains(j))
        {
            map[*i] = Some(*j);
            taken.insert(*j);
        }
    }
    map
}

fn random_start(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<Option<usize>> {
    let mut targets: Vec<usize> = (0..m).collect();
    targets.shuffle(rng);
    (0..n).map(|i| targets.get(i).copied()).collect()
}

/// Best mapping found from a concept-matching start and `restarts` random
/// starts. Ties keep the earliest start.
pub fn best_mapping(
    gold: &TripleSet,
    pred: &TripleSet,
    restarts: usize,
    seed: u64,
) -> (Vec<Option<usize>>, usize) {
    let w = Weights::new(gold, pred);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![smart_start(gold, pred)];
    for _ in 0..restarts {
        starts.push(random_start(gold.vars.len(), pred.vars.len(), &mut rng));
    }
    let mut best: Option<(i64, Vec<Option<usize>>)> = None;
    for mut map in starts {
        climb(&w, &mut map);
        let score = w.total(&map);
        if best.as_ref().map(|(s, _)| score > *s).unwrap_or(true) {
            best = Some((score, map));
        }
    }
    let (score, map) = best.expect("at least one start");
    (map, score as usize)
}

pub fn smatch_score(gold: &Drg, pred: &Drg, restarts: usize, seed: u64) -> SmatchResult {
    let (gt, pt) = (TripleSet::from_drg(gold), TripleSet::from_drg(pred));
    let (map, matched) = best_mapping(&gt, &pt, restarts, seed);
    let prf = Prf::from_counts(matched, gt.len(), pt.len());
    SmatchResult {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        matched,
        gold_triples: gt.len(),
        pred_triples: pt.len(),
        mapping: map
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (gt.vars[i], pt.vars[j])))
            .collect(),
    }
}

/// Counts for the scope triples under the mapping of the full graph.
pub fn scope_counts(gold: &Drg, pred: &Drg, restarts: usize, seed: u64) -> (usize, usize, usize) {
    let (gt, pt) = (TripleSet::from_drg(gold), TripleSet::from_drg(pred));
    let (map, _) = best_mapping(&gt, &pt, restarts, seed);
    let (gs, ps) = (gt.scope_only(), pt.scope_only());
    (gs.matched(&ps, &map), gs.len(), ps.len())
}

/// How the scope-only score picks its variable mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScopeMapping {
    /// The best mapping for the whole graph.
    #[default]
    Shared,
    /// A mapping optimised for the scope triples alone.
    Reoptimized,
}

pub fn scope_only_score(gold: &Drg, pred: &Drg, restarts: usize, seed: u64) -> f64 {
    scope_only_score_with(gold, pred, restarts, seed, ScopeMapping::Shared)
}

pub fn scope_only_score_with(
    gold: &Drg,
    pred: &Drg,
    restarts: usize,
    seed: u64,
    mode: ScopeMapping,
) -> f64 {
    let (m, g, p) = match mode {
        ScopeMapping::Shared => scope_counts(gold, pred, restarts, seed),
        ScopeMapping::Reoptimized => {
            let gs = TripleSet::from_drg(gold).scope_only();
            let ps = TripleSet::from_drg(pred).scope_only();
            let (_, m) = best_mapping(&gs, &ps, restarts, seed);
            (m, gs.len(), ps.len())
        }
    };
    Prf::from_counts(m, g, p).f1
}

// ---------------------------------------------------------------------------
// corpora

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmatchError {
    #[error("gold graph {index}: {error}")]
    Gold { index: usize, error: PenmanError },
    #[error("gold graph {index} is not well-formed")]
    IllFormedGold { index: usize },
    #[error("{pred} predictions for {gold} gold graphs")]
    LengthMismatch { gold: usize, pred: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemScore {
    pub index: usize,
    pub boxes: usize,
    pub matched: usize,
    pub gold_triples: usize,
    pub pred_triples: usize,
    pub f1: f64,
    pub scope_matched: usize,
    pub scope_gold: usize,
    pub scope_pred: usize,
    /// Why the prediction counted as ill-formed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub name: String,
    pub count: usize,
    pub overall: Prf,
    pub scope: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub count: usize,
    pub overall: Prf,
    pub scope: Prf,
    /// Percentage of ill-formed predictions.
    pub err_rate: f64,
    pub buckets: Vec<Bucket>,
    pub items: Vec<ItemScore>,
}

const BUCKETS: [&str; 4] = ["#1", "#2", "#3", "#>=4"];

fn bucket_of(boxes: usize) -> usize {
    boxes.clamp(1, 4) - 1
}

/// Scores aligned gold and predicted graphs. A prediction that failed to
/// parse or is not a well-formed fully scoped DRG is scored as the empty
/// graph and counted in the error rate.
pub fn score_corpus(
    gold: &[Drg],
    pred: &[Result<Drg, String>],
    opts: ScoreOptions,
) -> Result<CorpusReport, SmatchError> {
    if gold.len() != pred.len() {
        return Err(SmatchError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let items: Vec<ItemScore> = gold
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(index, (g, p))| score_item(index, g, p, opts))
        .collect();
    Ok(CorpusReport::from_items(items))
}

pub fn score_item(index: usize, g: &Drg, p: &Result<Drg, String>, opts: ScoreOptions) -> ItemScore {
    let gt = TripleSet::from_drg(g);
    let gs = gt.scope_only();
    let checked = p.as_ref().map_err(Clone::clone).and_then(|p| {
        if is_well_formed(p, Mode::Full) {
            Ok(p)
        } else {
            Err("prediction is not a well-formed DRG".to_string())
        }
    });
    let (matched, pred_triples, scope_matched, scope_pred, error) = match checked {
        Ok(p) => {
            let pt = TripleSet::from_drg(p);
            let (map, matched) = best_mapping(&gt, &pt, opts.restarts, opts.seed);
            let ps = pt.scope_only();
            (matched, pt.len(), gs.matched(&ps, &map), ps.len(), None)
        }
        Err(e) => (0, 0, 0, 0, Some(e)),
    };
    ItemScore {
        index,
        boxes: g.box_count(),
        matched,
        gold_triples: gt.len(),
        pred_triples,
        f1: Prf::from_counts(matched, gt.len(), pred_triples).f1,
        scope_matched,
        scope_gold: gs.len(),
        scope_pred,
        error,
    }
}

impl CorpusReport {
    pub fn from_items(items: Vec<ItemScore>) -> Self {
        let sum = |it: &[&ItemScore]| {
            let f = |get: fn(&ItemScore) -> usize| it.iter().map(|i| get(i)).sum::<usize>();
            (
                Prf::from_counts(
                    f(|i| i.matched),
                    f(|i| i.gold_triples),
                    f(|i| i.pred_triples),
                ),
                Prf::from_counts(
                    f(|i| i.scope_matched),
                    f(|i| i.scope_gold),
                    f(|i| i.scope_pred),
                ),
            )
        };
        let all: Vec<&ItemScore> = items.iter().collect();
        let (overall, scope) = sum(&all);
        let errors = items.iter().filter(|i| i.error.is_some()).count();
        let err_rate = if items.is_empty() {
            0.0
        } else {
            100.0 * errors as f64 / items.len() as f64
        };
        let buckets = BUCKETS
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let members: Vec<&ItemScore> =
                    items.iter().filter(|i| bucket_of(i.boxes) == k).collect();
                let (overall, scope) = sum(&members);
                Bucket {
                    name: name.to_string(),
                    count: members.len(),
                    overall,
                    scope,
                }
            })
            .collect();
        CorpusReport {
            count: items.len(),
            overall,
            scope,
            err_rate,
            buckets,
            items,
        }
    }

    pub fn to_text(&self, scope_only: bool) -> String {
        let pick = |o: &Prf, s: &Prf| if scope_only { *s } else { *o };
        let p = pick(&self.overall, &self.scope);
        let mut out = format!(
            "graphs: {}\nprecision: {:.2}\nrecall: {:.2}\nf1: {:.2}\nerr: {:.1}\n",
            self.count,
            100.0 * p.precision,
            100.0 * p.recall,
            100.0 * p.f1,
            self.err_rate
        );
        out.push_str("boxes\tcount\tf1\tscope\n");
        for b in &self.buckets {
            out.push_str(&format!(
                "{}\t{}\t{:.2}\t{:.2}\n",
                b.name,
                b.count,
                100.0 * b.overall.f1,
                100.0 * b.scope.f1
            ));
        }
        out
    }
}

/// Parses Penman documents: gold errors abort, prediction errors are
/// scored.
pub fn score_texts(
    gold: &str,
    pred: &str,
    opts: ScoreOptions,
) -> Result<CorpusReport, SmatchError> {
    let gold_graphs = split_blocks(gold)
        .into_iter()
        .enumerate()
        .map(|(index, b)| {
            let g = parse_penman_at(&b.text, b.line)
                .map_err(|error| SmatchError::Gold { index, error })?;
            if !is_well_formed(&g, Mode::Full) {
                return Err(SmatchError::IllFormedGold { index });
            }
            Ok(g)
        })
        .collect::<Result<Vec<Drg>, SmatchError>>()?;
    let preds: Vec<Result<Drg, String>> = split_blocks(pred)
        .into_iter()
        .map(|b| parse_penman_at(&b.text, b.line).map_err(|e| e.to_string()))
        .collect();
    score_corpus(&gold_graphs, &preds, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drg::{DrgEdge, Pos};

    fn b(i: u32) -> NodeId {
        NodeId::boxed(i)
    }
    fn s(i: u32) -> NodeId {
        NodeId::synset(i)
    }
    fn c(i: u32) -> NodeId {
        NodeId::constant(i)
    }

    fn sample() -> Drg {
        Drg::new(
            [
                (b(0), NodeKind::Box),
                (s(0), NodeKind::synset("sleep", Pos::Verb, "01")),
                (s(1), NodeKind::synset("cat", Pos::Noun, "01")),
                (c(0), NodeKind::constant("Tom")),
            ],
            [
                DrgEdge::scope(b(0), s(0)),
                DrgEdge::scope(b(0), s(1)),
                DrgEdge::role(s(0), "Agent", s(1)),
                DrgEdge::role(s(1), "Name", c(0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn triples_of_sample() {
        let t = TripleSet::from_drg(&sample());
        assert_eq!(t.vars.len(), 3);
        assert_eq!(t.instances.len(), 3);
        assert_eq!(t.attributes.len(), 2);
        assert_eq!(t.relations.len(), 3);
        assert_eq!(t.scope_only().len(), 3);
    }

    #[test]
    fn self_score_is_one() {
        let r = smatch_score(&sample(), &sample(), 4, 0);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.mapping.len(), 3);
        assert!(r.mapping.iter().all(|(a, b)| a == b));
        assert_eq!(scope_only_score(&sample(), &sample(), 4, 0), 1.0);
    }

    #[test]
    fn disjoint_concepts_score_zero_on_instances() {
        let g = sample();
        let other = Drg::new(
            [
                (b(0), NodeKind::Box),
                (s(0), NodeKind::synset("run", Pos::Verb, "01")),
            ],
            [DrgEdge::role(b(0), "Time", s(0))],
        )
        .unwrap();
        let r = smatch_score(&g, &other, 4, 0);
        // only the box instance and TOP can match
        assert_eq!(r.matched, 2);
    }

    #[test]
    fn prf_is_harmonic_mean() {
        let p = Prf::from_counts(3, 4, 6);
        assert!((p.precision - 0.5).abs() < 1e-12);
        assert!((p.recall - 0.75).abs() < 1e-12);
        assert!((p.f1 - 0.6).abs() < 1e-12);
        assert_eq!(Prf::from_counts(0, 4, 0).f1, 0.0);
    }

    #[test]
    fn unparseable_prediction_counts_as_error() {
        let g = sample();
        let preds = vec![
            Ok(g.clone()),
            Err("bad".to_string()),
            Ok(g.clone()),
            Ok(g.clone()),
        ];
        let r = score_corpus(
            &[g.clone(), g.clone(), g.clone(), g],
            &preds,
            ScoreOptions::default(),
        )
        .unwrap();
        assert_eq!(r.err_rate, 25.0);
        assert_eq!(r.overall.precision, 1.0);
        assert!((r.overall.recall - 0.75).abs() < 1e-12);
        assert_eq!(r.buckets[0].count, 4);
    }
}
