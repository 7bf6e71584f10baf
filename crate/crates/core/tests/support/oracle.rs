//! Brute-force scorer written straight from the model's definitions: every
//! quantity is recomputed from the raw fact list with nested loops, nothing
//! is cached or indexed. Also a random small-graph generator for comparing it
//! with the engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use heat_core::{
    AlignmentMatrix, AlignmentRow, AttributeExtractorSpec, Candidate, ConstraintSpec, ConstraintVariant,
    EntityNode, EventHub, FactGraph, FactTriple, IndicatorSpec, NodeId, Normalization, PriorSpec, RawGraph,
    StageConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;

/// `None` is an unalignable row; otherwise `(candidate or "NEW", count, probability)`.
pub type OracleRow = Option<Vec<(String, f64, f64)>>;

fn normalize(n: Normalization, s: &str) -> String {
    match n {
        Normalization::None => s.to_string(),
        Normalization::CaseFold => s.to_lowercase(),
        Normalization::CaseFoldTrim => s.trim().to_lowercase(),
    }
}

fn attrs(node: &EntityNode, a: &AttributeExtractorSpec) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for k in a.keys() {
        for v in node.values(k) {
            out.insert(normalize(a.normalization(), v));
        }
    }
    out
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn passes(n_i: &EntityNode, n_k: &EntityNode, c: &ConstraintSpec, norm: Normalization) -> bool {
    if n_k.node_type != c.candidate_node_type() {
        return false;
    }
    match c.variant() {
        ConstraintVariant::TypeOnly => true,
        ConstraintVariant::HashedName { key } => {
            n_i.values(key).iter().any(|x| n_k.values(key).iter().any(|y| x == y))
        }
        ConstraintVariant::ExactKey { key } => n_i
            .values(key)
            .iter()
            .any(|x| n_k.values(key).iter().any(|y| normalize(norm, x) == normalize(norm, y))),
        ConstraintVariant::Levenshtein { key, max_normalized_distance } => {
            n_i.values(key).iter().any(|x| {
                n_k.values(key).iter().any(|y| {
                    let (x, y) = (normalize(norm, x), normalize(norm, y));
                    let longest = x.chars().count().max(y.chars().count());
                    let d = if longest == 0 { 0.0 } else { edit_distance(&x, &y) as f64 / longest as f64 };
                    d <= *max_normalized_distance
                })
            })
        }
    }
}

fn node<'g>(g: &'g FactGraph, id: &str) -> &'g EntityNode {
    g.entities().iter().find(|e| e.id.as_str() == id).expect("fact endpoint exists")
}

fn events_of(g: &FactGraph, id: &str) -> BTreeSet<String> {
    g.facts().filter(|f| f.entity.as_str() == id).map(|f| f.event.as_str().to_string()).collect()
}

fn blanket(g: &FactGraph, id: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for f in g.facts() {
        if f.entity.as_str() != id {
            continue;
        }
        for h in g.facts() {
            if h.event == f.event && h.entity.as_str() != id {
                out.insert(h.entity.as_str().to_string());
            }
        }
    }
    out
}

/// Entity endpoints of the facts on `id`'s events, other than `id` itself,
/// one entry per fact.
fn neighbor_fact_entities(g: &FactGraph, id: &str) -> Vec<String> {
    let evs = events_of(g, id);
    g.facts()
        .filter(|f| evs.contains(f.event.as_str()) && f.entity.as_str() != id)
        .map(|f| f.entity.as_str().to_string())
        .collect()
}

fn frequency(gp: &FactGraph, value: &str, a: &AttributeExtractorSpec) -> usize {
    gp.facts().filter(|f| attrs(node(gp, f.entity.as_str()), a).contains(value)).count()
}

fn iota(g: &FactGraph, gp: &FactGraph, n_i: &str, n_k: &str, ind: &IndicatorSpec, a: &AttributeExtractorSpec) -> f64 {
    if ind.is_empty() {
        return 1.0;
    }
    let e = events_of(gp, n_k).len();
    if e == 0 {
        return 0.0;
    }
    let mut best = 0usize;
    for j in blanket(g, n_i) {
        let nj = node(g, &j);
        if !ind.node_types().contains(&nj.node_type) {
            continue;
        }
        for v in attrs(nj, a) {
            let mut hits = 0;
            for t in neighbor_fact_entities(gp, n_k) {
                if attrs(node(gp, &t), a).contains(&v) {
                    hits += 1;
                }
            }
            best = best.max(hits);
        }
    }
    (best as f64 / e as f64).min(1.0)
}

fn count(g: &FactGraph, gp: &FactGraph, n_i: &str, n_k: &str, stage: &StageConfig) -> f64 {
    let a = &stage.extractor;
    let ind = &stage.indicators;
    let mut sum = 0.0;
    for j in blanket(g, n_i) {
        let nj = node(g, &j);
        if ind.node_types().contains(&nj.node_type) {
            continue;
        }
        for v in attrs(nj, a) {
            let freq = frequency(gp, &v, a);
            if freq == 0 {
                continue;
            }
            for t in neighbor_fact_entities(gp, n_k) {
                if attrs(node(gp, &t), a).contains(&v) {
                    sum += 1.0 / freq as f64;
                }
            }
        }
    }
    iota(g, gp, n_i, n_k, ind, a) * sum
}

/// Every row the engine should emit, keyed by ambiguous id.
pub fn oracle_eat(g: &FactGraph, gp: &FactGraph, stage: &StageConfig) -> BTreeMap<String, OracleRow> {
    let same = std::ptr::eq(g, gp);
    let mut out = BTreeMap::new();
    for n_i in g.entities().iter().filter(|e| e.node_type == stage.ambiguous_node_type) {
        let mut cands: Vec<(String, f64, f64)> = Vec::new();
        for n_k in gp.entities() {
            if same && n_k.id == n_i.id {
                continue;
            }
            if !passes(n_i, n_k, &stage.constraint, stage.extractor.normalization()) {
                continue;
            }
            let c = count(g, gp, n_i.id.as_str(), n_k.id.as_str(), stage);
            let alpha = stage.prior.alpha_for(n_i.id.as_str(), n_k.id.as_str());
            cands.push((n_k.id.as_str().to_string(), c, alpha));
        }
        if stage.prior.new_node_alpha() > 0.0 {
            cands.push(("NEW".to_string(), 0.0, stage.prior.new_node_alpha()));
        }
        let total: f64 = cands.iter().map(|(_, c, a)| c + a).sum();
        let row = if cands.is_empty() || total == 0.0 {
            None
        } else {
            Some(cands.into_iter().map(|(id, c, a)| (id, c, (c + a) / total)).collect())
        };
        out.insert(n_i.id.as_str().to_string(), row);
    }
    out
}

/// First disagreement between the engine and the oracle beyond `tol`.
pub fn compare(matrix: &AlignmentMatrix, oracle: &BTreeMap<String, OracleRow>, tol: f64) -> Result<(), String> {
    let ids: Vec<&str> = matrix.rows().map(|(id, _)| id.as_str()).collect();
    let expected: Vec<&str> = oracle.keys().map(String::as_str).collect();
    if ids != expected {
        return Err(format!("row ids differ: {ids:?} vs {expected:?}"));
    }
    for (id, row) in matrix.rows() {
        let want = &oracle[id.as_str()];
        match (row, want) {
            (AlignmentRow::Unalignable, None) => {}
            (AlignmentRow::Scored(scores), Some(want)) => {
                if scores.len() != want.len() {
                    return Err(format!("{id}: {} candidates vs {}", scores.len(), want.len()));
                }
                for (name, c, p) in want {
                    let got = scores.iter().find(|s| match &s.candidate {
                        Candidate::New => name == "NEW",
                        Candidate::Node(n) => n.as_str() == name,
                    });
                    let Some(got) = got else {
                        return Err(format!("{id}: missing candidate {name}"));
                    };
                    if (got.probability - p).abs() > tol || (got.count - c).abs() > tol {
                        return Err(format!(
                            "{id} -> {name}: engine ({}, {}) vs oracle ({c}, {p})",
                            got.count, got.probability
                        ));
                    }
                }
            }
            (got, want) => return Err(format!("{id}: engine {got:?} vs oracle {want:?}")),
        }
    }
    Ok(())
}

fn nid(s: impl Into<String>) -> NodeId {
    NodeId::new(s).unwrap()
}

const NAMES: [&str; 6] = ["ana", "Ana", "bo", "carla", "carl", "dee"];
const KWS: [&str; 6] = ["ml", "ML", "stats", "graphs", " ml", "bio"];
const TYPES: [&str; 3] = ["person", "org", "text"];

/// Random graph with at most `max_entities` entities and `max_events` events.
/// Ids are drawn from a shared pool so two graphs can overlap.
pub fn random_graph<R: Rng>(rng: &mut R, prefix: &str, max_entities: usize, max_events: usize) -> FactGraph {
    let n_ent = rng.gen_range(1..=max_entities);
    let n_ev = rng.gen_range(1..=max_events);
    let mut entities = Vec::new();
    for i in 0..n_ent {
        // The first entity is always a person so every stage validates.
        let ty = if i == 0 { "person" } else { *TYPES.choose(rng).unwrap() };
        let mut e = EntityNode::new(nid(format!("{prefix}{i}")), ty);
        for _ in 0..rng.gen_range(0..=2) {
            e = e.with_attr("name", [*NAMES.choose(rng).unwrap()]);
        }
        for _ in 0..rng.gen_range(1..=2) {
            e = e.with_attr("kw", [*KWS.choose(rng).unwrap()]);
        }
        entities.push(e);
    }
    let mut events = Vec::new();
    let mut facts = Vec::new();
    for v in 0..n_ev {
        let ev = nid(format!("{prefix}e{v}"));
        events.push(EventHub::new(ev.clone()).with_attr("date", ["2019"]));
        let k = rng.gen_range(1..=n_ent.min(7));
        for e in entities.choose_multiple(rng, k) {
            let pred = *["author", "keyword"].choose(rng).unwrap();
            facts.push(FactTriple::new(ev.clone(), pred, e.id.clone()));
        }
    }
    heat_core::graph::load_validate(RawGraph { entities, events, facts }).expect("generated graph is valid")
}

pub fn random_stage<R: Rng>(rng: &mut R, candidates: &[NodeId], ambiguous: &[NodeId]) -> StageConfig {
    let variant = match rng.gen_range(0..4) {
        0 => ConstraintVariant::TypeOnly,
        1 => ConstraintVariant::HashedName { key: "name".into() },
        2 => ConstraintVariant::ExactKey { key: "name".into() },
        _ => ConstraintVariant::Levenshtein {
            key: "name".into(),
            max_normalized_distance: *[0.0, 0.2, 0.3, 0.5, 1.0].choose(rng).unwrap(),
        },
    };
    let keys: Vec<String> = match rng.gen_range(0..3) {
        0 => vec!["name".into()],
        1 => vec!["kw".into()],
        _ => vec!["kw".into(), "name".into()],
    };
    let norm = *[Normalization::None, Normalization::CaseFold, Normalization::CaseFoldTrim].choose(rng).unwrap();
    let indicators = match rng.gen_range(0..3) {
        0 => IndicatorSpec::none(),
        1 => IndicatorSpec::new(["org"]).unwrap(),
        _ => IndicatorSpec::new(["org", "text"]).unwrap(),
    };
    let mut prior = PriorSpec::new(
        *[0.0, 0.5, 1.0, 2.0].choose(rng).unwrap(),
        *[0.0, 0.3, 1.0].choose(rng).unwrap(),
    )
    .unwrap();
    if !candidates.is_empty() && !ambiguous.is_empty() && rng.gen_bool(0.3) {
        let a = ambiguous.choose(rng).unwrap().clone();
        let c = candidates.choose(rng).unwrap().clone();
        prior = prior.with_override(a, c, rng.gen_range(0.0..3.0)).unwrap();
    }
    StageConfig {
        name: "random".into(),
        ambiguous_node_type: "person".into(),
        constraint: ConstraintSpec::new(variant, "person").unwrap(),
        extractor: AttributeExtractorSpec::new(keys, norm).unwrap(),
        indicators,
        prior,
        tau: rng.gen_range(0.0..1.0),
    }
}

pub fn ids_of_type(g: &FactGraph, ty: &str) -> Vec<NodeId> {
    g.entities().iter().filter(|e| e.node_type == ty).map(|e| e.id.clone()).collect()
}

/// One oracle-vs-engine trial. Roughly a fifth of trials align a graph with
/// itself.
pub fn oracle_trial<R: Rng>(rng: &mut R) -> Result<(), String> {
    let g = random_graph(rng, "a", 20, 10);
    let self_mode = rng.gen_bool(0.2);
    let gp = if self_mode { g.clone() } else { random_graph(rng, "b", 20, 10) };
    let stage = random_stage(rng, &ids_of_type(&gp, "person"), &ids_of_type(&g, "person"));
    let gp_ref = if self_mode { &g } else { &gp };
    let matrix = heat_core::eat(&g, gp_ref, &stage).map_err(|e| e.to_string())?;
    let want = oracle_eat(&g, gp_ref, &stage);
    compare(&matrix, &want, 1e-12)
}
