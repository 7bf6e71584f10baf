//! Candidate blocking constraints and attribute extractors.
//!
//! A [`ConstraintSpec`] decides which nodes of the other graph an ambiguous
//! node could possibly be (its alignment set). An [`AttributeExtractorSpec`]
//! decides which attribute values of neighboring nodes count as evidence.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::graph::{EntityNode, FactGraph, GraphError, NodeId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("extractor needs at least one attribute key")]
    NoKeys,
    #[error("attribute keys must be non-empty")]
    EmptyKey,
    #[error("max_normalized_distance {0} is outside [0, 1]")]
    DistanceOutOfRange(f64),
    #[error("candidate_node_type must be non-empty")]
    EmptyCandidateType,
    #[error("indicator node types must be non-empty")]
    EmptyIndicatorType,
    #[error("concentration parameter {0} must be finite and non-negative")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    #[default]
    CaseFold,
    CaseFoldTrim,
}

impl Normalization {
    pub fn apply(self, s: &str) -> String {
        match self {
            Normalization::None => s.to_string(),
            Normalization::CaseFold => s.to_lowercase(),
            Normalization::CaseFoldTrim => s.trim().to_lowercase(),
        }
    }
}

/// Which attribute keys to read from a node, and how to normalize the values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeExtractorSpec {
    keys: Vec<String>,
    normalization: Normalization,
}

impl AttributeExtractorSpec {
    pub fn new(keys: Vec<String>, normalization: Normalization) -> Result<Self, SpecError> {
        if keys.is_empty() {
            return Err(SpecError::NoKeys);
        }
        if keys.iter().any(String::is_empty) {
            return Err(SpecError::EmptyKey);
        }
        Ok(AttributeExtractorSpec { keys, normalization })
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

/// The node's values under each key in turn, normalized. Duplicates are kept.
pub fn extract(node: &EntityNode, spec: &AttributeExtractorSpec) -> Vec<String> {
    spec.keys
        .iter()
        .flat_map(|k| node.values(k))
        .map(|v| spec.normalization.apply(v))
        .collect()
}

/// [`extract`] with repeats removed, first occurrence kept.
pub(crate) fn extract_distinct(node: &EntityNode, spec: &AttributeExtractorSpec) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in extract(node, spec) {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintVariant {
    /// Normalized values under `key` must be equal.
    ExactKey { key: String },
    /// The value under `key` is an opaque hash of first initial and last
    /// name; candidates must carry the identical string.
    HashedName { key: String },
    /// Normalized values under `key` must be within the given normalized
    /// edit distance (inclusive).
    Levenshtein {
        key: String,
        max_normalized_distance: f64,
    },
    /// Every node of the candidate type passes.
    TypeOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    variant: ConstraintVariant,
    candidate_node_type: String,
}

impl ConstraintSpec {
    pub fn new(variant: ConstraintVariant, candidate_node_type: impl Into<String>) -> Result<Self, SpecError> {
        let candidate_node_type = candidate_node_type.into();
        if candidate_node_type.is_empty() {
            return Err(SpecError::EmptyCandidateType);
        }
        match &variant {
            ConstraintVariant::ExactKey { key } | ConstraintVariant::HashedName { key } if key.is_empty() => {
                return Err(SpecError::EmptyKey)
            }
            ConstraintVariant::Levenshtein {
                key,
                max_normalized_distance: d,
            } => {
                if key.is_empty() {
                    return Err(SpecError::EmptyKey);
                }
                if !(0.0..=1.0).contains(d) {
                    return Err(SpecError::DistanceOutOfRange(*d));
                }
            }
            _ => {}
        }
        Ok(ConstraintSpec {
            variant,
            candidate_node_type,
        })
    }

    pub fn variant(&self) -> &ConstraintVariant {
        &self.variant
    }

    pub fn candidate_node_type(&self) -> &str {
        &self.candidate_node_type
    }

    /// Copy of this spec with a different Levenshtein bound; other variants
    /// are returned unchanged.
    pub fn with_max_distance(&self, d: f64) -> Result<Self, SpecError> {
        match &self.variant {
            ConstraintVariant::Levenshtein { key, .. } => ConstraintSpec::new(
                ConstraintVariant::Levenshtein {
                    key: key.clone(),
                    max_normalized_distance: d,
                },
                self.candidate_node_type.clone(),
            ),
            _ => Ok(self.clone()),
        }
    }
}

/// Node types whose attributes must reappear around a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndicatorSpec {
    node_types: BTreeSet<String>,
}

impl IndicatorSpec {
    pub fn none() -> Self {
        IndicatorSpec::default()
    }

    pub fn new<I, S>(types: I) -> Result<Self, SpecError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let node_types: BTreeSet<String> = types.into_iter().map(Into::into).collect();
        if node_types.iter().any(String::is_empty) {
            return Err(SpecError::EmptyIndicatorType);
        }
        Ok(IndicatorSpec { node_types })
    }

    pub fn node_types(&self) -> &BTreeSet<String> {
        &self.node_types
    }

    pub fn is_empty(&self) -> bool {
        self.node_types.is_empty()
    }

    pub fn contains(&self, node_type: &str) -> bool {
        self.node_types.contains(node_type)
    }
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    bounded_levenshtein(&a, &b, usize::MAX).expect("unbounded")
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Edit distance if it is at most `max`, `None` otherwise.
fn bounded_levenshtein(a: &[char], b: &[char], max: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        return Some(a.len().max(b.len()));
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > max {
            return None;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max).then_some(d)
}

fn within_normalized(a: &[char], b: &[char], max_normalized: f64) -> bool {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return true;
    }
    let bound = (max_normalized * longest as f64 + 1e-9) as usize;
    match bounded_levenshtein(a, b, bound) {
        Some(d) => d as f64 / longest as f64 <= max_normalized,
        None => false,
    }
}

/// Values a node offers to a constraint.
fn constraint_values(node: &EntityNode, variant: &ConstraintVariant, norm: Normalization) -> Vec<String> {
    let mut vals: Vec<String> = match variant {
        ConstraintVariant::ExactKey { key } | ConstraintVariant::Levenshtein { key, .. } => {
            node.values(key).iter().map(|v| norm.apply(v)).collect()
        }
        ConstraintVariant::HashedName { key } => node.values(key).to_vec(),
        ConstraintVariant::TypeOnly => Vec::new(),
    };
    vals.sort();
    vals.dedup();
    vals
}

struct LevEntry {
    chars: Vec<char>,
    nodes: Vec<u32>,
}

enum IndexKind {
    Exact(BTreeMap<String, Vec<u32>>),
    // Entries sorted by character length.
    Levenshtein { entries: Vec<LevEntry>, max: f64 },
    All(Vec<u32>),
}

/// Candidate-side index for one constraint over one graph.
pub(crate) struct CandidateIndex<'a> {
    spec: &'a ConstraintSpec,
    norm: Normalization,
    kind: IndexKind,
}

impl<'a> CandidateIndex<'a> {
    pub(crate) fn build(candidates: &FactGraph, spec: &'a ConstraintSpec, norm: Normalization) -> Self {
        let typed = candidates
            .entities()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.node_type == spec.candidate_node_type);
        let kind = match &spec.variant {
            ConstraintVariant::TypeOnly => IndexKind::All(typed.map(|(i, _)| i as u32).collect()),
            ConstraintVariant::ExactKey { .. } | ConstraintVariant::HashedName { .. } => {
                let mut map: BTreeMap<String, Vec<u32>> = BTreeMap::new();
                for (i, e) in typed {
                    for v in constraint_values(e, &spec.variant, norm) {
                        map.entry(v).or_default().push(i as u32);
                    }
                }
                IndexKind::Exact(map)
            }
            ConstraintVariant::Levenshtein {
                max_normalized_distance,
                ..
            } => {
                let mut map: BTreeMap<String, Vec<u32>> = BTreeMap::new();
                for (i, e) in typed {
                    for v in constraint_values(e, &spec.variant, norm) {
                        map.entry(v).or_default().push(i as u32);
                    }
                }
                let mut entries: Vec<LevEntry> = map
                    .into_iter()
                    .map(|(v, nodes)| LevEntry {
                        chars: v.chars().collect(),
                        nodes,
                    })
                    .collect();
                entries.sort_by_key(|e| e.chars.len());
                IndexKind::Levenshtein {
                    entries,
                    max: *max_normalized_distance,
                }
            }
        };
        CandidateIndex { spec, norm, kind }
    }

    /// Sorted candidate indices for `node`, leaving out `exclude`.
    pub(crate) fn query(&self, node: &EntityNode, exclude: Option<u32>) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        match &self.kind {
            IndexKind::All(all) => out.extend_from_slice(all),
            IndexKind::Exact(map) => {
                for v in constraint_values(node, &self.spec.variant, self.norm) {
                    if let Some(nodes) = map.get(&v) {
                        out.extend_from_slice(nodes);
                    }
                }
            }
            IndexKind::Levenshtein { entries, max } => {
                for v in constraint_values(node, &self.spec.variant, self.norm) {
                    let q: Vec<char> = v.chars().collect();
                    let (lo, hi) = length_window(q.len(), *max);
                    let start = entries.partition_point(|e| e.chars.len() < lo);
                    for e in entries[start..].iter().take_while(|e| e.chars.len() <= hi) {
                        if within_normalized(&q, &e.chars, *max) {
                            out.extend_from_slice(&e.nodes);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        if let Some(x) = exclude {
            out.retain(|&k| k != x);
        }
        out
    }
}

/// Inclusive range of lengths that can lie within `max` normalized distance
/// of a string of length `len`.
fn length_window(len: usize, max: f64) -> (usize, usize) {
    // Casts truncate toward zero; the padding below absorbs rounding.
    let lo = ((len as f64) * (1.0 - max)).max(0.0) as usize;
    let hi = if max >= 1.0 {
        usize::MAX
    } else {
        ((len as f64) / (1.0 - max)) as usize + 2
    };
    (lo.saturating_sub(1), hi)
}

/// Alignment set of `n_i`: entities of `g_prime` of the candidate type that
/// pass the constraint, sorted by id. When `g` and `g_prime` are the same
/// graph, `n_i` itself is left out.
pub fn candidate_set(
    n_i: &str,
    g: &FactGraph,
    g_prime: &FactGraph,
    c: &ConstraintSpec,
    a: &AttributeExtractorSpec,
) -> Result<Vec<NodeId>, GraphError> {
    let node = g.entity(n_i).ok_or_else(|| GraphError::NotFound(n_i.to_string()))?;
    let exclude = if core::ptr::eq(g, g_prime) {
        g.entity_ix(n_i).map(|i| i as u32)
    } else {
        None
    };
    let index = CandidateIndex::build(g_prime, c, a.normalization());
    Ok(index
        .query(node, exclude)
        .into_iter()
        .map(|k| g_prime.entities()[k as usize].id.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ex(keys: &[&str], n: Normalization) -> AttributeExtractorSpec {
        AttributeExtractorSpec::new(keys.iter().map(|k| k.to_string()).collect(), n).unwrap()
    }

    /// Textbook full-matrix edit distance.
    #[allow(clippy::needless_range_loop)]
    fn dp_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            m[i][0] = i;
        }
        for j in 0..=b.len() {
            m[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                m[i][j] = (m[i - 1][j] + 1).min(m[i][j - 1] + 1).min(m[i - 1][j - 1] + cost);
            }
        }
        m[a.len()][b.len()]
    }

    #[test]
    fn extract_single_key_case_folded() {
        let n = entity("a", "person", &[("name", &["Alice"])]);
        assert_eq!(extract(&n, &ex(&["name"], Normalization::CaseFold)), ["alice"]);
        assert!(extract(&n, &ex(&["kw"], Normalization::CaseFold)).is_empty());
    }

    #[test]
    fn extract_preserves_value_order() {
        let n = entity("a", "text", &[("kw", &["ML", "Stats"])]);
        assert_eq!(extract(&n, &ex(&["kw"], Normalization::CaseFold)), ["ml", "stats"]);
        let trimmed = entity("a", "text", &[("kw", &["  ML "])]);
        assert_eq!(extract(&trimmed, &ex(&["kw"], Normalization::CaseFoldTrim)), ["ml"]);
        assert_eq!(extract(&trimmed, &ex(&["kw"], Normalization::None)), ["  ML "]);
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(dp_oracle("kitten", "sitting"), 3);
        assert!((normalized_levenshtein("kitten", "sitting") - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(normalized_levenshtein("abc", "abc"), 0.0);
        assert_eq!(normalized_levenshtein("", "abc"), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 0.0);
        assert_eq!(dp_oracle("mechanics", "biomechanics"), 3);
        assert_eq!(normalized_levenshtein("mechanics", "biomechanics"), 0.25);
        assert_eq!(dp_oracle("mechanics", "oncology"), 8);
        assert!(normalized_levenshtein("mechanics", "oncology") > 0.3);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(AttributeExtractorSpec::new(vec![], Normalization::None), Err(SpecError::NoKeys));
        let bad = ConstraintVariant::Levenshtein {
            key: "text".into(),
            max_normalized_distance: 1.5,
        };
        assert_eq!(ConstraintSpec::new(bad, "text"), Err(SpecError::DistanceOutOfRange(1.5)));
        assert_eq!(
            ConstraintSpec::new(ConstraintVariant::TypeOnly, ""),
            Err(SpecError::EmptyCandidateType)
        );
    }

    #[test]
    fn hashed_name_blocking() {
        let g = graph(
            vec![entity("q", "person", &[("name_hash", &["h(J,Smith)"])])],
            &[("e", "a", "q")],
        );
        let gp = graph(
            vec![
                entity("p1", "person", &[("name_hash", &["h(J,Smith)"])]),
                entity("p2", "person", &[("name_hash", &["h(J,Smith)"])]),
                entity("p3", "person", &[("name_hash", &["h(K,Jones)"])]),
                entity("o", "org", &[("name_hash", &["h(J,Smith)"])]),
            ],
            &[("f", "a", "p1"), ("f", "a", "p2"), ("f", "a", "p3"), ("f", "a", "o")],
        );
        let c = ConstraintSpec::new(ConstraintVariant::HashedName { key: "name_hash".into() }, "person").unwrap();
        let got = candidate_set("q", &g, &gp, &c, &ex(&["name_hash"], Normalization::CaseFold)).unwrap();
        assert_eq!(got, [id("p1"), id("p2")]);
    }

    #[test]
    fn levenshtein_blocking() {
        let g = graph(vec![entity("t", "text", &[("text", &["mechanics"])])], &[("e", "k", "t")]);
        let gp = graph(
            vec![
                entity("Q63202", "text", &[("text", &["Biomechanics"])]),
                entity("Q1", "text", &[("text", &["oncology"])]),
            ],
            &[("f", "k", "Q63202"), ("f", "k", "Q1")],
        );
        let c = ConstraintSpec::new(
            ConstraintVariant::Levenshtein {
                key: "text".into(),
                max_normalized_distance: 0.3,
            },
            "text",
        )
        .unwrap();
        let a = ex(&["text"], Normalization::CaseFold);
        assert_eq!(candidate_set("t", &g, &gp, &c, &a).unwrap(), [id("Q63202")]);
        // Case-sensitive comparison still sees only the three inserted chars.
        let a_raw = ex(&["text"], Normalization::None);
        assert_eq!(candidate_set("t", &g, &gp, &c, &a_raw).unwrap(), [id("Q63202")]);
    }

    #[test]
    fn self_alignment_excludes_self() {
        let g = graph(vec![entity("t", "text", &[("text", &["x"])])], &[("e", "k", "t")]);
        let c = ConstraintSpec::new(ConstraintVariant::ExactKey { key: "text".into() }, "text").unwrap();
        let a = ex(&["text"], Normalization::CaseFold);
        assert!(candidate_set("t", &g, &g, &c, &a).unwrap().is_empty());
        let copy = g.clone();
        assert_eq!(candidate_set("t", &g, &copy, &c, &a).unwrap(), [id("t")]);
    }

    #[test]
    fn missing_constraint_attribute_gives_no_candidates() {
        let g = graph(vec![entity("t", "text", &[])], &[("e", "k", "t")]);
        let gp = graph(vec![entity("u", "text", &[("text", &["x"])])], &[("e", "k", "u")]);
        let c = ConstraintSpec::new(ConstraintVariant::ExactKey { key: "text".into() }, "text").unwrap();
        let a = ex(&["text"], Normalization::CaseFold);
        assert!(candidate_set("t", &g, &gp, &c, &a).unwrap().is_empty());
        assert!(matches!(candidate_set("zz", &g, &gp, &c, &a), Err(GraphError::NotFound(_))));
    }

    fn word() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[abcé]{0,8}").unwrap()
    }

    proptest! {
        #[test]
        fn normalized_levenshtein_is_a_bounded_symmetric_distance(a in word(), b in word()) {
            let d = normalized_levenshtein(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, normalized_levenshtein(&b, &a));
            prop_assert_eq!(d == 0.0, a == b);
            prop_assert_eq!(levenshtein(&a, &b), dp_oracle(&a, &b));
        }

        #[test]
        fn relaxing_distance_never_shrinks_candidates(
            q in word(),
            pool in proptest::collection::vec(word(), 1..12),
            d1 in 0.0f64..=1.0,
            d2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let g = graph(vec![entity("q", "text", &[("text", &[q.as_str()])])], &[("e", "k", "q")]);
            let mut ents = vec![entity("other", "org", &[("text", &[q.as_str()])])];
            let mut facts = vec![];
            let names: Vec<String> = (0..pool.len()).map(|i| alloc::format!("c{i}")).collect();
            for (i, w) in pool.iter().enumerate() {
                ents.push(entity(&names[i], "text", &[("text", &[w.as_str()])]));
            }
            for n in &names {
                facts.push(("f", "k", n.as_str()));
            }
            facts.push(("f", "k", "other"));
            let gp = graph(ents, &facts);
            let a = ex(&["text"], Normalization::CaseFold);
            let mk = |d| ConstraintSpec::new(ConstraintVariant::Levenshtein { key: "text".into(), max_normalized_distance: d }, "text").unwrap();
            let small = candidate_set("q", &g, &gp, &mk(lo), &a).unwrap();
            let big = candidate_set("q", &g, &gp, &mk(hi), &a).unwrap();
            for c in &small {
                prop_assert!(big.contains(c));
            }
            for c in &big {
                prop_assert_eq!(&gp.entity(c.as_str()).unwrap().node_type, "text");
                let w = &gp.entity(c.as_str()).unwrap().values("text")[0];
                prop_assert!(normalized_levenshtein(&q.to_lowercase(), &w.to_lowercase()) <= hi);
            }
            // Brute force agreement.
            let brute: Vec<NodeId> = names.iter().zip(&pool)
                .filter(|(_, w)| normalized_levenshtein(&q.to_lowercase(), &w.to_lowercase()) <= hi)
                .map(|(n, _)| id(n)).collect::<BTreeSet<_>>().into_iter().collect();
            prop_assert_eq!(big, brute);
        }

        #[test]
        fn extract_is_stable(vals in proptest::collection::vec("[A-Za-z ]{0,6}", 0..5)) {
            let refs: Vec<&str> = vals.iter().map(String::as_str).collect();
            let n = entity("n", "text", &[("kw", &refs)]);
            let spec = ex(&["kw", "missing"], Normalization::CaseFoldTrim);
            let first = extract(&n, &spec);
            prop_assert_eq!(first.len(), vals.len());
            prop_assert_eq!(first, extract(&n, &spec));
        }
    }
}
