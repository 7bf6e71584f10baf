//! Alignment scoring.
//!
//! For an ambiguous node `n_i` and each candidate `n_k` in its alignment set,
//! the count `c_k` is a rarity-weighted tally of attribute matches between the
//! neighbors of `n_i` and the facts around `n_k`, gated by the indicator
//! coefficient `ι_k`:
//!
//! ```text
//! w(a)  = 1 / (occurrences of a over all facts of G')
//! ι_k   = max over indicator values a of  (facts around n_k carrying a) / |events of n_k|
//! c_k   = ι_k · Σ_{n_j ∈ blanket(n_i)} Σ_{t ∈ facts around n_k} w(A(n_j)) · [A(n_j) = A(n^t)]
//! p_k   = (c_k + α_k) / Σ_j (c_j + α_j)
//! ```
//!
//! `p_k` is the Dirichlet-categorical posterior predictive, i.e. the mean of
//! `Dirichlet(c + α)`. A `NEW` pseudo-candidate with count 0 and prior mass
//! `new_node_alpha` carries the belief that `n_i` has no counterpart.
//!
//! Indicator-typed neighbors act only through `ι_k`; they are not part of the
//! count sum. Values are compared after extraction, per distinct value of a
//! node, and `ι_k` is capped at 1.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::graph::{AttributeFrequencyTable, FactGraph, GraphError, NodeId};
use crate::matchers::{extract_distinct, AttributeExtractorSpec, CandidateIndex, IndicatorSpec, SpecError};
use crate::pipeline::{ConfigError, StageConfig};

/// Largest tolerated deviation of a row's probability sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("row for `{ambiguous}` sums to {sum}, not 1")]
    RowNotNormalized { ambiguous: NodeId, sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PredictiveError {
    #[error("no categories")]
    Empty,
    #[error("{counts} counts but {alphas} concentration parameters")]
    LengthMismatch { counts: usize, alphas: usize },
    #[error("counts and concentrations must be finite and non-negative")]
    InvalidInput,
    #[error("all counts and concentrations are zero")]
    Unalignable,
}

/// Dirichlet concentration parameters for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    symmetric_alpha: f64,
    new_node_alpha: f64,
    overrides: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            symmetric_alpha: 1.0,
            new_node_alpha: 1.0,
            overrides: BTreeMap::new(),
        }
    }
}

fn check_alpha(a: f64) -> Result<f64, SpecError> {
    if a.is_finite() && a >= 0.0 {
        Ok(a)
    } else {
        Err(SpecError::InvalidAlpha(a))
    }
}

impl PriorSpec {
    pub fn new(symmetric_alpha: f64, new_node_alpha: f64) -> Result<Self, SpecError> {
        Ok(PriorSpec {
            symmetric_alpha: check_alpha(symmetric_alpha)?,
            new_node_alpha: check_alpha(new_node_alpha)?,
            overrides: BTreeMap::new(),
        })
    }

    /// Sets the concentration for one (ambiguous, candidate) pair.
    pub fn with_override(mut self, ambiguous: NodeId, candidate: NodeId, alpha: f64) -> Result<Self, SpecError> {
        self.overrides
            .entry(ambiguous)
            .or_default()
            .insert(candidate, check_alpha(alpha)?);
        Ok(self)
    }

    pub fn symmetric_alpha(&self) -> f64 {
        self.symmetric_alpha
    }

    pub fn new_node_alpha(&self) -> f64 {
        self.new_node_alpha
    }

    pub fn overrides(&self) -> impl Iterator<Item = (&NodeId, &NodeId, f64)> + '_ {
        self.overrides
            .iter()
            .flat_map(|(a, m)| m.iter().map(move |(c, v)| (a, c, *v)))
    }

    pub fn alpha_for(&self, ambiguous: &str, candidate: &str) -> f64 {
        self.overrides
            .get(ambiguous)
            .and_then(|m| m.get(candidate))
            .copied()
            .unwrap_or(self.symmetric_alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Candidate {
    Node(NodeId),
    New,
}

impl Candidate {
    pub fn node(&self) -> Option<&NodeId> {
        match self {
            Candidate::Node(id) => Some(id),
            Candidate::New => None,
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Node(id) => f.write_str(id.as_str()),
            Candidate::New => f.write_str("NEW"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub candidate: Candidate,
    pub count: f64,
    pub indicator: f64,
    pub probability: f64,
}

/// Scores for one ambiguous node, or a flag that nothing could be inferred
/// (every count and every concentration was zero).
#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentRow {
    /// Sorted by descending probability, real candidates before `NEW` on
    /// ties, then by id.
    Scored(Vec<CandidateScore>),
    Unalignable,
}

/// Winning candidate of a row that clears a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<'a> {
    pub target: &'a NodeId,
    pub probability: f64,
    /// Another real candidate had exactly the same probability.
    pub tie: bool,
}

impl AlignmentRow {
    pub fn from_scores(mut scores: Vec<CandidateScore>) -> Self {
        scores.sort_by(order_scores);
        AlignmentRow::Scored(scores)
    }

    pub fn scores(&self) -> &[CandidateScore] {
        match self {
            AlignmentRow::Scored(s) => s,
            AlignmentRow::Unalignable => &[],
        }
    }

    pub fn is_unalignable(&self) -> bool {
        matches!(self, AlignmentRow::Unalignable)
    }

    /// Argmax over all categories. `NEW` wins ties against real candidates;
    /// ties among real candidates go to the smallest id.
    pub fn best(&self) -> Option<(&CandidateScore, bool)> {
        let scores = self.scores();
        let max = scores.iter().map(|s| s.probability).fold(f64::NEG_INFINITY, f64::max);
        let top: Vec<&CandidateScore> = scores.iter().filter(|s| s.probability == max).collect();
        if let Some(new) = top.iter().find(|s| s.candidate == Candidate::New) {
            return Some((new, top.len() > 1));
        }
        let tie = top.len() > 1;
        top.into_iter()
            .min_by(|a, b| a.candidate.cmp(&b.candidate))
            .map(|s| (s, tie))
    }

    /// The merge decision at threshold `tau`: the argmax must be a real node
    /// and its probability must strictly exceed `tau`.
    pub fn decision(&self, tau: f64) -> Option<Decision<'_>> {
        let (best, tie) = self.best()?;
        let target = best.candidate.node()?;
        (best.probability > tau).then_some(Decision {
            target,
            probability: best.probability,
            tie,
        })
    }

    pub fn probability_sum(&self) -> f64 {
        self.scores().iter().map(|s| s.probability).sum()
    }
}

fn order_scores(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    b.probability
        .total_cmp(&a.probability)
        .then_with(|| a.candidate.cmp(&b.candidate))
}

/// Rows keyed by ambiguous node id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentMatrix {
    rows: BTreeMap<NodeId, AlignmentRow>,
}

impl AlignmentMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ambiguous: NodeId, row: AlignmentRow) {
        self.rows.insert(ambiguous, row);
    }

    pub fn row(&self, ambiguous: &str) -> Option<&AlignmentRow> {
        self.rows.get(ambiguous)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&NodeId, &AlignmentRow)> + '_ {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn unalignable_count(&self) -> usize {
        self.rows.values().filter(|r| r.is_unalignable()).count()
    }

    /// Rows whose argmax is a real node above `tau`.
    pub fn decisions(&self, tau: f64) -> impl Iterator<Item = (&NodeId, Decision<'_>)> + '_ {
        self.rows
            .iter()
            .filter_map(move |(id, row)| row.decision(tau).map(|d| (id, d)))
    }
}

/// Reciprocal of the value's frequency; `None` when the value never occurs,
/// in which case it can match nothing and the fact is skipped.
pub fn rarity_weight(value: &str, freq: &AttributeFrequencyTable) -> Option<f64> {
    match freq.get(value) {
        0 => None,
        n => Some(1.0 / n as f64),
    }
}

/// `(c_k + α_k) / Σ_j (c_j + α_j)`.
pub fn posterior_predictive(counts: &[f64], alphas: &[f64]) -> Result<Vec<f64>, PredictiveError> {
    if counts.is_empty() {
        return Err(PredictiveError::Empty);
    }
    if counts.len() != alphas.len() {
        return Err(PredictiveError::LengthMismatch {
            counts: counts.len(),
            alphas: alphas.len(),
        });
    }
    if counts
        .iter()
        .chain(alphas)
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(PredictiveError::InvalidInput);
    }
    let total: f64 = counts.iter().zip(alphas).map(|(c, a)| c + a).sum();
    if total == 0.0 {
        return Err(PredictiveError::Unalignable);
    }
    Ok(counts.iter().zip(alphas).map(|(c, a)| (c + a) / total).collect())
}

fn entity_ix(g: &FactGraph, id: &str) -> Result<usize, GraphError> {
    g.entity_ix(id).ok_or_else(|| GraphError::NotFound(id.to_string()))
}

/// `ι_k` for one pair. 1 when no indicator types are configured.
pub fn indicator_coefficient(
    n_i: &str,
    n_k: &str,
    g: &FactGraph,
    g_prime: &FactGraph,
    ind: &IndicatorSpec,
    a: &AttributeExtractorSpec,
) -> Result<f64, GraphError> {
    let i = entity_ix(g, n_i)?;
    let k = entity_ix(g_prime, n_k)?;
    if ind.is_empty() {
        return Ok(1.0);
    }
    let events = g_prime.entity_events(k).len();
    if events == 0 {
        return Ok(0.0);
    }
    let mut values: BTreeSet<String> = BTreeSet::new();
    for j in g.blanket_ix(i) {
        let e = &g.entities()[j as usize];
        if ind.contains(&e.node_type) {
            values.extend(extract_distinct(e, a));
        }
    }
    let around: Vec<Vec<String>> = g_prime
        .neighbor_fact_iter(k)
        .map(|f| extract_distinct(&g_prime.entities()[f.entity as usize], a))
        .collect();
    let best = values
        .iter()
        .map(|v| around.iter().filter(|t| t.contains(v)).count())
        .max()
        .unwrap_or(0);
    Ok((best as f64 / events as f64).min(1.0))
}

/// `c_k` for one pair. `freq` must be built from `g_prime` with the same
/// extractor.
pub fn match_count(
    n_i: &str,
    n_k: &str,
    g: &FactGraph,
    g_prime: &FactGraph,
    a: &AttributeExtractorSpec,
    ind: &IndicatorSpec,
    freq: &AttributeFrequencyTable,
) -> Result<f64, GraphError> {
    let iota = indicator_coefficient(n_i, n_k, g, g_prime, ind, a)?;
    let i = entity_ix(g, n_i)?;
    let k = entity_ix(g_prime, n_k)?;
    let around: Vec<Vec<String>> = g_prime
        .neighbor_fact_iter(k)
        .map(|f| extract_distinct(&g_prime.entities()[f.entity as usize], a))
        .collect();
    let mut sum = 0.0;
    for j in g.blanket_ix(i) {
        let e = &g.entities()[j as usize];
        if ind.contains(&e.node_type) {
            continue;
        }
        for v in extract_distinct(e, a) {
            let Some(w) = rarity_weight(&v, freq) else {
                continue;
            };
            for t in &around {
                if t.contains(&v) {
                    sum += w;
                }
            }
        }
    }
    Ok(iota * sum)
}

/// Runs row scoring over `len` independent items.
///
/// Implementations must return results in index order.
pub trait Executor {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Scores rows one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}

/// Stage state shared by all rows: interned extracted values, rarity weights
/// and the candidate index.
struct Scorer<'a> {
    g: &'a FactGraph,
    gp: &'a FactGraph,
    stage: &'a StageConfig,
    self_mode: bool,
    gp_syms: Vec<Vec<u32>>,
    // `None` when `g` is `gp`.
    g_syms: Option<Vec<Vec<u32>>>,
    weight: Vec<f64>,
    g_indicator: Vec<bool>,
    index: CandidateIndex<'a>,
}

impl<'a> Scorer<'a> {
    fn new(g: &'a FactGraph, gp: &'a FactGraph, stage: &'a StageConfig) -> Self {
        let self_mode = core::ptr::eq(g, gp);
        let extractor = &stage.extractor;
        let mut table: BTreeMap<String, u32> = BTreeMap::new();
        let gp_syms: Vec<Vec<u32>> = gp
            .entities()
            .iter()
            .map(|e| {
                extract_distinct(e, extractor)
                    .into_iter()
                    .map(|v| {
                        let next = table.len() as u32;
                        *table.entry(v).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        let g_syms = (!self_mode).then(|| {
            g.entities()
                .iter()
                .map(|e| {
                    extract_distinct(e, extractor)
                        .iter()
                        .filter_map(|v| table.get(v).copied())
                        .collect()
                })
                .collect()
        });
        let mut counts = alloc::vec![0u64; table.len()];
        for f in gp.raw_facts() {
            for &s in &gp_syms[f.entity as usize] {
                counts[s as usize] += 1;
            }
        }
        let weight = counts
            .iter()
            .map(|&n| if n == 0 { 0.0 } else { 1.0 / n as f64 })
            .collect();
        let g_indicator = g
            .entities()
            .iter()
            .map(|e| stage.indicators.contains(&e.node_type))
            .collect();
        Scorer {
            g,
            gp,
            stage,
            self_mode,
            gp_syms,
            g_syms,
            weight,
            g_indicator,
            index: CandidateIndex::build(gp, &stage.constraint, extractor.normalization()),
        }
    }

    fn g_syms(&self, j: usize) -> &[u32] {
        match &self.g_syms {
            Some(s) => &s[j],
            None => &self.gp_syms[j],
        }
    }

    fn score_row(&self, i: usize) -> Result<AlignmentRow, EngineError> {
        let node = &self.g.entities()[i];
        let candidates = self
            .index
            .query(node, self.self_mode.then_some(i as u32));

        // Summed weight per value over the non-indicator blanket.
        let mut weighted: Vec<(u32, f64)> = Vec::new();
        let mut ind_values: Vec<u32> = Vec::new();
        for j in self.g.blanket_ix(i) {
            let j = j as usize;
            if self.g_indicator[j] {
                ind_values.extend_from_slice(self.g_syms(j));
            } else {
                for &s in self.g_syms(j) {
                    let w = self.weight[s as usize];
                    if w > 0.0 {
                        weighted.push((s, w));
                    }
                }
            }
        }
        weighted.sort_by_key(|p| p.0);
        weighted.dedup_by(|later, first| {
            if later.0 == first.0 {
                first.1 += later.1;
                true
            } else {
                false
            }
        });
        ind_values.sort_unstable();
        ind_values.dedup();
        let gated = !self.stage.indicators.is_empty();

        let prior = &self.stage.prior;
        let mut scores: Vec<CandidateScore> = Vec::with_capacity(candidates.len() + 1);
        let mut alphas: Vec<f64> = Vec::with_capacity(candidates.len() + 1);
        let mut ind_hits = alloc::vec![0u32; ind_values.len()];
        for &k in &candidates {
            let k = k as usize;
            let mut raw = 0.0;
            ind_hits.iter_mut().for_each(|h| *h = 0);
            for f in self.gp.neighbor_fact_iter(k) {
                for &s in &self.gp_syms[f.entity as usize] {
                    debug_assert!(self.weight[s as usize] > 0.0);
                    if let Ok(p) = weighted.binary_search_by_key(&s, |w| w.0) {
                        raw += weighted[p].1;
                    }
                    if gated {
                        if let Ok(p) = ind_values.binary_search(&s) {
                            ind_hits[p] += 1;
                        }
                    }
                }
            }
            let indicator = if !gated {
                1.0
            } else {
                let events = self.gp.entity_events(k).len();
                let best = ind_hits.iter().copied().max().unwrap_or(0);
                if events == 0 {
                    0.0
                } else {
                    (best as f64 / events as f64).min(1.0)
                }
            };
            let id = &self.gp.entities()[k].id;
            alphas.push(prior.alpha_for(node.id.as_str(), id.as_str()));
            scores.push(CandidateScore {
                candidate: Candidate::Node(id.clone()),
                count: indicator * raw,
                indicator,
                probability: 0.0,
            });
        }
        if prior.new_node_alpha() > 0.0 {
            alphas.push(prior.new_node_alpha());
            scores.push(CandidateScore {
                candidate: Candidate::New,
                count: 0.0,
                indicator: 1.0,
                probability: 0.0,
            });
        }
        if scores.is_empty() {
            return Ok(AlignmentRow::Unalignable);
        }
        let counts: Vec<f64> = scores.iter().map(|s| s.count).collect();
        let probs = match posterior_predictive(&counts, &alphas) {
            Ok(p) => p,
            Err(PredictiveError::Unalignable) => return Ok(AlignmentRow::Unalignable),
            Err(e) => unreachable!("counts and priors are validated: {e}"),
        };
        for (s, p) in scores.iter_mut().zip(probs) {
            s.probability = p;
        }
        let row = AlignmentRow::from_scores(scores);
        let sum = row.probability_sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(EngineError::RowNotNormalized {
                ambiguous: node.id.clone(),
                sum,
            });
        }
        Ok(row)
    }
}

/// Scores every entity of the stage's ambiguous type in `g` against its
/// alignment set in `g_prime`. Passing the same graph for both aligns the
/// graph with itself, never proposing a node as its own candidate.
pub fn eat(g: &FactGraph, g_prime: &FactGraph, stage: &StageConfig) -> Result<AlignmentMatrix, EngineError> {
    eat_with(g, g_prime, stage, &Sequential)
}

/// [`eat`] with rows scored by `exec`. The result does not depend on the
/// executor.
pub fn eat_with<E: Executor>(
    g: &FactGraph,
    g_prime: &FactGraph,
    stage: &StageConfig,
    exec: &E,
) -> Result<AlignmentMatrix, EngineError> {
    stage.validate_for(g, g_prime)?;
    let scorer = Scorer::new(g, g_prime, stage);
    let ambiguous: Vec<usize> = g
        .entities()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.node_type == stage.ambiguous_node_type)
        .map(|(i, _)| i)
        .collect();
    let rows = exec.map(ambiguous.len(), |x| scorer.score_row(ambiguous[x]));
    let mut matrix = AlignmentMatrix::new();
    for (&i, row) in ambiguous.iter().zip(rows) {
        matrix.insert(g.entities()[i].id.clone(), row?);
    }
    Ok(matrix)
}
