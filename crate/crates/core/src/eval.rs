//! Precision and recall of alignments against a ground-truth mapping.
//!
//! One prediction per ambiguous node: its argmax candidate, counted at a
//! threshold when the argmax is a real node whose probability exceeds the
//! threshold (the same rule that drives merging). Predictions are compared as
//! unordered pairs, so a pair proposed from both sides counts once. Only
//! predictions touching a node the ground truth labels are scored.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::engine::AlignmentMatrix;
use crate::graph::NodeId;
use crate::pipeline::MergeRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("ground truth is empty; recall is undefined")]
    EmptyTruth,
    #[error("ground truth maps `{0}` more than once")]
    DuplicatePost(NodeId),
    #[error("thresholds must be finite and strictly increasing")]
    Thresholds,
}

/// Known `post_id -> pre_id` alignments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pairs: BTreeMap<NodeId, NodeId>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, post: NodeId, pre: NodeId) -> Result<(), EvalError> {
        if self.pairs.contains_key(&post) {
            return Err(EvalError::DuplicatePost(post));
        }
        self.pairs.insert(post, pre);
        Ok(())
    }

    pub fn get(&self, post: &str) -> Option<&NodeId> {
        self.pairs.get(post)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.pairs.iter()
    }

    fn labels(&self, id: &str) -> bool {
        self.pairs.contains_key(id)
    }

    /// Whether `{a, b}` is a known alignment, in either direction.
    pub fn matches(&self, a: &str, b: &str) -> bool {
        self.get(a).is_some_and(|p| p.as_str() == b) || self.get(b).is_some_and(|p| p.as_str() == a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_predicted: usize,
    pub n_correct: usize,
    /// False when nothing was predicted and precision is 1 by convention.
    pub precision_defined: bool,
}

impl EvalPoint {
    pub fn f1(&self) -> f64 {
        if self.precision + self.recall == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub points: Vec<EvalPoint>,
}

impl EvalReport {
    pub fn at(&self, threshold: f64) -> Option<&EvalPoint> {
        self.points.iter().find(|p| p.threshold == threshold)
    }
}

/// `steps` evenly spaced thresholds `1/(steps+1), …, steps/(steps+1)`.
pub fn even_thresholds(steps: u32) -> Vec<f64> {
    (1..=steps).map(|k| k as f64 / (steps + 1) as f64).collect()
}

/// Report for the argmax prediction of every matrix row.
pub fn precision_recall(
    matrix: &AlignmentMatrix,
    truth: &GroundTruth,
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    let predictions = matrix.rows().filter_map(|(source, row)| {
        let (best, _) = row.best()?;
        let target = best.candidate.node()?;
        Some((source, target, best.probability))
    });
    evaluate(predictions, truth, thresholds)
}

/// Report for merge records, each taken as a prediction at its probability.
pub fn precision_recall_log(
    log: &[MergeRecord],
    truth: &GroundTruth,
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    let predictions = log
        .iter()
        .map(|r| (&r.source_id, &r.target_id, r.probability));
    evaluate(predictions, truth, thresholds)
}

fn evaluate<'a>(
    predictions: impl Iterator<Item = (&'a NodeId, &'a NodeId, f64)>,
    truth: &GroundTruth,
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::Thresholds);
    }
    // Best probability per unordered pair.
    let mut pairs: BTreeMap<(&NodeId, &NodeId), f64> = BTreeMap::new();
    for (a, b, p) in predictions {
        if !truth.labels(a.as_str()) && !truth.labels(b.as_str()) {
            continue;
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        let slot = pairs.entry(key).or_insert(p);
        *slot = slot.max(p);
    }
    let scored: Vec<(f64, bool)> = pairs
        .iter()
        .map(|((a, b), p)| (*p, truth.matches(a.as_str(), b.as_str())))
        .collect();
    let points = thresholds
        .iter()
        .map(|&threshold| {
            let kept = scored.iter().filter(|(p, _)| *p > threshold);
            let (n_predicted, n_correct) = kept.fold((0, 0), |(n, c), (_, ok)| (n + 1, c + usize::from(*ok)));
            EvalPoint {
                threshold,
                precision: if n_predicted == 0 {
                    1.0
                } else {
                    n_correct as f64 / n_predicted as f64
                },
                recall: n_correct as f64 / truth.len() as f64,
                n_predicted,
                n_correct,
                precision_defined: n_predicted > 0,
            }
        })
        .collect();
    Ok(EvalReport { points })
}

/// Distinct unordered pairs in `log`, for cross-checking reports.
pub fn logged_pairs(log: &[MergeRecord]) -> BTreeSet<(NodeId, NodeId)> {
    log.iter()
        .map(|r| {
            let (a, b) = (r.source_id.clone(), r.target_id.clone());
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AlignmentRow, Candidate, CandidateScore};
    use crate::graph::fixtures::id;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    fn truth(pairs: &[(&str, &str)]) -> GroundTruth {
        let mut t = GroundTruth::new();
        for (a, b) in pairs {
            t.insert(id(a), id(b)).unwrap();
        }
        t
    }

    fn matrix(rows: &[(&str, &str, f64)]) -> AlignmentMatrix {
        let mut m = AlignmentMatrix::new();
        for (src, tgt, p) in rows {
            m.insert(
                id(src),
                AlignmentRow::from_scores(vec![
                    CandidateScore { candidate: Candidate::Node(id(tgt)), count: 1.0, indicator: 1.0, probability: *p },
                    CandidateScore { candidate: Candidate::New, count: 0.0, indicator: 1.0, probability: 1.0 - p },
                ]),
            );
        }
        m
    }

    #[test]
    fn perfect_alignment() {
        let t = truth(&[("q1", "p1"), ("q2", "p2")]);
        let m = matrix(&[("q1", "p1", 0.9), ("q2", "p2", 0.8)]);
        let r = precision_recall(&m, &t, &[0.5]).unwrap();
        assert_eq!((r.points[0].precision, r.points[0].recall), (1.0, 1.0));
        assert_eq!(r.points[0].f1(), 1.0);
    }

    #[test]
    fn hand_counted_point() {
        let t = truth(&[("q1", "p1"), ("q2", "p2"), ("q3", "p3"), ("q4", "p4")]);
        let m = matrix(&[("q1", "p1", 0.9), ("q2", "p9", 0.9), ("q3", "p3", 0.2)]);
        let p = &precision_recall(&m, &t, &[0.5]).unwrap().points[0];
        assert_eq!((p.n_predicted, p.n_correct), (2, 1));
        assert_eq!((p.precision, p.recall), (0.5, 0.25));
    }

    #[test]
    fn nothing_predicted_above_threshold() {
        let t = truth(&[("q1", "p1")]);
        let m = matrix(&[("q1", "p1", 0.9)]);
        let p = &precision_recall(&m, &t, &[0.95]).unwrap().points[0];
        assert_eq!(p.n_predicted, 0);
        assert_eq!(p.recall, 0.0);
        assert_eq!(p.precision, 1.0);
        assert!(!p.precision_defined);
    }

    #[test]
    fn errors() {
        let m = matrix(&[]);
        assert_eq!(precision_recall(&m, &GroundTruth::new(), &[0.5]), Err(EvalError::EmptyTruth));
        let t = truth(&[("q", "p")]);
        assert_eq!(precision_recall(&m, &t, &[0.5, 0.5]), Err(EvalError::Thresholds));
        let mut t = truth(&[("q", "p")]);
        assert_eq!(t.insert(id("q"), id("r")), Err(EvalError::DuplicatePost(id("q"))));
    }

    #[test]
    fn pairs_count_once_and_unlabeled_pairs_are_ignored() {
        let t = truth(&[("q1", "p1"), ("q2", "p2")]);
        // Both directions of one pair, plus a pair between two unlabeled nodes.
        let m = matrix(&[("q1", "p1", 0.9), ("p1", "q1", 0.8), ("p5", "p6", 0.99)]);
        let p = &precision_recall(&m, &t, &[0.5]).unwrap().points[0];
        assert_eq!((p.n_predicted, p.n_correct), (1, 1));
        assert_eq!(p.recall, 0.5);
    }

    #[test]
    fn even_thresholds_cover_the_unit_interval() {
        let t = even_thresholds(19);
        assert_eq!(t.len(), 19);
        assert_eq!(t[0], 0.05);
        assert_eq!(t[18], 0.95);
    }

    fn record(s: &str, t: &str, p: f64) -> MergeRecord {
        MergeRecord { source_id: id(s), target_id: id(t), probability: p, stage: String::from("s"), tie: false }
    }

    proptest! {
        #[test]
        fn log_report_matches_naive_counter(
            recs in proptest::collection::vec((0u8..6, 0u8..6, 0.0f64..1.0), 0..20),
            thresholds in proptest::collection::btree_set(0u8..100, 1..6),
        ) {
            let t = truth(&[("q0", "p0"), ("q1", "p1"), ("q2", "p2"), ("q3", "p3")]);
            let names = |i: u8, side: &str| alloc::format!("{side}{i}");
            let log: Vec<MergeRecord> = recs.iter().map(|(a, b, p)| record(&names(*a, "q"), &names(*b, "p"), *p)).collect();
            let th: Vec<f64> = thresholds.iter().map(|t| *t as f64 / 100.0).collect();
            let report = precision_recall_log(&log, &t, &th).unwrap();
            let mut last_recall = f64::INFINITY;
            for point in &report.points {
                let mut predicted = 0;
                let mut correct = 0;
                for (a, b) in logged_pairs(&log) {
                    let best = log.iter()
                        .filter(|r| (r.source_id == a && r.target_id == b) || (r.source_id == b && r.target_id == a))
                        .map(|r| r.probability).fold(f64::NEG_INFINITY, f64::max);
                    let labeled = t.get(a.as_str()).is_some() || t.get(b.as_str()).is_some();
                    if best > point.threshold && labeled {
                        predicted += 1;
                        if t.matches(a.as_str(), b.as_str()) { correct += 1; }
                    }
                }
                prop_assert_eq!(point.n_predicted, predicted);
                prop_assert_eq!(point.n_correct, correct);
                prop_assert!(point.recall <= last_recall);
                prop_assert!((0.0..=1.0).contains(&point.precision));
                last_recall = point.recall;
            }
        }
    }
}
