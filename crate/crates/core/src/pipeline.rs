//! Staged alignment and merging.
//!
//! Each stage scores one node type, merges every ambiguous node whose best
//! real candidate clears the stage threshold into that candidate, and unions
//! the two graphs. Later stages align the unified graph with itself, so they
//! see the cleaner neighborhoods produced by earlier merges.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::{eat_with, AlignmentMatrix, EngineError, Executor, PriorSpec, Sequential};
use crate::graph::{FactGraph, GraphError, NodeId, RawGraph};
use crate::matchers::{AttributeExtractorSpec, ConstraintSpec, IndicatorSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("pipeline has no stages")]
    EmptyPipeline,
    #[error("stage name must be non-empty")]
    EmptyStageName,
    #[error("stage `{stage}`: ambiguous_node_type must be non-empty")]
    EmptyAmbiguousType { stage: String },
    #[error("stage `{stage}`: tau {tau} is outside [0, 1]")]
    TauOutOfRange { stage: String, tau: f64 },
    #[error("stage `{stage}`: node type `{node_type}` occurs in neither graph")]
    MissingNodeType { stage: String, node_type: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One alignment stage: which nodes to align, how to block and compare them,
/// the prior, and the merge threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub name: String,
    pub ambiguous_node_type: String,
    pub constraint: ConstraintSpec,
    pub extractor: AttributeExtractorSpec,
    pub indicators: IndicatorSpec,
    pub prior: PriorSpec,
    pub tau: f64,
}

impl StageConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(ConfigError::EmptyStageName);
        }
        if self.ambiguous_node_type.is_empty() {
            return Err(ConfigError::EmptyAmbiguousType {
                stage: self.name.clone(),
            });
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ConfigError::TauOutOfRange {
                stage: self.name.clone(),
                tau: self.tau,
            });
        }
        Ok(())
    }

    /// [`validate`](Self::validate), plus the ambiguous and candidate node
    /// types must occur in at least one of the graphs.
    pub fn validate_for(&self, g: &FactGraph, g_prime: &FactGraph) -> Result<(), ConfigError> {
        self.validate()?;
        for ty in [self.ambiguous_node_type.as_str(), self.constraint.candidate_node_type()] {
            if !g.has_node_type(ty) && !g_prime.has_node_type(ty) {
                return Err(ConfigError::MissingNodeType {
                    stage: self.name.clone(),
                    node_type: ty.into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeRecord {
    pub source_id: NodeId,
    pub target_id: NodeId,
    pub probability: f64,
    pub stage: String,
    /// The target won an exact tie on probability.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedGraph {
    pub graph: FactGraph,
    pub merge_log: Vec<MergeRecord>,
}

/// A full pipeline run: the unified graph and each stage's matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatRun {
    pub unified: UnifiedGraph,
    pub matrices: Vec<(String, AlignmentMatrix)>,
}

fn find(parent: &BTreeMap<NodeId, NodeId>, x: &NodeId) -> NodeId {
    let mut cur = x;
    while let Some(next) = parent.get(cur) {
        cur = next;
    }
    cur.clone()
}

/// Turns a matrix into merges. Rows are taken in id order; a row whose node
/// is already joined with its target is skipped, so each record removes
/// exactly one node.
fn plan_merges(matrix: &AlignmentMatrix, stage: &StageConfig) -> (BTreeMap<NodeId, NodeId>, Vec<MergeRecord>) {
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut records = Vec::new();
    for (source, decision) in matrix.decisions(stage.tau) {
        let from = find(&parent, source);
        let to = find(&parent, decision.target);
        if from == to {
            continue;
        }
        if decision.tie {
            log::info!(
                "stage {}: {} tied at {}; merging into smallest id {}",
                stage.name,
                source,
                decision.probability,
                decision.target
            );
        }
        parent.insert(from, to);
        records.push(MergeRecord {
            source_id: source.clone(),
            target_id: decision.target.clone(),
            probability: decision.probability,
            stage: stage.name.clone(),
            tie: decision.tie,
        });
    }
    let mapping = parent.keys().map(|k| (k.clone(), find(&parent, k))).collect();
    (mapping, records)
}

/// Renames entities per `mapping` and folds nodes that end up sharing an id.
/// The node already carrying the target id keeps its type and leads the
/// merged attribute lists; the others follow in id order. Facts that become
/// identical collapse.
pub fn merge_nodes(g: &FactGraph, mapping: &BTreeMap<NodeId, NodeId>) -> Result<FactGraph, GraphError> {
    for (from, to) in mapping {
        for id in [from, to] {
            if g.event(id.as_str()).is_some() {
                return Err(GraphError::NamespaceCollision(id.clone()));
            }
            if g.entity(id.as_str()).is_none() {
                return Err(GraphError::NotFound(id.as_str().into()));
            }
        }
        if mapping.get(to).is_some_and(|next| next != to) {
            return Err(GraphError::NotFound(to.as_str().into()));
        }
    }
    if mapping.is_empty() {
        return Ok(g.clone());
    }
    let rename = |id: &NodeId| mapping.get(id).unwrap_or(id).clone();
    let RawGraph {
        entities,
        events,
        facts,
    } = g.to_raw();
    let mut entities: Vec<(NodeId, bool, crate::graph::EntityNode)> = entities
        .into_iter()
        .map(|mut e| {
            let new = rename(&e.id);
            let moved = new != e.id;
            e.id = new.clone();
            (new, moved, e)
        })
        .collect();
    // Input is in old-id order, so a stable sort leaves followers in id order.
    entities.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    let facts = facts
        .into_iter()
        .map(|mut f| {
            f.entity = rename(&f.entity);
            f
        })
        .collect();
    FactGraph::build(
        RawGraph {
            entities: entities.into_iter().map(|(_, _, e)| e).collect(),
            events,
            facts,
        },
        true,
    )
}

/// Scores one stage and merges the confident alignments into the union of
/// the two graphs.
pub fn run_stage(
    g: &FactGraph,
    g_prime: &FactGraph,
    stage: &StageConfig,
) -> Result<(UnifiedGraph, AlignmentMatrix), PipelineError> {
    run_stage_with(g, g_prime, stage, &Sequential)
}

pub fn run_stage_with<E: Executor>(
    g: &FactGraph,
    g_prime: &FactGraph,
    stage: &StageConfig,
    exec: &E,
) -> Result<(UnifiedGraph, AlignmentMatrix), PipelineError> {
    stage.validate_for(g, g_prime)?;
    let matrix = eat_with(g, g_prime, stage, exec)?;
    let base = if core::ptr::eq(g, g_prime) {
        g.clone()
    } else {
        g.union(g_prime)?
    };
    let (mapping, merge_log) = plan_merges(&matrix, stage);
    let graph = merge_nodes(&base, &mapping)?;
    Ok((UnifiedGraph { graph, merge_log }, matrix))
}

/// Runs the stages in order. The first aligns `g` against `g_prime`; every
/// later one aligns the unified graph with itself.
pub fn heat(g: &FactGraph, g_prime: &FactGraph, stages: &[StageConfig]) -> Result<UnifiedGraph, PipelineError> {
    heat_with(g, g_prime, stages, &Sequential).map(|run| run.unified)
}

pub fn heat_with<E: Executor>(
    g: &FactGraph,
    g_prime: &FactGraph,
    stages: &[StageConfig],
    exec: &E,
) -> Result<HeatRun, PipelineError> {
    let Some((first, rest)) = stages.split_first() else {
        return Err(ConfigError::EmptyPipeline.into());
    };
    for s in stages {
        s.validate()?;
    }
    let (mut unified, matrix) = run_stage_with(g, g_prime, first, exec)?;
    let mut matrices = alloc::vec![(first.name.clone(), matrix)];
    for stage in rest {
        let (next, matrix) = run_stage_with(&unified.graph, &unified.graph, stage, exec)?;
        unified.graph = next.graph;
        unified.merge_log.extend(next.merge_log);
        matrices.push((stage.name.clone(), matrix));
    }
    Ok(HeatRun { unified, matrices })
}
