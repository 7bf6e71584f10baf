//! The fact graph: event hubs joined to attributed entities by predicate-labeled
//! facts, plus the neighborhood queries the scorer is built on.
//!
//! A [`FactGraph`] is immutable once validated. Entities, events and facts are
//! kept sorted by id, so every query and every derived index iterates in a
//! deterministic order regardless of how the input was ordered.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

use crate::matchers::{extract_distinct, AttributeExtractorSpec};

/// Ids that collide with the markers used in alignment output.
pub const RESERVED_IDS: [&str; 2] = ["NEW", "UNALIGNABLE"];

/// Attribute key to an ordered list of values.
pub type Attributes = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("node id must be non-empty")]
    EmptyId,
    #[error("node id `{0}` is reserved")]
    ReservedId(String),
    #[error("entity `{0}` has an empty node type")]
    EmptyNodeType(NodeId),
    #[error("node `{0}` has an empty attribute key")]
    EmptyAttributeKey(NodeId),
    #[error("fact ({event}, {predicate}, {entity}) has an empty predicate")]
    EmptyPredicate {
        event: NodeId,
        predicate: String,
        entity: NodeId,
    },
    #[error("fact ({event}, {predicate}, {entity}) references missing node `{missing}`")]
    DanglingFact {
        event: NodeId,
        predicate: String,
        entity: NodeId,
        missing: NodeId,
    },
    #[error("duplicate entity id `{0}`")]
    DuplicateEntity(NodeId),
    #[error("duplicate event id `{0}`")]
    DuplicateEvent(NodeId),
    #[error("event `{0}` participates in no facts")]
    DanglingHub(NodeId),
    #[error("id `{0}` is used by both an entity and an event")]
    NamespaceCollision(NodeId),
    #[error("unknown entity `{0}`")]
    NotFound(String),
}

/// Opaque, non-empty node identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self, GraphError> {
        let id = id.into();
        if id.is_empty() {
            return Err(GraphError::EmptyId);
        }
        Ok(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityNode {
    pub id: NodeId,
    pub node_type: String,
    pub attributes: Attributes,
}

impl EntityNode {
    pub fn new(id: NodeId, node_type: impl Into<String>) -> Self {
        EntityNode {
            id,
            node_type: node_type.into(),
            attributes: Attributes::new(),
        }
    }

    pub fn with_attr<I, S>(mut self, key: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attributes
            .entry(key.into())
            .or_default()
            .extend(values.into_iter().map(Into::into));
        self
    }

    pub fn values(&self, key: &str) -> &[String] {
        self.attributes.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// An event node. It has no identity semantics beyond the facts it joins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventHub {
    pub id: NodeId,
    pub attributes: Attributes,
}

impl EventHub {
    pub fn new(id: NodeId) -> Self {
        EventHub {
            id,
            attributes: Attributes::new(),
        }
    }

    pub fn with_attr<I, S>(mut self, key: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attributes
            .entry(key.into())
            .or_default()
            .extend(values.into_iter().map(Into::into));
        self
    }
}

/// One `(event, predicate, entity)` edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactTriple {
    pub event: NodeId,
    pub predicate: String,
    pub entity: NodeId,
}

impl FactTriple {
    pub fn new(event: NodeId, predicate: impl Into<String>, entity: NodeId) -> Self {
        FactTriple {
            event,
            predicate: predicate.into(),
            entity,
        }
    }
}

/// Unvalidated graph contents, in any order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawGraph {
    pub entities: Vec<EntityNode>,
    pub events: Vec<EventHub>,
    pub facts: Vec<FactTriple>,
}

/// Borrowed view of a fact inside a [`FactGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactRef<'a> {
    pub event: &'a NodeId,
    pub predicate: &'a str,
    pub entity: &'a NodeId,
}

impl FactRef<'_> {
    pub fn to_triple(&self) -> FactTriple {
        FactTriple::new(self.event.clone(), self.predicate, self.entity.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Fact {
    pub event: u32,
    pub predicate: u32,
    pub entity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactGraph {
    entities: Vec<EntityNode>,
    events: Vec<EventHub>,
    predicates: Vec<String>,
    // Sorted by (event, predicate, entity); indices order like the ids.
    facts: Vec<Fact>,
    event_fact_start: Vec<u32>,
    entity_events: Vec<Vec<u32>>,
}

/// Validates `raw` and builds the indexed graph.
///
/// Exact duplicate facts collapse into one. Duplicate node ids, dangling fact
/// endpoints, events without facts and ids shared between the entity and event
/// namespaces are rejected.
pub fn load_validate(raw: RawGraph) -> Result<FactGraph, GraphError> {
    FactGraph::build(raw, false)
}

impl FactGraph {
    pub fn empty() -> Self {
        FactGraph {
            entities: Vec::new(),
            events: Vec::new(),
            predicates: Vec::new(),
            facts: Vec::new(),
            event_fact_start: alloc::vec![0],
            entity_events: Vec::new(),
        }
    }

    /// Builds a graph, either rejecting repeated node ids or folding them
    /// together. When folding, earlier occurrences come first in the merged
    /// attribute lists and decide the node type.
    pub(crate) fn build(raw: RawGraph, merge_duplicates: bool) -> Result<FactGraph, GraphError> {
        let RawGraph {
            mut entities,
            mut events,
            mut facts,
        } = raw;

        for e in &entities {
            check_id(&e.id)?;
            if e.node_type.is_empty() {
                return Err(GraphError::EmptyNodeType(e.id.clone()));
            }
            check_keys(&e.id, &e.attributes)?;
        }
        for e in &events {
            check_id(&e.id)?;
            check_keys(&e.id, &e.attributes)?;
        }

        entities.sort_by(|a, b| a.id.cmp(&b.id));
        events.sort_by(|a, b| a.id.cmp(&b.id));
        let entities = fold_duplicates(
            entities,
            |e| &e.id,
            |into, from| merge_attributes(&mut into.attributes, from.attributes),
            merge_duplicates,
            GraphError::DuplicateEntity,
        )?;
        let events = fold_duplicates(
            events,
            |e| &e.id,
            |into, from| merge_attributes(&mut into.attributes, from.attributes),
            merge_duplicates,
            GraphError::DuplicateEvent,
        )?;

        for ev in &events {
            if entities.binary_search_by(|e| e.id.cmp(&ev.id)).is_ok() {
                return Err(GraphError::NamespaceCollision(ev.id.clone()));
            }
        }

        facts.sort();
        facts.dedup();
        let mut predicates: Vec<String> = facts.iter().map(|f| f.predicate.clone()).collect();
        predicates.sort();
        predicates.dedup();

        let mut indexed = Vec::with_capacity(facts.len());
        for f in &facts {
            if f.predicate.is_empty() {
                return Err(GraphError::EmptyPredicate {
                    event: f.event.clone(),
                    predicate: f.predicate.clone(),
                    entity: f.entity.clone(),
                });
            }
            let dangling = |missing: &NodeId| GraphError::DanglingFact {
                event: f.event.clone(),
                predicate: f.predicate.clone(),
                entity: f.entity.clone(),
                missing: missing.clone(),
            };
            let event = events
                .binary_search_by(|e| e.id.cmp(&f.event))
                .map_err(|_| dangling(&f.event))?;
            let entity = entities
                .binary_search_by(|e| e.id.cmp(&f.entity))
                .map_err(|_| dangling(&f.entity))?;
            let predicate = predicates
                .binary_search(&f.predicate)
                .expect("predicate interned above");
            indexed.push(Fact {
                event: event as u32,
                predicate: predicate as u32,
                entity: entity as u32,
            });
        }
        // Already ordered: ids sort like their indices.
        debug_assert!(indexed.windows(2).all(|w| w[0] < w[1]));

        let mut event_fact_start = alloc::vec![0u32; events.len() + 1];
        for f in &indexed {
            event_fact_start[f.event as usize + 1] += 1;
        }
        for i in 0..events.len() {
            if event_fact_start[i + 1] == 0 {
                return Err(GraphError::DanglingHub(events[i].id.clone()));
            }
            event_fact_start[i + 1] += event_fact_start[i];
        }

        let mut entity_events: Vec<Vec<u32>> = alloc::vec![Vec::new(); entities.len()];
        for f in &indexed {
            let list = &mut entity_events[f.entity as usize];
            if list.last() != Some(&f.event) {
                list.push(f.event);
            }
        }

        Ok(FactGraph {
            entities,
            events,
            predicates,
            facts: indexed,
            event_fact_start,
            entity_events,
        })
    }

    /// Union of two graphs. Nodes with equal ids merge (attribute lists are
    /// unioned, `self` first); facts are unioned.
    pub fn union(&self, other: &FactGraph) -> Result<FactGraph, GraphError> {
        let mut raw = self.to_raw();
        let more = other.to_raw();
        raw.entities.extend(more.entities);
        raw.events.extend(more.events);
        raw.facts.extend(more.facts);
        FactGraph::build(raw, true)
    }

    pub fn to_raw(&self) -> RawGraph {
        RawGraph {
            entities: self.entities.clone(),
            events: self.events.clone(),
            facts: self.facts().map(|f| f.to_triple()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.events.is_empty()
    }

    /// Entities sorted by id.
    pub fn entities(&self) -> &[EntityNode] {
        &self.entities
    }

    /// Events sorted by id.
    pub fn events(&self) -> &[EventHub] {
        &self.events
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    /// Facts sorted by event id, then predicate, then entity id.
    pub fn facts(&self) -> impl Iterator<Item = FactRef<'_>> + '_ {
        self.facts.iter().map(move |f| self.fact_ref(f))
    }

    pub fn entity(&self, id: &str) -> Option<&EntityNode> {
        self.entity_ix(id).map(|ix| &self.entities[ix])
    }

    pub fn event(&self, id: &str) -> Option<&EventHub> {
        self.events
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|ix| &self.events[ix])
    }

    pub fn has_node_type(&self, node_type: &str) -> bool {
        self.entities.iter().any(|e| e.node_type == node_type)
    }

    /// Number of distinct events the entity takes part in.
    pub fn event_count_of(&self, id: &str) -> Result<usize, GraphError> {
        let ix = self.require(id)?;
        Ok(self.entity_events[ix].len())
    }

    /// Entities sharing at least one event with `id`, excluding `id` itself.
    pub fn markov_blanket(&self, id: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let ix = self.require(id)?;
        Ok(self
            .blanket_ix(ix)
            .into_iter()
            .map(|j| self.entities[j as usize].id.clone())
            .collect())
    }

    /// Facts on the node's events whose entity endpoint is some other entity,
    /// in (event, predicate, entity) order.
    pub fn neighbor_facts(&self, id: &str) -> Result<Vec<(FactTriple, &EntityNode)>, GraphError> {
        let ix = self.require(id)?;
        Ok(self
            .neighbor_fact_iter(ix)
            .map(|f| (self.fact_ref(f).to_triple(), &self.entities[f.entity as usize]))
            .collect())
    }

    fn require(&self, id: &str) -> Result<usize, GraphError> {
        self.entity_ix(id)
            .ok_or_else(|| GraphError::NotFound(id.to_string()))
    }

    fn fact_ref(&self, f: &Fact) -> FactRef<'_> {
        FactRef {
            event: &self.events[f.event as usize].id,
            predicate: &self.predicates[f.predicate as usize],
            entity: &self.entities[f.entity as usize].id,
        }
    }

    pub(crate) fn entity_ix(&self, id: &str) -> Option<usize> {
        self.entities
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
    }

    pub(crate) fn event_facts(&self, event: u32) -> &[Fact] {
        let lo = self.event_fact_start[event as usize] as usize;
        let hi = self.event_fact_start[event as usize + 1] as usize;
        &self.facts[lo..hi]
    }

    pub(crate) fn entity_events(&self, ix: usize) -> &[u32] {
        &self.entity_events[ix]
    }

    pub(crate) fn raw_facts(&self) -> &[Fact] {
        &self.facts
    }

    /// Sorted, distinct entity indices sharing an event with `ix`.
    pub(crate) fn blanket_ix(&self, ix: usize) -> Vec<u32> {
        let mut out: Vec<u32> = self.entity_events[ix]
            .iter()
            .flat_map(|&ev| self.event_facts(ev).iter())
            .map(|f| f.entity)
            .filter(|&j| j as usize != ix)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub(crate) fn neighbor_fact_iter(&self, ix: usize) -> impl Iterator<Item = &Fact> + '_ {
        self.entity_events[ix]
            .iter()
            .flat_map(move |&ev| self.event_facts(ev).iter())
            .filter(move |f| f.entity as usize != ix)
    }
}

fn check_id(id: &NodeId) -> Result<(), GraphError> {
    if id.as_str().is_empty() {
        return Err(GraphError::EmptyId);
    }
    if RESERVED_IDS.contains(&id.as_str()) {
        return Err(GraphError::ReservedId(id.to_string()));
    }
    Ok(())
}

fn check_keys(id: &NodeId, attrs: &Attributes) -> Result<(), GraphError> {
    if attrs.keys().any(String::is_empty) {
        return Err(GraphError::EmptyAttributeKey(id.clone()));
    }
    Ok(())
}

fn fold_duplicates<T>(
    sorted: Vec<T>,
    id: impl Fn(&T) -> &NodeId,
    merge: impl Fn(&mut T, T),
    allow: bool,
    dup: impl Fn(NodeId) -> GraphError,
) -> Result<Vec<T>, GraphError> {
    let mut out: Vec<T> = Vec::with_capacity(sorted.len());
    for item in sorted {
        match out.last_mut() {
            Some(last) if id(last) == id(&item) => {
                if !allow {
                    return Err(dup(id(&item).clone()));
                }
                merge(last, item);
            }
            _ => out.push(item),
        }
    }
    Ok(out)
}

/// Appends values from `from` that `into` does not already hold under the same key.
pub(crate) fn merge_attributes(into: &mut Attributes, from: Attributes) {
    for (key, values) in from {
        let slot = into.entry(key).or_default();
        for v in values {
            if !slot.contains(&v) {
                slot.push(v);
            }
        }
    }
}

/// Per-value occurrence counts over all facts of a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeFrequencyTable {
    counts: BTreeMap<String, u64>,
}

impl AttributeFrequencyTable {
    pub fn get(&self, value: &str) -> u64 {
        self.counts.get(value).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Tallies extracted values over facts: an entity in three facts contributes
/// each of its distinct extracted values three times.
pub fn attribute_frequencies(g: &FactGraph, extractor: &AttributeExtractorSpec) -> AttributeFrequencyTable {
    let per_entity: Vec<Vec<String>> = g
        .entities
        .iter()
        .map(|e| extract_distinct(e, extractor))
        .collect();
    let mut counts = BTreeMap::new();
    for f in &g.facts {
        for v in &per_entity[f.entity as usize] {
            *counts.entry(v.clone()).or_insert(0) += 1;
        }
    }
    AttributeFrequencyTable { counts }
}
