//! Line-delimited JSON graph files.
//!
//! ```text
//! {"kind":"entity","id":"p1","type":"person","attrs":{"name_hash":["h1"]}}
//! {"kind":"event","id":"e1","attrs":{"date":["2019-03-01"]}}
//! {"kind":"fact","event":"e1","predicate":"author","entity":"p1"}
//! ```
//!
//! Records may come in any order. An attribute value may be a single string
//! instead of a list. Blank lines are ignored.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use heat_core::graph::load_validate;
use heat_core::{Attributes, EntityNode, EventHub, FactGraph, FactTriple, NodeId, RawGraph};
use serde::{Deserialize, Serialize};

use super::{open, IngestError};

#[derive(Deserialize)]
#[serde(untagged)]
enum Values {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Entity {
        id: String,
        #[serde(rename = "type")]
        node_type: String,
        #[serde(default)]
        attrs: BTreeMap<String, Values>,
    },
    Event {
        id: String,
        #[serde(default)]
        attrs: BTreeMap<String, Values>,
    },
    Fact {
        event: String,
        predicate: String,
        entity: String,
    },
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RecordOut<'a> {
    Entity {
        id: &'a str,
        #[serde(rename = "type")]
        node_type: &'a str,
        attrs: &'a Attributes,
    },
    Event {
        id: &'a str,
        attrs: &'a Attributes,
    },
    Fact {
        event: &'a str,
        predicate: &'a str,
        entity: &'a str,
    },
}

fn attributes(raw: BTreeMap<String, Values>) -> Attributes {
    raw.into_iter()
        .map(|(k, v)| match v {
            Values::One(s) => (k, vec![s]),
            Values::Many(list) => (k, list),
        })
        .collect()
}

pub fn load_fact_graph(path: &Path) -> Result<FactGraph, IngestError> {
    read_fact_graph(open(path)?, path)
}

/// Parses every line, then validates the whole graph. `path` only labels errors.
pub fn read_fact_graph(reader: impl BufRead, path: &Path) -> Result<FactGraph, IngestError> {
    let mut raw = RawGraph::default();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| IngestError::line(path, line_no, e.to_string()))?;
        let id = |s: String| NodeId::new(s).map_err(|e| IngestError::line(path, line_no, e.to_string()));
        match record {
            Record::Entity { id: i, node_type, attrs } => raw.entities.push(EntityNode {
                id: id(i)?,
                node_type,
                attributes: attributes(attrs),
            }),
            Record::Event { id: i, attrs } => raw.events.push(EventHub {
                id: id(i)?,
                attributes: attributes(attrs),
            }),
            Record::Fact { event, predicate, entity } => {
                raw.facts.push(FactTriple::new(id(event)?, predicate, id(entity)?));
            }
        }
    }
    load_validate(raw).map_err(|source| IngestError::Graph { path: path.to_path_buf(), source })
}

/// Writes entities, then events, then facts, each in id order.
pub fn write_fact_graph(g: &FactGraph, mut out: impl Write) -> std::io::Result<()> {
    let mut line = |r: &RecordOut| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")
    };
    for e in g.entities() {
        line(&RecordOut::Entity {
            id: e.id.as_str(),
            node_type: &e.node_type,
            attrs: &e.attributes,
        })?;
    }
    for e in g.events() {
        line(&RecordOut::Event {
            id: e.id.as_str(),
            attrs: &e.attributes,
        })?;
    }
    for f in g.facts() {
        line(&RecordOut::Fact {
            event: f.event.as_str(),
            predicate: f.predicate,
            entity: f.entity.as_str(),
        })?;
    }
    Ok(())
}

pub fn save_fact_graph(g: &FactGraph, path: &Path) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_fact_graph(g, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| IngestError::io(path, e))
}
