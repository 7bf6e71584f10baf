//! Generator spec files (JSON). Every field is optional and falls back to
//! [`SynthSpec::default`].

use std::io::Read;
use std::path::Path;

use heat_core::SynthSpec;
use serde::Deserialize;

use super::{open, IngestError};

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct SynthFile {
    n_true_entities: Option<usize>,
    duplicate_rate: Option<f64>,
    events_per_entity_min: Option<u32>,
    events_per_entity_max: Option<u32>,
    attribute_noise_rate: Option<f64>,
    name_collision_rate: Option<f64>,
    seed: Option<u64>,
    lab_size: Option<usize>,
    keywords_per_topic: Option<usize>,
    interests_per_person: Option<usize>,
    keywords_per_event: Option<u32>,
    max_coauthors: Option<u32>,
}

pub fn load_synth_spec(path: &Path) -> Result<SynthSpec, IngestError> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| IngestError::io(path, e))?;
    parse_synth_spec(&text, path)
}

pub fn parse_synth_spec(text: &str, path: &Path) -> Result<SynthSpec, IngestError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let f: SynthFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        IngestError::config(path, field, e.into_inner())
    })?;
    let d = SynthSpec::default();
    Ok(SynthSpec {
        n_true_entities: f.n_true_entities.unwrap_or(d.n_true_entities),
        duplicate_rate: f.duplicate_rate.unwrap_or(d.duplicate_rate),
        events_per_entity_min: f.events_per_entity_min.unwrap_or(d.events_per_entity_min),
        events_per_entity_max: f.events_per_entity_max.unwrap_or(d.events_per_entity_max),
        attribute_noise_rate: f.attribute_noise_rate.unwrap_or(d.attribute_noise_rate),
        name_collision_rate: f.name_collision_rate.unwrap_or(d.name_collision_rate),
        seed: f.seed.unwrap_or(d.seed),
        lab_size: f.lab_size.unwrap_or(d.lab_size),
        keywords_per_topic: f.keywords_per_topic.unwrap_or(d.keywords_per_topic),
        interests_per_person: f.interests_per_person.unwrap_or(d.interests_per_person),
        keywords_per_event: f.keywords_per_event.unwrap_or(d.keywords_per_event),
        max_coauthors: f.max_coauthors.unwrap_or(d.max_coauthors),
    })
}
