//! Pipeline config files (JSON).
//!
//! ```json
//! {"stages": [{
//!   "name": "text",
//!   "ambiguous_node_type": "text",
//!   "constraint": {"variant": "levenshtein", "key": "text",
//!                  "max_normalized_distance": 0.3, "candidate_node_type": "text"},
//!   "extractor": {"keys": ["text", "name_hash"], "normalization": "case_fold"},
//!   "indicators": {"node_types": []},
//!   "prior": {"symmetric_alpha": 1.0, "new_node_alpha": 1.0,
//!             "overrides": [{"ambiguous": "t1", "candidate": "t9", "alpha": 0.0}]},
//!   "tau": 0.7
//! }]}
//! ```
//!
//! `indicators` and `prior` may be omitted; the prior defaults to 1 and 1.
//! `normalization` is one of `none`, `case_fold` (default), `case_fold_trim`.
//! Constraint variants are `levenshtein`, `exact_key`, `hashed_name` (key
//! defaults to `name_hash`) and `type_only`.

use std::io::Read;
use std::path::Path;

use heat_core::{
    AttributeExtractorSpec, ConstraintSpec, ConstraintVariant, IndicatorSpec, NodeId, Normalization, PriorSpec,
    StageConfig,
};
use serde::Deserialize;

use super::{open, IngestError};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineFile {
    stages: Vec<StageFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    name: String,
    ambiguous_node_type: String,
    constraint: ConstraintFile,
    extractor: ExtractorFile,
    #[serde(default)]
    indicators: IndicatorFile,
    #[serde(default)]
    prior: PriorFile,
    tau: f64,
}

#[derive(Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
enum ConstraintFile {
    Levenshtein {
        key: String,
        max_normalized_distance: f64,
        candidate_node_type: String,
    },
    ExactKey {
        key: String,
        candidate_node_type: String,
    },
    HashedName {
        #[serde(default = "default_hash_key")]
        key: String,
        candidate_node_type: String,
    },
    TypeOnly {
        candidate_node_type: String,
    },
}

fn default_hash_key() -> String {
    "name_hash".into()
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum NormalizationFile {
    None,
    #[default]
    CaseFold,
    CaseFoldTrim,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractorFile {
    keys: Vec<String>,
    #[serde(default)]
    normalization: NormalizationFile,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IndicatorFile {
    #[serde(default)]
    node_types: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorFile {
    #[serde(default = "one")]
    symmetric_alpha: f64,
    #[serde(default = "one")]
    new_node_alpha: f64,
    #[serde(default)]
    overrides: Vec<OverrideFile>,
}

impl Default for PriorFile {
    fn default() -> Self {
        PriorFile {
            symmetric_alpha: 1.0,
            new_node_alpha: 1.0,
            overrides: Vec::new(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideFile {
    ambiguous: String,
    candidate: String,
    alpha: f64,
}

pub fn load_pipeline_config(path: &Path) -> Result<Vec<StageConfig>, IngestError> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| IngestError::io(path, e))?;
    parse_pipeline_config(&text, path)
}

/// Parses and validates a config; errors name the offending field, e.g.
/// `stages[1].tau`. `path` only labels errors.
pub fn parse_pipeline_config(text: &str, path: &Path) -> Result<Vec<StageConfig>, IngestError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: PipelineFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        IngestError::config(path, field, e.into_inner())
    })?;
    if file.stages.is_empty() {
        return Err(IngestError::config(path, "stages", "pipeline has no stages"));
    }
    let stages = file
        .stages
        .into_iter()
        .enumerate()
        .map(|(i, s)| stage(s, &format!("stages[{i}]"), path))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, s) in stages.iter().enumerate() {
        if stages[..i].iter().any(|t| t.name == s.name) {
            return Err(IngestError::config(path, format!("stages[{i}].name"), format!("duplicate stage name `{}`", s.name)));
        }
    }
    Ok(stages)
}

fn stage(s: StageFile, at: &str, path: &Path) -> Result<StageConfig, IngestError> {
    let err = |field: &str, msg: &dyn ToString| IngestError::config(path, format!("{at}.{field}"), msg.to_string());
    let (variant, candidate_node_type) = match s.constraint {
        ConstraintFile::Levenshtein {
            key,
            max_normalized_distance,
            candidate_node_type,
        } => (
            ConstraintVariant::Levenshtein {
                key,
                max_normalized_distance,
            },
            candidate_node_type,
        ),
        ConstraintFile::ExactKey { key, candidate_node_type } => (ConstraintVariant::ExactKey { key }, candidate_node_type),
        ConstraintFile::HashedName { key, candidate_node_type } => {
            (ConstraintVariant::HashedName { key }, candidate_node_type)
        }
        ConstraintFile::TypeOnly { candidate_node_type } => (ConstraintVariant::TypeOnly, candidate_node_type),
    };
    let constraint = ConstraintSpec::new(variant, candidate_node_type).map_err(|e| err("constraint", &e))?;
    let normalization = match s.extractor.normalization {
        NormalizationFile::None => Normalization::None,
        NormalizationFile::CaseFold => Normalization::CaseFold,
        NormalizationFile::CaseFoldTrim => Normalization::CaseFoldTrim,
    };
    let extractor = AttributeExtractorSpec::new(s.extractor.keys, normalization).map_err(|e| err("extractor", &e))?;
    let indicators = IndicatorSpec::new(s.indicators.node_types).map_err(|e| err("indicators", &e))?;
    let mut prior = PriorSpec::new(s.prior.symmetric_alpha, s.prior.new_node_alpha).map_err(|e| err("prior", &e))?;
    for (j, o) in s.prior.overrides.into_iter().enumerate() {
        let field = format!("prior.overrides[{j}]");
        let id = |v: String| NodeId::new(v).map_err(|e| err(&field, &e));
        prior = prior
            .with_override(id(o.ambiguous)?, id(o.candidate)?, o.alpha)
            .map_err(|e| err(&field, &e))?;
    }
    let config = StageConfig {
        name: s.name,
        ambiguous_node_type: s.ambiguous_node_type,
        constraint,
        extractor,
        indicators,
        prior,
        tau: s.tau,
    };
    config.validate().map_err(|e| {
        let field = match e {
            heat_core::pipeline::ConfigError::TauOutOfRange { .. } => "tau",
            heat_core::pipeline::ConfigError::EmptyStageName => "name",
            _ => "ambiguous_node_type",
        };
        err(field, &e)
    })?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STAGES: &str = r#"{"stages": [
        {"name": "text", "ambiguous_node_type": "text",
         "constraint": {"variant": "levenshtein", "key": "text", "max_normalized_distance": 0.3, "candidate_node_type": "text"},
         "extractor": {"keys": ["name_hash"]},
         "tau": 0.7},
        {"name": "person", "ambiguous_node_type": "person",
         "constraint": {"variant": "hashed_name", "candidate_node_type": "person"},
         "extractor": {"keys": ["text", "name"], "normalization": "case_fold_trim"},
         "indicators": {"node_types": ["organization"]},
         "prior": {"symmetric_alpha": 0.5, "overrides": [{"ambiguous": "a", "candidate": "b", "alpha": 0}]},
         "tau": 0.7}
    ]}"#;

    fn parse(s: &str) -> Result<Vec<StageConfig>, IngestError> {
        parse_pipeline_config(s, Path::new("c.json"))
    }

    fn field(r: Result<Vec<StageConfig>, IngestError>) -> String {
        match r {
            Err(IngestError::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn two_stage_config_in_order() {
        let stages = parse(TWO_STAGES).unwrap();
        assert_eq!(stages.len(), 2);
        assert_eq!(stages[0].name, "text");
        assert_eq!(stages[0].prior, PriorSpec::default());
        assert_eq!(
            stages[1].constraint.variant(),
            &ConstraintVariant::HashedName { key: "name_hash".into() }
        );
        assert!(stages[1].indicators.contains("organization"));
        assert_eq!(stages[1].prior.alpha_for("a", "b"), 0.0);
        assert_eq!(stages[1].prior.alpha_for("a", "c"), 0.5);
        assert_eq!(stages[1].prior.new_node_alpha(), 1.0);
        assert_eq!(stages[1].extractor.normalization(), Normalization::CaseFoldTrim);
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field(parse(&TWO_STAGES.replacen("0.7", "1.5", 1))), "stages[0].tau");
        assert_eq!(field(parse(r#"{"stages": []}"#)), "stages");
        assert_eq!(field(parse(&TWO_STAGES.replace("hashed_name", "soundex"))), "stages[1].constraint.variant");
        assert_eq!(field(parse(&TWO_STAGES.replace("0.3", "3"))), "stages[0].constraint");
        assert_eq!(field(parse(&TWO_STAGES.replace(r#""keys": ["name_hash"]"#, r#""keys": []"#))), "stages[0].extractor");
        assert_eq!(field(parse(&TWO_STAGES.replace("symmetric_alpha", "alpha_sym"))), "stages[1].prior.alpha_sym");
        assert_eq!(field(parse(&TWO_STAGES.replace(r#""name": "person""#, r#""name": "text""#))), "stages[1].name");
        assert_eq!(field(parse(&TWO_STAGES.replace("0.5", "-1"))), "stages[1].prior");
    }
}
