//! Loading graphs, ground truth, pipeline configs and generator specs from disk.

use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use heat_core::eval::EvalError;
use heat_core::GraphError;

mod config;
mod graph;
mod synth;
mod truth;

pub use config::{load_pipeline_config, parse_pipeline_config};
pub use graph::{load_fact_graph, read_fact_graph, write_fact_graph, save_fact_graph};
pub use synth::{load_synth_spec, parse_synth_spec};
pub use truth::{load_ground_truth, read_ground_truth, save_ground_truth, write_ground_truth};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Graph { path: PathBuf, source: GraphError },
    #[error("{}:{line}: {source}", path.display())]
    Truth { path: PathBuf, line: usize, source: EvalError },
    #[error("{}: {field}: {message}", path.display())]
    Config { path: PathBuf, field: String, message: String },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn line(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IngestError::Line { path: path.to_path_buf(), line, message: message.into() }
    }

    pub(crate) fn config(path: &Path, field: impl Into<String>, message: impl ToString) -> Self {
        IngestError::Config { path: path.to_path_buf(), field: field.into(), message: message.to_string() }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path).map(BufReader::new).map_err(|e| IngestError::io(path, e))
}
