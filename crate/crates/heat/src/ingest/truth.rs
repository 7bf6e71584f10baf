//! Ground-truth files: `post_id<TAB>pre_id` per line, no header.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use heat_core::{GroundTruth, NodeId};

use super::{open, IngestError};

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, IngestError> {
    read_ground_truth(open(path)?, path)
}

/// Blank lines are skipped. An empty file gives an empty mapping.
pub fn read_ground_truth(reader: impl BufRead, path: &Path) -> Result<GroundTruth, IngestError> {
    let mut truth = GroundTruth::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [post, pre] = cols[..] else {
            return Err(IngestError::line(path, line_no, format!("expected 2 tab-separated columns, found {}", cols.len())));
        };
        let id = |s: &str| NodeId::new(s).map_err(|e| IngestError::line(path, line_no, e.to_string()));
        truth
            .insert(id(post)?, id(pre)?)
            .map_err(|source| IngestError::Truth { path: path.to_path_buf(), line: line_no, source })?;
    }
    Ok(truth)
}

pub fn write_ground_truth(truth: &GroundTruth, mut out: impl Write) -> std::io::Result<()> {
    for (post, pre) in truth.iter() {
        writeln!(out, "{post}\t{pre}")?;
    }
    Ok(())
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_ground_truth(truth, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| IngestError::io(path, e))
}
