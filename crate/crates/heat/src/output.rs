//! Tab-separated alignment matrices and merge logs, and CSV evaluation
//! reports. Numbers are written in Rust's shortest round-trip form, so
//! reading a file back recovers the exact values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use heat_core::{AlignmentMatrix, AlignmentRow, Candidate, CandidateScore, EvalReport, MergeRecord, NodeId};

use crate::ingest::IngestError;

const UNALIGNABLE: &str = "UNALIGNABLE";

fn field(s: &str) -> io::Result<&str> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{s:?} contains a tab or line break and cannot be written as a TSV field"),
        ));
    }
    Ok(s)
}

/// One line per (ambiguous, candidate): `ambiguous, candidate or NEW, count,
/// probability`, rows in id order and candidates by descending probability.
/// An unalignable row is the single line `ambiguous, UNALIGNABLE, 0, 0`.
pub fn write_matrix(m: &AlignmentMatrix, mut out: impl Write) -> io::Result<()> {
    for (id, row) in m.rows() {
        let id = field(id.as_str())?;
        match row {
            AlignmentRow::Unalignable => writeln!(out, "{id}\t{UNALIGNABLE}\t0\t0")?,
            AlignmentRow::Scored(scores) => {
                for s in scores {
                    let cand = match &s.candidate {
                        Candidate::New => "NEW",
                        Candidate::Node(n) => field(n.as_str())?,
                    };
                    writeln!(out, "{id}\t{cand}\t{}\t{}", s.count, s.probability)?;
                }
            }
        }
    }
    Ok(())
}

fn columns<'a, const N: usize>(line: &'a str, path: &Path, line_no: usize) -> Result<[&'a str; N], IngestError> {
    let cols: Vec<&str> = line.split('\t').collect();
    cols.try_into()
        .map_err(|c: Vec<&str>| IngestError::line(path, line_no, format!("expected {N} tab-separated columns, found {}", c.len())))
}

fn number(s: &str, path: &Path, line_no: usize) -> Result<f64, IngestError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IngestError::line(path, line_no, format!("`{s}` is not a finite number")))
}

fn node(s: &str, path: &Path, line_no: usize) -> Result<NodeId, IngestError> {
    NodeId::new(s).map_err(|e| IngestError::line(path, line_no, e.to_string()))
}

fn lines<'a>(reader: impl BufRead + 'a, path: &'a Path) -> impl Iterator<Item = Result<(usize, String), IngestError>> + 'a {
    reader.lines().enumerate().filter_map(move |(n, l)| match l {
        Err(e) => Some(Err(IngestError::io(path, e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((n + 1, l.strip_suffix('\r').map(str::to_owned).unwrap_or(l)))),
    })
}

/// Reads a matrix written by [`write_matrix`]. Indicator coefficients are not
/// stored in the file; read scores carry 1.
pub fn read_matrix(reader: impl BufRead, path: &Path) -> Result<AlignmentMatrix, IngestError> {
    let mut rows: BTreeMap<NodeId, Option<Vec<CandidateScore>>> = BTreeMap::new();
    for item in lines(reader, path) {
        let (n, line) = item?;
        let [id, cand, count, prob] = columns::<4>(&line, path, n)?;
        let id = node(id, path, n)?;
        let slot = rows.entry(id.clone()).or_insert_with(|| Some(Vec::new()));
        if cand == UNALIGNABLE {
            if slot.as_ref().is_some_and(|s| !s.is_empty()) {
                return Err(IngestError::line(path, n, format!("`{id}` is both scored and unalignable")));
            }
            *slot = None;
            continue;
        }
        let Some(scores) = slot else {
            return Err(IngestError::line(path, n, format!("`{id}` is both scored and unalignable")));
        };
        let candidate = if cand == "NEW" {
            Candidate::New
        } else {
            Candidate::Node(node(cand, path, n)?)
        };
        scores.push(CandidateScore {
            candidate,
            count: number(count, path, n)?,
            indicator: 1.0,
            probability: number(prob, path, n)?,
        });
    }
    let mut m = AlignmentMatrix::new();
    for (id, row) in rows {
        m.insert(id, row.map_or(AlignmentRow::Unalignable, AlignmentRow::from_scores));
    }
    Ok(m)
}

/// `source, target, probability, stage` per record, in log order.
pub fn write_merge_log(log: &[MergeRecord], mut out: impl Write) -> io::Result<()> {
    for r in log {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            field(r.source_id.as_str())?,
            field(r.target_id.as_str())?,
            r.probability,
            field(&r.stage)?
        )?;
    }
    Ok(())
}

/// Reads a log written by [`write_merge_log`]. Tie flags are not stored;
/// read records carry `false`.
pub fn read_merge_log(reader: impl BufRead, path: &Path) -> Result<Vec<MergeRecord>, IngestError> {
    let mut log = Vec::new();
    for item in lines(reader, path) {
        let (n, line) = item?;
        let [source, target, prob, stage] = columns::<4>(&line, path, n)?;
        log.push(MergeRecord {
            source_id: node(source, path, n)?,
            target_id: node(target, path, n)?,
            probability: number(prob, path, n)?,
            stage: stage.to_string(),
            tie: false,
        });
    }
    Ok(log)
}

pub fn write_report(report: &EvalReport, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "threshold,precision,recall,n_predicted,n_correct")?;
    for p in &report.points {
        writeln!(out, "{},{},{},{},{}", p.threshold, p.precision, p.recall, p.n_predicted, p.n_correct)?;
    }
    Ok(())
}

/// Creates `path` and runs `write` against a buffered handle.
pub fn save(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(|e| IngestError::io(path, e))
}
