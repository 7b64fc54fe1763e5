//! Ground-truth label files: TSV with header `cache_id\tgt_label`.

use std::io::{BufRead, Write};

use cdnwatch_core::evaluation::GroundTruth;

use crate::flowlog::{FormatError, LineError};

pub const HEADER: &str = "cache_id\tgt_label";

pub fn read_ground_truth<R: BufRead>(reader: R) -> crate::Result<GroundTruth> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(FormatError::MissingHeader)??;
    if header.trim_end_matches('\r') != HEADER {
        return Err(FormatError::BadHeader(header).into());
    }
    let mut truth = GroundTruth::default();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        let mut parts = line.trim_end_matches('\r').split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(cache), Some(label), None) if !cache.is_empty() && !label.is_empty() => {
                truth.insert(cache, label);
            }
            _ => return Err(LineError { line: line_no, reason: "expected two non-empty fields".into() }.into()),
        }
    }
    Ok(truth)
}

pub fn write_ground_truth<W: Write>(mut w: W, truth: &GroundTruth) -> crate::Result<()> {
    writeln!(w, "{HEADER}")?;
    for (cache, label) in &truth.labels {
        writeln!(w, "{cache}\t{label}")?;
    }
    w.flush()?;
    Ok(())
}
