use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityRecord {
    pub target_id: String,
    /// pK units (−log10 of the binding constant).
    pub affinity: f64,
}

/// Reads a `target_id,affinity` CSV with a header row.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<AffinityRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels_str(&text, &path.display().to_string())
}

pub fn parse_labels_str(text: &str, origin: &str) -> Result<Vec<AffinityRecord>> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "target_id" || &headers[1] != "affinity" {
        return Err(perr(1, "header must be `target_id,affinity`".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            perr(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let id = row[0].to_string();
        let affinity: f64 = row[1]
            .parse()
            .map_err(|_| perr(line, format!("bad affinity `{}`", &row[1])))?;
        if !affinity.is_finite() {
            return Err(perr(line, format!("non-finite affinity for `{id}`")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Integrity(format!("{origin}: duplicate label for `{id}`")));
        }
        out.push(AffinityRecord { target_id: id, affinity });
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, records: &[AffinityRecord]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(["target_id", "affinity"]).map_err(to_io)?;
    for r in records {
        w.write_record([r.target_id.as_str(), &r.affinity.to_string()])
            .map_err(to_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
