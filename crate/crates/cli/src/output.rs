//! CSV row types and atomic file output.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::CliError;

/// Writes `path` through a temporary file in the same directory, so readers
/// never see a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Runtime(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Writes `header` and then `rows`, so an empty result still names its
/// columns.
pub fn write_csv<T: Serialize>(w: &mut dyn Write, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// One analyzed (trace, surrogate, threshold, β) cell of records.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub threshold: f64,
    pub beta: f64,
    pub trace_id: String,
    pub function: String,
    pub surrogate: String,
    pub strategy: String,
    pub compliant_fraction: f64,
    pub scored_iterations: usize,
    pub compliant_iterations: usize,
    pub failed_iterations: usize,
}

/// One row of tables.csv: strategy counts for a surrogate in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub threshold: f64,
    pub beta: f64,
    pub surrogate: String,
    #[serde(rename = "PI")]
    pub pi: usize,
    #[serde(rename = "EI")]
    pub ei: usize,
    #[serde(rename = "UCB")]
    pub ucb: usize,
    #[serde(rename = "NON_COMPLIANT")]
    pub non_compliant: usize,
    pub total: usize,
}

/// One scored iteration in iterations.csv. Distances are empty when the
/// surrogate fit failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub threshold: f64,
    pub beta: f64,
    pub trace_id: String,
    pub surrogate: String,
    pub n: usize,
    pub d_pi: Option<f64>,
    pub d_ei: Option<f64>,
    pub d_ucb: Option<f64>,
    pub label: String,
    pub failure: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        std::fs::write(&path, "old contents that are longer").unwrap();
        write_atomic(&path, |w| Ok(w.write_all(b"new")?)).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn failed_body_leaves_target_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        std::fs::write(&path, "old").unwrap();
        let r = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(CliError::Runtime("boom".into()))
        });
        assert!(r.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "old");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
