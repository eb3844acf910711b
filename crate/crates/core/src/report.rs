//! Machine-readable run reports.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// The result a run reproduces, in words.
    pub paper_anchor: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub case: String,
    pub command: String,
    pub grid: Vec<usize>,
    pub fd_step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub metrics: serde_json::Value,
    pub pass: bool,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(src: &str) -> Result<Report> {
        Ok(serde_json::from_str(src)?)
    }

    /// Writes through a temporary file in the target directory, then renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_json()?.as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            case: "nil".into(),
            command: "verify".into(),
            grid: vec![9, 9, 9],
            fd_step: 1e-4,
            tolerance: 1e-5,
            seed: 7,
            metrics: serde_json::json!({"max": 1.5e-12, "nested": {"k": [1, 2]}}),
            pass: true,
            provenance: Provenance { paper_anchor: "Heisenberg expanding soliton".into() },
        }
    }

    #[test]
    fn round_trip() {
        let r = sample();
        assert_eq!(Report::from_json(&r.to_json().unwrap()).unwrap(), r);
        assert!(Report::from_json("{\"case\": 1}").is_err());
    }

    #[test]
    fn atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        sample().write_atomic(&p).unwrap();
        let mut r = sample();
        r.pass = false;
        r.write_atomic(&p).unwrap();
        let back = Report::from_json(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert!(!back.pass);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
