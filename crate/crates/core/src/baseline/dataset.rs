use std::path::Path;

use crate::error::{Error, Result};
use crate::model::HyperBox;

/// Input samples, one per row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_csv(&text)
    }

    /// Comma-separated numbers; a first line that does not parse as numbers is a header.
    pub fn from_csv(text: &str) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("dataset: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("dataset row {}: {e}", line + 1))),
            }
        }
        Ok(Dataset { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self, dim: usize, domain: &HyperBox) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "dataset row {k} has {} values, expected {dim}",
                    row.len()
                )));
            }
            if !domain.contains(row, 1e-12) {
                return Err(Error::InvalidArgument(format!("dataset row {k} lies outside the domain")));
            }
        }
        Ok(())
    }
}
