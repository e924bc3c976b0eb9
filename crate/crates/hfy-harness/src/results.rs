//! Result tables: one row per (parameter cell, metric) with the median and
//! interquartile range over seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub beta: Option<f64>,
    pub separation: Option<String>,
    pub post: Option<String>,
    pub sigma: Option<f64>,
    pub mask: Option<f64>,
    /// Metastable support-size bucket (1..=10; 11 stands for "10+").
    pub size: Option<usize>,
    pub algorithm: Option<String>,
    pub metric: String,
    pub median: f64,
    pub iqr: f64,
    pub runs: usize,
}

impl ResultRow {
    /// Lexicographic key used for the deterministic merge order.
    pub fn sort_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.experiment,
            self.separation.as_deref().unwrap_or(""),
            self.post.as_deref().unwrap_or(""),
            self.algorithm.as_deref().unwrap_or(""),
            self.n.map(|v| format!("{v:012}")).unwrap_or_default(),
            self.d.map(|v| format!("{v:012}")).unwrap_or_default(),
            self.beta.map(|v| format!("{v:020.9}")).unwrap_or_default(),
            self.sigma.map(|v| format!("{v:020.9}")).unwrap_or_default(),
            self.mask.map(|v| format!("{v:020.9}")).unwrap_or_default(),
            self.size.map(|v| format!("{v:012}")).unwrap_or_default(),
            self.metric,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by_key(|r| r.sort_key());
        ResultTable { rows }
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| HarnessError::data(format!("csv write: {e}")))?;
        }
        w.flush().map_err(|e| HarnessError::data(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| HarnessError::data(format!("cannot create {}: {e}", path.display())))?;
        self.write_csv(file)
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for record in r.deserialize() {
            rows.push(record.map_err(|e| HarnessError::data(format!("csv read: {e}")))?);
        }
        Ok(ResultTable { rows })
    }
}

/// Median of a sample (average of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Interquartile range `q75 − q25` with linear interpolation between order
/// statistics.
pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}
