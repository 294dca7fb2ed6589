//! Result tables written by the harnesses.

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use convonet_core::MetricsReport;
use convonet_core::METRIC_NAMES;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Append-only `(dataset, model, seed, metric) → value` table.
#[derive(Debug, Default)]
pub struct ResultsTable {
    rows: Vec<ResultRow>,
    keys: HashSet<(String, String, u64, String)>,
}

impl ResultsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ResultRow) -> Result<()> {
        let key = (row.dataset.clone(), row.model.clone(), row.seed, row.metric.clone());
        if !self.keys.insert(key) {
            bail!("duplicate result ({}, {}, {}, {})", row.dataset, row.model, row.seed, row.metric);
        }
        self.rows.push(row);
        Ok(())
    }

    /// Appends the eight metrics of one evaluation.
    pub fn push_report(&mut self, dataset: &str, model: &str, seed: u64, report: &MetricsReport) -> Result<()> {
        for (metric, value) in report.named() {
            self.push(ResultRow {
                dataset: dataset.to_owned(),
                model: model.to_owned(),
                seed,
                metric: metric.to_owned(),
                value,
            })?;
        }
        Ok(())
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Long format: `dataset,model,seed,metric,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(["dataset", "model", "seed", "metric", "value"])?;
        for r in &self.rows {
            w.write_record([&r.dataset, &r.model, &r.seed.to_string(), &r.metric, &r.value.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Wide metrics rows: `dataset,model,seed` then the eight metrics.
pub fn write_metrics_csv<'a>(
    path: &Path,
    leading: &[&str],
    rows: impl IntoIterator<Item = (Vec<String>, &'a MetricsReport)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header: Vec<&str> = leading.to_vec();
    header.extend(METRIC_NAMES);
    w.write_record(&header)?;
    for (mut fields, report) in rows {
        fields.extend(report.values().iter().map(f64::to_string));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
