//! Convergence reports and their CSV / JSON encodings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Schema tag carried by every report.
pub const REPORT_SCHEMA: &str = "horolab-report-v1";

/// Slack used when judging monotonicity of error columns.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub experiment: String,
    pub n: u64,
    pub test_id: String,
    pub h_n: f64,
    pub h_limit: f64,
    pub abs_err: f64,
}

/// Monotonicity of the error column for one test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    pub test_id: String,
    pub nonincreasing: bool,
    pub first_err: f64,
    pub last_err: f64,
}

/// One named pass/fail check attached to an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Rows sorted by `(experiment, n, test_id)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn new(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| {
            a.experiment
                .cmp(&b.experiment)
                .then(a.n.cmp(&b.n))
                .then(a.test_id.cmp(&b.test_id))
        });
        Self { rows }
    }

    pub fn merge(reports: impl IntoIterator<Item = ConvergenceReport>) -> Self {
        Self::new(reports.into_iter().flat_map(|r| r.rows).collect())
    }

    /// Per `(experiment, test_id)`: is the error nonincreasing in `n`?
    pub fn monotonicity(&self) -> Vec<MonotoneSummary> {
        let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            groups
                .entry((row.experiment.clone(), row.test_id.clone()))
                .or_default()
                .push(row.abs_err);
        }
        groups
            .into_iter()
            .map(|((experiment, test_id), errs)| MonotoneSummary {
                test_id: format!("{experiment}/{test_id}"),
                nonincreasing: errs.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK),
                first_err: errs[0],
                last_err: *errs.last().unwrap(),
            })
            .collect()
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_err).fold(0.0, f64::max)
    }

    /// CSV with header `experiment,n,test_id,h_n,h_limit,abs_err`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    /// Parses CSV produced by [`ConvergenceReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<Result<Vec<ConvergenceRow>, _>>()?;
        Ok(Self::new(rows))
    }

    /// The JSON mirror of the CSV, with schema tag, resolved config and checks.
    pub fn to_json(&self, config: &serde_json::Value, checks: &[Check]) -> serde_json::Value {
        serde_json::json!({
            "schema": REPORT_SCHEMA,
            "config": config,
            "rows": self.rows,
            "monotonicity": self.monotonicity(),
            "checks": checks,
        })
    }
}
