//! Table, sweep, advice and verification reports behind the command line.
//!
//! Every command produces a [`Report`]: display cells for the console,
//! full-precision CSV with a fixed header, and typed rows for JSON. JSON
//! output echoes the effective configuration, so feeding the `config` block
//! back in reproduces the run.

mod battery;
mod config;
pub mod format;
mod tables;

use serde::Serialize;

use crate::error::{Error, Result};

pub use battery::{
    cmd_verify, mechanism_rule, suite_bayes, suite_bound_dominance, suite_conservation,
    suite_honest_miss, suite_knapsack, suite_mc_agreement, suite_minimax, suite_pathwise,
    suite_ratchet, suite_sabotage_exhaustive, suite_t0_consistency, Fault, SuiteResult,
    VerifyOptions, VerifyReport, SMALL_FAMILIES,
};
pub use config::{
    AnalysisConfig, CostConfig, EconConfig, McConfig, MevTier, OutputConfig, SweepConfig,
    DEFAULT_KAPPAS,
};
pub use tables::{
    cmd_advise, cmd_sweep, cmd_table_coalition, cmd_table_cost, cmd_table_main, AdviceReport,
    CoalitionRow, CostRow, MainRow, SweepKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Json,
}

/// A rendered-on-demand command result.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub headers: Vec<&'static str>,
    pub display: Vec<Vec<String>>,
    pub csv: String,
    pub rows: serde_json::Value,
    /// Free-text lines printed under the console table.
    pub notes: Vec<String>,
    /// Console columns aligned left; the rest align right.
    pub left_columns: Vec<usize>,
}

impl Report {
    pub(crate) fn new<T: Serialize>(
        command: &'static str,
        headers: Vec<&'static str>,
        display: Vec<Vec<String>>,
        rows: &[T],
    ) -> Result<Self> {
        Report::with_csv(command, headers, display, rows, rows)
    }

    /// As [`Report::new`] with separate flat records for CSV.
    pub(crate) fn with_csv<T: Serialize, C: Serialize>(
        command: &'static str,
        headers: Vec<&'static str>,
        display: Vec<Vec<String>>,
        rows: &[T],
        csv_rows: &[C],
    ) -> Result<Self> {
        Ok(Report {
            command,
            headers,
            display,
            csv: to_csv(csv_rows)?,
            rows: serde_json::to_value(rows).map_err(|e| Error::param("rows", e.to_string()))?,
            notes: Vec::new(),
            left_columns: Vec::new(),
        })
    }

    pub fn render(&self, format: OutputFormat, config: &AnalysisConfig) -> Result<String> {
        match format {
            OutputFormat::Table => {
                let mut out =
                    format::render_table(&self.headers, &self.display, &self.left_columns);
                for note in &self.notes {
                    out.push_str(note);
                    out.push('\n');
                }
                Ok(out)
            }
            OutputFormat::Csv => Ok(self.csv.clone()),
            OutputFormat::Json => {
                let doc = serde_json::json!({
                    "command": self.command,
                    "seed": config.mc.seed,
                    "config": config,
                    "rows": self.rows,
                    "notes": self.notes,
                });
                let mut text = serde_json::to_string_pretty(&doc)
                    .map_err(|e| Error::param("json", e.to_string()))?;
                text.push('\n');
                Ok(text)
            }
        }
    }
}

/// Header from the field names, one record per row.
pub(crate) fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::param("csv", e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::param("csv", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::param("csv", e.to_string()))
}
