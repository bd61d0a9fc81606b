//! Per-run metrics CSV with a pinned schema.
//!
//! Header: `epoch,accuracy,loss_total,loss_sd,loss_sa,loss_cd,loss_ca,`
//! `marginal_tv,h_expected,h_mean,mi_proxy,marginal_0..marginal_{n-1}`.
//! One row per epoch record, UTF-8, LF line endings. Floats are written
//! with 18 significant digits so parsing reproduces the exact bits.

use std::path::Path;

use rda_core::error::{Error, Result};
use rda_core::trainer::RunMetrics;

/// Fixed columns preceding the marginal block.
const FIXED_COLUMNS: [&str; 11] = [
    "epoch",
    "accuracy",
    "loss_total",
    "loss_sd",
    "loss_sa",
    "loss_cd",
    "loss_ca",
    "marginal_tv",
    "h_expected",
    "h_mean",
    "mi_proxy",
];

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn metrics_header(n: usize) -> String {
    let mut header = FIXED_COLUMNS.join(",");
    for c in 0..n {
        header.push_str(&format!(",marginal_{c}"));
    }
    header
}

pub fn metrics_to_csv(metrics: &RunMetrics) -> String {
    let mut out = String::new();
    out.push_str(&metrics_header(metrics.n));
    out.push('\n');
    for r in &metrics.records {
        let mut fields = vec![
            r.epoch.to_string(),
            fmt(r.accuracy),
            fmt(r.loss_total),
            fmt(r.loss_sd),
            fmt(r.loss_sa),
            fmt(r.loss_cd),
            fmt(r.loss_ca),
            fmt(r.marginal_tv),
            fmt(r.expected_pred_entropy),
            fmt(r.mean_pred_entropy),
            fmt(r.mutual_info_proxy),
        ];
        for &m in r.pseudo_label_marginal.values() {
            fields.push(fmt(m));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(metrics: &RunMetrics, path: &Path) -> Result<()> {
    std::fs::write(path, metrics_to_csv(metrics))?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub epoch: usize,
    pub accuracy: f64,
    pub loss_total: f64,
    pub loss_sd: f64,
    pub loss_sa: f64,
    pub loss_cd: f64,
    pub loss_ca: f64,
    pub marginal_tv: f64,
    pub h_expected: f64,
    pub h_mean: f64,
    pub mi_proxy: f64,
    pub marginal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMetrics {
    pub n: usize,
    pub rows: Vec<CsvRow>,
}

impl ParsedMetrics {
    pub fn final_row(&self) -> Option<&CsvRow> {
        self.rows.last()
    }
}

pub fn parse_metrics_csv(text: &str) -> Result<ParsedMetrics> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Usage("empty metrics CSV".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < FIXED_COLUMNS.len() + 1 {
        return Err(Error::Usage(format!(
            "metrics CSV header has {} columns, expected at least {}",
            columns.len(),
            FIXED_COLUMNS.len() + 1
        )));
    }
    for (got, want) in columns.iter().zip(FIXED_COLUMNS.iter()) {
        if got != want {
            return Err(Error::Usage(format!(
                "unexpected column '{got}' where '{want}' belongs"
            )));
        }
    }
    let n = columns.len() - FIXED_COLUMNS.len();
    for (c, col) in columns[FIXED_COLUMNS.len()..].iter().enumerate() {
        if *col != format!("marginal_{c}") {
            return Err(Error::Usage(format!("unexpected marginal column '{col}'")));
        }
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Usage(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                columns.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Usage(format!("bad float '{s}': {e}")))
        };
        let epoch = fields[0]
            .parse::<usize>()
            .map_err(|e| Error::Usage(format!("bad epoch '{}': {e}", fields[0])))?;
        rows.push(CsvRow {
            epoch,
            accuracy: parse_f(fields[1])?,
            loss_total: parse_f(fields[2])?,
            loss_sd: parse_f(fields[3])?,
            loss_sa: parse_f(fields[4])?,
            loss_cd: parse_f(fields[5])?,
            loss_ca: parse_f(fields[6])?,
            marginal_tv: parse_f(fields[7])?,
            h_expected: parse_f(fields[8])?,
            h_mean: parse_f(fields[9])?,
            mi_proxy: parse_f(fields[10])?,
            marginal: fields[11..]
                .iter()
                .map(|s| parse_f(s))
                .collect::<Result<_>>()?,
        });
    }
    Ok(ParsedMetrics { n, rows })
}
