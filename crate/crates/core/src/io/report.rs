//! Report serialization.
//!
//! JSON carries the full [`StatReport`] structure. The CSV schema is one
//! row per report with fixed columns:
//!
//! ```text
//! experiment,samples,seed,mean,std,min,q25,median,q75,max,passed,metrics,checks
//! ```
//!
//! `metrics` packs suite-specific values as `name=value` pairs joined by
//! `;`; `checks` packs window results as `name=pass|fail`.

use std::path::Path;

use crate::error::Result;
use crate::stats::StatReport;

pub const CSV_HEADER: &str =
    "experiment,samples,seed,mean,std,min,q25,median,q75,max,passed,metrics,checks";

pub fn report_to_json(report: &StatReport) -> Result<String> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    Ok(json)
}

pub fn report_to_csv_row(report: &StatReport) -> String {
    let metrics = report
        .metrics
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");
    let checks = report
        .checks
        .iter()
        .map(|c| format!("{}={}", c.name, if c.passed { "pass" } else { "fail" }))
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        report.experiment,
        report.samples,
        report.seed,
        report.mean,
        report.std,
        report.quantiles.min,
        report.quantiles.q25,
        report.quantiles.median,
        report.quantiles.q75,
        report.quantiles.max,
        report.passed,
        metrics,
        checks
    )
}

pub fn write_report_json(path: &Path, report: &StatReport) -> Result<()> {
    super::write_atomic(path, report_to_json(report)?.as_bytes())
}

pub fn write_report_csv(path: &Path, reports: &[StatReport]) -> Result<()> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&report_to_csv_row(r));
        out.push('\n');
    }
    super::write_atomic(path, out.as_bytes())
}
