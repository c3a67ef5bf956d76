//! Verifier reports and their CSV / JSON encodings.
//!
//! CSV column order is fixed:
//! `experiment,model,n,y,estimate,reference,stderr,margin,pass`.
//! Floats use Rust's shortest round-trip formatting; absent `n`/`y` are
//! empty fields; `pass` is `true`, `false` or `n/a` for report-only rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conditions::Witness;

pub const CSV_HEADER: &str = "experiment,model,n,y,estimate,reference,stderr,margin,pass";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Check identifier, e.g. `tail_bound` or `gumbel_ks_final`.
    pub experiment: String,
    pub model: String,
    pub n: Option<u64>,
    pub y: Option<f64>,
    pub estimate: f64,
    pub reference: f64,
    pub stderr: f64,
    pub margin: f64,
    /// `None` for rows that are reported but not asserted.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub experiment: String,
    pub model: String,
    pub rows: Vec<ReportRow>,
    /// Every asserted row passed (and the report is not degenerate).
    pub pass: bool,
    /// False for exploratory runs whose outcome is reported only.
    pub asserted: bool,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
}

impl VerifierReport {
    pub fn new(experiment: &str, model: &str) -> Self {
        VerifierReport {
            experiment: experiment.to_string(),
            model: model.to_string(),
            rows: Vec::new(),
            pass: true,
            asserted: true,
            notes: Vec::new(),
            witnesses: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        check: &str,
        n: Option<u64>,
        y: Option<f64>,
        estimate: f64,
        reference: f64,
        stderr: f64,
        margin: f64,
        pass: Option<bool>,
    ) {
        self.rows.push(ReportRow {
            experiment: check.to_string(),
            model: self.model.clone(),
            n,
            y,
            estimate,
            reference,
            stderr,
            margin,
            pass,
        });
    }

    /// Recomputes `pass` from the rows; `forced_fail` marks degenerate runs.
    pub fn finish(mut self, forced_fail: bool) -> Self {
        self.pass = !forced_fail && self.rows.iter().all(|r| r.pass != Some(false));
        self
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Whether this report blocks overall success.
    pub fn blocking_failure(&self) -> bool {
        self.asserted && !self.pass
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        let pass = match self.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "n/a",
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&self.experiment),
            csv_field(&self.model),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            self.y.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.estimate),
            fmt_f64(self.reference),
            fmt_f64(self.stderr),
            fmt_f64(self.margin),
            pass
        )
    }
}

pub fn to_csv(reports: &[VerifierReport]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for row in &r.rows {
            let _ = writeln!(out, "{}", row.to_csv_line());
        }
    }
    out
}

/// One line per report for terminal output.
pub fn summary_line(r: &VerifierReport) -> String {
    let status = match (r.asserted, r.pass) {
        (false, _) => "INFO",
        (true, true) => "PASS",
        (true, false) => "FAIL",
    };
    format!(
        "[{status}] {} {} ({} rows)",
        r.experiment,
        r.model,
        r.rows.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = VerifierReport::new("tail_bound", "uniform1d(0,1)");
        r.push(
            "tail_bound",
            Some(64),
            Some(1.0),
            0.25,
            0.5,
            0.01,
            0.03,
            Some(true),
        );
        r.push("gumbel_ks_final", Some(64), None, 0.1, 0.05, 0.0, 0.0, None);
        let csv = to_csv(&[r.finish(false)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "tail_bound,\"uniform1d(0,1)\",64,1,0.25,0.5,0.01,0.03,true"
        );
        assert_eq!(
            lines[2],
            "gumbel_ks_final,\"uniform1d(0,1)\",64,,0.1,0.05,0,0,n/a"
        );
    }

    #[test]
    fn pass_ignores_report_only_rows() {
        let mut r = VerifierReport::new("x", "m");
        r.push("a", None, None, 1.0, 0.0, 0.0, 0.0, None);
        assert!(r.clone().finish(false).pass);
        assert!(!r.clone().finish(true).pass);
        r.push("b", None, None, 1.0, 0.0, 0.0, 0.0, Some(false));
        assert!(!r.finish(false).pass);
    }
}
