//! Report documents and their JSON and CSV encodings.

use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Recorded but not decisive, such as the additional equations in
    /// dimension two or a gauge residual whose prerequisites fail.
    Info,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
            Verdict::Error => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub check: &'static str,
    pub equation: String,
    /// Index of the sampled point (or surface sample) within the check.
    pub point: usize,
    /// `v`, `p`, or `u` for surface parameters.
    pub rep: &'static str,
    pub x: Vec<f64>,
    pub fiber: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub resamples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Row {
    pub fn decisive(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::Fail | Verdict::Error)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub decisive: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub resampled_points: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub failing_equations: Vec<String>,
    pub pass: bool,
}

impl Summary {
    pub fn of(rows: &[Row], check_error: bool) -> Summary {
        let decisive: Vec<&Row> = rows.iter().filter(|r| r.decisive()).collect();
        let count = |v: Verdict| rows.iter().filter(|r| r.verdict == v).count();
        let finite: Vec<f64> = decisive.iter().map(|r| r.residual).filter(|x| x.is_finite()).collect();
        let max_residual = finite.iter().copied().fold(0.0, f64::max);
        let mean_residual = if finite.is_empty() { 0.0 } else { finite.iter().sum::<f64>() / finite.len() as f64 };
        let mut failing: Vec<String> = rows
            .iter()
            .filter(|r| matches!(r.verdict, Verdict::Fail | Verdict::Error))
            .map(|r| r.equation.clone())
            .collect();
        failing.sort();
        failing.dedup();
        let mut points: Vec<usize> = rows.iter().filter(|r| r.resamples > 0).map(|r| r.point).collect();
        points.sort_unstable();
        points.dedup();
        let (failed, errors) = (count(Verdict::Fail), count(Verdict::Error));
        Summary {
            rows: rows.len(),
            decisive: decisive.len(),
            passed: count(Verdict::Pass),
            failed,
            errors,
            resampled_points: points.len(),
            max_residual,
            mean_residual,
            failing_equations: failing,
            pass: failed == 0 && errors == 0 && !check_error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

impl CheckReport {
    pub fn new(id: &'static str, rows: Vec<Row>) -> CheckReport {
        let summary = Summary::of(&rows, false);
        CheckReport { id, error: None, rows, summary }
    }

    pub fn failed(id: &'static str, error: ErrorRecord) -> CheckReport {
        CheckReport { id, error: Some(error), rows: Vec::new(), summary: Summary::of(&[], true) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemInfo {
    pub name: String,
    pub file: String,
    pub n: usize,
    /// `original` or `connection-free`.
    pub mode: &'static str,
    /// Where the gauge tensor came from: `file`, `random`, or `none`.
    pub gauge: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub system: SystemInfo,
    pub config: RunConfig,
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.summary.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header =
            ["check", "equation", "point", "rep", "x", "fiber", "residual", "tolerance", "verdict", "resamples", "detail"];
        w.write_record(header).expect("in-memory write");
        let join = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        for c in &self.checks {
            if let Some(e) = &c.error {
                let rec = [c.id, "", "", "", "", "", "", "", "error", "", &format!("{}: {}", e.kind, e.message)];
                w.write_record(rec).expect("in-memory write");
            }
            for r in &c.rows {
                w.write_record([
                    r.check,
                    &r.equation,
                    &r.point.to_string(),
                    r.rep,
                    &join(&r.x),
                    &join(&r.fiber),
                    &format!("{:e}", r.residual),
                    &format!("{:e}", r.tolerance),
                    r.verdict.as_str(),
                    &r.resamples.to_string(),
                    r.detail.as_deref().unwrap_or(""),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Document written when a run cannot start at all.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureDocument {
    pub schema: u32,
    pub error: ErrorRecord,
}

impl FailureDocument {
    pub fn new(kind: &str, message: String) -> FailureDocument {
        FailureDocument { schema: SCHEMA_VERSION, error: ErrorRecord { kind: kind.into(), message } }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}
