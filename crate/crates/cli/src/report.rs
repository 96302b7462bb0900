//! Run reports in machine-readable and human-readable form.
//!
//! Reports carry no wall-clock data, absolute paths, or map iteration
//! artifacts, so a fixed (input, seed, tolerance) triple always renders to
//! byte-identical JSON. Timing goes to stderr, outside the report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Row-major matrix with `[re, im]` entries, the only matrix serialization.
pub type MatrixData = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub tolerance: ToleranceReport,
    pub tasks: Vec<TaskRecord>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ToleranceReport {
    pub rank_tol: f64,
    pub residual_tol: f64,
}

/// Outcome of one task. `verdicts` gate the exit status; `flags` are
/// informational booleans; every verdict's supporting residual sits under a
/// stable key in `residuals`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct TaskRecord {
    pub index: usize,
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub verdicts: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub residuals: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dimensions: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outputs: BTreeMap<String, MatrixData>,
}

impl TaskRecord {
    pub fn new(index: usize, task: &str, name: Option<String>) -> Self {
        TaskRecord {
            index,
            task: task.to_string(),
            name,
            ..TaskRecord::default()
        }
    }

    pub fn verdict(&mut self, key: &str, ok: bool) {
        self.verdicts.insert(key.to_string(), ok);
    }

    pub fn residual(&mut self, key: &str, value: f64) {
        self.residuals.insert(key.to_string(), value);
    }

    pub fn dimension(&mut self, key: &str, value: usize) {
        self.dimensions.insert(key.to_string(), value);
    }

    pub fn flag(&mut self, key: &str, value: bool) {
        self.flags.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| *v)
    }
}

impl Report {
    pub fn new(seed: u64, rank_tol: f64, residual_tol: f64) -> Self {
        Report {
            version: "1".to_string(),
            seed,
            tolerance: ToleranceReport {
                rank_tol,
                residual_tol,
            },
            tasks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, record: TaskRecord) {
        self.pass = self.pass && record.all_pass();
        self.tasks.push(record);
    }

    pub fn render_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "rank tolerance: {:e}", self.tolerance.rank_tol);
        let _ = writeln!(
            out,
            "residual tolerance: {:e}",
            self.tolerance.residual_tol
        );
        for task in &self.tasks {
            let _ = match &task.name {
                Some(name) => writeln!(out, "task {} ({}): {}", task.index, name, task.task),
                None => writeln!(out, "task {}: {}", task.index, task.task),
            };
            for (key, ok) in &task.verdicts {
                let _ = writeln!(out, "  {key}: {}", if *ok { "pass" } else { "FAIL" });
            }
            for (key, value) in &task.flags {
                let _ = writeln!(out, "  {key}: {}", if *value { "yes" } else { "no" });
            }
            for (key, value) in &task.dimensions {
                let _ = writeln!(out, "  {key}: {value}");
            }
            for (key, value) in &task.residuals {
                let _ = writeln!(out, "  {key}: {value:.3e}");
            }
            for note in &task.notes {
                let _ = writeln!(out, "  note: {note}");
            }
            for (key, matrix) in &task.outputs {
                let _ = writeln!(out, "  {key}: {}", format_matrix(matrix));
            }
        }
        let _ = writeln!(out, "overall: {}", if self.pass { "pass" } else { "FAIL" });
        out
    }
}

fn format_matrix(data: &MatrixData) -> String {
    let rows: Vec<String> = data
        .iter()
        .map(|row| {
            let entries: Vec<String> = row
                .iter()
                .map(|[re, im]| format!("{re:.6}{im:+.6}i"))
                .collect();
            format!("[{}]", entries.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_report_round_trips() {
        let mut report = Report::new(7, 1e-9, 1e-8);
        let mut rec = TaskRecord::new(1, "check-corner", Some("t".into()));
        rec.verdict("corner", true);
        rec.residual("triple_closure", 3.25e-12);
        rec.dimension("corner_dim", 6);
        rec.flag("non_degenerate", true);
        rec.note("witness-free");
        rec.outputs
            .insert("p1".into(), vec![vec![[1.0, 0.0]], vec![[0.0, -0.5]]]);
        report.push(rec);
        let mut failing = TaskRecord::new(2, "classify", None);
        failing.verdict("isomorphic", false);
        report.push(failing);

        let text = report.render_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert!(!report.pass);
        assert_eq!(text, report.render_json());
    }

    #[test]
    fn text_report_lists_one_line_per_verdict() {
        let mut report = Report::new(0, 1e-9, 1e-8);
        let mut rec = TaskRecord::new(1, "dilate", None);
        rec.verdict("completely_positive", true);
        rec.verdict("dilation_identity", true);
        report.push(rec);
        let text = report.render_text();
        assert!(text.contains("completely_positive: pass"));
        assert!(text.contains("dilation_identity: pass"));
        assert!(text.contains("overall: pass"));
    }
}
