//! Machine-readable check records and run reports.
//!
//! Every numerical check performed by the verification suites or the study
//! runners is reduced to a `CheckRecord`: a measured value, a threshold, the
//! comparison direction, and an anchor naming the mathematical property the
//! check exercises. A `Report` aggregates records with the config echo and a
//! config hash; its verdict is the conjunction of all records.

use serde::Serialize;
use std::fmt;

/// Comparison direction of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckOp {
    /// Pass iff value <= threshold.
    Le,
    /// Pass iff value >= threshold.
    Ge,
}

/// One verified numerical statement.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub op: CheckOp,
    pub pass: bool,
    /// Mathematical property the check exercises, or "plumbing" for
    /// artifact-level checks.
    pub anchor: String,
}

impl CheckRecord {
    /// Check passing when `value <= threshold`. NaN never passes.
    pub fn le(name: &str, value: f64, threshold: f64, anchor: &str) -> Self {
        CheckRecord {
            name: name.to_string(),
            value,
            threshold,
            op: CheckOp::Le,
            pass: value.is_finite() && value <= threshold,
            anchor: anchor.to_string(),
        }
    }

    /// Check passing when `value >= threshold`. NaN never passes.
    pub fn ge(name: &str, value: f64, threshold: f64, anchor: &str) -> Self {
        CheckRecord {
            name: name.to_string(),
            value,
            threshold,
            op: CheckOp::Ge,
            pass: value.is_finite() && value >= threshold,
            anchor: anchor.to_string(),
        }
    }

    /// Boolean check recorded as 1/0 against a 1.0 floor.
    pub fn flag(name: &str, ok: bool, anchor: &str) -> Self {
        CheckRecord::ge(name, if ok { 1.0 } else { 0.0 }, 1.0, anchor)
    }
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        let rel = match self.op {
            CheckOp::Le => "<=",
            CheckOp::Ge => ">=",
        };
        write!(
            f,
            "[{verdict}] {name}: {value:.6e} {rel} {thr:.6e}  ({anchor})",
            name = self.name,
            value = self.value,
            thr = self.threshold,
            anchor = self.anchor,
        )
    }
}

/// Aggregated outcome of a study or verification run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Canonical key=value lines of the effective config.
    pub config: Vec<String>,
    /// Hex digest of the canonical config text.
    pub config_hash: String,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
    pub wall_ms: u64,
}

impl Report {
    pub fn new(config: Vec<String>, config_hash: String) -> Self {
        Report {
            config,
            config_hash,
            records: Vec::new(),
            pass: true,
            wall_ms: 0,
        }
    }

    pub fn push(&mut self, rec: CheckRecord) {
        self.pass = self.pass && rec.pass;
        self.records.push(rec);
    }

    pub fn extend(&mut self, recs: Vec<CheckRecord>) {
        for r in recs {
            self.push(r);
        }
    }

    /// Distinct non-plumbing anchors exercised, sorted.
    pub fn anchors(&self) -> Vec<String> {
        let mut a: Vec<String> = self
            .records
            .iter()
            .map(|r| r.anchor.clone())
            .filter(|s| s != "plumbing")
            .collect();
        a.sort();
        a.dedup();
        a
    }

    /// JSON with stable key order (struct declaration order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// One line per record plus the verdict, for terminal display.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out.push_str(if self.pass {
            "verdict: pass\n"
        } else {
            "verdict: FAIL\n"
        });
        out
    }
}

/// Formats a float with 17 significant digits, enough for a lossless f64
/// round trip in CSV artifacts.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a header row and 17-significant-digit floats.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_verdicts() {
        assert!(CheckRecord::le("a", 1e-13, 1e-12, "chen-relation").pass);
        assert!(!CheckRecord::le("a", 1e-11, 1e-12, "chen-relation").pass);
        assert!(CheckRecord::ge("b", 0.5, 0.1, "rough-euler-rate").pass);
        assert!(!CheckRecord::le("n", f64::NAN, 1.0, "plumbing").pass);
        assert!(CheckRecord::flag("c", true, "plumbing").pass);
        assert!(!CheckRecord::flag("c", false, "plumbing").pass);
    }

    #[test]
    fn report_verdict_is_conjunction() {
        let mut rep = Report::new(vec!["seed=1".into()], "ab".into());
        rep.push(CheckRecord::le("x", 0.0, 1.0, "sewing-contract"));
        assert!(rep.pass);
        rep.push(CheckRecord::le("y", 2.0, 1.0, "chasles-identity"));
        assert!(!rep.pass);
        assert_eq!(rep.anchors(), vec!["chasles-identity", "sewing-contract"]);
    }

    #[test]
    fn json_key_order_is_stable() {
        let mut rep = Report::new(vec!["seed=1".into()], "ab".into());
        rep.push(CheckRecord::le("x", 0.5, 1.0, "ito-formula"));
        let a = rep.to_json();
        let b = rep.to_json();
        assert_eq!(a, b);
        let ci = a.find("\"config\"").unwrap();
        let hi = a.find("\"config_hash\"").unwrap();
        let ri = a.find("\"records\"").unwrap();
        assert!(ci < hi && hi < ri);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![2.0_f64.sqrt(), 1e-17]];
        let csv = write_csv(&["a", "b"], &rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "a,b");
        for (line, row) in lines.zip(&rows) {
            for (cell, x) in line.split(',').zip(row) {
                assert_eq!(cell.parse::<f64>().unwrap(), *x);
            }
        }
    }
}
