//! Measured-versus-bound rows shared by every checker.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    BoundViolation,
    HypothesisFailed,
    Skipped,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub hypothesis_ok: bool,
    pub hypothesis_note: String,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self { check: check.into(), hypothesis_ok: true, hypothesis_note: String::new(), rows: vec![] }
    }

    pub fn hypothesis_failed(check: impl Into<String>, why: impl Into<String>) -> Self {
        Self { check: check.into(), hypothesis_ok: false, hypothesis_note: why.into(), rows: vec![] }
    }

    /// Asserted row: passes when measured ≤ bound·(1+rel_tol) + abs_tol.
    pub fn le(&mut self, name: impl Into<String>, measured: f64, bound: f64, rel_tol: f64, abs_tol: f64) -> bool {
        let ok = measured.is_finite() && measured <= bound * (1.0 + rel_tol.copysign(bound)) + abs_tol;
        self.rows.push(CheckRow {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::BoundViolation },
            measured,
            bound,
            margin: bound - measured,
            tolerance: rel_tol.max(abs_tol),
            note: String::new(),
        });
        ok
    }

    pub fn info(&mut self, name: impl Into<String>, measured: f64, bound: f64, note: impl Into<String>) {
        self.rows.push(CheckRow {
            name: name.into(),
            status: Status::Info,
            measured,
            bound,
            margin: bound - measured,
            tolerance: 0.0,
            note: note.into(),
        });
    }

    pub fn skip(&mut self, name: impl Into<String>, why: impl Into<String>) {
        self.rows.push(CheckRow {
            name: name.into(),
            status: Status::Skipped,
            measured: f64::NAN,
            bound: f64::NAN,
            margin: f64::NAN,
            tolerance: 0.0,
            note: why.into(),
        });
    }

    pub fn annotate_last(&mut self, note: impl Into<String>) {
        if let Some(r) = self.rows.last_mut() {
            r.note = note.into();
        }
    }

    pub fn status(&self) -> Status {
        if !self.hypothesis_ok {
            Status::HypothesisFailed
        } else if self.rows.iter().any(|r| r.status == Status::BoundViolation) {
            Status::BoundViolation
        } else {
            Status::Pass
        }
    }

    pub fn violations(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| r.status == Status::BoundViolation).collect()
    }

    pub fn asserted(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.status, Status::Pass | Status::BoundViolation)).count()
    }

    pub fn merge(&mut self, other: CheckReport) {
        if !other.hypothesis_ok {
            self.hypothesis_ok = false;
            if !self.hypothesis_note.is_empty() {
                self.hypothesis_note.push_str("; ");
            }
            self.hypothesis_note.push_str(&other.hypothesis_note);
        }
        for mut r in other.rows {
            r.name = format!("{}/{}", other.check, r.name);
            self.rows.push(r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_routing() {
        let mut r = CheckReport::new("x");
        assert!(r.le("a", 1.0, 2.0, 0.0, 0.0));
        assert_eq!(r.status(), Status::Pass);
        assert!(!r.le("b", 3.0, 2.0, 1e-8, 0.0));
        assert_eq!(r.status(), Status::BoundViolation);
        let h = CheckReport::hypothesis_failed("y", "U_i ≤ 5 J̄");
        assert_eq!(h.status(), Status::HypothesisFailed);
    }

    #[test]
    fn nan_measured_fails() {
        let mut r = CheckReport::new("x");
        assert!(!r.le("nan", f64::NAN, 1.0, 0.0, 0.0));
    }
}
