//! Verification reports: one entry per named check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    /// `None` when the check was skipped or could not be evaluated.
    pub max_residual: Option<f64>,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    pub fn measured(check: &str, residual: f64, samples: usize, tolerance: f64) -> CheckResult {
        CheckResult {
            check: check.to_string(),
            max_residual: Some(residual),
            samples,
            tolerance,
            pass: residual <= tolerance,
            skipped: None,
            error: None,
        }
    }

    pub fn skipped(check: &str, tolerance: f64, reason: &str) -> CheckResult {
        CheckResult {
            check: check.to_string(),
            max_residual: None,
            samples: 0,
            tolerance,
            pass: true,
            skipped: Some(reason.to_string()),
            error: None,
        }
    }

    pub fn failed(check: &str, tolerance: f64, err: &Error) -> CheckResult {
        CheckResult {
            check: check.to_string(),
            max_residual: None,
            samples: 0,
            tolerance,
            pass: false,
            skipped: None,
            error: Some(err.to_string()),
        }
    }

    pub fn from_result(check: &str, r: Result<f64>, samples: usize, tolerance: f64) -> CheckResult {
        match r {
            Ok(v) => CheckResult::measured(check, v, samples, tolerance),
            Err(e) => CheckResult::failed(check, tolerance, &e),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    /// Sorts by check name so output does not depend on evaluation order.
    pub fn finish(mut self) -> Report {
        self.checks.sort_by(|a, b| a.check.cmp(&b.check));
        self
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.checks).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let checks: Vec<CheckResult> = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Report { checks })
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.check.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        if !self.checks.is_empty() {
            out.push_str(&format!(
                "{:<width$}  {:>12}  {:>9}  {:>7}  status\n",
                "check", "residual", "tolerance", "samples"
            ));
        }
        for c in &self.checks {
            let res = match c.max_residual {
                Some(v) => format!("{v:12.3e}"),
                None => format!("{:>12}", "-"),
            };
            let status = match (&c.skipped, &c.error, c.pass) {
                (Some(why), _, _) => format!("skipped ({why})"),
                (_, Some(e), _) => format!("FAIL ({e})"),
                (_, _, true) => "ok".to_string(),
                (_, _, false) => "FAIL".to_string(),
            };
            out.push_str(&format!(
                "{:<width$}  {}  {:9.1e}  {:>7}  {}\n",
                c.check, res, c.tolerance, c.samples, status
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_text() {
        assert_eq!(Report::default().to_text(), "0 checks, 0 failed\n");
    }

    #[test]
    fn failing_row_is_flagged() {
        let r = Report {
            checks: vec![
                CheckResult::measured("jacobi", 0.5, 64, 1e-8),
                CheckResult::measured("antisymmetry", 0.0, 64, 1e-8),
            ],
        }
        .finish();
        assert_eq!(r.checks[0].check, "antisymmetry");
        assert!(!r.all_pass());
        let text = r.to_text();
        assert!(text.lines().any(|l| l.starts_with("jacobi") && l.ends_with("FAIL")));
        assert!(text.ends_with("2 checks, 1 failed\n"));
    }

    #[test]
    fn json_round_trip() {
        let r = Report {
            checks: vec![
                CheckResult::measured("a", 1e-12, 4, 1e-8),
                CheckResult::skipped("b", 1e-7, "no lagrangian"),
                CheckResult::failed("c", 1e-7, &Error::SingularHessian { ratio: 0.0 }),
            ],
        };
        assert_eq!(Report::from_json(&r.to_json()).unwrap(), r);
        assert!(matches!(Report::from_json("{"), Err(Error::Format(_))));
    }
}
