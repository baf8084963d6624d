use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::ReportOnly => "INFO",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub dims: BTreeMap<String, Value>,
    /// Obstruction verdict for the full relative-commutant span.
    pub verdict: Option<String>,
    /// Same criterion restricted to the parity-even part of the span.
    pub even_sector_verdict: Option<String>,
}

impl Report {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            checks: Vec::new(),
            dims: BTreeMap::new(),
            verdict: None,
            even_sector_verdict: None,
        }
    }

    /// Passes iff `error <= tolerance` (NaN fails).
    pub fn check(&mut self, name: impl Into<String>, error: f64, tolerance: f64) -> &mut Check {
        let status = if error <= tolerance { Status::Pass } else { Status::Fail };
        self.push(name.into(), status, error, Some(tolerance))
    }

    /// Equality of two counts; the recorded error is their difference.
    pub fn check_count(&mut self, name: impl Into<String>, got: usize, expected: usize) -> &mut Check {
        let status = if got == expected { Status::Pass } else { Status::Fail };
        self.push(name.into(), status, got.abs_diff(expected) as f64, Some(0.0))
            .with_detail(format!("{got} (expected {expected})"))
    }

    pub fn check_bool(&mut self, name: impl Into<String>, ok: bool, detail: String) -> &mut Check {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.push(name.into(), status, if ok { 0.0 } else { 1.0 }, None).with_detail(detail)
    }

    pub fn record(&mut self, name: impl Into<String>, value: f64) -> &mut Check {
        self.push(name.into(), Status::ReportOnly, value, None)
    }

    /// A pipeline that could not run counts as a failed check.
    pub fn error(&mut self, name: impl Into<String>, err: impl std::fmt::Display) {
        self.push(name.into(), Status::Fail, f64::NAN, None).with_detail(err.to_string());
    }

    fn push(&mut self, name: String, status: Status, max_error: f64, tolerance: Option<f64>) -> &mut Check {
        debug_assert!(self.checks.iter().all(|c| c.name != name), "duplicate check {name}");
        self.checks.push(Check { name, status, max_error, tolerance, detail: None });
        self.checks.last_mut().expect("just pushed")
    }

    pub fn dim(&mut self, key: &str, value: impl Into<Value>) {
        self.dims.insert(key.to_string(), value.into());
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn exit_code(&self) -> u8 {
        if self.failures() == 0 {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let lam: Vec<String> = c.lambdas.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{} L={} d={} t={} lambdas={} N={}", self.command, c.l, c.d, c.t, lam.join(","), c.boson_cutoff);
        let width = self.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
        for check in &self.checks {
            let _ = write!(s, "  [{}] {:<width$}  {:.3e}", check.status.label(), check.name, check.max_error);
            if let Some(t) = check.tolerance {
                let _ = write!(s, " (tol {t:.0e})");
            }
            if let Some(d) = &check.detail {
                let _ = write!(s, "  {d}");
            }
            s.push('\n');
        }
        if !self.dims.is_empty() {
            let dims: Vec<String> = self.dims.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "  dims: {}", dims.join(" "));
        }
        if let Some(v) = &self.verdict {
            let _ = write!(s, "  verdict: {v}");
            if let Some(e) = &self.even_sector_verdict {
                let _ = write!(s, " (even sector: {e})");
            }
            s.push('\n');
        }
        let failed = self.failures();
        if failed == 0 {
            let _ = writeln!(s, "ok: {} checks", self.checks.len());
        } else {
            let _ = writeln!(s, "FAILED: {failed} of {} checks", self.checks.len());
        }
        s
    }
}

impl Check {
    pub fn with_detail(&mut self, detail: String) -> &mut Self {
        self.detail = Some(detail);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_and_exit_code() {
        let mut r = Report::new("verify-car", RunConfig::default());
        r.check("small", 1e-12, 1e-9);
        r.record("info", 3.0);
        assert_eq!(r.exit_code(), 0);
        r.check("nan", f64::NAN, 1e-9);
        assert_eq!(r.checks[2].status, Status::Fail);
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn json_has_schema_fields() {
        let mut r = Report::new("all", RunConfig::default());
        r.check_count("dim", 2, 2);
        r.dim("h", 2);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["schema_version", "config", "checks", "dims", "verdict"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["checks"][0]["status"], "pass");
        assert_eq!(v["config"]["L"], 2);
    }
}
