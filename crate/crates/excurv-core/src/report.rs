//! Machine-readable check reports.

use serde::Serialize;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One executed (or skipped) check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub check_id: String,
    /// Which identity/property the check exercises, by its standard name.
    pub reference: String,
    /// Chart point, or "integrated" for quadrature-mediated checks.
    pub location: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub pass: bool,
    pub skipped: bool,
}

impl CheckRecord {
    pub fn compare(
        check_id: impl Into<String>,
        reference: impl Into<String>,
        location: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol_abs: f64,
        tol_rel: f64,
    ) -> CheckRecord {
        let abs_err = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        let pass = (tol_abs > 0.0 && abs_err <= tol_abs) || (tol_rel > 0.0 && rel_err <= tol_rel);
        CheckRecord {
            check_id: check_id.into(),
            reference: reference.into(),
            location: location.into(),
            lhs,
            rhs,
            abs_err,
            rel_err,
            tol_abs,
            tol_rel,
            pass,
            skipped: false,
        }
    }

    /// Compare with a scale-relative tolerance: pass iff
    /// abs_err ≤ tol·(1 + scale).
    pub fn residual(
        check_id: impl Into<String>,
        reference: impl Into<String>,
        location: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) -> CheckRecord {
        let abs_err = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        let pass = abs_err <= tol * (1.0 + scale);
        CheckRecord {
            check_id: check_id.into(),
            reference: reference.into(),
            location: location.into(),
            lhs,
            rhs,
            abs_err,
            rel_err: if scale > 0.0 { abs_err / scale } else { 0.0 },
            tol_abs: tol,
            tol_rel: tol,
            pass,
            skipped: false,
        }
    }

    pub fn skipped(
        check_id: impl Into<String>,
        reference: impl Into<String>,
        why: impl Into<String>,
    ) -> CheckRecord {
        CheckRecord {
            check_id: check_id.into(),
            reference: reference.into(),
            location: why.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            abs_err: f64::NAN,
            rel_err: f64::NAN,
            tol_abs: 0.0,
            tol_rel: 0.0,
            pass: true,
            skipped: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn new(scenario: &crate::scenario::Scenario, seed: u64, records: Vec<CheckRecord>) -> Report {
        let total = records.len();
        let skipped = records.iter().filter(|r| r.skipped).count();
        let passed = records.iter().filter(|r| r.pass && !r.skipped).count();
        let failed = total - passed - skipped;
        Report {
            tool_version: TOOL_VERSION.to_string(),
            scenario: scenario.name.clone(),
            scenario_hash: format!("{:016x}", scenario.hash()),
            seed,
            records,
            summary: Summary {
                total,
                passed,
                failed,
                skipped,
            },
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization")
    }
}
