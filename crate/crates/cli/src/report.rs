//! Report document and its JSON / CSV renderings.
//!
//! The JSON layout is described in `docs/report-schema.md`; bump
//! [`SCHEMA_VERSION`] whenever a field changes meaning or disappears.

use serde::Serialize;

use crate::config::{RunConfig, Suite};

pub const SCHEMA_NAME: &str = "cmap-verification-report";
pub const SCHEMA_VERSION: u32 = 1;

/// How a check's aggregated value is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Worst value over the points must not exceed the tolerance.
    Residual,
    /// Smallest value over the points must be strictly positive.
    Positive,
    /// Largest value over the points must be strictly negative.
    Negative,
}

impl Bound {
    pub fn aggregate(self, values: &[f64]) -> f64 {
        let pick = match self {
            Bound::Residual | Bound::Negative => f64::max,
            Bound::Positive => f64::min,
        };
        let start = if self == Bound::Positive { f64::INFINITY } else { f64::NEG_INFINITY };
        values.iter().copied().fold(start, |a, v| if v.is_nan() || a.is_nan() { f64::NAN } else { pick(a, v) })
    }

    pub fn passes(self, value: f64, tolerance: f64) -> bool {
        match self {
            Bound::Residual => value <= tolerance,
            Bound::Positive => value > 0.0,
            Bound::Negative => value < 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub key: &'static str,
    pub statement: &'static str,
    pub bound: Bound,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Non-gating checks are reported but do not affect the exit status.
    pub gating: bool,
    pub points: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub points: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

impl SuiteReport {
    pub fn new(suite: Suite, seed: u64, points: usize, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass || !c.gating);
        SuiteReport { suite, seed, points, pass, error: None, checks, wall_time_seconds: None }
    }

    pub fn failed(suite: Suite, seed: u64, points: usize, error: String) -> Self {
        SuiteReport {
            suite,
            seed,
            points,
            pass: false,
            error: Some(error),
            checks: Vec::new(),
            wall_time_seconds: None,
        }
    }
}

/// Constants measured by the run rather than fixed in advance.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Derived {
    /// Mean Einstein constant `Ric = λ g` over the sampled points.
    pub einstein_constant: Option<f64>,
    /// Fitted `c` in `g = c · (twisted elementary deformation)`.
    pub twist_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub schema_version: u32,
    pub config: RunConfig,
    pub derived: Derived,
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

impl Report {
    pub fn new(config: RunConfig, derived: Derived, suites: Vec<SuiteReport>) -> Self {
        let pass = suites.iter().all(|s| s.pass);
        Report {
            schema: SCHEMA_NAME,
            schema_version: SCHEMA_VERSION,
            config,
            derived,
            pass,
            suites,
            wall_time_seconds: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per sampled point and check.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["suite", "check", "point", "value", "tolerance", "pass"]).expect("in-memory write");
        for suite in &self.suites {
            for check in &suite.checks {
                for (i, v) in check.samples.iter().enumerate() {
                    let pass = check.bound.passes(*v, check.tolerance);
                    w.write_record([
                        suite.suite.name(),
                        check.key,
                        &i.to_string(),
                        &format!("{v:e}"),
                        &format!("{:e}", check.tolerance),
                        if pass { "true" } else { "false" },
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Human-readable summary for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for suite in &self.suites {
            let status = if suite.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {} ({} points)\n", suite.suite, suite.points));
            if let Some(e) = &suite.error {
                out.push_str(&format!("    error: {e}\n"));
            }
            for c in suite.checks.iter().filter(|c| !c.pass) {
                let note = if c.gating { "" } else { " [informational]" };
                out.push_str(&format!("    {}: {:e} (tolerance {:e}){note}\n", c.key, c.value, c.tolerance));
            }
        }
        if let Some(l) = self.derived.einstein_constant {
            out.push_str(&format!("einstein constant {l:.12}\n"));
        }
        if let Some(c) = self.derived.twist_scale {
            out.push_str(&format!("twist scale {c:.15}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(Bound::Residual.aggregate(&[1e-12, 3e-12, 2e-12]), 3e-12);
        assert_eq!(Bound::Positive.aggregate(&[0.5, 0.2]), 0.2);
        assert!(Bound::Residual.aggregate(&[1.0, f64::NAN]).is_nan());
        assert!(!Bound::Residual.passes(f64::NAN, 1.0));
        assert!(Bound::Negative.passes(-1.0, 0.0) && !Bound::Negative.passes(0.0, 0.0));
    }
}
