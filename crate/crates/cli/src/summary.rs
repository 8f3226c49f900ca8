use cmclab::table::format_number;

use crate::error::{EXIT_CHECK_FAILED, EXIT_PASS};

pub const SUMMARY_HEADER: &str = "check,measured,expected,tolerance,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// `|measured - expected| <= tolerance`; NaN fails.
    pub fn near(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            expected,
            tolerance,
            pass: (measured - expected).abs() <= tolerance,
        }
    }

    /// `measured <= bound`; the bound goes in the tolerance column.
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            expected: 0.0,
            tolerance: bound,
            pass: measured <= bound,
        }
    }

    /// A yes/no property recorded as 1/0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            measured: if ok { 1.0 } else { 0.0 },
            expected: 1.0,
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub scenario: String,
    pub checks: Vec<CheckRecord>,
    /// Artifact file names written into the output directory.
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, c: CheckRecord) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_status(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for c in &self.checks {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name,
                format_number(c.measured),
                format_number(c.expected),
                format_number(c.tolerance),
                c.pass
            ));
        }
        s
    }
}
