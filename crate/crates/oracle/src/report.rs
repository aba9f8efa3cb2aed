use std::fmt;

/// One checked quantity.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Plain-text verification report, one line per check.
#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `value <= threshold`.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        self.push(name.into(), value, threshold, value <= threshold)
    }

    /// Records `value >= threshold`.
    pub fn at_least(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        self.push(name.into(), value, threshold, value >= threshold)
    }

    fn push(&mut self, name: String, value: f64, threshold: f64, passed: bool) -> bool {
        // NaN never passes
        let passed = passed && !value.is_nan();
        self.checks.push(Check {
            name,
            value,
            threshold,
            passed,
        });
        passed
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (threshold {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold
        )
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}
