//! Named residual checks and the reports that collect them.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value <= threshold`.
    AtMost(f64),
    /// Passes when `value >= threshold`.
    AtLeast(f64),
}

impl Bound {
    pub fn admits(self, value: f64) -> bool {
        match self {
            Bound::AtMost(t) => value <= t,
            Bound::AtLeast(t) => value >= t,
        }
    }

    pub fn threshold(self) -> f64 {
        match self {
            Bound::AtMost(t) | Bound::AtLeast(t) => t,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Bound::AtMost(_) => "<=",
            Bound::AtLeast(_) => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        // NaN never passes.
        let passed = !value.is_nan() && bound.admits(value);
        Self { name: name.into(), value, bound, passed }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::new(name, value, Bound::AtMost(tol))
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Bound::AtLeast(threshold))
    }

    /// Integer equality, reported as the absolute difference with tolerance 0.
    pub fn equals(name: impl Into<String>, found: usize, expected: usize) -> Self {
        let diff = (found as f64 - expected as f64).abs();
        Self::new(name, diff, Bound::AtMost(0.0))
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 0.0 } else { 1.0 }, Bound::AtMost(0.0))
    }

    /// Retargets the threshold, keeping the direction of the bound.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.bound = match self.bound {
            Bound::AtMost(_) => Bound::AtMost(threshold),
            Bound::AtLeast(_) => Bound::AtLeast(threshold),
        };
        self.passed = !self.value.is_nan() && self.bound.admits(self.value);
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub title: String,
    pub seed: u64,
    /// SHA-256 of the configuration that produced the report, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Wall-clock timings in seconds; rendered only on request since they
    /// differ between runs.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<(String, f64)>,
}

impl Report {
    pub fn new(title: impl Into<String>, seed: u64) -> Self {
        Self { title: title.into(), seed, ..Self::default() }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, prefix: &str, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks.into_iter().map(|c| c.prefixed(prefix)));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn strip_timings(&mut self) {
        self.timings.clear();
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report: {}", self.title);
        let _ = writeln!(out, "seed: {}", self.seed);
        if let Some(h) = &self.config_sha256 {
            let _ = writeln!(out, "config_sha256: {h}");
        }
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{}  {:<width$}  value={:<11}  {} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                format_value(c.value),
                c.bound.symbol(),
                format_value(c.bound.threshold()),
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        for (name, secs) in &self.timings {
            let _ = writeln!(out, "time: {name} {secs:.3}s");
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(out, "summary: {passed}/{} passed", self.checks.len());
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Three significant digits in scientific notation; the text and JSON
/// renderings carry the same underlying `f64`.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.3e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Check::at_most("a", 1e-12, 1e-10).passed);
        assert!(!Check::at_most("a", 1e-9, 1e-10).passed);
        assert!(Check::at_least("b", 0.2, 0.1).passed);
        assert!(!Check::at_most("nan", f64::NAN, 1.0).passed);
        assert!(Check::equals("dim", 3, 3).passed);
        assert!(!Check::equals("dim", 2, 3).passed);
    }

    #[test]
    fn text_and_json_agree() {
        let mut r = Report::new("t", 5);
        r.push(Check::at_most("x", 1.5e-13, 1e-10));
        let text = r.render_text();
        assert!(text.contains("PASS  x"));
        assert!(text.contains("summary: 1/1 passed"));
        let json: serde_json::Value = serde_json::from_str(&r.render_json()).unwrap();
        assert_eq!(json["checks"][0]["value"].as_f64().unwrap(), 1.5e-13);
        assert_eq!(json["checks"][0]["bound"]["kind"], "at_most");
    }
}
