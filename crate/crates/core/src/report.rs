//! Deterministic JSON reports.
//!
//! Maps serialize with sorted keys and floats through the shortest
//! round-trip representation, so identical inputs give identical bytes.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const TOOL: &str = "tvckit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One judged outcome. `enforced` verdicts decide the exit code; the others
/// are reported for information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: String,
    /// Tolerance the verdict was judged against, if numeric.
    pub tolerance: Option<f64>,
    /// The outcome a demo is expected to reproduce.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    pub passed: bool,
    pub enforced: bool,
}

impl VerdictEntry {
    pub fn new(name: impl Into<String>, verdict: impl Into<String>, tolerance: Option<f64>, passed: bool) -> Self {
        Self {
            name: name.into(),
            verdict: verdict.into(),
            tolerance,
            expected: None,
            passed,
            enforced: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.enforced = false;
        self
    }

    /// Judges the verdict against an expected outcome instead of its own
    /// pass condition.
    pub fn expecting(mut self, expected: impl Into<String>) -> Self {
        let expected = expected.into();
        self.passed = self.verdict == expected;
        self.expected = Some(expected);
        self.enforced = true;
        self
    }
}

/// Serialized name of an enum verdict, e.g. `NON_UNIFORM`.
pub fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::from("?"),
    }
}

/// Results, verdicts and caveats produced by one part of a command.
#[derive(Debug, Clone, Default)]
pub struct Section {
    pub results: Map<String, Value>,
    pub verdicts: Vec<VerdictEntry>,
    pub caveats: Vec<String>,
    pub csv: Option<String>,
}

impl Section {
    pub fn put<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.results.insert(key.to_string(), v);
    }

    pub fn caveat(&mut self, c: &str) {
        if !self.caveats.iter().any(|x| x == c) {
            self.caveats.push(c.to_string());
        }
    }

    /// Folds `other` in under `prefix`: its results become one nested
    /// object and its verdict names gain the prefix.
    pub fn absorb(&mut self, prefix: &str, other: Section) {
        self.results.insert(prefix.to_string(), Value::Object(other.results));
        for mut v in other.verdicts {
            v.name = format!("{prefix}.{}", v.name);
            self.verdicts.push(v);
        }
        for c in other.caveats {
            self.caveat(&c);
        }
        if self.csv.is_none() {
            self.csv = other.csv;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// The resolved scenario; absent when loading failed.
    pub scenario: Option<Value>,
    pub results: Value,
    pub verdicts: Vec<VerdictEntry>,
    pub caveats: Vec<String>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub exit_code: i32,
}

impl Report {
    pub fn from_section(command: &str, seed: u64, scenario: Option<Value>, section: Section, warnings: Vec<String>) -> Self {
        let exit_code = if section.verdicts.iter().all(|v| v.passed || !v.enforced) { 0 } else { 1 };
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            scenario,
            results: Value::Object(section.results),
            verdicts: section.verdicts,
            caveats: section.caveats,
            warnings,
            error: None,
            exit_code,
        }
    }

    pub fn failure(command: &str, seed: u64, scenario: Option<Value>, err: &crate::Error, warnings: Vec<String>) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            scenario,
            results: Value::Object(Map::new()),
            verdicts: Vec::new(),
            caveats: Vec::new(),
            warnings,
            error: Some(err.to_string()),
            exit_code: err.exit_code(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// One line per verdict, for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        if let Some(e) = &self.error {
            out.push_str(&format!("error: {e}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        for v in &self.verdicts {
            let mark = match (v.passed, v.enforced) {
                (true, _) => "ok  ",
                (false, true) => "FAIL",
                (false, false) => "info",
            };
            let tol = v.tolerance.map(|t| format!(" (tol {t:e})")).unwrap_or_default();
            let exp = v.expected.as_ref().map(|e| format!(" expected {e}")).unwrap_or_default();
            out.push_str(&format!("{mark} {}: {}{exp}{tol}\n", v.name, v.verdict));
        }
        out.push_str(&format!("exit {}\n", self.exit_code));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::EulerVerdict;

    #[test]
    fn exit_code_follows_enforced_verdicts() {
        let mut s = Section::default();
        s.verdicts.push(VerdictEntry::new("a", "PASS", Some(1e-8), true));
        s.verdicts.push(VerdictEntry::new("b", "FAIL", None, false).informational());
        assert_eq!(Report::from_section("x", 1, None, s.clone(), vec![]).exit_code, 0);
        s.verdicts.push(VerdictEntry::new("c", "VIOLATED", None, false));
        assert_eq!(Report::from_section("x", 1, None, s, vec![]).exit_code, 1);
    }

    #[test]
    fn expected_outcomes_and_labels() {
        assert_eq!(label(&EulerVerdict::NotStationary), "NOT_STATIONARY");
        let v = VerdictEntry::new("tvc", "VIOLATED", None, false).expecting("VIOLATED");
        assert!(v.passed);
        let mut outer = Section::default();
        let mut inner = Section::default();
        inner.put("x", &1.5);
        inner.verdicts.push(v);
        outer.absorb("part", inner);
        assert_eq!(outer.verdicts[0].name, "part.tvc");
        assert_eq!(outer.results["part"]["x"], 1.5);
    }

    #[test]
    fn json_is_stable() {
        let mut s = Section::default();
        s.put("b", &vec![0.1, 1e-300, f64::NAN]);
        s.put("a", &"z");
        let r = Report::from_section("euler", 7, None, s, vec![]);
        let text = r.to_json();
        assert_eq!(text, r.clone().to_json());
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert!(text.contains("null"));
    }
}
