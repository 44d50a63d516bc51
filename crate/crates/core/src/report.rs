//! Verification records shared by the library checks and the CLI report.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub expected: Value,
    pub got: Value,
    pub witness: Value,
}

impl Check {
    pub fn new(name: &str, passed: bool, expected: impl Into<Value>, got: impl Into<Value>) -> Self {
        Check { name: name.to_string(), passed, expected: expected.into(), got: got.into(), witness: Value::Null }
    }

    pub fn with_witness(mut self, witness: impl Into<Value>) -> Self {
        self.witness = witness.into();
        self
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
