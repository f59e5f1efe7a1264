//! Named check lists produced by the validators.
//!
//! Every exhaustive verification in this crate reports through a [`Report`]:
//! one [`Check`] per named axiom, with a minimal witness on failure and an
//! optional note (used for conditions that are vacuous in the finite
//! discrete model). Check order is insertion order, so reports serialize
//! deterministically.

use serde_json::{Map, Value};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn pass(&mut self, name: &str) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: true,
            witness: None,
            note: None,
        });
    }

    pub fn pass_note(&mut self, name: &str, note: &str) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: true,
            witness: None,
            note: Some(note.to_string()),
        });
    }

    pub fn fail(&mut self, name: &str, witness: String) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: false,
            witness: Some(witness),
            note: None,
        });
    }

    /// Record `name` as passed if `witness` is `None`, failed otherwise.
    pub fn check(&mut self, name: &str, witness: Option<String>) {
        match witness {
            None => self.pass(name),
            Some(w) => self.fail(name, w),
        }
    }

    pub fn merge(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    /// JSON shape used by the CLI; `trace` controls whether witnesses are
    /// included.
    pub fn to_json(&self, trace: bool) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), Value::String(c.name.clone()));
                m.insert(
                    "status".into(),
                    Value::String(if c.pass { "pass" } else { "fail" }.into()),
                );
                if let Some(n) = &c.note {
                    m.insert("note".into(), Value::String(n.clone()));
                }
                if trace {
                    if let Some(w) = &c.witness {
                        m.insert("witness".into(), Value::String(w.clone()));
                    }
                }
                Value::Object(m)
            })
            .collect();
        let mut m = Map::new();
        m.insert("checks".into(), Value::Array(checks));
        m.insert("passed".into(), Value::Bool(self.passed()));
        Value::Object(m)
    }
}
