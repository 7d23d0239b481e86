//! Scenario execution and the JSON report.
//!
//! Everything except the `timing` record is a pure function of the scenario
//! and the build, so two runs can be compared byte for byte once `timing` is
//! removed.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use stoilow_core::map::lookup;

use crate::commands::execute;
use crate::scenario::Scenario;
use crate::svg;

pub const TOOL: &str = "stoilow";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub schema: u32,
    pub cli: String,
    pub core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            schema: SCHEMA_VERSION,
            cli: env!("CARGO_PKG_VERSION").into(),
            core: stoilow_core::VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Ok { result: Value },
    Error { error: TaskError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub index: usize,
    pub kind: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

impl Entry {
    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, Outcome::Ok { .. })
    }

    pub fn result(&self) -> Option<&Value> {
        match &self.outcome {
            Outcome::Ok { result } => Some(result),
            Outcome::Error { .. } => None,
        }
    }

    pub fn error_code(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Ok { .. } => None,
            Outcome::Error { error } => Some(&error.code),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tasks: usize,
    pub succeeded: usize,
    pub failed: usize,
}

/// Wall-clock seconds. The only nondeterministic part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub task_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub versions: Versions,
    pub scenario: Scenario,
    pub results: Vec<Entry>,
    pub summary: Summary,
    pub timing: Timing,
}

impl Report {
    pub fn all_succeeded(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report with its timing record removed, as JSON.
    pub fn to_json_untimed(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(m) = &mut v {
            m.remove("timing");
        }
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A finished run: the report plus rendered files not yet written.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    /// `(file name, contents)` for SVGs and attachments.
    pub files: Vec<(String, String)>,
}

impl Run {
    /// Writes `report.json` and every rendered file into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }
}

/// Executes every task in order. Task failures become error entries; they
/// never stop later tasks.
pub fn run_scenario(scenario: &Scenario) -> Run {
    let started = Instant::now();
    let entry = lookup(&scenario.map);
    let mut results = Vec::with_capacity(scenario.tasks.len());
    let mut task_seconds = Vec::with_capacity(scenario.tasks.len());
    let mut files = Vec::new();
    for (i, task) in scenario.tasks.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = match &entry {
            Ok(e) => execute(e, &scenario.settings, task, i),
            Err(err) => Err(err.clone()),
        };
        task_seconds.push(t0.elapsed().as_secs_f64());
        let mut svg_name = None;
        let outcome = match outcome {
            Ok(out) => {
                if task.render.unwrap_or(scenario.render) {
                    let name = format!("task-{i}.svg");
                    files.push((name.clone(), svg::render(&out.figure)));
                    svg_name = Some(name);
                }
                for (stem, doc) in out.attachments {
                    // Cell tables get large; keep them compact.
                    let mut body = serde_json::to_string(&doc).expect("attachment serializes");
                    body.push('\n');
                    files.push((format!("{stem}.json"), body));
                }
                Outcome::Ok { result: out.payload }
            }
            Err(e) => Outcome::Error {
                error: TaskError {
                    code: e.code().into(),
                    message: e.to_string(),
                },
            },
        };
        results.push(Entry {
            index: i,
            kind: task.op.name().into(),
            outcome,
            svg: svg_name,
        });
    }
    let failed = results.iter().filter(|e| !e.is_ok()).count();
    Run {
        report: Report {
            tool: TOOL.into(),
            versions: Versions::default(),
            scenario: scenario.clone(),
            summary: Summary {
                tasks: results.len(),
                succeeded: results.len() - failed,
                failed,
            },
            results,
            timing: Timing {
                total_seconds: started.elapsed().as_secs_f64(),
                task_seconds,
            },
        },
        files,
    }
}
