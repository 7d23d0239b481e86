//! Scenario files: a map, an ordered task list and output settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stoilow_core::{Rect, C64};
use thiserror::Error;

pub const DEFAULT_CELL: f64 = 0.005;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_FACTOR_TOL: f64 = 1e-2;
pub const DEFAULT_MAX_LIFTS: usize = 64;
pub const DEFAULT_PROBES: usize = 50;
pub const DEFAULT_DEGREE_SAMPLES: usize = 256;
/// Half-side of the default working square around a task's center.
pub const DEFAULT_HALF_SIDE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}` (line {line}, column {column}): {message}")]
    Schema {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ParseError {
    /// Dotted path of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ParseError::Schema { field, .. } | ParseError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Run-wide numerical settings. Tasks may override `cell` and `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(default = "default_cell")]
    pub cell: f64,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_lifts")]
    pub max_lifts: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            cell: DEFAULT_CELL,
            tol: None,
            seed: 0,
            max_lifts: DEFAULT_MAX_LIFTS,
        }
    }
}

fn default_cell() -> f64 {
    DEFAULT_CELL
}

fn default_max_lifts() -> usize {
    DEFAULT_MAX_LIFTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Zoo identifier (with optional `@pre:`/`@post:` suffixes) or `sampled:<path>`.
    pub map: String,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub render: bool,
    #[serde(default, flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    #[serde(flatten)]
    pub op: Operation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<bool>,
}

/// One operation with its parameters. Points are `[re, im]`, boxes are
/// `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Operation {
    Normal {
        at: C64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Lift {
        center: C64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        path: Vec<C64>,
        from: C64,
    },
    Raylifts {
        at: C64,
        dir: C64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Degree {
        at: C64,
        rho: f64,
        #[serde(default = "default_degree_samples")]
        samples: usize,
    },
    Branch {
        #[serde(rename = "box")]
        bounds: [f64; 4],
    },
    Factor {
        at: C64,
    },
    #[serde(alias = "conserve")]
    Conservation {
        at: C64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default = "default_probes")]
        probes: usize,
    },
    Regularity {
        #[serde(rename = "box", default = "default_regularity_box")]
        bounds: [f64; 4],
    },
}

fn default_degree_samples() -> usize {
    DEFAULT_DEGREE_SAMPLES
}

fn default_probes() -> usize {
    DEFAULT_PROBES
}

fn default_regularity_box() -> [f64; 4] {
    [-0.5, -0.5, 0.5, 0.5]
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Normal { .. } => "normal",
            Operation::Lift { .. } => "lift",
            Operation::Raylifts { .. } => "raylifts",
            Operation::Degree { .. } => "degree",
            Operation::Branch { .. } => "branch",
            Operation::Factor { .. } => "factor",
            Operation::Conservation { .. } => "conservation",
            Operation::Regularity { .. } => "regularity",
        }
    }
}

impl Task {
    pub fn new(op: Operation) -> Self {
        Task {
            op,
            cell: None,
            tol: None,
            render: None,
        }
    }
}

pub fn box_rect(b: [f64; 4]) -> Option<Rect> {
    Rect::new(b[0], b[1], b[2], b[3]).ok()
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() || field == "." {
                ParseError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: strip_position(&inner.to_string()),
                }
            } else {
                ParseError::Schema {
                    field,
                    line: inner.line(),
                    column: inner.column(),
                    message: strip_position(&inner.to_string()),
                }
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|source| ParseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Syntactic checks that serde cannot express: positivity, finiteness,
    /// well-formed boxes.
    pub fn validate(&self) -> Result<(), ParseError> {
        let bad = |field: String, message: String| Err(ParseError::Invalid { field, message });
        if self.map.trim().is_empty() {
            return bad("map".into(), "must name a map".into());
        }
        if !positive(self.settings.cell) {
            return bad("cell".into(), format!("must be positive, got {}", self.settings.cell));
        }
        if let Some(t) = self.settings.tol {
            if !positive(t) {
                return bad("tol".into(), format!("must be positive, got {t}"));
            }
        }
        if self.settings.max_lifts == 0 {
            return bad("max_lifts".into(), "must be at least 1".into());
        }
        for (i, task) in self.tasks.iter().enumerate() {
            let f = |name: &str| format!("tasks[{i}].{name}");
            if let Some(c) = task.cell {
                if !positive(c) {
                    return bad(f("cell"), format!("must be positive, got {c}"));
                }
            }
            if let Some(t) = task.tol {
                if !positive(t) {
                    return bad(f("tol"), format!("must be positive, got {t}"));
                }
            }
            let finite = |name: &str, z: &C64| {
                if z.is_finite() {
                    Ok(())
                } else {
                    bad(f(name), "point must be finite".into())
                }
            };
            let radius = |name: &str, r: &Option<f64>| match r {
                Some(r) if !positive(*r) => bad(f(name), format!("must be positive, got {r}")),
                _ => Ok(()),
            };
            match &task.op {
                Operation::Normal { at, radius: r } => {
                    finite("at", at)?;
                    radius("radius", r)?;
                }
                Operation::Lift {
                    center,
                    radius: r,
                    path,
                    from,
                } => {
                    finite("center", center)?;
                    finite("from", from)?;
                    radius("radius", r)?;
                    if path.len() < 2 {
                        return bad(f("path"), "needs at least two points".into());
                    }
                    for (j, p) in path.iter().enumerate() {
                        finite(&format!("path[{j}]"), p)?;
                    }
                }
                Operation::Raylifts { at, dir, radius: r } => {
                    finite("at", at)?;
                    finite("dir", dir)?;
                    radius("radius", r)?;
                    if dir.norm() == 0.0 {
                        return bad(f("dir"), "must be nonzero".into());
                    }
                }
                Operation::Degree { at, rho, samples } => {
                    finite("at", at)?;
                    radius("rho", &Some(*rho))?;
                    if *samples == 0 {
                        return bad(f("samples"), "must be at least 1".into());
                    }
                }
                Operation::Branch { bounds } | Operation::Regularity { bounds } => {
                    if box_rect(*bounds).is_none() {
                        return bad(f("box"), format!("needs finite x0 < x1, y0 < y1, got {bounds:?}"));
                    }
                }
                Operation::Factor { at } => finite("at", at)?,
                Operation::Conservation { at, radius: r, probes } => {
                    finite("at", at)?;
                    radius("radius", r)?;
                    if *probes == 0 {
                        return bad(f("probes"), "must be at least 1".into());
                    }
                }
            }
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_degree_task() {
        let s = Scenario::parse(
            r#"{"map": "pow2", "tasks": [{"kind": "degree", "at": [0, 0], "rho": 0.1}]}"#,
        )
        .unwrap();
        assert_eq!(s.settings, Settings::default());
        match &s.tasks[0].op {
            Operation::Degree { at, rho, samples } => {
                assert_eq!(*at, C64::new(0.0, 0.0));
                assert_eq!(*rho, 0.1);
                assert_eq!(*samples, DEFAULT_DEGREE_SAMPLES);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_radius_names_the_field() {
        let e = Scenario::parse(
            r#"{"map": "pow2", "tasks": [
                {"kind": "degree", "at": [0, 0], "rho": 0.1},
                {"kind": "normal", "at": [0, 0], "radius": -1}
            ]}"#,
        )
        .unwrap_err();
        assert_eq!(e.field(), Some("tasks[1].radius"), "{e}");
    }

    #[test]
    fn type_errors_carry_path_and_line() {
        let e = Scenario::parse("{\"map\": \"pow2\",\n \"tasks\": [{\"kind\": \"degree\", \"at\": [0, 0], \"rho\": \"big\"}]}")
            .unwrap_err();
        match e {
            ParseError::Schema { field, line, .. } => {
                assert!(field.starts_with("tasks[0]"), "{field}");
                assert_eq!(line, 2);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn syntax_errors_report_position() {
        let e = Scenario::parse("{\"map\": \"pow2\",\n\n \"tasks\": [,]}").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 3, .. }), "{e}");
    }

    #[test]
    fn unknown_task_kind_is_rejected() {
        let e = Scenario::parse(r#"{"map": "pow2", "tasks": [{"kind": "teleport"}]}"#).unwrap_err();
        assert!(e.to_string().contains("teleport"), "{e}");
    }

    #[test]
    fn round_trips_through_json() {
        let s = Scenario::parse(
            r#"{"map": "cubic", "seed": 7, "render": true, "tasks": [
                {"kind": "branch", "box": [-2, -2, 2, 2], "cell": 0.01},
                {"kind": "conserve", "at": [0, 0], "radius": 0.04}
            ]}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::parse(&text).unwrap(), s);
    }
}
