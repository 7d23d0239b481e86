//! Batch front end for `stoilow-core`: scenario files, task dispatch, JSON
//! reports and SVG figures.

pub mod commands;
pub mod report;
pub mod scenario;
pub mod svg;

pub use report::{run_scenario, Report, Run};
pub use scenario::{Operation, ParseError, Scenario, Settings, Task};

/// JSON schema every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
