//! Built-in example systems.

use crate::model::SystemModel;

/// JSON source of the underwater robot example.
pub const ROBOT_JSON: &str = include_str!("../fixtures/robot.json");

/// Underwater robot: two camera pipelines (front and bottom) with CPU and
/// GPU versions of their image stages, five control components, and a
/// GPU-equipped node next to a CPU-only one.
pub fn robot() -> SystemModel {
    serde_json::from_str(ROBOT_JSON).expect("bundled robot fixture parses")
}
