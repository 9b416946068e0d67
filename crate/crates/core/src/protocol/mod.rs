//! Multi-robot action-sequence format.
//!
//! The canonical form is compact JSON with a fixed key order, produced by
//! [`serialize`] and read back by [`parse_strict`]. Agent replies are read by
//! [`parse_lenient`], which pulls the last key-value block out of free-form
//! text and tolerates dict-literal syntax (single quotes, trailing commas,
//! bare keys, `True`/`False`/`None`).

mod extract;
mod literal;
mod schema;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geometry::PairMode;

pub use extract::{extract_last_block, Block};
pub use literal::parse_literal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("no key-value block found: {0}")]
    Extraction(String),
    #[error("block does not match the action schema ({source}); block: {block}")]
    BlockSchema {
        block: String,
        #[source]
        source: Box<ProtocolError>,
    },
}

impl ProtocolError {
    pub(crate) fn schema(path: &str, message: impl Into<String>) -> Self {
        ProtocolError::Schema { path: path.to_string(), message: message.into() }
    }

    /// Field path for schema errors, including ones wrapped with block text.
    pub fn path(&self) -> Option<&str> {
        match self {
            ProtocolError::Schema { path, .. } => Some(path),
            ProtocolError::BlockSchema { source, .. } => source.path(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivot {
    Center,
    Left,
    Right,
}

impl Pivot {
    pub fn as_str(self) -> &'static str {
        match self {
            Pivot::Center => "center",
            Pivot::Left => "left",
            Pivot::Right => "right",
        }
    }
}

/// One step of a robot track.
///
/// `speed` is kept as the raw level so that out-of-range values constructed
/// in code can still be reported by validation; both parsers reject them.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionStep {
    /// Drive to the centre of grid cell `[col, row]`.
    Translate { target: [i64; 2], speed: u8 },
    /// With `pivot = center`, spin in place to absolute heading `angle`.
    /// With a wheel pivot, sweep by the signed `angle` (CCW positive).
    Rotate { angle: f64, pivot: Pivot, speed: u8 },
    PairOrient { mode: PairMode, partner: String, speed: u8 },
    /// Idle for `duration_ms`. Inside a traced stroke sequence this also marks a pen lift.
    Wait { duration_ms: u64 },
}

impl ActionStep {
    pub fn translate(col: i64, row: i64, speed: u8) -> Self {
        ActionStep::Translate { target: [col, row], speed }
    }

    pub fn spin_to(angle: f64, speed: u8) -> Self {
        ActionStep::Rotate { angle, pivot: Pivot::Center, speed }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ActionStep::Translate { .. } => "translate",
            ActionStep::Rotate { .. } => "rotate",
            ActionStep::PairOrient { .. } => "pair_orient",
            ActionStep::Wait { .. } => "wait",
        }
    }

    pub fn speed(&self) -> Option<u8> {
        match self {
            ActionStep::Translate { speed, .. }
            | ActionStep::Rotate { speed, .. }
            | ActionStep::PairOrient { speed, .. } => Some(*speed),
            ActionStep::Wait { .. } => None,
        }
    }

    fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("type".into(), json!(self.type_name()));
        match self {
            ActionStep::Translate { target, speed } => {
                m.insert("target".into(), json!(target));
                m.insert("speed".into(), json!(speed));
            }
            ActionStep::Rotate { angle, pivot, speed } => {
                m.insert("angle".into(), json!(angle));
                m.insert("pivot".into(), json!(pivot.as_str()));
                m.insert("speed".into(), json!(speed));
            }
            ActionStep::PairOrient { mode, partner, speed } => {
                m.insert("mode".into(), json!(mode.as_str()));
                m.insert("partner".into(), json!(partner));
                m.insert("speed".into(), json!(speed));
            }
            ActionStep::Wait { duration_ms } => {
                m.insert("duration_ms".into(), json!(duration_ms));
            }
        }
        Value::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotTrack {
    pub id: String,
    pub actions: Vec<ActionStep>,
}

impl RobotTrack {
    pub fn new(id: impl Into<String>, actions: Vec<ActionStep>) -> Self {
        Self { id: id.into(), actions }
    }
}

/// Plan for several robots. With `parallel` the tracks run concurrently;
/// steps inside a track always run in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence {
    pub robots: Vec<RobotTrack>,
    pub parallel: bool,
}

impl Default for ActionSequence {
    fn default() -> Self {
        Self { robots: Vec::new(), parallel: true }
    }
}

impl ActionSequence {
    pub fn new(robots: Vec<RobotTrack>) -> Self {
        Self { robots, parallel: true }
    }

    pub fn is_empty(&self) -> bool {
        self.robots.iter().all(|t| t.actions.is_empty())
    }

    pub fn track(&self, id: &str) -> Option<&RobotTrack> {
        self.robots.iter().find(|t| t.id == id)
    }

    /// Number of steps across all tracks.
    pub fn step_count(&self) -> usize {
        self.robots.iter().map(|t| t.actions.len()).sum()
    }

    /// Every robot id the sequence moves: track owners plus pair partners.
    pub fn commanded_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for t in &self.robots {
            if !t.actions.is_empty() && !ids.contains(&t.id.as_str()) {
                ids.push(&t.id);
            }
            for a in &t.actions {
                if let ActionStep::PairOrient { partner, .. } = a {
                    if !ids.contains(&partner.as_str()) {
                        ids.push(partner);
                    }
                }
            }
        }
        ids
    }

    pub fn to_value(&self) -> Value {
        let robots: Vec<Value> = self
            .robots
            .iter()
            .map(|t| {
                let mut m = Map::new();
                m.insert("id".into(), json!(t.id));
                m.insert("actions".into(), Value::Array(t.actions.iter().map(ActionStep::to_value).collect()));
                Value::Object(m)
            })
            .collect();
        let mut m = Map::new();
        m.insert("robots".into(), Value::Array(robots));
        m.insert("parallel".into(), json!(self.parallel));
        Value::Object(m)
    }

    pub fn from_value_strict(v: &Value) -> Result<Self, ProtocolError> {
        schema::sequence_from_value(v, schema::Mode::Strict, &mut Vec::new())
    }
}

impl fmt::Display for ActionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

impl Serialize for ActionSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ActionSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        ActionSequence::from_value_strict(&v).map_err(serde::de::Error::custom)
    }
}

/// Controller reply split into its free-text reasoning and its plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    pub narration: String,
    pub sequence: ActionSequence,
    /// Ignored fields and other tolerated irregularities.
    pub warnings: Vec<String>,
}

/// Canonical compact JSON text.
pub fn serialize(seq: &ActionSequence) -> String {
    seq.to_value().to_string()
}

/// Inverse of [`serialize`]. Unknown keys are rejected.
pub fn parse_strict(text: &str) -> Result<ActionSequence, ProtocolError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ProtocolError::Syntax {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    ActionSequence::from_value_strict(&v)
}

/// Extract and normalize the last action block from an agent reply.
pub fn parse_lenient(model_text: &str) -> Result<ControllerOutput, ProtocolError> {
    let block = extract_last_block(model_text, |v| v.get("robots").is_some())?;
    let mut warnings = Vec::new();
    let sequence = schema::sequence_from_value(&block.value, schema::Mode::Lenient, &mut warnings)
        .map_err(|e| ProtocolError::BlockSchema { block: block.text.to_string(), source: Box::new(e) })?;
    for w in &warnings {
        tracing::warn!(warning = %w, "tolerated irregular action block");
    }
    Ok(ControllerOutput { narration: block.narration.to_string(), sequence, warnings })
}

/// Convert serde_json's 1-based line/column to a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}
