//! Scenario files: game rules, starting world, add-ons and ownership.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behavior::{Addon, OwnershipMap};
use crate::geometry::{GridCoord, KinematicConfig};
use crate::world::{World, WorldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub rules_text: String,
    pub world: WorldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematics: Option<KinematicConfig>,
    #[serde(default)]
    pub addons: Vec<Addon>,
    pub robot_ownership: OwnershipMap,
    #[serde(default)]
    pub board_mapping: BTreeMap<String, [i64; 2]>,
    /// Relative paths resolve against the scenario file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
}

/// One problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ScenarioIssue {
    ScenarioIssue { path: path.into(), message: message.into() }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioIssue> {
        serde_json::from_str(text).map_err(|e| issue("$", e.to_string()))
    }

    /// Read a scenario and make its mock script path absolute.
    pub fn load(path: &Path) -> Result<Self, ScenarioIssue> {
        let text = std::fs::read_to_string(path).map_err(|e| issue("$", format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_json(&text)?;
        if let Some(m) = s.mock_script.as_mut() {
            if m.is_relative() {
                *m = path.parent().unwrap_or(Path::new(".")).join(&*m);
            }
        }
        Ok(s)
    }

    pub fn kinematics(&self) -> KinematicConfig {
        self.kinematics.unwrap_or_default()
    }

    /// Board squares as grid cells; call after [`Scenario::validate`].
    pub fn board(&self) -> BTreeMap<String, GridCoord> {
        self.board_mapping.iter().map(|(k, c)| (k.clone(), GridCoord::new(c[0] as u32, c[1] as u32))).collect()
    }

    /// Game labels declared on robots.
    pub fn roles(&self) -> BTreeMap<String, String> {
        self.world.robots.iter().filter_map(|r| r.role.clone().map(|l| (r.id.clone(), l))).collect()
    }

    /// Build the starting world, collecting every problem found.
    pub fn validate(&self) -> Result<World, Vec<ScenarioIssue>> {
        let mut issues = Vec::new();
        let cfg = self.kinematics();
        if self.name.trim().is_empty() {
            issues.push(issue("$.name", "must not be empty"));
        }
        let mut bad_cell = false;
        for (i, r) in self.world.robots.iter().enumerate() {
            if let Err(e) = GridCoord::checked(r.cell[0], r.cell[1], &cfg) {
                bad_cell = true;
                issues.push(issue(format!("$.world.robots[{i}].cell"), format!("`{}`: {e}", r.id)));
            }
            if !self.robot_ownership.contains_key(&r.id) {
                issues.push(issue(format!("$.robot_ownership.{}", r.id), "robot has no ownership entry"));
            }
        }
        for id in self.robot_ownership.keys() {
            if !self.world.robots.iter().any(|r| &r.id == id) {
                issues.push(issue(format!("$.robot_ownership.{id}"), "no such robot"));
            }
        }
        for (k, c) in &self.board_mapping {
            if GridCoord::checked(c[0], c[1], &cfg).is_err() {
                issues.push(issue(format!("$.board_mapping.{k}"), format!("cell ({}, {}) is off the grid", c[0], c[1])));
            }
        }
        let world = match World::from_spec(&self.world, cfg) {
            Ok(w) => Some(w),
            Err(_) if bad_cell => None,
            Err(e) => {
                issues.push(issue("$.world", e.to_string()));
                None
            }
        };
        match world {
            Some(w) if issues.is_empty() => Ok(w),
            _ => Err(issues),
        }
    }
}
