//! Two-agent pipeline: a reality-agnostic Coordinator that referees the
//! game and a pose-aware Controller that turns directives into robot plans.

mod controller;
mod coordinator;
pub mod gateway;
pub mod prompt;
pub mod transcript;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{Addon, OwnershipMap};
use crate::geometry::GridCoord;
use crate::protocol::ProtocolError;

pub use controller::{apprentice_feedback, controller_context, controller_turn, resolve_destination, ControllerTurn};
pub use coordinator::{coordinator_turn, parse_coordinator, CoordinatorOutput, Directive};
pub use gateway::{Gateway, GatewayConfig, GatewayError, LiveGateway, MockGateway, ScriptEntry};
pub use prompt::{compose_prompts, ContextTurn, PromptBundle};
pub use transcript::{Actor, Payload, Transcript, TranscriptEntry};

/// Maximum controller re-prompts after a rejected plan.
pub const MAX_REPAIRS: usize = 2;
/// Coordinator turns kept as conversation memory.
pub const HISTORY_TURNS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Coordinator,
    Controller,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Coordinator => "coordinator",
            Role::Controller => "controller",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("prompt composition: {0}")]
    Compose(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("coordinator reply unusable after a re-prompt: {0}")]
    Coordinator(ProtocolError),
    #[error("no valid plan after {repairs} repairs:\n{report}")]
    RepairExhausted { repairs: usize, report: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Game-level state the agents read: rules, roster and memory. Holds no
/// physical poses; those are passed to the Controller per turn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GameContext {
    pub name: String,
    pub rules_text: String,
    /// Robot id to game label ("white pawn", "Monster2").
    pub roles: BTreeMap<String, String>,
    pub board_mapping: BTreeMap<String, GridCoord>,
    pub addons: Vec<Addon>,
    pub ownership: OwnershipMap,
    /// Role names the Coordinator introduced during play.
    pub introduced_roles: Vec<String>,
    /// Coordinator conversation memory.
    pub history: Vec<ContextTurn>,
    calls: BTreeMap<Role, usize>,
}

impl GameContext {
    pub fn new(name: impl Into<String>, rules_text: impl Into<String>) -> Self {
        Self { name: name.into(), rules_text: rules_text.into(), ..Self::default() }
    }

    /// Claim the next call index for `role`.
    pub fn next_turn(&mut self, role: Role) -> usize {
        let c = self.calls.entry(role).or_insert(0);
        let t = *c;
        *c += 1;
        t
    }

    pub fn calls(&self, role: Role) -> usize {
        self.calls.get(&role).copied().unwrap_or(0)
    }

    pub fn has_addon(&self, a: Addon) -> bool {
        self.addons.contains(&a)
    }

    /// Coordinator header: rules and the roster of gadgets, no positions.
    pub fn coordinator_header(&self) -> String {
        let mut s = format!("Game: {}\n\nRules:\n{}\n\nGadgets:\n", self.name, self.rules_text.trim());
        for (id, owner) in &self.ownership {
            let label = self.roles.get(id).map(|l| format!(" ({l})")).unwrap_or_default();
            let owner = serde_json::to_value(owner).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            s.push_str(&format!("- {id}{label}, {owner}\n"));
        }
        if !self.introduced_roles.is_empty() {
            s.push_str(&format!("\nRoles introduced so far: {}\n", self.introduced_roles.join(", ")));
        }
        s
    }

    /// Robot id for a directive target: an id, or a role label (any case).
    pub fn resolve_target(&self, target: &str, ids: &[&str]) -> Option<String> {
        if ids.contains(&target) {
            return Some(target.to_string());
        }
        let t = target.trim().to_lowercase();
        self.roles.iter().find(|(id, label)| label.to_lowercase() == t && ids.contains(&id.as_str())).map(|(id, _)| id.clone())
    }
}
