//! Prompt assets and bundle composition.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{AgentError, Role};
use crate::behavior::Addon;

const COORDINATOR: &str = include_str!("../../assets/prompts/coordinator.txt");
const CONTROLLER: &str = include_str!("../../assets/prompts/controller.txt");

fn addon_asset(a: Addon) -> &'static str {
    match a {
        Addon::ObjectActuation => include_str!("../../assets/prompts/addon/object_actuation.txt"),
        Addon::SymbolVisualization => include_str!("../../assets/prompts/addon/symbol_visualization.txt"),
        Addon::NonVerbalExpression => include_str!("../../assets/prompts/addon/non_verbal_expression.txt"),
        Addon::SceneInteraction => include_str!("../../assets/prompts/addon/scene_interaction.txt"),
        Addon::Apprentice => include_str!("../../assets/prompts/addon/apprentice.txt"),
        Addon::Opponent => include_str!("../../assets/prompts/addon/opponent.txt"),
        Addon::Teammate => include_str!("../../assets/prompts/addon/teammate.txt"),
        Addon::Designer => include_str!("../../assets/prompts/addon/designer.txt"),
    }
}

/// Raw asset text by id (`coordinator`, `controller`, `addon/<name>`).
pub fn asset(id: &str) -> Option<&'static str> {
    match id {
        "coordinator" => Some(COORDINATOR),
        "controller" => Some(CONTROLLER),
        _ => id.strip_prefix("addon/").and_then(|n| n.parse::<Addon>().ok()).map(addon_asset),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

/// One add-on's instructions and worked examples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarBlock {
    pub addon: Addon,
    pub instructions: String,
    pub pairs: Vec<Exemplar>,
}

impl ExemplarBlock {
    /// Parse an add-on asset: instructions, then `=== example` sections with
    /// `--- input` and `--- output` parts.
    pub fn load(addon: Addon) -> Result<Self, AgentError> {
        let text = addon_asset(addon);
        let mut parts = text.split("\n=== example\n");
        let instructions = parts.next().unwrap_or_default().trim().to_string();
        let mut pairs = Vec::new();
        for ex in parts {
            let bad = || AgentError::Compose(format!("malformed exemplar in add-on {addon}"));
            let rest = ex.strip_prefix("--- input\n").ok_or_else(bad)?;
            let (input, output) = rest.split_once("\n--- output\n").ok_or_else(bad)?;
            pairs.push(Exemplar { input: input.trim().to_string(), output: output.trim().to_string() });
        }
        if instructions.is_empty() || pairs.is_empty() {
            return Err(AgentError::Compose(format!("add-on {addon} needs instructions and at least one example")));
        }
        Ok(Self { addon, instructions, pairs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTurn {
    pub role: TurnRole,
    pub text: String,
}

impl ContextTurn {
    pub fn user(text: impl Into<String>) -> Self {
        Self { role: TurnRole::User, text: text.into() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: TurnRole::Assistant, text: text.into() }
    }
}

/// Everything sent to the language model for one call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: Role,
    /// Per-role call index within the session; keys the mock script.
    pub turn: usize,
    pub system: String,
    pub exemplars: Vec<ExemplarBlock>,
    pub context: Vec<ContextTurn>,
    pub addons: Vec<Addon>,
}

/// Chat message as sent to a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub role: &'static str,
    pub content: String,
}

impl PromptBundle {
    /// System text with every add-on's instructions appended.
    pub fn system_text(&self) -> String {
        let mut s = self.system.clone();
        for b in &self.exemplars {
            let _ = write!(s, "\n\n## Add-on: {}\n{}", b.addon, b.instructions);
        }
        s
    }

    /// Message list: system, exemplar pairs as user/assistant turns, context.
    pub fn messages(&self) -> Vec<Message> {
        let mut m = vec![Message { role: "system", content: self.system_text() }];
        for b in &self.exemplars {
            for e in &b.pairs {
                m.push(Message { role: "user", content: e.input.clone() });
                m.push(Message { role: "assistant", content: e.output.clone() });
            }
        }
        for t in &self.context {
            let role = match t.role {
                TurnRole::User => "user",
                TurnRole::Assistant => "assistant",
            };
            m.push(Message { role, content: t.text.clone() });
        }
        m
    }

    /// Flat text of the whole bundle, used for inspection and leak scans.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for msg in self.messages() {
            let _ = write!(s, "[{}]\n{}\n\n", msg.role, msg.content);
        }
        s
    }
}

/// Base prompt for a role with `{grid_n}` filled in.
pub fn base_prompt(role: Role, grid_n: u32) -> String {
    let text = match role {
        Role::Coordinator => COORDINATOR,
        Role::Controller => CONTROLLER,
    };
    text.replace("{grid_n}", &grid_n.to_string())
}

/// Assemble a bundle. Add-ons attach to the Controller only and are
/// composed in the fixed declaration order, deduplicated.
pub fn compose_prompts(
    role: Role,
    turn: usize,
    grid_n: u32,
    game_header: &str,
    addons: &[Addon],
    context: Vec<ContextTurn>,
) -> Result<PromptBundle, AgentError> {
    if role == Role::Coordinator && !addons.is_empty() {
        return Err(AgentError::Compose(format!(
            "add-ons attach to the controller only; got {} for the coordinator",
            addons.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let mut ordered: Vec<Addon> = Addon::ALL.into_iter().filter(|a| addons.contains(a)).collect();
    ordered.dedup();
    let exemplars = ordered.iter().map(|a| ExemplarBlock::load(*a)).collect::<Result<Vec<_>, _>>()?;
    let mut system = base_prompt(role, grid_n);
    if !game_header.is_empty() {
        system.push_str("\n\n");
        system.push_str(game_header.trim_end());
    }
    if system.trim().is_empty() {
        return Err(AgentError::Compose("empty system prompt".into()));
    }
    Ok(PromptBundle { role, turn, system, exemplars, context, addons: ordered })
}
