//! Coordinator turn: rule on a command and emit gadget directives.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::prompt::{compose_prompts, ContextTurn};
use super::{AgentError, Actor, GameContext, Gateway, Role, Transcript, HISTORY_TURNS};
use crate::protocol::{extract_last_block, ProtocolError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    /// Gadget id or role name.
    pub target: String,
    pub directive: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinatorOutput {
    pub ruling: String,
    pub directives: Vec<Directive>,
    pub game_over: bool,
    /// Role names introduced by this reply.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roles: Vec<String>,
}

const INIT_REQUEST: &str = "Start the game: introduce it, explain the rules briefly, and rule on the initial setup.";

fn field_str<'a>(o: &'a serde_json::Map<String, Value>, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| o.get(*k).and_then(Value::as_str))
}

/// Parse a coordinator reply. `known` lists targets that may be addressed
/// besides roles introduced in the reply itself.
pub fn parse_coordinator(text: &str, known: &[String]) -> Result<CoordinatorOutput, ProtocolError> {
    let block = extract_last_block(text, |v| v.get("directives").is_some())?;
    let obj = block.value.as_object().ok_or_else(|| ProtocolError::schema("$", "expected an object"))?;
    let game_over = match obj.get("game_over") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") || s.eq_ignore_ascii_case("false") => s.eq_ignore_ascii_case("true"),
        Some(_) => return Err(ProtocolError::schema("$.game_over", "expected a boolean")),
    };
    let roles: Vec<String> = match obj.get("roles") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, r)| r.as_str().map(str::to_string).ok_or_else(|| ProtocolError::schema(&format!("$.roles[{i}]"), "expected a string")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(ProtocolError::schema("$.roles", "expected a list of names")),
    };
    let mut directives = Vec::new();
    match obj.get("directives") {
        Some(Value::Array(items)) => {
            for (i, d) in items.iter().enumerate() {
                let path = format!("$.directives[{i}]");
                let o = d.as_object().ok_or_else(|| ProtocolError::schema(&path, "expected an object"))?;
                let target = field_str(o, &["target", "gadget", "id"])
                    .ok_or_else(|| ProtocolError::schema(&format!("{path}.target"), "missing"))?;
                let directive = field_str(o, &["directive", "action", "text"])
                    .ok_or_else(|| ProtocolError::schema(&format!("{path}.directive"), "missing"))?;
                directives.push(Directive { target: target.to_string(), directive: directive.to_string() });
            }
        }
        // {"pawn": "move d2 to d4"} shorthand
        Some(Value::Object(m)) => {
            for (k, v) in m {
                let directive = v.as_str().ok_or_else(|| ProtocolError::schema(&format!("$.directives.{k}"), "expected text"))?;
                directives.push(Directive { target: k.clone(), directive: directive.to_string() });
            }
        }
        _ => return Err(ProtocolError::schema("$.directives", "expected a list of directives")),
    }
    for (i, d) in directives.iter().enumerate() {
        let ok = known.iter().chain(roles.iter()).any(|k| k.eq_ignore_ascii_case(&d.target));
        if !ok {
            return Err(ProtocolError::schema(
                &format!("$.directives[{i}].target"),
                format!("`{}` is neither a registered gadget nor a declared role", d.target),
            ));
        }
    }
    Ok(CoordinatorOutput { ruling: block.narration.to_string(), directives, game_over, roles })
}

/// Run one coordinator turn. `command` is `None` for the opening ruling.
pub fn coordinator_turn(
    ctx: &mut GameContext,
    gw: &dyn Gateway,
    transcript: &mut Transcript,
    clock_ms: f64,
    command: Option<&str>,
    grid_n: u32,
) -> Result<CoordinatorOutput, AgentError> {
    let request = command.unwrap_or(INIT_REQUEST).to_string();
    let mut known: Vec<String> = ctx.ownership.keys().cloned().collect();
    known.extend(ctx.roles.values().cloned());
    known.extend(ctx.introduced_roles.iter().cloned());
    let header = ctx.coordinator_header();
    let keep = ctx.history.len().saturating_sub(2 * HISTORY_TURNS);
    let mut context: Vec<ContextTurn> = ctx.history[keep..].to_vec();
    context.push(ContextTurn::user(request.clone()));

    let mut last_err = None;
    for attempt in 0..2 {
        let turn = ctx.next_turn(Role::Coordinator);
        let bundle = compose_prompts(Role::Coordinator, turn, grid_n, &header, &[], context.clone())?;
        let reply = gw.chat(&bundle)?;
        match parse_coordinator(&reply, &known) {
            Ok(out) => {
                transcript.text(Actor::Coordinator, "ruling", reply.clone(), clock_ms);
                ctx.history.push(ContextTurn::user(request));
                ctx.history.push(ContextTurn::assistant(reply));
                for r in &out.roles {
                    if !ctx.introduced_roles.contains(r) {
                        ctx.introduced_roles.push(r.clone());
                    }
                }
                return Ok(out);
            }
            Err(e) => {
                tracing::warn!(attempt, error = %e, "coordinator reply rejected");
                transcript.text(Actor::Coordinator, "unparsed", reply.clone(), clock_ms);
                context.push(ContextTurn::assistant(reply));
                context.push(ContextTurn::user(format!(
                    "Your reply could not be used ({e}). Repeat the ruling, then give exactly one block \
                     {{\"directives\": [{{\"target\": ..., \"directive\": ...}}], \"game_over\": false}}."
                )));
                last_err = Some(e);
            }
        }
    }
    Err(AgentError::Coordinator(last_err.expect("two failed attempts")))
}
