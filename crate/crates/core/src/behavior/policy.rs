//! Relationship policies and their deterministic post-validators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BehaviorError;
use crate::protocol::{ActionSequence, ActionStep};
use crate::world::{Violation, ViolationKind, World};

/// Who drives a robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ownership {
    /// The player's own piece; the system never moves it.
    User,
    /// Driven by the agents.
    System,
    /// Parked and available for new characters.
    Idle,
}

pub type OwnershipMap = BTreeMap<String, Ownership>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipKind {
    Apprentice,
    Opponent,
    Teammate,
    Designer,
}

impl RelationshipKind {
    pub const ALL: [RelationshipKind; 4] =
        [RelationshipKind::Apprentice, RelationshipKind::Opponent, RelationshipKind::Teammate, RelationshipKind::Designer];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationshipKind::Apprentice => "apprentice",
            RelationshipKind::Opponent => "opponent",
            RelationshipKind::Teammate => "teammate",
            RelationshipKind::Designer => "designer",
        }
    }
}

impl fmt::Display for RelationshipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationshipKind {
    type Err = BehaviorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| BehaviorError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationshipPolicy {
    pub kind: RelationshipKind,
    pub goal: &'static str,
    pub constraint: &'static str,
    /// Prompt asset holding the add-on text and exemplars.
    pub exemplar_asset: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PostValidator {
    /// Speed feedback must be reflected in the revised plan.
    FeedbackCompliance,
    /// Only system-owned robots may be commanded.
    SystemOwnedOnly,
    /// New character ids must be bound to idle robots.
    IdlePoolOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyPack {
    pub policy: RelationshipPolicy,
    pub prompt_assets: Vec<&'static str>,
    pub validators: Vec<PostValidator>,
}

pub fn policy_pack(kind: RelationshipKind) -> PolicyPack {
    let (goal, constraint, validators) = match kind {
        RelationshipKind::Apprentice => (
            "Follow the player's coaching and revise the last plan accordingly.",
            "Keep the same route when only the manner of motion is criticised.",
            vec![PostValidator::FeedbackCompliance],
        ),
        RelationshipKind::Opponent => (
            "Play the rival side with a real plan, but leave the player a fair chance.",
            "Move only robots the system owns; the player's pieces are off limits.",
            vec![PostValidator::SystemOwnedOnly],
        ),
        RelationshipKind::Teammate => (
            "Back up the player's side so the team wins together.",
            "Support without stealing the spotlight; never move the player's pieces.",
            vec![PostValidator::SystemOwnedOnly],
        ),
        RelationshipKind::Designer => (
            "Invent characters, props or plot beats that move the story forward.",
            "New characters must be cast onto idle robots, at most as many as are parked.",
            vec![PostValidator::IdlePoolOnly],
        ),
    };
    let asset = match kind {
        RelationshipKind::Apprentice => "addon/apprentice",
        RelationshipKind::Opponent => "addon/opponent",
        RelationshipKind::Teammate => "addon/teammate",
        RelationshipKind::Designer => "addon/designer",
    };
    PolicyPack {
        policy: RelationshipPolicy { kind, goal, constraint, exemplar_asset: asset },
        prompt_assets: vec![asset],
        validators,
    }
}

fn violation(robot: &str, step: Option<usize>, kind: ViolationKind, detail: impl Into<String>) -> Violation {
    Violation { robot: robot.to_string(), step, kind, detail: detail.into() }
}

/// Every step that would move a user-owned robot.
pub fn check_system_owned(seq: &ActionSequence, ownership: &OwnershipMap) -> Vec<Violation> {
    let is_user = |id: &str| ownership.get(id) == Some(&Ownership::User);
    let mut out = Vec::new();
    for t in &seq.robots {
        for (i, step) in t.actions.iter().enumerate() {
            if is_user(&t.id) {
                out.push(violation(&t.id, Some(i), ViolationKind::Ownership, format!("`{}` belongs to the player", t.id)));
            } else if let ActionStep::PairOrient { partner, .. } = step {
                if is_user(partner) {
                    out.push(violation(
                        &t.id,
                        Some(i),
                        ViolationKind::Ownership,
                        format!("pair partner `{partner}` belongs to the player"),
                    ));
                }
            }
        }
    }
    out
}

/// Idle robots renamed to new character ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Binding {
    /// `(idle robot id, new character id)`.
    pub renames: Vec<(String, String)>,
}

impl Binding {
    /// Apply to the world and the ownership map (idle → system).
    pub fn apply(&self, world: &mut World, ownership: &mut OwnershipMap) -> Result<(), BehaviorError> {
        for (from, to) in &self.renames {
            world.rename_robot(from, to).map_err(|e| BehaviorError::Precondition(e.to_string()))?;
            ownership.remove(from);
            ownership.insert(to.clone(), Ownership::System);
        }
        Ok(())
    }
}

/// Bind ids the sequence uses but the world lacks to idle robots, in
/// sorted id order. Fails when the pool is too small.
pub fn bind_new_ids(seq: &ActionSequence, world: &World, ownership: &OwnershipMap) -> Result<Binding, Violation> {
    let mut fresh: Vec<String> = Vec::new();
    for id in seq.commanded_ids() {
        if world.robot(id).is_none() && !fresh.iter().any(|f| f == id) {
            fresh.push(id.to_string());
        }
    }
    let pool: Vec<&String> = ownership.iter().filter(|(id, o)| **o == Ownership::Idle && world.robot(id).is_some()).map(|(id, _)| id).collect();
    let used: BTreeSet<&str> = seq.commanded_ids().into_iter().collect();
    let pool: Vec<&String> = pool.into_iter().filter(|id| !used.contains(id.as_str())).collect();
    if fresh.len() > pool.len() {
        return Err(violation(
            &fresh[pool.len()],
            None,
            ViolationKind::IdlePool,
            format!("{} new characters requested but only {} idle robots are parked", fresh.len(), pool.len()),
        ));
    }
    Ok(Binding { renames: pool.into_iter().zip(fresh).map(|(idle, new)| (idle.clone(), new)).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedFeedback {
    Faster,
    Slower,
}

/// Recognize speed coaching in free text.
pub fn classify_feedback(text: &str) -> Option<SpeedFeedback> {
    let t = text.to_lowercase();
    const SLOWER: [&str; 5] = ["slower", "slow down", "more slowly", "less fast", "too fast"];
    const FASTER: [&str; 6] = ["faster", "speed up", "quicker", "more quickly", "hurry", "too slow"];
    if SLOWER.iter().any(|k| t.contains(k)) {
        Some(SpeedFeedback::Slower)
    } else if FASTER.iter().any(|k| t.contains(k)) {
        Some(SpeedFeedback::Faster)
    } else {
        None
    }
}

fn translates(seq: &ActionSequence, id: &str) -> Vec<([i64; 2], u8)> {
    seq.track(id)
        .map(|t| {
            t.actions
                .iter()
                .filter_map(|a| match a {
                    ActionStep::Translate { target, speed } => Some((*target, *speed)),
                    _ => None,
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Revised plan must keep every translate target and move every translate
/// speed in the requested direction, at least one strictly, unless all
/// prior speeds already sit at the limit.
pub fn check_feedback(prior: &ActionSequence, revised: &ActionSequence, fb: SpeedFeedback) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut any_changed = false;
    let mut all_at_limit = true;
    let limit = match fb {
        SpeedFeedback::Faster => 3,
        SpeedFeedback::Slower => 1,
    };
    for t in &prior.robots {
        let before = translates(prior, &t.id);
        let after = translates(revised, &t.id);
        if before.iter().map(|b| b.0).ne(after.iter().map(|a| a.0)) {
            out.push(violation(&t.id, None, ViolationKind::Feedback, "translate targets changed; keep the same route"));
            continue;
        }
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            all_at_limit &= b.1 == limit;
            let wrong_way = match fb {
                SpeedFeedback::Faster => a.1 < b.1,
                SpeedFeedback::Slower => a.1 > b.1,
            };
            if wrong_way {
                out.push(violation(
                    &t.id,
                    Some(i),
                    ViolationKind::Feedback,
                    format!("translate {i} speed went from {} to {}", b.1, a.1),
                ));
            }
            any_changed |= a.1 != b.1;
        }
    }
    if out.is_empty() && !any_changed && !all_at_limit {
        let robot = prior.robots.first().map(|t| t.id.as_str()).unwrap_or("?");
        out.push(violation(robot, None, ViolationKind::Feedback, "no translate speed changed"));
    }
    out
}

/// Deterministic revision: every translate speed one level in the requested
/// direction, clamped to 1..=3.
pub fn adjust_speeds(prior: &ActionSequence, fb: SpeedFeedback) -> ActionSequence {
    let mut seq = prior.clone();
    for t in &mut seq.robots {
        for a in &mut t.actions {
            if let ActionStep::Translate { speed, .. } = a {
                *speed = match fb {
                    SpeedFeedback::Faster => (*speed + 1).min(3),
                    SpeedFeedback::Slower => speed.saturating_sub(1).max(1),
                };
            }
        }
    }
    seq
}
