//! Generators and validators for interaction behaviors and relationships.

pub mod glyph;
pub mod motif;
pub mod policy;
pub mod scene;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::world::PathError;

pub use glyph::{symbol_formation, symbol_trajectory, template, SymbolTemplate};
pub use motif::{instantiate_motif, Motif};
pub use policy::{policy_pack, Ownership, OwnershipMap, PolicyPack, RelationshipKind, RelationshipPolicy, SpeedFeedback};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("no template for glyph '{0}' (uppercase A-Z only)")]
    UnknownGlyph(char),
    #[error("unknown motif `{0}`")]
    UnknownMotif(String),
    #[error("unknown relationship policy `{0}`")]
    UnknownPolicy(String),
    #[error("unknown add-on `{0}`")]
    UnknownAddon(String),
    #[error("motif {motif} takes {}..={} robots, got {got}", expected.0, expected.1)]
    Arity { motif: Motif, expected: (usize, usize), got: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Controller add-on: four behaviors followed by four relationships, in
/// the order their prompt blocks are composed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Addon {
    ObjectActuation,
    SymbolVisualization,
    NonVerbalExpression,
    SceneInteraction,
    Apprentice,
    Opponent,
    Teammate,
    Designer,
}

impl Addon {
    pub const ALL: [Addon; 8] = [
        Addon::ObjectActuation,
        Addon::SymbolVisualization,
        Addon::NonVerbalExpression,
        Addon::SceneInteraction,
        Addon::Apprentice,
        Addon::Opponent,
        Addon::Teammate,
        Addon::Designer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Addon::ObjectActuation => "object_actuation",
            Addon::SymbolVisualization => "symbol_visualization",
            Addon::NonVerbalExpression => "non_verbal_expression",
            Addon::SceneInteraction => "scene_interaction",
            Addon::Apprentice => "apprentice",
            Addon::Opponent => "opponent",
            Addon::Teammate => "teammate",
            Addon::Designer => "designer",
        }
    }

    pub fn relationship(self) -> Option<RelationshipKind> {
        match self {
            Addon::Apprentice => Some(RelationshipKind::Apprentice),
            Addon::Opponent => Some(RelationshipKind::Opponent),
            Addon::Teammate => Some(RelationshipKind::Teammate),
            Addon::Designer => Some(RelationshipKind::Designer),
            _ => None,
        }
    }
}

impl fmt::Display for Addon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Addon {
    type Err = BehaviorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Addon::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| BehaviorError::UnknownAddon(s.to_string()))
    }
}
