//! Rule-based extraction of player-predicate-move aspects from sentences.
//!
//! Regular expressions find moves, move sequences, pieces and players; a verb
//! lexicon finds predicates. Each sentence is duplicated once per predicate and
//! every copy is turned into a triple by linking the highlighted predicate to
//! the nearest move and the most plausible player.

mod entities;
mod lexicon;
mod predicates;
mod span;
mod triple;

pub use entities::{extract_entities, malformed_move_candidates};
pub use lexicon::VerbLexicon;
pub use predicates::find_predicates;
pub use span::Span;
pub use triple::{build_triple, expand_per_verb};

use crate::chess::{Color, MoveSequence};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    MoveSan,
    MoveSequence,
    Piece,
    Player,
}

impl EntityKind {
    pub fn is_move(self) -> bool {
        matches!(self, EntityKind::MoveSan | EntityKind::MoveSequence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub kind: EntityKind,
    pub span: Span,
    pub surface: String,
    /// Parsed moves for move kinds; a single move is a sequence of one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<MoveSequence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateMention {
    pub span: Span,
    pub lemma: String,
    pub surface: String,
}

/// One copy of a sentence with a single highlighted predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub sentence_id: String,
    pub text: String,
    pub predicate: PredicateMention,
    pub entities: Vec<EntityMention>,
}

/// The player making a move, as far as the sentence tells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    White,
    Black,
    Unknown,
}

impl From<Color> for Player {
    fn from(c: Color) -> Self {
        match c {
            Color::White => Player::White,
            Color::Black => Player::Black,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::White => "White",
            Player::Black => "Black",
            Player::Unknown => "Unknown",
        })
    }
}

impl FromStr for Player {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "White" => Ok(Player::White),
            "Black" => Ok(Player::Black),
            "Unknown" => Ok(Player::Unknown),
            _ => Err(format!("unknown player {s:?}")),
        }
    }
}

/// The five move-action types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionType {
    Attack,
    Capture,
    Defend,
    Protect,
    Move,
}

impl ActionType {
    pub const ALL: [ActionType; 5] = [
        ActionType::Attack,
        ActionType::Capture,
        ActionType::Defend,
        ActionType::Protect,
        ActionType::Move,
    ];
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionType::Attack => "Attack",
            ActionType::Capture => "Capture",
            ActionType::Defend => "Defend",
            ActionType::Protect => "Protect",
            ActionType::Move => "Move",
        })
    }
}

impl FromStr for ActionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionType::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown action type {s:?}"))
    }
}

/// The aspect: who plays which move(s), described by which verb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveActionPhrase {
    pub player: Player,
    pub predicate: String,
    pub moves: MoveSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_type: Option<ActionType>,
}

impl fmt::Display for MoveActionPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.player, self.predicate, self.moves)
    }
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("verb lexicon unavailable: {0}")]
    LexiconUnavailable(String),
    #[error("verb lexicon line {line}: {message}")]
    LexiconFormat { line: usize, message: String },
    #[error("sentence {sentence_id:?} has no move linked to predicate {predicate:?}")]
    NoMoveEntity { sentence_id: String, predicate: String },
}
