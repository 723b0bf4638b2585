//! Chess notation: SAN moves, FEN board states and pseudo-legal move application.
//!
//! Everything here is a plain value type. Legality is checked only as far as
//! piece movement, blocking and castling rights go; pins and checks are left to
//! the engine, except where they are needed to pick between two otherwise
//! matching pieces.

mod board;
mod san;
mod square;

pub use board::{BoardState, CastlingRights, ResolvedMove, STARTING_FEN};
pub use san::{parse_san, CastleSide, CheckMarker, Move, MoveKind, MoveNumber, MoveSequence};
pub use square::Square;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Side of the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::White => "White",
            Color::Black => "Black",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kind of piece, independent of color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Pawn,
    Knight,
    Bishop,
    Rook,
    Queen,
    King,
}

impl Role {
    /// Uppercase SAN letter; pawns have none.
    pub fn san_letter(self) -> Option<char> {
        match self {
            Role::Pawn => None,
            Role::Knight => Some('N'),
            Role::Bishop => Some('B'),
            Role::Rook => Some('R'),
            Role::Queen => Some('Q'),
            Role::King => Some('K'),
        }
    }

    pub fn from_san_letter(c: char) -> Option<Role> {
        match c {
            'N' => Some(Role::Knight),
            'B' => Some(Role::Bishop),
            'R' => Some(Role::Rook),
            'Q' => Some(Role::Queen),
            'K' => Some(Role::King),
            _ => None,
        }
    }

    fn fen_char(self) -> char {
        match self {
            Role::Pawn => 'p',
            Role::Knight => 'n',
            Role::Bishop => 'b',
            Role::Rook => 'r',
            Role::Queen => 'q',
            Role::King => 'k',
        }
    }
}

/// A colored piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Piece {
    pub role: Role,
    pub color: Color,
}

impl Piece {
    pub fn new(role: Role, color: Color) -> Self {
        Piece { role, color }
    }

    pub fn fen_char(self) -> char {
        let c = self.role.fen_char();
        match self.color {
            Color::White => c.to_ascii_uppercase(),
            Color::Black => c,
        }
    }

    pub fn from_fen_char(c: char) -> Option<Piece> {
        let color = if c.is_ascii_uppercase() {
            Color::White
        } else {
            Color::Black
        };
        let role = match c.to_ascii_lowercase() {
            'p' => Role::Pawn,
            'n' => Role::Knight,
            'b' => Role::Bishop,
            'r' => Role::Rook,
            'q' => Role::Queen,
            'k' => Role::King,
            _ => return None,
        };
        Some(Piece { role, color })
    }
}

/// Why a move could not be applied to a board.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IllegalReason {
    NoMatchingPiece,
    Ambiguous,
    DestinationBlocked,
    CaptureMismatch,
    CastlingUnavailable,
    PromotionMismatch,
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IllegalReason::NoMatchingPiece => "no piece of the side to move can reach the destination",
            IllegalReason::Ambiguous => "several pieces match and no disambiguator selects one",
            IllegalReason::DestinationBlocked => "destination holds a piece of the side to move",
            IllegalReason::CaptureMismatch => "capture marker does not match the destination",
            IllegalReason::CastlingUnavailable => "castling right revoked or path obstructed",
            IllegalReason::PromotionMismatch => "promotion marker does not match the pawn move",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChessError {
    #[error("malformed SAN token {token:?}")]
    MalformedSan { token: String },
    #[error("malformed FEN: {0}")]
    MalformedFen(String),
    #[error("illegal move {san}: {reason}")]
    IllegalMove { san: String, reason: IllegalReason },
}

/// Parses a FEN string into a validated board.
pub fn parse_fen(text: &str) -> Result<BoardState, ChessError> {
    text.parse()
}

/// Applies a SAN move to a board, returning the successor position.
pub fn apply_move(board: &BoardState, mv: &Move) -> Result<BoardState, ChessError> {
    board.apply(mv)
}

/// Long-algebraic coordinates (`g1f3`, `e7e8q`, `e1g1`) of a SAN move on a board.
pub fn san_to_engine_coords(board: &BoardState, mv: &Move) -> Result<String, ChessError> {
    Ok(board.resolve(mv)?.to_string())
}
