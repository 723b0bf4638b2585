use super::{ChessError, Color, Role, Square};
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CastleSide {
    Kingside,
    Queenside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckMarker {
    Check,
    Mate,
}

/// A move number written in front of a move: `5.` binds White, `5...` binds Black.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MoveNumber {
    pub number: u32,
    pub side: Color,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Normal {
        role: Role,
        origin_file: Option<u8>,
        origin_rank: Option<u8>,
        capture: bool,
        destination: Square,
        promotion: Option<Role>,
    },
    Castle(CastleSide),
}

/// A move as written in Standard Algebraic Notation, before it is resolved
/// against a board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    pub kind: MoveKind,
    pub check: Option<CheckMarker>,
    pub number: Option<MoveNumber>,
}

impl Move {
    pub fn role(&self) -> Role {
        match self.kind {
            MoveKind::Normal { role, .. } => role,
            MoveKind::Castle(_) => Role::King,
        }
    }

    pub fn destination(&self) -> Option<Square> {
        match self.kind {
            MoveKind::Normal { destination, .. } => Some(destination),
            MoveKind::Castle(_) => None,
        }
    }

    /// The same move without move number or check marker.
    pub fn bare(&self) -> Move {
        Move {
            kind: self.kind,
            check: None,
            number: None,
        }
    }
}

static SAN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)^
        (?:(?P<num>[0-9]{1,4})\s*(?P<dots>\.\.\.|\.|…)\s*)?
        (?:
            (?P<castle>O-O-O|O-O|0-0-0|0-0)
          | (?P<piece>[KQRBN])?(?P<ff>[a-h])?(?P<fr>[1-8])?(?P<x>x)?(?P<dst>[a-h][1-8])(?:=?(?P<promo>[QRBN]))?
        )
        (?P<ep>\s?e\.p\.)?
        (?P<chk>[+\#])?
        [!?]{0,2}
        $",
    )
    .expect("SAN grammar compiles")
});

/// Parses one SAN token such as `Nf3`, `exd5`, `O-O`, `e8=Q+` or `5...b3`.
///
/// Check and mate suffixes, the `e.p.` suffix and annotation glyphs are
/// accepted; glyphs and `e.p.` are not retained.
pub fn parse_san(text: &str) -> Result<Move, ChessError> {
    let malformed = || ChessError::MalformedSan {
        token: text.to_string(),
    };
    let caps = SAN_RE.captures(text.trim()).ok_or_else(malformed)?;

    let number = match caps.name("num") {
        Some(num) => {
            let number: u32 = num.as_str().parse().map_err(|_| malformed())?;
            if number == 0 {
                return Err(malformed());
            }
            let side = if &caps["dots"] == "." {
                Color::White
            } else {
                Color::Black
            };
            Some(MoveNumber { number, side })
        }
        None => None,
    };
    let check = caps.name("chk").map(|c| match c.as_str() {
        "#" => CheckMarker::Mate,
        _ => CheckMarker::Check,
    });

    if let Some(castle) = caps.name("castle") {
        if caps.name("ep").is_some() {
            return Err(malformed());
        }
        let side = if castle.as_str().len() == 5 {
            CastleSide::Queenside
        } else {
            CastleSide::Kingside
        };
        return Ok(Move {
            kind: MoveKind::Castle(side),
            check,
            number,
        });
    }

    let role = caps
        .name("piece")
        .and_then(|p| p.as_str().chars().next())
        .and_then(Role::from_san_letter)
        .unwrap_or(Role::Pawn);
    let origin_file = caps.name("ff").map(|m| m.as_str().as_bytes()[0] - b'a');
    let origin_rank = caps.name("fr").map(|m| m.as_str().as_bytes()[0] - b'1');
    let capture = caps.name("x").is_some();
    let destination: Square = caps["dst"].parse().map_err(|_| malformed())?;
    let promotion = caps
        .name("promo")
        .and_then(|p| p.as_str().chars().next())
        .and_then(Role::from_san_letter);
    let back_rank = destination.rank() == 0 || destination.rank() == 7;

    if role == Role::Pawn {
        let valid = match (capture, origin_file) {
            (true, Some(f)) => f.abs_diff(destination.file()) == 1,
            (false, None) => true,
            _ => false,
        };
        if !valid || origin_rank.is_some() || promotion.is_some() != back_rank {
            return Err(malformed());
        }
    } else if promotion.is_some() || caps.name("ep").is_some() {
        return Err(malformed());
    }
    if caps.name("ep").is_some() && !(capture && (destination.rank() == 2 || destination.rank() == 5)) {
        return Err(malformed());
    }

    Ok(Move {
        kind: MoveKind::Normal {
            role,
            origin_file,
            origin_rank,
            capture,
            destination,
            promotion,
        },
        check,
        number,
    })
}

impl FromStr for Move {
    type Err = ChessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_san(s)
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.number {
            match n.side {
                Color::White => write!(f, "{}.", n.number)?,
                Color::Black => write!(f, "{}...", n.number)?,
            }
        }
        match self.kind {
            MoveKind::Castle(CastleSide::Kingside) => f.write_str("O-O")?,
            MoveKind::Castle(CastleSide::Queenside) => f.write_str("O-O-O")?,
            MoveKind::Normal {
                role,
                origin_file,
                origin_rank,
                capture,
                destination,
                promotion,
            } => {
                if let Some(letter) = role.san_letter() {
                    write!(f, "{letter}")?;
                }
                if let Some(file) = origin_file {
                    write!(f, "{}", (b'a' + file) as char)?;
                }
                if let Some(rank) = origin_rank {
                    write!(f, "{}", (b'1' + rank) as char)?;
                }
                if capture {
                    f.write_str("x")?;
                }
                write!(f, "{destination}")?;
                if let Some(letter) = promotion.and_then(Role::san_letter) {
                    write!(f, "={letter}")?;
                }
            }
        }
        match self.check {
            Some(CheckMarker::Check) => f.write_str("+"),
            Some(CheckMarker::Mate) => f.write_str("#"),
            None => Ok(()),
        }
    }
}

impl Serialize for Move {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Move {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_san(&s).map_err(serde::de::Error::custom)
    }
}

/// A non-empty, ordered run of moves such as `1.e4 e5 2.Nf3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Move>", into = "Vec<Move>")]
pub struct MoveSequence(Vec<Move>);

impl MoveSequence {
    pub fn new(moves: Vec<Move>) -> Option<Self> {
        (!moves.is_empty()).then_some(MoveSequence(moves))
    }

    pub fn single(mv: Move) -> Self {
        MoveSequence(vec![mv])
    }

    pub fn first(&self) -> &Move {
        &self.0[0]
    }

    pub fn moves(&self) -> &[Move] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<Move>> for MoveSequence {
    type Error = &'static str;

    fn try_from(moves: Vec<Move>) -> Result<Self, Self::Error> {
        MoveSequence::new(moves).ok_or("a move sequence holds at least one move")
    }
}

impl From<MoveSequence> for Vec<Move> {
    fn from(seq: MoveSequence) -> Self {
        seq.0
    }
}

impl fmt::Display for MoveSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, mv) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{mv}")?;
        }
        Ok(())
    }
}
