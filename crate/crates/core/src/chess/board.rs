use super::{CastleSide, ChessError, Color, IllegalReason, Move, MoveKind, Piece, Role, Square};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CastlingRights {
    pub white_kingside: bool,
    pub white_queenside: bool,
    pub black_kingside: bool,
    pub black_queenside: bool,
}

impl CastlingRights {
    pub fn all() -> Self {
        CastlingRights {
            white_kingside: true,
            white_queenside: true,
            black_kingside: true,
            black_queenside: true,
        }
    }

    fn get(&self, color: Color, side: CastleSide) -> bool {
        match (color, side) {
            (Color::White, CastleSide::Kingside) => self.white_kingside,
            (Color::White, CastleSide::Queenside) => self.white_queenside,
            (Color::Black, CastleSide::Kingside) => self.black_kingside,
            (Color::Black, CastleSide::Queenside) => self.black_queenside,
        }
    }

    fn revoke_square(&mut self, sq: Square) {
        match (sq.file(), sq.rank()) {
            (0, 0) => self.white_queenside = false,
            (7, 0) => self.white_kingside = false,
            (0, 7) => self.black_queenside = false,
            (7, 7) => self.black_kingside = false,
            _ => {}
        }
    }

    fn revoke_color(&mut self, color: Color) {
        match color {
            Color::White => {
                self.white_kingside = false;
                self.white_queenside = false;
            }
            Color::Black => {
                self.black_kingside = false;
                self.black_queenside = false;
            }
        }
    }
}

impl fmt::Display for CastlingRights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flags = [
            (self.white_kingside, 'K'),
            (self.white_queenside, 'Q'),
            (self.black_kingside, 'k'),
            (self.black_queenside, 'q'),
        ];
        if flags.iter().all(|(on, _)| !on) {
            return f.write_str("-");
        }
        for (on, c) in flags {
            if on {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// A move resolved to concrete squares on a specific board.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedMove {
    pub from: Square,
    pub to: Square,
    pub promotion: Option<Role>,
    pub castle: Option<CastleSide>,
    pub en_passant: bool,
}

impl fmt::Display for ResolvedMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.from, self.to)?;
        if let Some(role) = self.promotion {
            write!(f, "{}", Piece::new(role, Color::Black).fen_char())?;
        }
        Ok(())
    }
}

/// A position decoded from FEN.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoardState {
    squares: [Option<Piece>; 64],
    pub turn: Color,
    pub castling: CastlingRights,
    pub en_passant: Option<Square>,
    pub halfmove_clock: u32,
    pub fullmove_number: u32,
}

const KNIGHT_STEPS: [(i8, i8); 8] = [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)];
const KING_STEPS: [(i8, i8); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const ROOK_DIRS: [(i8, i8); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const BISHOP_DIRS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

pub const STARTING_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

impl BoardState {
    pub fn starting() -> BoardState {
        STARTING_FEN.parse().expect("starting position is valid")
    }

    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        self.squares[sq.index()]
    }

    pub fn pieces(&self) -> impl Iterator<Item = (Square, Piece)> + '_ {
        self.squares
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (Square::from_index(i), p)))
    }

    pub fn piece_count(&self) -> usize {
        self.squares.iter().flatten().count()
    }

    pub fn to_fen(&self) -> String {
        self.to_string()
    }

    fn validate(&self) -> Result<(), ChessError> {
        for color in [Color::White, Color::Black] {
            let kings = self
                .pieces()
                .filter(|(_, p)| *p == Piece::new(Role::King, color))
                .count();
            if kings != 1 {
                return Err(ChessError::MalformedFen(format!("{color} has {kings} kings")));
            }
            let pawns = self
                .pieces()
                .filter(|(_, p)| *p == Piece::new(Role::Pawn, color))
                .count();
            if pawns > 8 {
                return Err(ChessError::MalformedFen(format!("{color} has {pawns} pawns")));
            }
        }
        if self
            .pieces()
            .any(|(sq, p)| p.role == Role::Pawn && (sq.rank() == 0 || sq.rank() == 7))
        {
            return Err(ChessError::MalformedFen("pawn on a back rank".into()));
        }
        if let Some(ep) = self.en_passant {
            let expected = match self.turn {
                Color::White => 5,
                Color::Black => 2,
            };
            if ep.rank() != expected {
                return Err(ChessError::MalformedFen(format!("en passant square {ep} inconsistent with turn")));
            }
        }
        Ok(())
    }

    /// Finds the unique origin square for a SAN move on this board.
    pub fn resolve(&self, mv: &Move) -> Result<ResolvedMove, ChessError> {
        let illegal = |reason| ChessError::IllegalMove {
            san: mv.to_string(),
            reason,
        };
        let us = self.turn;
        match mv.kind {
            MoveKind::Castle(side) => {
                if !self.castling.get(us, side) {
                    return Err(illegal(IllegalReason::CastlingUnavailable));
                }
                let rank = match us {
                    Color::White => 0,
                    Color::Black => 7,
                };
                let sq = |f| Square::new(f, rank).expect("on board");
                let (rook_file, king_to, between): (u8, u8, &[u8]) = match side {
                    CastleSide::Kingside => (7, 6, &[5, 6]),
                    CastleSide::Queenside => (0, 2, &[1, 2, 3]),
                };
                if self.piece_at(sq(4)) != Some(Piece::new(Role::King, us))
                    || self.piece_at(sq(rook_file)) != Some(Piece::new(Role::Rook, us))
                    || between.iter().any(|&f| self.piece_at(sq(f)).is_some())
                {
                    return Err(illegal(IllegalReason::CastlingUnavailable));
                }
                Ok(ResolvedMove {
                    from: sq(4),
                    to: sq(king_to),
                    promotion: None,
                    castle: Some(side),
                    en_passant: false,
                })
            }
            MoveKind::Normal {
                role,
                origin_file,
                origin_rank,
                capture,
                destination,
                promotion,
            } => {
                let target = self.piece_at(destination);
                if target.is_some_and(|p| p.color == us) {
                    return Err(illegal(IllegalReason::DestinationBlocked));
                }
                let en_passant = role == Role::Pawn && capture && target.is_none() && self.en_passant == Some(destination);
                if capture != (target.is_some() || en_passant) {
                    return Err(illegal(IllegalReason::CaptureMismatch));
                }
                let promotion_rank = match us {
                    Color::White => 7,
                    Color::Black => 0,
                };
                if role == Role::Pawn && promotion.is_some() != (destination.rank() == promotion_rank) {
                    return Err(illegal(IllegalReason::PromotionMismatch));
                }
                let mut candidates: Vec<Square> = self
                    .pieces()
                    .filter(|(_, p)| *p == Piece::new(role, us))
                    .map(|(sq, _)| sq)
                    .filter(|sq| origin_file.is_none_or(|f| f == sq.file()))
                    .filter(|sq| origin_rank.is_none_or(|r| r == sq.rank()))
                    .filter(|&sq| self.reaches(sq, destination, role, capture))
                    .collect();
                if candidates.len() > 1 {
                    // Pinned pieces drop out; SAN omits disambiguators for them.
                    candidates.retain(|&from| {
                        let after = self.play_unchecked(&ResolvedMove {
                            from,
                            to: destination,
                            promotion,
                            castle: None,
                            en_passant,
                        });
                        !after.king_attacked(us)
                    });
                    if candidates.len() != 1 {
                        return Err(illegal(IllegalReason::Ambiguous));
                    }
                }
                let from = candidates
                    .first()
                    .copied()
                    .ok_or_else(|| illegal(IllegalReason::NoMatchingPiece))?;
                Ok(ResolvedMove {
                    from,
                    to: destination,
                    promotion,
                    castle: None,
                    en_passant,
                })
            }
        }
    }

    /// Applies a SAN move, returning the successor position.
    pub fn apply(&self, mv: &Move) -> Result<BoardState, ChessError> {
        let resolved = self.resolve(mv)?;
        Ok(self.play_unchecked(&resolved))
    }

    fn play_unchecked(&self, mv: &ResolvedMove) -> BoardState {
        let mut next = self.clone();
        let us = self.turn;
        let moving = self.piece_at(mv.from).expect("origin occupied");
        let captured = self.piece_at(mv.to).is_some() || mv.en_passant;

        next.squares[mv.from.index()] = None;
        next.squares[mv.to.index()] = Some(match mv.promotion {
            Some(role) => Piece::new(role, us),
            None => moving,
        });
        if mv.en_passant {
            let victim = Square::new(mv.to.file(), mv.from.rank()).expect("on board");
            next.squares[victim.index()] = None;
        }
        if let Some(side) = mv.castle {
            let rank = mv.from.rank();
            let (rook_from, rook_to) = match side {
                CastleSide::Kingside => (7, 5),
                CastleSide::Queenside => (0, 3),
            };
            let rook_from = Square::new(rook_from, rank).expect("on board");
            let rook_to = Square::new(rook_to, rank).expect("on board");
            next.squares[rook_to.index()] = next.squares[rook_from.index()].take();
        }

        if moving.role == Role::King {
            next.castling.revoke_color(us);
        }
        next.castling.revoke_square(mv.from);
        next.castling.revoke_square(mv.to);

        next.en_passant = None;
        if moving.role == Role::Pawn && mv.from.rank().abs_diff(mv.to.rank()) == 2 {
            next.en_passant = Square::new(mv.from.file(), (mv.from.rank() + mv.to.rank()) / 2);
        }
        next.halfmove_clock = if moving.role == Role::Pawn || captured {
            0
        } else {
            self.halfmove_clock + 1
        };
        if us == Color::Black {
            next.fullmove_number += 1;
        }
        next.turn = us.opposite();
        next
    }

    fn reaches(&self, from: Square, to: Square, role: Role, capture: bool) -> bool {
        let df = to.file() as i8 - from.file() as i8;
        let dr = to.rank() as i8 - from.rank() as i8;
        match role {
            Role::Knight => KNIGHT_STEPS.contains(&(df, dr)),
            Role::King => KING_STEPS.contains(&(df, dr)),
            Role::Rook => self.slides(from, to, &ROOK_DIRS),
            Role::Bishop => self.slides(from, to, &BISHOP_DIRS),
            Role::Queen => self.slides(from, to, &ROOK_DIRS) || self.slides(from, to, &BISHOP_DIRS),
            Role::Pawn => {
                let (dir, start_rank) = match self.turn {
                    Color::White => (1, 1),
                    Color::Black => (-1, 6),
                };
                if capture {
                    df.abs() == 1 && dr == dir
                } else if df != 0 || self.piece_at(to).is_some() {
                    false
                } else if dr == dir {
                    true
                } else {
                    dr == 2 * dir
                        && from.rank() == start_rank
                        && from.offset(0, dir).is_some_and(|mid| self.piece_at(mid).is_none())
                }
            }
        }
    }

    fn slides(&self, from: Square, to: Square, dirs: &[(i8, i8)]) -> bool {
        dirs.iter().any(|&(df, dr)| {
            let mut cur = from;
            while let Some(next) = cur.offset(df, dr) {
                if next == to {
                    return true;
                }
                if self.piece_at(next).is_some() {
                    return false;
                }
                cur = next;
            }
            false
        })
    }

    fn king_attacked(&self, color: Color) -> bool {
        let Some((king, _)) = self.pieces().find(|(_, p)| *p == Piece::new(Role::King, color)) else {
            return false;
        };
        let them = color.opposite();
        let attacker_at = |sq: Option<Square>, roles: &[Role]| {
            sq.and_then(|s| self.piece_at(s))
                .is_some_and(|p| p.color == them && roles.contains(&p.role))
        };
        if KNIGHT_STEPS.iter().any(|&(f, r)| attacker_at(king.offset(f, r), &[Role::Knight]))
            || KING_STEPS.iter().any(|&(f, r)| attacker_at(king.offset(f, r), &[Role::King]))
        {
            return true;
        }
        let pawn_dir = match color {
            Color::White => 1,
            Color::Black => -1,
        };
        if [-1, 1].iter().any(|&f| attacker_at(king.offset(f, pawn_dir), &[Role::Pawn])) {
            return true;
        }
        let ray_hits = |dirs: &[(i8, i8)], roles: &[Role]| {
            dirs.iter().any(|&(df, dr)| {
                let mut cur = king;
                while let Some(next) = cur.offset(df, dr) {
                    if let Some(p) = self.piece_at(next) {
                        return p.color == them && roles.contains(&p.role);
                    }
                    cur = next;
                }
                false
            })
        };
        ray_hits(&ROOK_DIRS, &[Role::Rook, Role::Queen]) || ray_hits(&BISHOP_DIRS, &[Role::Bishop, Role::Queen])
    }
}

impl FromStr for BoardState {
    type Err = ChessError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| ChessError::MalformedFen(msg.to_string());
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad(&format!("expected 6 fields, found {}", fields.len())));
        }
        let ranks: Vec<&str> = fields[0].split('/').collect();
        if ranks.len() != 8 {
            return Err(bad(&format!("expected 8 ranks, found {}", ranks.len())));
        }
        let mut squares = [None; 64];
        for (i, rank_text) in ranks.iter().enumerate() {
            let rank = 7 - i as u8;
            let mut file = 0u8;
            for c in rank_text.chars() {
                if let Some(skip) = c.to_digit(10).filter(|d| (1..=8).contains(d)) {
                    file += skip as u8;
                } else {
                    let piece = Piece::from_fen_char(c).ok_or_else(|| bad(&format!("invalid piece letter {c:?}")))?;
                    if file >= 8 {
                        return Err(bad(&format!("rank {} overflows", rank + 1)));
                    }
                    squares[Square::new(file, rank).expect("on board").index()] = Some(piece);
                    file += 1;
                }
                if file > 8 {
                    return Err(bad(&format!("rank {} overflows", rank + 1)));
                }
            }
            if file != 8 {
                return Err(bad(&format!("rank {} sums to {file}, not 8", rank + 1)));
            }
        }
        let turn = match fields[1] {
            "w" => Color::White,
            "b" => Color::Black,
            other => return Err(bad(&format!("invalid side to move {other:?}"))),
        };
        let mut castling = CastlingRights::default();
        if fields[2] != "-" {
            for c in fields[2].chars() {
                let flag = match c {
                    'K' => &mut castling.white_kingside,
                    'Q' => &mut castling.white_queenside,
                    'k' => &mut castling.black_kingside,
                    'q' => &mut castling.black_queenside,
                    _ => return Err(bad(&format!("invalid castling field {:?}", fields[2]))),
                };
                if *flag {
                    return Err(bad("repeated castling flag"));
                }
                *flag = true;
            }
        }
        let en_passant = match fields[3] {
            "-" => None,
            s => Some(s.parse::<Square>().map_err(|_| bad(&format!("invalid en passant square {s:?}")))?),
        };
        let halfmove_clock = fields[4].parse().map_err(|_| bad("invalid halfmove clock"))?;
        let fullmove_number = fields[5]
            .parse()
            .ok()
            .filter(|n: &u32| *n >= 1)
            .ok_or_else(|| bad("invalid fullmove number"))?;
        let board = BoardState {
            squares,
            turn,
            castling,
            en_passant,
            halfmove_clock,
            fullmove_number,
        };
        board.validate()?;
        Ok(board)
    }
}

impl fmt::Display for BoardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rank in (0..8).rev() {
            let mut empty = 0;
            for file in 0..8 {
                match self.piece_at(Square::new(file, rank).expect("on board")) {
                    Some(p) => {
                        if empty > 0 {
                            write!(f, "{empty}")?;
                            empty = 0;
                        }
                        write!(f, "{}", p.fen_char())?;
                    }
                    None => empty += 1,
                }
            }
            if empty > 0 {
                write!(f, "{empty}")?;
            }
            if rank > 0 {
                f.write_str("/")?;
            }
        }
        let turn = match self.turn {
            Color::White => 'w',
            Color::Black => 'b',
        };
        write!(f, " {turn} {} ", self.castling)?;
        match self.en_passant {
            Some(sq) => write!(f, "{sq}")?,
            None => f.write_str("-")?,
        }
        write!(f, " {} {}", self.halfmove_clock, self.fullmove_number)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::parse_san;

    #[test]
    fn starting_position() {
        let board = BoardState::starting();
        assert_eq!(board.piece_count(), 32);
        assert_eq!(board.turn, Color::White);
        assert_eq!(board.to_fen(), STARTING_FEN);
    }

    #[test]
    fn malformed_fens() {
        for fen in [
            "8/8/8/8 w - - 0 1",
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0",
            "rnbqkbnr/pppppppp/9/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            "rnbqkbnr/ppppxppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            "rnbqkbnr/ppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR x KQkq - 0 1",
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 0",
            "rnbqqbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNP w KQkq - 0 1",
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq e3 0 1",
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KK - 0 1",
        ] {
            assert!(matches!(fen.parse::<BoardState>(), Err(ChessError::MalformedFen(_))), "{fen}");
        }
    }

    #[test]
    fn king_blocked_by_own_pawn() {
        let err = BoardState::starting().apply(&parse_san("Ke2").unwrap()).unwrap_err();
        assert_eq!(
            err,
            ChessError::IllegalMove {
                san: "Ke2".into(),
                reason: IllegalReason::DestinationBlocked
            }
        );
    }

    #[test]
    fn castling_without_right() {
        let board: BoardState = "r3k2r/8/8/8/8/8/8/R3K2R w Qk - 0 1".parse().unwrap();
        let err = board.apply(&parse_san("O-O").unwrap()).unwrap_err();
        assert!(matches!(
            err,
            ChessError::IllegalMove {
                reason: IllegalReason::CastlingUnavailable,
                ..
            }
        ));
        assert!(board.apply(&parse_san("O-O-O").unwrap()).is_ok());
    }

    #[test]
    fn coordinates() {
        let board = BoardState::starting();
        assert_eq!(crate::chess::san_to_engine_coords(&board, &parse_san("Nf3").unwrap()).unwrap(), "g1f3");
        assert_eq!(crate::chess::san_to_engine_coords(&board, &parse_san("e4").unwrap()).unwrap(), "e2e4");
    }

    #[test]
    fn capture_marker_must_match() {
        let board = BoardState::starting();
        assert!(matches!(
            board.apply(&parse_san("Nxf3").unwrap()),
            Err(ChessError::IllegalMove {
                reason: IllegalReason::CaptureMismatch,
                ..
            })
        ));
    }

    #[test]
    fn ambiguity_needs_disambiguator() {
        let board: BoardState = "4k3/8/8/8/8/8/4K3/R6R w - - 0 1".parse().unwrap();
        assert!(matches!(
            board.apply(&parse_san("Rd1").unwrap()),
            Err(ChessError::IllegalMove {
                reason: IllegalReason::Ambiguous,
                ..
            })
        ));
    }
}
