use super::{EntityKind, EntityMention, Span};
use crate::chess::{parse_san, Move, MoveSequence};
use regex::Regex;
use std::ops::Range;
use std::sync::LazyLock;

static MOVE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        (?:[0-9]{1,4}(?:\.\.\.|\.|…)\s?)?
        (?:O-O-O|O-O|0-0-0|0-0|[KQRBN]?[a-h]?[1-8]?x?[a-h][1-8](?:=?[QRBN])?)
        (?:\s?e\.p\.)?
        [+\#]?
        [!?]{0,2}",
    )
    .expect("move pattern compiles")
});

// SAN-shaped tokens, including shapes a valid move never takes (rank 0 or 9,
// impossible pawn captures). Anything matched here that does not parse is a
// likely OCR casualty.
static MOVE_SHAPE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:[0-9]{1,4}\.(?:\.\.)?)?(?:[KQRBN][a-h]?[0-9]?x?[a-h][0-9]|[a-h]x[a-h][0-9]|[a-h][09])\b")
        .expect("move shape pattern compiles")
});

static PIECE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:king|queen|rook|bishop|knight|pawn)s?\b").expect("piece pattern compiles"));

static PLAYER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:White|Black)\b").expect("player pattern compiles"));

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte ranges of well-formed SAN tokens, each with its parsed move.
pub(crate) fn san_tokens(text: &str) -> Vec<(Range<usize>, Move)> {
    MOVE_RE
        .find_iter(text)
        .filter(|m| {
            let before = text[..m.start()].chars().next_back();
            let after = text[m.end()..].chars().next();
            !before.is_some_and(|c| is_word_char(c) || c == '-' || c == '.')
                && !after.is_some_and(|c| is_word_char(c) || c == '-')
        })
        .filter_map(|m| {
            let token = m.as_str().trim_end();
            parse_san(token)
                .ok()
                .map(|mv| (m.start()..m.start() + token.len(), mv))
        })
        .collect()
}

/// Extracts move, move-sequence, piece and player mentions from one sentence.
///
/// Runs of moves separated only by whitespace, commas or semicolons (move
/// numbers are part of each move token) are merged into a single sequence.
pub fn extract_entities(text: &str) -> Vec<EntityMention> {
    let mut mentions = Vec::new();

    let tokens = san_tokens(text);
    let mut groups: Vec<(Range<usize>, Vec<Move>)> = Vec::new();
    for (range, mv) in tokens {
        match groups.last_mut() {
            Some((last, moves)) if text[last.end..range.start].chars().all(|c| c.is_whitespace() || c == ',' || c == ';') => {
                last.end = range.end;
                moves.push(mv);
            }
            _ => groups.push((range, vec![mv])),
        }
    }
    for (range, moves) in groups {
        let kind = if moves.len() == 1 {
            EntityKind::MoveSan
        } else {
            EntityKind::MoveSequence
        };
        mentions.push(mention(text, kind, range, MoveSequence::new(moves)));
    }

    let taken: Vec<Span> = mentions.iter().map(|m| m.span).collect();
    for (re, kind) in [(&*PIECE_RE, EntityKind::Piece), (&*PLAYER_RE, EntityKind::Player)] {
        for m in re.find_iter(text) {
            let candidate = mention(text, kind, m.range(), None);
            if !taken.iter().any(|s| s.overlaps(&candidate.span)) {
                mentions.push(candidate);
            }
        }
    }

    mentions.sort_by_key(|m| (m.span.start, m.span.end));
    mentions
}

/// Spans of SAN-shaped tokens that fail to parse as moves.
pub fn malformed_move_candidates(text: &str) -> Vec<Span> {
    MOVE_SHAPE_RE
        .find_iter(text)
        .filter(|m| parse_san(m.as_str()).is_err())
        .map(|m| Span::from_bytes(text, m.range()))
        .collect()
}

fn mention(text: &str, kind: EntityKind, range: Range<usize>, parsed: Option<MoveSequence>) -> EntityMention {
    EntityMention {
        kind,
        span: Span::from_bytes(text, range.clone()),
        surface: text[range].to_string(),
        parsed,
    }
}
