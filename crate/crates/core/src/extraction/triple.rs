use super::{
    extract_entities, EntityKind, EntityMention, ExtractionError, MoveActionPhrase, Player, PredicateMention, SentenceInstance, Span,
};
use regex::Regex;
use std::sync::LazyLock;

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\S+").expect("token pattern compiles"));
static PRONOUN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:he|his|him)\b").expect("pronoun pattern compiles"));

/// Duplicates a sentence once per predicate, each copy highlighting one.
pub fn expand_per_verb(sentence_id: &str, text: &str, predicates: &[PredicateMention]) -> Vec<SentenceInstance> {
    if predicates.is_empty() {
        return Vec::new();
    }
    let entities = extract_entities(text);
    predicates
        .iter()
        .map(|p| SentenceInstance {
            sentence_id: sentence_id.to_string(),
            text: text.to_string(),
            predicate: p.clone(),
            entities: entities.clone(),
        })
        .collect()
}

/// Whitespace-token index containing each character offset.
struct TokenIndex {
    starts: Vec<usize>,
}

impl TokenIndex {
    fn new(text: &str) -> Self {
        TokenIndex {
            starts: TOKEN_RE
                .find_iter(text)
                .map(|m| Span::from_bytes(text, m.range()).start)
                .collect(),
        }
    }

    fn of(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset).saturating_sub(1)
    }
}

/// The move mention a predicate links to: nearest by token distance, the one
/// to the right of the verb winning ties.
pub(crate) fn linked_move<'a>(text: &str, predicate: &PredicateMention, entities: &'a [EntityMention]) -> Option<&'a EntityMention> {
    let tokens = TokenIndex::new(text);
    let verb = tokens.of(predicate.span.start);
    entities
        .iter()
        .filter(|e| e.kind.is_move() && e.parsed.is_some())
        .min_by_key(|e| {
            let at = tokens.of(e.span.start);
            (at.abs_diff(verb), at < verb, e.span.start)
        })
}

/// Player for a predicate: the nearest preceding player mention; failing that,
/// a he/his/him pronoun before the verb refers to the nearest player named
/// later in the sentence; failing that, the side bound by the move number.
pub(crate) fn resolve_player(text: &str, predicate: &PredicateMention, entities: &[EntityMention], linked: Option<&EntityMention>) -> Player {
    let players: Vec<&EntityMention> = entities.iter().filter(|e| e.kind == EntityKind::Player).collect();
    let as_player = |e: &EntityMention| e.surface.parse::<Player>().unwrap_or(Player::Unknown);

    if let Some(p) = players.iter().rev().find(|p| p.span.end <= predicate.span.start) {
        return as_player(p);
    }
    let pronoun_before = PRONOUN_RE
        .find_iter(text)
        .any(|m| Span::from_bytes(text, m.range()).end <= predicate.span.start);
    if pronoun_before {
        if let Some(p) = players.first() {
            return as_player(p);
        }
    }
    linked
        .and_then(|m| m.parsed.as_ref())
        .and_then(|seq| seq.first().number)
        .map(|n| Player::from(n.side))
        .unwrap_or(Player::Unknown)
}

/// Builds the player-predicate-move triple for one highlighted predicate.
/// The action type is left unset.
pub fn build_triple(instance: &SentenceInstance) -> Result<MoveActionPhrase, ExtractionError> {
    let linked = linked_move(&instance.text, &instance.predicate, &instance.entities).ok_or_else(|| ExtractionError::NoMoveEntity {
        sentence_id: instance.sentence_id.clone(),
        predicate: instance.predicate.lemma.clone(),
    })?;
    let player = resolve_player(&instance.text, &instance.predicate, &instance.entities, Some(linked));
    Ok(MoveActionPhrase {
        player,
        predicate: instance.predicate.lemma.clone(),
        moves: linked.parsed.clone().expect("linked moves are parsed"),
        action_type: None,
    })
}
