//! Generated corpora with known labels, for exercising the classifier.

use crate::corpus::{AnnotationRecord, Sentiment};
use crate::extraction::{Player, Span};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const POSITIVE_VERBS: &[&str] = &["prefer", "recommend", "choose", "favour"];
const NEGATIVE_VERBS: &[&str] = &["avoid", "reject", "dismiss", "shun"];
const NEUTRAL_VERBS: &[&str] = &["consider", "examine", "mention", "note"];

const MOVES: &[&str] = &[
    "e4", "d4", "c4", "Nf3", "g3", "b3", "f4", "Nc3", "e5", "d5", "c5", "Nf6", "g6", "b6", "f5", "Nc6", "Bb5", "Bc4", "Be2", "Bg5",
    "Qd2", "Qe2", "Rd1", "Re1", "O-O", "O-O-O", "h3", "a3", "h6", "a6", "Bxf6", "Nxe5", "exd5", "cxd4", "Qxd4", "Rfe1", "Kh1",
    "Kg7", "Ng5", "Bf4",
];

// Each template holds `{P}`, then `{1}` and `{2}`, each slot a verb directly
// followed by a space and a move.
const TEMPLATES: &[&str] = &[
    "{P} should {1} and then {2} in this position",
    "Here {P} would {1}, while masters {2}",
    "In such positions {P} tends to {1} and to {2} afterwards",
    "The books tell {P} to {1} but also to {2}",
    "After the exchange {P} may {1} or {2}",
];

fn verbs_of(label: Sentiment) -> &'static [&'static str] {
    match label {
        Sentiment::Positive => POSITIVE_VERBS,
        Sentiment::Negative => NEGATIVE_VERBS,
        _ => NEUTRAL_VERBS,
    }
}

/// Sentences holding two aspects of different sentiment, one record per
/// aspect. Only the predicate of an aspect reveals its label; moves are drawn
/// at random, so a classifier that sees just the moves cannot tell the two
/// records of a sentence apart.
pub fn two_aspect_corpus(sentences: usize, seed: u64) -> Vec<AnnotationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sentences * 2);
    for s in 0..sentences {
        let labels = {
            let mut pool = Sentiment::USABLE.to_vec();
            let first = pool.remove(rng.random_range(0..pool.len()));
            (first, pool[rng.random_range(0..pool.len())])
        };
        let player = if rng.random_bool(0.5) { Player::White } else { Player::Black };
        let template = TEMPLATES.choose(&mut rng).expect("templates non-empty");
        let m1 = *MOVES.choose(&mut rng).expect("moves non-empty");
        let m2 = loop {
            let m = *MOVES.choose(&mut rng).expect("moves non-empty");
            if m != m1 {
                break m;
            }
        };
        let v1 = *verbs_of(labels.0).choose(&mut rng).expect("verbs non-empty");
        let v2 = *verbs_of(labels.1).choose(&mut rng).expect("verbs non-empty");

        let with_player = template.replace("{P}", &player.to_string());
        let (head, rest) = with_player.split_once("{1}").expect("template has slot 1");
        let (middle, tail) = rest.split_once("{2}").expect("template has slot 2");
        let start1 = head.chars().count();
        let first = format!("{v1} {m1}");
        let start2 = start1 + first.chars().count() + middle.chars().count();
        let text = format!("{head}{first}{middle}{v2} {m2}{tail}");

        for (k, (verb, start, mv, label)) in [(v1, start1, m1, labels.0), (v2, start2, m2, labels.1)].into_iter().enumerate() {
            out.push(AnnotationRecord {
                record_id: format!("syn{s:05}-{k}"),
                sentence_id: format!("syn{s:05}"),
                text: text.clone(),
                predicate_span: Span::new(start, start + verb.chars().count()),
                predicate_lemma: verb.to_string(),
                player,
                moves: vec![mv.parse().expect("pool moves are valid SAN")],
                action_type: None,
                sentiment: Some(label),
                annotator_id: "synthetic".into(),
                board_fen: None,
                flags: BTreeSet::new(),
                source_record: None,
            });
        }
    }
    out
}
