//! Aspect-level sentiment classification.
//!
//! A record and its aspect are serialized into one `[SEP]`-delimited string
//! under one of three infusion variants, encoded into a sparse feature
//! vector, and classified by a softmax regression head.

mod experiment;
mod features;
mod metrics;
mod model;
pub mod synthetic;

pub use experiment::{run_experiment, training_records, ExperimentReport, RunResult};
pub use features::{featurize, Encoder, FeatureVector, HashingEncoder, MIN_DIMENSION};
pub use metrics::{micro_f1, ClassScores, ConfusionMatrix};
pub use model::{loss_and_gradient, predict, softmax, train, train_features, EncoderSpec, Gradient, Prediction, SentimentModel, TrainConfig};

use crate::corpus::{AnnotationRecord, Sentiment};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const SEP: &str = "[SEP]";

/// Class order of every probability vector and weight row.
pub const CLASSES: [Sentiment; 3] = Sentiment::USABLE;

pub fn class_index(label: Sentiment) -> Option<usize> {
    CLASSES.iter().position(|c| *c == label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum InfusionVariant {
    MoveOnly,
    MoveActionPhrase,
    MoveActionPhraseWithType,
}

impl InfusionVariant {
    pub const ALL: [InfusionVariant; 3] = [
        InfusionVariant::MoveOnly,
        InfusionVariant::MoveActionPhrase,
        InfusionVariant::MoveActionPhraseWithType,
    ];

    /// Command-line name.
    pub fn cli_name(self) -> &'static str {
        match self {
            InfusionVariant::MoveOnly => "move-only",
            InfusionVariant::MoveActionPhrase => "move-action",
            InfusionVariant::MoveActionPhraseWithType => "move-action-type",
        }
    }
}

impl fmt::Display for InfusionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for InfusionVariant {
    type Err = AbsaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InfusionVariant::ALL
            .into_iter()
            .find(|v| v.cli_name() == s.trim() || format!("{v:?}") == s.trim())
            .ok_or_else(|| AbsaError::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// A serialized classifier input with its gold label, if known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierInput {
    pub serialized: String,
    pub label: Option<Sentiment>,
}

/// Renders a record under an infusion variant:
///
/// - MoveOnly: `<text> [SEP] <moves>`
/// - MoveActionPhrase: `<text> [SEP] <player> <predicate> <moves>`
/// - MoveActionPhraseWithType: the previous form plus ` [SEP] <action-type>`
pub fn serialize_input(record: &AnnotationRecord, variant: InfusionVariant) -> Result<ClassifierInput, AbsaError> {
    let aspect = record.aspect().ok_or_else(|| AbsaError::MissingAspect(record.record_id.clone()))?;
    let serialized = match variant {
        InfusionVariant::MoveOnly => format!("{} {SEP} {}", record.text, aspect.moves),
        InfusionVariant::MoveActionPhrase => format!("{} {SEP} {aspect}", record.text),
        InfusionVariant::MoveActionPhraseWithType => {
            let kind = aspect
                .action_type
                .ok_or_else(|| AbsaError::MissingActionType(record.record_id.clone()))?;
            format!("{} {SEP} {aspect} {SEP} {kind}", record.text)
        }
    };
    Ok(ClassifierInput {
        serialized,
        label: record.sentiment,
    })
}

#[derive(Debug, Error)]
pub enum AbsaError {
    #[error("record {0} has no action type")]
    MissingActionType(String),
    #[error("record {0} has no move aspect")]
    MissingAspect(String),
    #[error("training data needs at least two labels, found {0}")]
    DegenerateData(usize),
    #[error("input {0} has no usable label")]
    MissingLabel(usize),
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("prediction and gold lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no items to score")]
    Empty,
    #[error("model uses external encoder {0}; encode inputs with it and call predict_features")]
    EncoderUnavailable(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Io(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::Move;
    use crate::corpus::Flag;
    use crate::extraction::{ActionType, Player, Span};
    use std::collections::BTreeSet;

    fn wishes_record() -> AnnotationRecord {
        let text = "It is Black's move, and we will suppose he wishes to play e5";
        AnnotationRecord {
            record_id: "r1".into(),
            sentence_id: "s1".into(),
            text: text.into(),
            predicate_span: Span::new(54, 58),
            predicate_lemma: "play".into(),
            player: Player::Black,
            moves: vec!["e5".parse::<Move>().unwrap()],
            action_type: None,
            sentiment: Some(Sentiment::Neutral),
            annotator_id: "a".into(),
            board_fen: None,
            flags: BTreeSet::new(),
            source_record: None,
        }
    }

    #[test]
    fn serialization_variants() {
        let mut r = wishes_record();
        let text = r.text.clone();
        assert_eq!(serialize_input(&r, InfusionVariant::MoveOnly).unwrap().serialized, format!("{text} [SEP] e5"));
        assert_eq!(
            serialize_input(&r, InfusionVariant::MoveActionPhrase).unwrap().serialized,
            format!("{text} [SEP] Black play e5")
        );
        assert!(matches!(
            serialize_input(&r, InfusionVariant::MoveActionPhraseWithType),
            Err(AbsaError::MissingActionType(_))
        ));
        r.action_type = Some(ActionType::Move);
        let with_type = serialize_input(&r, InfusionVariant::MoveActionPhraseWithType).unwrap();
        assert_eq!(with_type.serialized, format!("{text} [SEP] Black play e5 [SEP] Move"));
        assert_eq!(with_type.label, Some(Sentiment::Neutral));

        let phrase = serialize_input(&r, InfusionVariant::MoveActionPhrase).unwrap().serialized;
        assert_eq!(with_type.serialized, format!("{phrase} [SEP] Move"));
    }

    #[test]
    fn implicit_moves_cannot_be_serialized() {
        let mut r = wishes_record();
        r.moves.clear();
        r.flags.insert(Flag::ImplicitMove);
        assert!(matches!(serialize_input(&r, InfusionVariant::MoveOnly), Err(AbsaError::MissingAspect(_))));
    }

    #[test]
    fn variant_names() {
        for v in InfusionVariant::ALL {
            assert_eq!(v.cli_name().parse::<InfusionVariant>().unwrap(), v);
        }
        assert!("move".parse::<InfusionVariant>().is_err());
    }
}
