//! Annotated records and their lifecycle: persistence, exclusions, splits,
//! inter-annotator agreement and oversampling.

mod agreement;
mod augment;
mod split;
mod store;

pub use agreement::{assign_iaa_subset, cohen_kappa, IaaAssignment};
pub use augment::{default_targets, oversample, Augmented, Augmenter, RuleParaphraser};
pub use split::{eligible, split_corpus, DatasetSplit};
pub use store::{load_corpus, parse_corpus, save_corpus, write_corpus};

use crate::chess::{BoardState, Move, MoveSequence};
use crate::extraction::{ActionType, MoveActionPhrase, Player, SentenceInstance, Span};
use serde::{Deserialize, Deserializer, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
    NotSure,
}

impl Sentiment {
    pub const ALL: [Sentiment; 4] = [Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral, Sentiment::NotSure];
    /// Labels that take part in training and evaluation.
    pub const USABLE: [Sentiment; 3] = [Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral];

    pub fn name(self) -> &'static str {
        match self {
            Sentiment::Positive => "Positive",
            Sentiment::Negative => "Negative",
            Sentiment::Neutral => "Neutral",
            Sentiment::NotSure => "NotSure",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sentiment {
    type Err = CorpusError;

    /// Accepts full names and the short forms `pos`, `neg`, `neu`, `notsure`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "positive" | "pos" | "p" => Ok(Sentiment::Positive),
            "negative" | "neg" | "n" => Ok(Sentiment::Negative),
            "neutral" | "neu" => Ok(Sentiment::Neutral),
            "notsure" | "unsure" => Ok(Sentiment::NotSure),
            _ => Err(CorpusError::InvalidArgument(format!("unknown sentiment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Counterfactual,
    OcrError,
    ImplicitMove,
    Augmented,
}

impl Flag {
    /// Flags whose records never enter splits or experiments.
    pub fn excludes(self) -> bool {
        !matches!(self, Flag::Augmented)
    }
}

impl FromStr for Flag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
            .map_err(|_| CorpusError::InvalidArgument(format!("unknown flag {s:?}")))
    }
}

/// One annotated sentence instance, stored as one JSON object per line.
///
/// `sentiment` is `null` while the record awaits annotation; the key itself is
/// mandatory. `moves` is empty only for records flagged `implicit_move`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub record_id: String,
    pub sentence_id: String,
    pub text: String,
    pub predicate_span: Span,
    pub predicate_lemma: String,
    pub player: Player,
    pub moves: Vec<Move>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_type: Option<ActionType>,
    #[serde(deserialize_with = "required_nullable")]
    pub sentiment: Option<Sentiment>,
    pub annotator_id: String,
    #[serde(default)]
    pub board_fen: Option<String>,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
    #[serde(default)]
    pub source_record: Option<String>,
}

fn required_nullable<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> Result<Option<T>, D::Error> {
    Option::<T>::deserialize(d)
}

impl AnnotationRecord {
    /// Unlabeled record for one predicate instance. Without a triple the
    /// record is flagged `implicit_move`.
    pub fn from_instance(
        record_id: impl Into<String>,
        instance: &SentenceInstance,
        triple: Option<&MoveActionPhrase>,
        annotator_id: impl Into<String>,
        board_fen: Option<String>,
    ) -> Self {
        let mut flags = BTreeSet::new();
        if triple.is_none() {
            flags.insert(Flag::ImplicitMove);
        }
        AnnotationRecord {
            record_id: record_id.into(),
            sentence_id: instance.sentence_id.clone(),
            text: instance.text.clone(),
            predicate_span: instance.predicate.span,
            predicate_lemma: instance.predicate.lemma.clone(),
            player: triple.map_or(Player::Unknown, |t| t.player),
            moves: triple.map(|t| t.moves.moves().to_vec()).unwrap_or_default(),
            action_type: triple.and_then(|t| t.action_type),
            sentiment: None,
            annotator_id: annotator_id.into(),
            board_fen,
            flags,
            source_record: None,
        }
    }

    /// The player-predicate-move aspect, absent for implicit moves.
    pub fn aspect(&self) -> Option<MoveActionPhrase> {
        Some(MoveActionPhrase {
            player: self.player,
            predicate: self.predicate_lemma.clone(),
            moves: MoveSequence::new(self.moves.clone())?,
            action_type: self.action_type,
        })
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn is_excluded(&self) -> bool {
        self.flags.iter().any(|f| f.excludes())
    }

    /// Checks the record-level invariants; the message names the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.record_id.trim().is_empty() {
            return Err("empty record_id".into());
        }
        if self.predicate_span.is_empty() {
            return Err("empty predicate_span".into());
        }
        if self.predicate_span.slice(&self.text).is_none() {
            return Err(format!(
                "predicate_span [{}, {}] outside text of {} characters",
                self.predicate_span.start,
                self.predicate_span.end,
                self.text.chars().count()
            ));
        }
        if self.moves.is_empty() && !self.has_flag(Flag::ImplicitMove) {
            return Err("moves empty without implicit_move flag".into());
        }
        match (self.has_flag(Flag::Augmented), &self.source_record) {
            (true, None) => return Err("augmented record without source_record".into()),
            (false, Some(_)) => return Err("source_record on a record not flagged augmented".into()),
            _ => {}
        }
        if let Some(fen) = &self.board_fen {
            fen.parse::<BoardState>().map_err(|e| format!("board_fen: {e}"))?;
        }
        Ok(())
    }
}

/// Drops records flagged counterfactual, ocr_error or implicit_move, keeping
/// the order of the rest.
pub fn apply_exclusions(records: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
    records.iter().filter(|r| !r.is_excluded()).cloned().collect()
}

/// Record counts per sentiment label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    counts: BTreeMap<Sentiment, usize>,
}

impl LabelDistribution {
    pub fn new(counts: impl IntoIterator<Item = (Sentiment, usize)>) -> Self {
        let mut d = LabelDistribution::default();
        for (label, n) in counts {
            d.set(label, n);
        }
        d
    }

    /// Counts of labeled records; unlabeled ones are ignored.
    pub fn of(records: &[AnnotationRecord]) -> Self {
        let mut d = LabelDistribution::default();
        for label in records.iter().filter_map(|r| r.sentiment) {
            *d.counts.entry(label).or_default() += 1;
        }
        d
    }

    pub fn get(&self, label: Sentiment) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn set(&mut self, label: Sentiment, n: usize) {
        if n == 0 {
            self.counts.remove(&label);
        } else {
            self.counts.insert(label, n);
        }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Labels with a non-zero count, in label order.
    pub fn iter(&self) -> impl Iterator<Item = (Sentiment, usize)> + '_ {
        self.counts.iter().map(|(l, n)| (*l, *n))
    }
}

impl fmt::Display for LabelDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(l, n)| format!("{l}={n}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for LabelDistribution {
    type Err = CorpusError;

    /// Parses `pos=288,neg=234,neu=200`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut d = LabelDistribution::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (label, n) = part
                .split_once('=')
                .ok_or_else(|| CorpusError::InvalidArgument(format!("expected label=count, got {part:?}")))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CorpusError::InvalidArgument(format!("bad count in {part:?}")))?;
            d.set(label.parse()?, n);
        }
        Ok(d)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("{path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("need at least {needed} eligible records, have {found}")]
    TooFewRecords { needed: usize, found: usize },
    #[error("label lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("agreement needs at least one item")]
    Empty,
    #[error("duplicate record id {0}")]
    DuplicateRecord(String),
    #[error("augmenter produced no variant for {label} (last source {record_id})")]
    AugmenterFailure { label: Sentiment, record_id: String },
    #[error("augmenter altered a protected span of {record_id}")]
    AugmenterContract { record_id: String },
    #[error("target {target} for {label} is below the current count {current}")]
    TargetBelowCurrent { label: Sentiment, target: usize, current: usize },
    #[error("record {0} has no sentiment label")]
    Unlabeled(String),
    #[error("{0}")]
    InvalidArgument(String),
}
