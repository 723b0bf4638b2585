//! Annotation task queue backed by an append-only submission log.
//!
//! Every accepted submission is written and synced to the log before it
//! touches in-memory state, so replaying the log after a restart rebuilds
//! exactly what clients observed.

use chrono::{DateTime, Utc};
use movesense_core::corpus::{cohen_kappa, AnnotationRecord, Sentiment};
use movesense_core::extraction::{Player, Span};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const PLAYER_OPTIONS: [Player; 2] = [Player::White, Player::Black];
pub const SENTIMENT_OPTIONS: [Sentiment; 4] = Sentiment::ALL;
/// Overlapping common answers needed before agreement is reported.
pub const MIN_COMMON_FOR_KAPPA: usize = 10;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("at least one annotator is required")]
    NoAnnotators,
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("task {task_id:?} is not assigned to {annotator_id:?}")]
    NotAssigned { task_id: String, annotator_id: String },
    #[error("invalid submission: {0}")]
    ValidationFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("submission log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("submission log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub record_id: String,
    pub text: String,
    /// Character offsets of the highlighted verb in `text`.
    pub predicate_span: Span,
    pub board_fen: Option<String>,
    pub player_options: Vec<Player>,
    pub sentiment_options: Vec<Sentiment>,
    pub assigned_annotator: String,
    /// Part of the subset every annotator labels.
    pub common: bool,
}

/// A client's answer. Player and sentiment stay strings until validated so
/// that anything outside the option lists is a validation failure rather
/// than a decoding error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSubmission {
    pub task_id: String,
    pub annotator_id: String,
    pub player: String,
    pub sentiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

/// One line of the submission log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    /// 1-based position in the log.
    pub seq: u64,
    pub task_id: String,
    pub record_id: String,
    pub annotator_id: String,
    pub player: Player,
    pub sentiment: Sentiment,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    pub log_length: u64,
    /// The answer replaced an earlier one for the same task.
    pub replaced: bool,
    pub record: AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub annotator_id: String,
    pub answered: usize,
    pub remaining: usize,
    pub total: usize,
    pub common_answered: usize,
    /// Cohen's kappa on sentiment against each other annotator, present once
    /// both have answered at least [`MIN_COMMON_FOR_KAPPA`] common tasks in
    /// common.
    pub kappa: BTreeMap<String, f64>,
}

fn task_id(record_id: &str, annotator: &str) -> String {
    format!("{record_id}@{annotator}")
}

fn task_for(record: &AnnotationRecord, annotator: &str, common: bool) -> AnnotationTask {
    AnnotationTask {
        task_id: task_id(&record.record_id, annotator),
        record_id: record.record_id.clone(),
        text: record.text.clone(),
        predicate_span: record.predicate_span,
        board_fen: record.board_fen.clone(),
        player_options: PLAYER_OPTIONS.to_vec(),
        sentiment_options: SENTIMENT_OPTIONS.to_vec(),
        assigned_annotator: annotator.to_string(),
        common,
    }
}

/// Assigns every record to annotators: a common subset of
/// `floor(iaa_fraction * n)` records goes to all of them, the rest is dealt
/// round-robin after a seeded shuffle. With one annotator everything is
/// theirs. Tasks come out grouped by annotator (input order), each group
/// sorted by record id.
pub fn create_tasks(
    records: &[AnnotationRecord],
    iaa_fraction: f64,
    annotators: &[String],
    seed: u64,
) -> Result<Vec<AnnotationTask>, ServiceError> {
    if annotators.is_empty() {
        return Err(ServiceError::NoAnnotators);
    }
    if !(0.0..1.0).contains(&iaa_fraction) {
        return Err(ServiceError::InvalidArgument(format!("common fraction {iaa_fraction} outside [0, 1)")));
    }
    let distinct: BTreeSet<&String> = annotators.iter().collect();
    if distinct.len() != annotators.len() || annotators.iter().any(|a| a.is_empty() || a.contains('@')) {
        return Err(ServiceError::InvalidArgument("annotator ids must be distinct, non-empty and free of '@'".into()));
    }
    let by_id: BTreeMap<&str, &AnnotationRecord> = records.iter().map(|r| (r.record_id.as_str(), r)).collect();
    if by_id.len() != records.len() {
        return Err(ServiceError::InvalidArgument("duplicate record ids".into()));
    }

    let mut ids: Vec<&str> = by_id.keys().copied().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let common_n = if annotators.len() > 1 {
        (iaa_fraction * ids.len() as f64).floor() as usize
    } else {
        0
    };
    let (common, rest) = ids.split_at(common_n);

    let mut per_annotator: Vec<Vec<AnnotationTask>> = vec![Vec::new(); annotators.len()];
    for (a, tasks) in annotators.iter().zip(&mut per_annotator) {
        tasks.extend(common.iter().map(|id| task_for(by_id[id], a, true)));
    }
    for (i, id) in rest.iter().enumerate() {
        let k = i % annotators.len();
        per_annotator[k].push(task_for(by_id[id], &annotators[k], false));
    }
    Ok(per_annotator
        .into_iter()
        .flat_map(|mut tasks| {
            tasks.sort_by(|a, b| a.record_id.cmp(&b.record_id));
            tasks
        })
        .collect())
}

pub struct AnnotationService {
    records: BTreeMap<String, AnnotationRecord>,
    tasks: BTreeMap<String, AnnotationTask>,
    /// Task ids per annotator, in serving order.
    queues: BTreeMap<String, Vec<String>>,
    /// Latest answer per task id.
    answers: BTreeMap<String, LogEntry>,
    /// Latest answer per record id, across annotators.
    latest: BTreeMap<String, LogEntry>,
    log_length: u64,
    log: Option<(PathBuf, File)>,
}

impl AnnotationService {
    /// A service without persistence.
    pub fn in_memory(records: Vec<AnnotationRecord>, tasks: Vec<AnnotationTask>) -> Result<Self, ServiceError> {
        let records: BTreeMap<String, AnnotationRecord> = records.into_iter().map(|r| (r.record_id.clone(), r)).collect();
        let mut queues: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut by_id = BTreeMap::new();
        for t in tasks {
            if !records.contains_key(&t.record_id) {
                return Err(ServiceError::InvalidArgument(format!("task {} refers to unknown record {}", t.task_id, t.record_id)));
            }
            queues.entry(t.assigned_annotator.clone()).or_default().push(t.task_id.clone());
            if by_id.insert(t.task_id.clone(), t).is_some() {
                return Err(ServiceError::InvalidArgument("duplicate task ids".into()));
            }
        }
        Ok(AnnotationService {
            records,
            tasks: by_id,
            queues,
            answers: BTreeMap::new(),
            latest: BTreeMap::new(),
            log_length: 0,
            log: None,
        })
    }

    /// A service that replays `log_path` (if it exists) and appends to it.
    ///
    /// A final line cut short by a crash (no trailing newline, not
    /// decodable) is dropped with a warning; any other bad line is an error.
    pub fn open(records: Vec<AnnotationRecord>, tasks: Vec<AnnotationTask>, log_path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = log_path.as_ref().to_path_buf();
        let io_err = |source| ServiceError::Io { path: path.clone(), source };
        let mut service = Self::in_memory(records, tasks)?;
        let mut text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(e)),
        };
        let mut needs_newline = false;
        if !text.is_empty() && !text.ends_with('\n') {
            let cut = text.rfind('\n').map_or(0, |i| i + 1);
            if serde_json::from_str::<LogEntry>(&text[cut..]).is_ok() {
                needs_newline = true;
            } else {
                log::warn!("dropping truncated final line of {}", path.display());
                text.truncate(cut);
                let f = OpenOptions::new().write(true).open(&path).map_err(io_err)?;
                f.set_len(cut as u64).map_err(io_err)?;
            }
        }
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_str(line).map_err(|e| ServiceError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            service.replay(entry).map_err(|message| ServiceError::Log { line: i + 1, message })?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        if needs_newline {
            file.write_all(b"\n").map_err(io_err)?;
        }
        service.log = Some((path, file));
        Ok(service)
    }

    fn replay(&mut self, entry: LogEntry) -> Result<(), String> {
        if entry.seq != self.log_length + 1 {
            return Err(format!("sequence {} where {} was expected", entry.seq, self.log_length + 1));
        }
        let task = self.tasks.get(&entry.task_id).ok_or_else(|| format!("unknown task {:?}", entry.task_id))?;
        if task.assigned_annotator != entry.annotator_id || task.record_id != entry.record_id {
            return Err(format!("task {:?} does not match the current assignment", entry.task_id));
        }
        self.apply(entry);
        Ok(())
    }

    fn apply(&mut self, entry: LogEntry) {
        self.log_length = entry.seq;
        self.latest.insert(entry.record_id.clone(), entry.clone());
        self.answers.insert(entry.task_id.clone(), entry);
    }

    fn queue(&self, annotator: &str) -> Result<&[String], ServiceError> {
        self.queues
            .get(annotator)
            .map(Vec::as_slice)
            .ok_or_else(|| ServiceError::UnknownAnnotator(annotator.to_string()))
    }

    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.queues.keys().map(String::as_str)
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn log_length(&self) -> u64 {
        self.log_length
    }

    pub fn task(&self, task_id: &str) -> Option<&AnnotationTask> {
        self.tasks.get(task_id)
    }

    /// First unanswered task of `annotator`; `None` when all are answered.
    pub fn next_task(&self, annotator: &str) -> Result<Option<&AnnotationTask>, ServiceError> {
        Ok(self
            .queue(annotator)?
            .iter()
            .find(|id| !self.answers.contains_key(*id))
            .map(|id| &self.tasks[id]))
    }

    /// Validates, logs and applies a submission. Answering a task again
    /// replaces the earlier answer; both stay in the log.
    pub fn submit(&mut self, submission: AnnotationSubmission) -> Result<Ack, ServiceError> {
        let task = self
            .tasks
            .get(&submission.task_id)
            .ok_or_else(|| ServiceError::UnknownTask(submission.task_id.clone()))?;
        if task.assigned_annotator != submission.annotator_id {
            return Err(ServiceError::NotAssigned {
                task_id: submission.task_id,
                annotator_id: submission.annotator_id,
            });
        }
        let player = PLAYER_OPTIONS
            .into_iter()
            .find(|p| p.to_string() == submission.player)
            .ok_or_else(|| ServiceError::ValidationFailure(format!("player {:?} is not one of White, Black", submission.player)))?;
        let sentiment = SENTIMENT_OPTIONS
            .into_iter()
            .find(|s| s.name() == submission.sentiment)
            .ok_or_else(|| {
                ServiceError::ValidationFailure(format!(
                    "sentiment {:?} is not one of Positive, Negative, Neutral, NotSure",
                    submission.sentiment
                ))
            })?;
        let entry = LogEntry {
            seq: self.log_length + 1,
            task_id: task.task_id.clone(),
            record_id: task.record_id.clone(),
            annotator_id: submission.annotator_id,
            player,
            sentiment,
            timestamp: submission.timestamp.unwrap_or_else(Utc::now),
        };
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_string(&entry).expect("log entries serialize");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|source| ServiceError::Io { path: path.clone(), source })?;
        }
        let replaced = self.answers.contains_key(&entry.task_id);
        let (seq, record_id) = (entry.seq, entry.record_id.clone());
        self.apply(entry);
        Ok(Ack {
            seq,
            log_length: self.log_length,
            replaced,
            record: self.record(&record_id).expect("task records exist"),
        })
    }

    /// The record with its most recent answer applied.
    pub fn record(&self, record_id: &str) -> Option<AnnotationRecord> {
        let mut r = self.records.get(record_id)?.clone();
        if let Some(e) = self.latest.get(record_id) {
            r.player = e.player;
            r.sentiment = Some(e.sentiment);
            r.annotator_id = e.annotator_id.clone();
        }
        Some(r)
    }

    /// Every record with its most recent answer applied, by record id.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.records.keys().filter_map(|id| self.record(id)).collect()
    }

    /// Latest answer of `annotator` per record id.
    pub fn answers_of(&self, annotator: &str) -> Result<BTreeMap<&str, &LogEntry>, ServiceError> {
        Ok(self
            .queue(annotator)?
            .iter()
            .filter_map(|id| self.answers.get(id))
            .map(|e| (e.record_id.as_str(), e))
            .collect())
    }

    pub fn progress(&self, annotator: &str) -> Result<Progress, ServiceError> {
        let queue = self.queue(annotator)?;
        let answered = queue.iter().filter(|id| self.answers.contains_key(*id)).count();
        let common_answered = queue
            .iter()
            .filter(|id| self.tasks[*id].common && self.answers.contains_key(*id))
            .count();
        let mine = self.common_sentiments(annotator);
        let mut kappa = BTreeMap::new();
        for peer in self.annotators().filter(|p| *p != annotator) {
            let theirs = self.common_sentiments(peer);
            let (a, b): (Vec<Sentiment>, Vec<Sentiment>) = mine
                .iter()
                .filter_map(|(id, s)| theirs.get(id).map(|t| (*s, *t)))
                .unzip();
            if a.len() >= MIN_COMMON_FOR_KAPPA {
                let k = cohen_kappa(&a, &b).expect("equal, non-empty label lists");
                kappa.insert(peer.to_string(), k);
            }
        }
        Ok(Progress {
            annotator_id: annotator.to_string(),
            answered,
            remaining: queue.len() - answered,
            total: queue.len(),
            common_answered,
            kappa,
        })
    }

    fn common_sentiments(&self, annotator: &str) -> BTreeMap<&str, Sentiment> {
        self.queues[annotator]
            .iter()
            .filter(|id| self.tasks[*id].common)
            .filter_map(|id| self.answers.get(id))
            .map(|e| (e.record_id.as_str(), e.sentiment))
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use std::collections::BTreeSet;

    pub fn records(n: usize) -> Vec<AnnotationRecord> {
        (0..n)
            .map(|i| {
                let text = format!("White should play e4 in game {i}");
                AnnotationRecord {
                    record_id: format!("r{i:04}"),
                    sentence_id: format!("s{i:04}"),
                    predicate_span: Span::new(13, 17),
                    predicate_lemma: "play".into(),
                    player: Player::White,
                    moves: vec!["e4".parse().unwrap()],
                    action_type: None,
                    sentiment: None,
                    annotator_id: "unassigned".into(),
                    board_fen: Some(movesense_core::chess::STARTING_FEN.into()),
                    flags: BTreeSet::new(),
                    source_record: None,
                    text,
                }
            })
            .collect()
    }

    pub fn annotators(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn submission(task_id: &str, annotator: &str, player: &str, sentiment: &str) -> AnnotationSubmission {
        AnnotationSubmission {
            task_id: task_id.into(),
            annotator_id: annotator.into(),
            player: player.into(),
            sentiment: sentiment.into(),
            timestamp: None,
        }
    }
}
