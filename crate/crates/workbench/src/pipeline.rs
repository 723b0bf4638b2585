//! The steps behind each command, separated from argument parsing and file
//! handling so tests can drive them directly.

use anyhow::{bail, ensure, Context, Result};
use movesense_core::absa::{
    self, predict, run_experiment, serialize_input, training_records, ClassScores, ClassifierInput, ConfusionMatrix,
    ExperimentReport, InfusionVariant, SentimentModel, TrainConfig,
};
use movesense_core::chess::{parse_fen, MoveSequence};
use movesense_core::clustering::{assign_action_types, build_verb_graph, chinese_whispers, default_anchors, ActionTypeMap, Embeddings, VerbClustering};
use movesense_core::corpus::{
    default_targets, eligible, oversample, AnnotationRecord, DatasetSplit, Flag, LabelDistribution, RuleParaphraser, Sentiment,
};
use movesense_core::engine::{build_contingency, outcome_category, ContingencyTable, EngineJob, EnginePool, Polarity, ResultRow};
use movesense_core::extraction::{build_triple, expand_per_verb, find_predicates, malformed_move_candidates, ActionType, VerbLexicon};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Annotator id given to labels that come with the input sentences.
pub const GOLD_ANNOTATOR: &str = "gold";
/// Annotator id of records still awaiting a label.
pub const UNASSIGNED: &str = "unassigned";

/// One line of the sentence input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceInput {
    pub sentence_id: String,
    pub text: String,
    #[serde(default)]
    pub board_fen: Option<String>,
    /// Known labels, matched to extracted aspects by first move and,
    /// when given, predicate lemma.
    #[serde(default)]
    pub aspects: Vec<GoldAspect>,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldAspect {
    #[serde(rename = "move")]
    pub first_move: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    pub sentiment: Sentiment,
}

pub fn parse_sentences(text: &str) -> Result<Vec<SentenceInput>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("sentence line {}", i + 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub records: Vec<AnnotationRecord>,
    /// Gold aspects that matched no extracted record, as `sentence_id: move`.
    pub unmatched: Vec<String>,
}

/// One record per verb instance, ids `<sentence_id>-<k>` (1-based).
///
/// Instances without a linked move are flagged `implicit_move`; sentences
/// containing move-shaped tokens that do not parse are flagged `ocr_error`.
/// With `action_types`, every record with moves gets its lemma's type, or
/// `Move` for lemmas the clustering does not know.
pub fn extract_records(
    sentences: &[SentenceInput],
    lexicon: &VerbLexicon,
    action_types: Option<&BTreeMap<String, ActionType>>,
) -> Result<Extracted> {
    let mut records = Vec::new();
    let mut unmatched = Vec::new();
    let mut seen = BTreeSet::new();
    for s in sentences {
        ensure!(seen.insert(s.sentence_id.as_str()), "duplicate sentence id {:?}", s.sentence_id);
        if let Some(fen) = &s.board_fen {
            parse_fen(fen).with_context(|| format!("sentence {}: board", s.sentence_id))?;
        }
        let predicates = find_predicates(&s.text, lexicon)?;
        let ocr = !malformed_move_candidates(&s.text).is_empty();
        let start = records.len();
        for (k, instance) in expand_per_verb(&s.sentence_id, &s.text, &predicates).iter().enumerate() {
            let triple = build_triple(instance).ok();
            let mut r = AnnotationRecord::from_instance(
                format!("{}-{}", s.sentence_id, k + 1),
                instance,
                triple.as_ref(),
                UNASSIGNED,
                s.board_fen.clone(),
            );
            r.flags.extend(s.flags.iter().copied());
            if ocr {
                r.flags.insert(Flag::OcrError);
            }
            if let (Some(types), false) = (action_types, r.moves.is_empty()) {
                r.action_type = Some(types.get(&r.predicate_lemma).copied().unwrap_or(ActionType::Move));
            }
            records.push(r);
        }
        for gold in &s.aspects {
            let mut matched = false;
            for r in &mut records[start..] {
                let same_move = r.moves.first().is_some_and(|m| m.to_string() == gold.first_move);
                let same_verb = gold.predicate.as_ref().is_none_or(|p| *p == r.predicate_lemma);
                if same_move && same_verb {
                    r.sentiment = Some(gold.sentiment);
                    r.annotator_id = GOLD_ANNOTATOR.into();
                    matched = true;
                }
            }
            if !matched {
                unmatched.push(format!("{}: {}", s.sentence_id, gold.first_move));
            }
        }
    }
    Ok(Extracted { records, unmatched })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    /// The input records followed by the new copies.
    pub records: Vec<AnnotationRecord>,
    pub added: usize,
    pub before: LabelDistribution,
    pub after: LabelDistribution,
}

/// Oversamples the training records (the split's train ids, or every
/// eligible record without a split) up to `targets`, by default twice each
/// label's count capped at the largest label.
pub fn augment_records(
    records: &[AnnotationRecord],
    split: Option<&DatasetSplit>,
    targets: Option<LabelDistribution>,
    seed: u64,
) -> Result<AugmentOutcome> {
    let train: Vec<AnnotationRecord> = match split {
        Some(s) => DatasetSplit::select(records, &s.train).into_iter().cloned().collect(),
        None => eligible(records).into_iter().cloned().collect(),
    };
    ensure!(!train.is_empty(), "no training records to augment");
    let before = LabelDistribution::of(&train);
    let targets = targets.unwrap_or_else(|| default_targets(&before));
    let grown = oversample(&train, &RuleParaphraser::bundled(seed), &targets)?;
    let copies = &grown[train.len()..];
    let mut out = records.to_vec();
    out.extend_from_slice(copies);
    Ok(AugmentOutcome {
        records: out,
        added: copies.len(),
        before,
        after: LabelDistribution::of(&grown),
    })
}

/// Clusters the lexicon lemmas that have embeddings; the rest are reported.
pub fn cluster_lexicon(
    lexicon: &VerbLexicon,
    embeddings: &Embeddings,
    threshold: f64,
    seed: u64,
    iterations: usize,
) -> Result<(VerbClustering, ActionTypeMap, Vec<String>)> {
    let (known, missing): (Vec<String>, Vec<String>) =
        lexicon.lemmas().map(str::to_string).partition(|l| embeddings.get(l).is_some());
    let graph = build_verb_graph(&known, lexicon, embeddings, threshold)?;
    let clustering = chinese_whispers(&graph, seed, iterations)?;
    let types = assign_action_types(&clustering, &default_anchors());
    Ok((clustering, types, missing))
}

fn inputs(records: &[&AnnotationRecord], variant: InfusionVariant) -> Result<Vec<ClassifierInput>> {
    records
        .iter()
        .map(|r| serialize_input(r, variant).with_context(|| format!("record {}", r.record_id)))
        .collect()
}

/// Trains on the split's training records (augmented copies included) and
/// keeps the epoch that scores best on the validation records.
pub fn train_model(records: &[AnnotationRecord], split: &DatasetSplit, variant: InfusionVariant, config: TrainConfig) -> Result<SentimentModel> {
    let train = inputs(&training_records(records, split), variant)?;
    let validation = inputs(&DatasetSplit::select(records, &split.validation), variant)?;
    Ok(absa::train(&train, &validation, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub record_id: String,
    pub gold: Sentiment,
    pub predicted: Sentiment,
    pub probabilities: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: InfusionVariant,
    pub split: String,
    pub size: usize,
    pub micro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassScores>,
    pub predictions: Vec<PredictionRow>,
}

pub fn evaluate(
    model: &SentimentModel,
    records: &[AnnotationRecord],
    ids: &[String],
    split_name: &str,
    variant: InfusionVariant,
) -> Result<EvalReport> {
    let chosen = DatasetSplit::select(records, ids);
    ensure!(!chosen.is_empty(), "split {split_name:?} selects no records");
    let mut predictions = Vec::with_capacity(chosen.len());
    for r in &chosen {
        let input = serialize_input(r, variant).with_context(|| format!("record {}", r.record_id))?;
        let gold = input.label.with_context(|| format!("record {} has no usable label", r.record_id))?;
        let p = predict(model, &input)?;
        predictions.push(PredictionRow {
            record_id: r.record_id.clone(),
            gold,
            predicted: p.label,
            probabilities: p.probabilities,
        });
    }
    let golds: Vec<Sentiment> = predictions.iter().map(|p| p.gold).collect();
    let predicted: Vec<Sentiment> = predictions.iter().map(|p| p.predicted).collect();
    let confusion = ConfusionMatrix::from_pairs(&golds, &predicted);
    Ok(EvalReport {
        variant,
        split: split_name.to_string(),
        size: predictions.len(),
        micro_f1: absa::micro_f1(&predicted, &golds)?,
        per_class: confusion.per_class(),
        confusion,
        predictions,
    })
}

pub fn experiment(
    records: &[AnnotationRecord],
    split: &DatasetSplit,
    variants: &[InfusionVariant],
    seeds: &[u64],
    config: TrainConfig,
) -> Result<Vec<ExperimentReport>> {
    variants
        .iter()
        .map(|&v| run_experiment(records, split, v, seeds, config).with_context(|| format!("variant {v}")))
        .collect()
}

/// Where the sentiment of each compared record comes from.
pub enum LabelSource<'a> {
    Gold,
    Predicted { model: &'a SentimentModel, variant: InfusionVariant },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    /// Records that passed the exclusions and carry a usable label.
    pub candidates: usize,
    pub rows: Vec<ResultRow>,
    pub table: ContingencyTable,
    /// Sampled records the engine could not evaluate, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Verbatim engine output per evaluated record.
    pub raw_output: Vec<(String, Vec<String>)>,
}

/// Evaluates the first move of a seeded sample of records on their boards
/// and counts sentiment against outcome category.
///
/// Records flagged counterfactual, OCR-broken or implicit are excluded, as
/// are augmented copies and records without a board or a usable label.
/// The sample size is `round(sample * candidates)`, at least one.
pub fn engine_compare(records: &[AnnotationRecord], labels: &LabelSource, sample: f64, seed: u64, pool: &mut EnginePool) -> Result<CompareOutcome> {
    if !(sample > 0.0 && sample <= 1.0) {
        bail!("sample fraction {sample} outside (0, 1]");
    }
    let mut candidates: Vec<(&AnnotationRecord, Polarity)> = Vec::new();
    for r in records {
        if r.is_excluded() || r.has_flag(Flag::Augmented) || r.board_fen.is_none() || r.moves.is_empty() {
            continue;
        }
        let label = match labels {
            LabelSource::Gold => r.sentiment,
            LabelSource::Predicted { model, variant } => Some(predict(model, &serialize_input(r, *variant)?)?.label),
        };
        if let Some(p) = label.and_then(|s| Polarity::try_from(s).ok()) {
            candidates.push((r, p));
        }
    }
    candidates.sort_by(|a, b| a.0.record_id.cmp(&b.0.record_id));
    let total = candidates.len();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = ((sample * total as f64).round() as usize).clamp(total.min(1), total);
    candidates.truncate(take);
    candidates.sort_by(|a, b| a.0.record_id.cmp(&b.0.record_id));

    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    let mut polarity = BTreeMap::new();
    for (r, p) in &candidates {
        let fen = r.board_fen.as_deref().expect("candidates have boards");
        match parse_fen(fen) {
            Ok(board) => {
                polarity.insert(r.record_id.clone(), *p);
                jobs.push(EngineJob {
                    id: r.record_id.clone(),
                    board,
                    moves: MoveSequence::new(r.moves.clone()).expect("candidates have moves"),
                });
            }
            Err(e) => skipped.push((r.record_id.clone(), e.to_string())),
        }
    }

    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut raw_output = Vec::new();
    for (job, result) in jobs.iter().zip(pool.evaluate_all(&jobs)) {
        match result {
            Ok(e) => {
                pairs.push((polarity[&job.id], outcome_category(&e.outcome)));
                rows.push(ResultRow::new(&job.id, &e));
                raw_output.push((job.id.clone(), e.raw_output));
            }
            Err(e) => {
                log::warn!("record {}: {e}", job.id);
                skipped.push((job.id.clone(), e.to_string()));
            }
        }
    }
    Ok(CompareOutcome {
        candidates: total,
        table: build_contingency(&pairs),
        rows,
        skipped,
        raw_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use movesense_core::engine::{EngineConfig, EngineSession, MockEngine, MockEval};
    use movesense_core::extraction::Player;

    const MINI: &str = include_str!("../data/mini_corpus.jsonl");

    fn mini() -> Extracted {
        extract_records(&parse_sentences(MINI).unwrap(), &VerbLexicon::bundled(), None).unwrap()
    }

    #[test]
    fn bundled_corpus_extracts_cleanly() {
        let out = mini();
        assert!(out.unmatched.is_empty(), "{:?}", out.unmatched);
        for r in &out.records {
            r.validate().unwrap();
            assert!(!r.has_flag(Flag::OcrError), "{}", r.record_id);
        }
        let labeled = out.records.iter().filter(|r| r.sentiment.is_some()).count();
        assert!(labeled >= 50, "{labeled}");
        let implicit: BTreeSet<&str> = out
            .records
            .iter()
            .filter(|r| r.has_flag(Flag::ImplicitMove))
            .map(|r| r.sentence_id.as_str())
            .collect();
        assert_eq!(implicit.len(), 3);
        assert!(eligible(&out.records).len() >= 50);
    }

    #[test]
    fn gold_aspects_match_by_move_and_verb() {
        let line = r#"{"sentence_id":"s1","text":"It is Black's move, and we will suppose he wishes to play e5","aspects":[{"move":"e5","predicate":"play","sentiment":"Neutral"}]}"#;
        let out = extract_records(&parse_sentences(line).unwrap(), &VerbLexicon::bundled(), None).unwrap();
        let labeled: Vec<_> = out.records.iter().filter(|r| r.sentiment.is_some()).collect();
        assert_eq!(labeled.len(), 1);
        assert_eq!((labeled[0].player, labeled[0].predicate_lemma.as_str()), (Player::Black, "play"));
        assert_eq!(labeled[0].annotator_id, GOLD_ANNOTATOR);

        let miss = r#"{"sentence_id":"s2","text":"White can play e4","aspects":[{"move":"d4","sentiment":"Positive"}]}"#;
        let out = extract_records(&parse_sentences(miss).unwrap(), &VerbLexicon::bundled(), None).unwrap();
        assert_eq!(out.unmatched, ["s2: d4"]);
        assert!(parse_sentences(r#"{"sentence_id":"x","text":"y","board_fen":"bad"}"#).is_ok());
        assert!(extract_records(&parse_sentences(r#"{"sentence_id":"x","text":"y","board_fen":"bad"}"#).unwrap(), &VerbLexicon::bundled(), None).is_err());
    }

    #[test]
    fn action_types_from_clustering() {
        let types: BTreeMap<String, ActionType> = [("defend".to_string(), ActionType::Defend)].into();
        let line = r#"{"sentence_id":"s","text":"White should defend with Nf3 and then play e4"}"#;
        let out = extract_records(&parse_sentences(line).unwrap(), &VerbLexicon::bundled(), Some(&types)).unwrap();
        let t: Vec<_> = out.records.iter().map(|r| (r.predicate_lemma.as_str(), r.action_type)).collect();
        assert_eq!(t, [("defend", Some(ActionType::Defend)), ("play", Some(ActionType::Move))]);
    }

    #[test]
    fn bundled_vectors_cluster_into_action_groups() {
        let emb = Embeddings::parse(include_str!("../data/verb_vectors.txt")).unwrap();
        let (clustering, types, missing) = cluster_lexicon(&VerbLexicon::bundled(), &emb, 40.0, 50, 50).unwrap();
        assert!(missing.is_empty(), "{missing:?}");
        let lemma_types = types.lemma_types(&clustering);
        assert_eq!(lemma_types["assail"], ActionType::Attack);
        assert_eq!(lemma_types["seize"], ActionType::Capture);
        assert_eq!(lemma_types["parry"], ActionType::Defend);
        assert_eq!(lemma_types["shield"], ActionType::Protect);
        assert_eq!(lemma_types["advance"], ActionType::Move);
    }

    #[test]
    fn compare_counts_every_evaluated_record() {
        let records = mini().records;
        let sessions = (0..2)
            .map(|_| EngineSession::start(Box::new(MockEngine::new()), EngineConfig::default()).unwrap())
            .collect();
        let mut pool = EnginePool::new(sessions);
        let all = engine_compare(&records, &LabelSource::Gold, 1.0, 42, &mut pool).unwrap();
        assert!(all.skipped.is_empty(), "{:?}", all.skipped);
        assert_eq!(all.rows.len(), all.candidates);
        assert_eq!(all.table.total(), all.rows.len());
        assert!(records.iter().filter(|r| r.has_flag(Flag::Counterfactual)).all(|r| all.rows.iter().all(|row| row.record_id != r.record_id)));

        let tenth = engine_compare(&records, &LabelSource::Gold, 0.1, 42, &mut pool).unwrap();
        assert_eq!(tenth.rows.len(), (0.1 * all.candidates as f64).round() as usize);
        assert_eq!(tenth.table.total(), tenth.rows.len());
        assert_eq!(tenth, engine_compare(&records, &LabelSource::Gold, 0.1, 42, &mut pool).unwrap());
    }

    #[test]
    fn engine_failures_are_skipped_not_counted() {
        let records = mini().records;
        let engine = MockEngine::with_evaluations([MockEval::NoInfo]);
        let mut pool = EnginePool::new(vec![EngineSession::start(Box::new(engine), EngineConfig::default()).unwrap()]);
        let out = engine_compare(&records, &LabelSource::Gold, 0.2, 1, &mut pool).unwrap();
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.table.total(), out.rows.len());
        assert_eq!(out.rows.len() + out.skipped.len(), (0.2 * out.candidates as f64).round() as usize);
    }
}
