use super::{class_index, featurize, serialize_input, train_features, AbsaError, ConfusionMatrix, EncoderSpec, FeatureVector, InfusionVariant};
use super::{ClassScores, TrainConfig, CLASSES};
use crate::corpus::{AnnotationRecord, DatasetSplit, Flag};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub validation_f1: f64,
    pub test_f1: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variant: InfusionVariant,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub runs: Vec<RunResult>,
    /// Arithmetic mean of the per-run test micro-F1.
    pub mean_f1: f64,
    /// Confusion matrix and class scores of the first run.
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassScores>,
}

/// Training records for a split: the train ids plus augmented copies of them.
pub fn training_records<'a>(records: &'a [AnnotationRecord], split: &DatasetSplit) -> Vec<&'a AnnotationRecord> {
    let ids: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    records
        .iter()
        .filter(|r| {
            ids.contains(r.record_id.as_str())
                || (r.has_flag(Flag::Augmented) && r.source_record.as_deref().is_some_and(|s| ids.contains(s)))
        })
        .collect()
}

fn encode(records: &[&AnnotationRecord], variant: InfusionVariant, dimension: usize) -> Result<Vec<(FeatureVector, usize)>, AbsaError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let input = serialize_input(r, variant)?;
            let y = input.label.and_then(class_index).ok_or(AbsaError::MissingLabel(i))?;
            Ok((featurize(&input.serialized, dimension), y))
        })
        .collect()
}

/// Trains once per seed (concurrently), picks each run's best epoch on the
/// validation split, and scores it on the test split.
pub fn run_experiment(
    records: &[AnnotationRecord],
    split: &DatasetSplit,
    variant: InfusionVariant,
    seeds: &[u64],
    config: TrainConfig,
) -> Result<ExperimentReport, AbsaError> {
    if seeds.is_empty() {
        return Err(AbsaError::InvalidArgument("no seeds".into()));
    }
    let dimension = config.dimension.max(super::MIN_DIMENSION);
    let train = encode(&training_records(records, split), variant, dimension)?;
    let validation = encode(&DatasetSplit::select(records, &split.validation), variant, dimension)?;
    let test = encode(&DatasetSplit::select(records, &split.test), variant, dimension)?;
    if test.is_empty() {
        return Err(AbsaError::Empty);
    }

    let results: Vec<Result<RunResult, AbsaError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let (train, validation, test) = (&train, &validation, &test);
                scope.spawn(move || {
                    let run_config = TrainConfig { seed, dimension, ..config };
                    let model = train_features(train, validation, EncoderSpec::Hashing { dimension }, run_config)?;
                    let mut golds = Vec::with_capacity(test.len());
                    let mut predicted = Vec::with_capacity(test.len());
                    for (x, y) in test {
                        golds.push(CLASSES[*y]);
                        predicted.push(model.predict_features(x)?.label);
                    }
                    Ok(RunResult {
                        seed,
                        best_epoch: model.best_epoch,
                        validation_f1: model.history[model.best_epoch - 1],
                        test_f1: super::micro_f1(&predicted, &golds)?,
                        confusion: ConfusionMatrix::from_pairs(&golds, &predicted),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean_f1 = runs.iter().map(|r| r.test_f1).sum::<f64>() / runs.len() as f64;
    let confusion = runs[0].confusion;
    Ok(ExperimentReport {
        variant,
        train_size: train.len(),
        validation_size: validation.len(),
        test_size: test.len(),
        per_class: confusion.per_class(),
        confusion,
        mean_f1,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absa::synthetic::two_aspect_corpus;
    use crate::corpus::split_corpus;

    #[test]
    fn mean_is_mean_and_equal_seeds_agree() {
        let records = two_aspect_corpus(60, 3);
        let split = split_corpus(&records, 42).unwrap();
        let config = TrainConfig {
            dimension: 1 << 12,
            epochs: 5,
            ..TrainConfig::default()
        };
        let report = run_experiment(&records, &split, InfusionVariant::MoveActionPhrase, &[9; 5], config).unwrap();
        assert_eq!(report.runs.len(), 5);
        assert!(report.runs.windows(2).all(|w| w[0] == w[1]));
        let mean = report.runs.iter().map(|r| r.test_f1).sum::<f64>() / 5.0;
        assert_eq!(report.mean_f1, mean);
        for (i, c) in CLASSES.iter().enumerate() {
            let gold = DatasetSplit::select(&records, &split.test).iter().filter(|r| r.sentiment == Some(*c)).count();
            assert_eq!(report.confusion.row_sum(i), gold);
        }
    }

    #[test]
    fn augmented_copies_follow_their_source() {
        let mut records = two_aspect_corpus(10, 1);
        let split = split_corpus(&records, 1).unwrap();
        let mut copy = records.iter().find(|r| r.record_id == split.train[0]).unwrap().clone();
        copy.source_record = Some(copy.record_id.clone());
        copy.record_id.push_str("-aug1");
        copy.flags.insert(Flag::Augmented);
        records.push(copy);
        assert_eq!(training_records(&records, &split).len(), split.train.len() + 1);
    }
}
