use super::{AnnotationRecord, CorpusError, Flag, Sentiment};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const MIN_SPLIT_RECORDS: usize = 10;

// Train, validation, test shares in tenths.
const SHARES: [usize; 3] = [7, 1, 2];
// Order in which leftover units go to splits when remainders tie.
const TIE_PRIORITY: [usize; 3] = [2, 0, 1];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }

    /// Records of `records` whose ids are in `ids`, in the order of `records`.
    pub fn select<'a>(records: &'a [AnnotationRecord], ids: &[String]) -> Vec<&'a AnnotationRecord> {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        records.iter().filter(|r| wanted.contains(r.record_id.as_str())).collect()
    }
}

/// Records that may enter a split: labeled, not NotSure, not excluded by a
/// flag, and not augmented copies.
pub fn eligible(records: &[AnnotationRecord]) -> Vec<&AnnotationRecord> {
    records
        .iter()
        .filter(|r| matches!(r.sentiment, Some(s) if s != Sentiment::NotSure))
        .filter(|r| !r.is_excluded() && !r.has_flag(Flag::Augmented))
        .collect()
}

/// Splits `total` units across shares given as integer weights, by largest
/// remainder. Ties in the remainder go to the earlier entry of `priority`.
fn apportion(total: usize, weights: [usize; 3], priority: [usize; 3]) -> [usize; 3] {
    let sum: usize = weights.iter().sum();
    let mut counts = weights.map(|w| total * w / sum);
    let remainders = weights.map(|w| total * w % sum);
    let mut order = priority;
    order.sort_by_key(|&s| std::cmp::Reverse(remainders[s]));
    let leftover = total - counts.iter().sum::<usize>();
    for &s in order.iter().take(leftover) {
        counts[s] += 1;
    }
    counts
}

/// Per-label split quotas whose row sums are the label counts and whose
/// column sums are `global`.
fn stratified_quotas(per_label: &[usize], global: [usize; 3]) -> Vec<[usize; 3]> {
    let n: usize = per_label.iter().sum();
    let mut quotas: Vec<[usize; 3]> = per_label.iter().map(|&c| global.map(|g| c * g / n)).collect();
    let mut label_left: Vec<usize> = per_label.iter().zip(&quotas).map(|(c, q)| c - q.iter().sum::<usize>()).collect();
    let mut split_left: [usize; 3] = std::array::from_fn(|s| global[s] - quotas.iter().map(|q| q[s]).sum::<usize>());

    let mut cells: Vec<(usize, usize)> = (0..per_label.len()).flat_map(|l| TIE_PRIORITY.map(|s| (l, s))).collect();
    cells.sort_by_key(|&(l, s)| std::cmp::Reverse(per_label[l] * global[s] % n));
    for (l, s) in cells {
        if label_left[l] > 0 && split_left[s] > 0 {
            quotas[l][s] += 1;
            label_left[l] -= 1;
            split_left[s] -= 1;
        }
    }
    // Any unit still unplaced can go anywhere with room; totals match so this
    // always terminates.
    for l in 0..per_label.len() {
        for s in TIE_PRIORITY {
            let take = label_left[l].min(split_left[s]);
            quotas[l][s] += take;
            label_left[l] -= take;
            split_left[s] -= take;
        }
    }
    quotas
}

/// Stratified 70/10/20 split of the eligible records.
///
/// Global sizes follow largest-remainder rounding of 70/10/20; each label is
/// spread over the three splits in proportion to those sizes. Within a label,
/// records are ordered by id and shuffled with a generator seeded by `seed`,
/// so the result depends only on the record ids, labels and seed. Ids in
/// each split are returned sorted.
pub fn split_corpus(records: &[AnnotationRecord], seed: u64) -> Result<DatasetSplit, CorpusError> {
    let pool = eligible(records);
    if pool.len() < MIN_SPLIT_RECORDS {
        return Err(CorpusError::TooFewRecords {
            needed: MIN_SPLIT_RECORDS,
            found: pool.len(),
        });
    }
    let mut by_label: BTreeMap<Sentiment, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for r in &pool {
        if !seen.insert(r.record_id.as_str()) {
            return Err(CorpusError::DuplicateRecord(r.record_id.clone()));
        }
        by_label.entry(r.sentiment.expect("eligible records are labeled")).or_default().push(&r.record_id);
    }

    let global = apportion(pool.len(), SHARES, TIE_PRIORITY);
    let counts: Vec<usize> = by_label.values().map(Vec::len).collect();
    let quotas = stratified_quotas(&counts, global);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<String>; 3] = Default::default();
    for (ids, quota) in by_label.values_mut().zip(quotas) {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let mut rest = ids.as_slice();
        for (part, q) in parts.iter_mut().zip(quota) {
            let (head, tail) = rest.split_at(q);
            part.extend(head.iter().map(|s| s.to_string()));
            rest = tail;
        }
    }
    for part in &mut parts {
        part.sort();
    }
    let [train, validation, test] = parts;
    Ok(DatasetSplit { train, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testing::labeled;
    use proptest::prelude::*;

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(720, SHARES, TIE_PRIORITY), [504, 72, 144]);
        assert_eq!(apportion(10, SHARES, TIE_PRIORITY), [7, 1, 2]);
        assert_eq!(apportion(11, SHARES, TIE_PRIORITY), [8, 1, 2]);
        assert_eq!(apportion(15, SHARES, TIE_PRIORITY), [11, 1, 3]);
        assert_eq!(apportion(723, SHARES, TIE_PRIORITY), [506, 72, 145]);
    }

    #[test]
    fn ten_records() {
        let rs = labeled(&[(Sentiment::Positive, 5), (Sentiment::Negative, 3), (Sentiment::Neutral, 2)]);
        assert_eq!(split_corpus(&rs, 1).unwrap().sizes(), [7, 1, 2]);
    }

    #[test]
    fn too_few_and_ineligible() {
        let mut rs = labeled(&[(Sentiment::Positive, 10)]);
        rs[0].sentiment = Some(Sentiment::NotSure);
        assert!(matches!(split_corpus(&rs, 1), Err(CorpusError::TooFewRecords { found: 9, .. })));
        rs[0].sentiment = None;
        assert!(split_corpus(&rs, 1).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut rs = labeled(&[(Sentiment::Positive, 12)]);
        rs[1].record_id = rs[0].record_id.clone();
        assert!(matches!(split_corpus(&rs, 1), Err(CorpusError::DuplicateRecord(_))));
    }

    #[test]
    fn seed_changes_membership_not_sizes() {
        let rs = labeled(&[(Sentiment::Positive, 40), (Sentiment::Negative, 30), (Sentiment::Neutral, 30)]);
        let a = split_corpus(&rs, 1).unwrap();
        let b = split_corpus(&rs, 2).unwrap();
        assert_eq!(a.sizes(), b.sizes());
        assert_ne!(a, b);
        assert_eq!(a, split_corpus(&rs, 1).unwrap());
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(
            pos in 0usize..80, neg in 0usize..80, neu in 0usize..80, seed in any::<u64>()
        ) {
            let rs = labeled(&[(Sentiment::Positive, pos), (Sentiment::Negative, neg), (Sentiment::Neutral, neu)]);
            let n = rs.len();
            let result = split_corpus(&rs, seed);
            if n < MIN_SPLIT_RECORDS {
                prop_assert!(result.is_err());
                return Ok(());
            }
            let split = result.unwrap();
            let all: Vec<&String> = split.train.iter().chain(&split.validation).chain(&split.test).collect();
            let unique: BTreeSet<&String> = all.iter().copied().collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(unique.len(), n);
            for (size, share) in split.sizes().into_iter().zip(SHARES) {
                prop_assert!((size as f64 - n as f64 * share as f64 / 10.0).abs() <= 1.0);
            }
            for (label, count) in [(Sentiment::Positive, pos), (Sentiment::Negative, neg), (Sentiment::Neutral, neu)] {
                let prefix = label.name().to_lowercase();
                for (ids, size) in [&split.train, &split.validation, &split.test].into_iter().zip(split.sizes()) {
                    let got = ids.iter().filter(|id| id.starts_with(&prefix)).count() as f64;
                    let ideal = count as f64 * size as f64 / n as f64;
                    prop_assert!((got - ideal).abs() < 2.0, "{label}: {got} vs {ideal}");
                }
            }
        }
    }
}
