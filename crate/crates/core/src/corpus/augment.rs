use super::{AnnotationRecord, CorpusError, Flag, LabelDistribution, Sentiment};
use crate::extraction::{extract_entities, EntityKind, Span};
use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use std::collections::{BTreeSet, HashMap};
use std::hash::Hasher;
use std::sync::LazyLock;

const BUNDLED_THESAURUS: &str = include_str!("../../data/thesaurus.txt");

static WORD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z]+").expect("word pattern compiles"));

/// A paraphrase together with the protected spans relocated into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub text: String,
    /// One span per protected input span, same order, covering identical text.
    pub spans: Vec<Span>,
}

/// Produces meaning- and sentiment-preserving variants of a sentence.
///
/// Every protected span must reappear byte-identically in the output. The
/// `variant` index lets callers ask for several different paraphrases of the
/// same sentence; `None` means no variant could be made.
pub trait Augmenter {
    fn augment(&self, text: &str, protected: &[Span], variant: u64) -> Option<Augmented>;
}

/// Seeded synonym substitution outside protected spans.
#[derive(Debug, Clone)]
pub struct RuleParaphraser {
    groups: Vec<Vec<String>>,
    group_of: HashMap<String, usize>,
    seed: u64,
}

impl RuleParaphraser {
    pub fn bundled(seed: u64) -> Self {
        Self::from_groups(BUNDLED_THESAURUS, seed)
    }

    /// Builds from comma-separated synonym groups, one per line; `#` starts a
    /// comment line.
    pub fn from_groups(text: &str, seed: u64) -> Self {
        let mut groups = Vec::new();
        let mut group_of = HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let words: Vec<String> = line
                .split(',')
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect();
            if words.len() < 2 {
                continue;
            }
            for w in &words {
                group_of.entry(w.clone()).or_insert(groups.len());
            }
            groups.push(words);
        }
        RuleParaphraser { groups, group_of, seed }
    }

    fn rng_for(&self, text: &str, variant: u64) -> ChaCha8Rng {
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write(text.as_bytes());
        h.write_u64(variant);
        ChaCha8Rng::seed_from_u64(h.finish())
    }
}

fn match_case(template: &str, word: &str) -> String {
    let mut chars = template.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    if first_upper && template.len() > 1 && chars.all(char::is_uppercase) {
        return word.to_uppercase();
    }
    if first_upper {
        let mut w = word.chars();
        return w.next().map(|c| c.to_uppercase().chain(w).collect()).unwrap_or_default();
    }
    word.to_string()
}

impl Augmenter for RuleParaphraser {
    fn augment(&self, text: &str, protected: &[Span], variant: u64) -> Option<Augmented> {
        let candidates: Vec<(std::ops::Range<usize>, usize)> = WORD_RE
            .find_iter(text)
            .filter_map(|m| {
                let span = Span::from_bytes(text, m.range());
                if protected.iter().any(|p| p.overlaps(&span)) {
                    return None;
                }
                self.group_of.get(&m.as_str().to_lowercase()).map(|&g| (m.range(), g))
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }

        let mut rng = self.rng_for(text, variant);
        let mut chosen: Vec<bool> = candidates.iter().map(|_| rng.random_bool(0.5)).collect();
        if !chosen.contains(&true) {
            chosen[rng.random_range(0..candidates.len())] = true;
        }

        let mut out = String::with_capacity(text.len() + 16);
        // (old char offset, cumulative char shift after it)
        let mut shifts: Vec<(usize, isize)> = Vec::new();
        let mut shift = 0isize;
        let mut last = 0;
        for ((range, group), _) in candidates.into_iter().zip(chosen).filter(|(_, c)| *c) {
            let original = &text[range.clone()];
            let lower = original.to_lowercase();
            let options: Vec<&String> = self.groups[group].iter().filter(|w| **w != lower).collect();
            let replacement = match_case(original, options[rng.random_range(0..options.len())]);
            out.push_str(&text[last..range.start]);
            out.push_str(&replacement);
            last = range.end;
            shift += replacement.chars().count() as isize - original.chars().count() as isize;
            shifts.push((text[..range.end].chars().count(), shift));
        }
        out.push_str(&text[last..]);

        let relocate = |offset: usize| -> usize {
            let delta = shifts.iter().take_while(|(at, _)| *at <= offset).last().map_or(0, |(_, s)| *s);
            (offset as isize + delta) as usize
        };
        let spans = protected
            .iter()
            .map(|p| Span::new(relocate(p.start), relocate(p.start) + p.len()))
            .collect();
        Some(Augmented { text: out, spans })
    }
}

/// Targets that leave the largest label alone and double every other label,
/// capped at the largest count.
pub fn default_targets(current: &LabelDistribution) -> LabelDistribution {
    let max = current.iter().map(|(_, n)| n).max().unwrap_or(0);
    LabelDistribution::new(current.iter().map(|(label, n)| (label, (2 * n).min(max))))
}

/// Protected spans of a record: its predicate first, then moves and player
/// names that do not overlap it.
fn protected_spans(record: &AnnotationRecord) -> Vec<Span> {
    let mut spans = vec![record.predicate_span];
    spans.extend(
        extract_entities(&record.text)
            .into_iter()
            .filter(|e| e.kind.is_move() || e.kind == EntityKind::Player)
            .map(|e| e.span)
            .filter(|s| !s.overlaps(&record.predicate_span)),
    );
    spans
}

/// Tops every label up to its target with augmented copies of that label's
/// records, cycling through the sources in input order.
///
/// Originals come first and unchanged; copies follow, grouped by label. A
/// copy keeps its source's sentiment, player, moves and lemma, gains the
/// `augmented` flag and points back through `source_record`.
pub fn oversample(
    train: &[AnnotationRecord],
    augmenter: &dyn Augmenter,
    targets: &LabelDistribution,
) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let mut by_label: Vec<(Sentiment, Vec<&AnnotationRecord>)> = Sentiment::ALL.iter().map(|&l| (l, Vec::new())).collect();
    for r in train {
        let label = r.sentiment.ok_or_else(|| CorpusError::Unlabeled(r.record_id.clone()))?;
        by_label.iter_mut().find(|(l, _)| *l == label).expect("all labels listed").1.push(r);
    }
    for (label, sources) in &by_label {
        let target = targets.get(*label);
        if target < sources.len() {
            return Err(CorpusError::TargetBelowCurrent {
                label: *label,
                target,
                current: sources.len(),
            });
        }
    }

    let mut taken: BTreeSet<String> = train.iter().map(|r| r.record_id.clone()).collect();
    let mut out = train.to_vec();
    for (label, sources) in &by_label {
        let need = targets.get(*label) - sources.len();
        if need == 0 {
            continue;
        }
        if sources.is_empty() {
            return Err(CorpusError::AugmenterFailure {
                label: *label,
                record_id: String::new(),
            });
        }
        let protected: Vec<Vec<Span>> = sources.iter().map(|r| protected_spans(r)).collect();
        let mut copies = vec![0usize; sources.len()];
        let mut made = 0;
        let mut failures_in_a_row = 0;
        let mut attempt = 0usize;
        while made < need {
            let i = attempt % sources.len();
            let variant = (attempt / sources.len()) as u64;
            attempt += 1;
            let source = sources[i];
            let Some(aug) = augmenter.augment(&source.text, &protected[i], variant) else {
                failures_in_a_row += 1;
                if failures_in_a_row >= sources.len() {
                    return Err(CorpusError::AugmenterFailure {
                        label: *label,
                        record_id: source.record_id.clone(),
                    });
                }
                continue;
            };
            failures_in_a_row = 0;
            let intact = aug.spans.len() == protected[i].len()
                && protected[i]
                    .iter()
                    .zip(&aug.spans)
                    .all(|(old, new)| matches!((old.slice(&source.text), new.slice(&aug.text)), (Some(a), Some(b)) if a == b));
            if !intact {
                return Err(CorpusError::AugmenterContract {
                    record_id: source.record_id.clone(),
                });
            }

            let record_id = loop {
                copies[i] += 1;
                let id = format!("{}-aug{}", source.record_id, copies[i]);
                if taken.insert(id.clone()) {
                    break id;
                }
            };
            let mut copy = source.clone();
            copy.record_id = record_id;
            copy.text = aug.text;
            copy.predicate_span = aug.spans[0];
            copy.flags.insert(Flag::Augmented);
            copy.source_record = Some(source.record_id.clone());
            out.push(copy);
            made += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testing::{labeled, record};
    use proptest::prelude::*;

    #[test]
    fn paraphrase_keeps_protected_text() {
        let p = RuleParaphraser::bundled(42);
        let text = "However, White must play e4 quickly because it is a strong plan";
        let play = text.find("play").unwrap();
        let e4 = text.find("e4").unwrap();
        let protected = [Span::new(play, play + 4), Span::new(e4, e4 + 2), Span::new(9, 14)];
        let aug = p.augment(text, &protected, 0).unwrap();
        assert_ne!(aug.text, text);
        assert_eq!(aug.spans[0].slice(&aug.text), Some("play"));
        assert_eq!(aug.spans[1].slice(&aug.text), Some("e4"));
        assert_eq!(aug.spans[2].slice(&aug.text), Some("White"));
        assert_eq!(p.augment(text, &protected, 0), Some(aug));
    }

    #[test]
    fn nothing_to_replace_yields_none() {
        let p = RuleParaphraser::bundled(1);
        assert_eq!(p.augment("Black plays e5", &[], 0), None);
        assert_eq!(p.augment("a strong move", &[Span::new(2, 8)], 0), None);
    }

    #[test]
    fn case_follows_the_original() {
        assert_eq!(match_case("However", "nevertheless"), "Nevertheless");
        assert_eq!(match_case("VERY", "highly"), "HIGHLY");
        assert_eq!(match_case("good", "fine"), "fine");
    }

    #[test]
    fn default_targets_mirror_doubling() {
        let current: LabelDistribution = "pos=288,neg=117,neu=100".parse().unwrap();
        assert_eq!(default_targets(&current).to_string(), "Positive=288,Negative=234,Neutral=200");
        let close: LabelDistribution = "pos=10,neg=8".parse().unwrap();
        assert_eq!(default_targets(&close).to_string(), "Positive=10,Negative=10");
    }

    #[test]
    fn balanced_training_counts() {
        let train = labeled(&[(Sentiment::Positive, 288), (Sentiment::Negative, 117), (Sentiment::Neutral, 100)]);
        let targets: LabelDistribution = "pos=288,neg=234,neu=200".parse().unwrap();
        let out = oversample(&train, &RuleParaphraser::bundled(42), &targets).unwrap();
        assert_eq!(LabelDistribution::of(&out), targets);
        assert_eq!(&out[..train.len()], &train[..]);
        let added = &out[train.len()..];
        assert_eq!(added.iter().filter(|r| r.sentiment == Some(Sentiment::Negative)).count(), 117);
        for r in added {
            assert!(r.has_flag(Flag::Augmented));
            let src = train.iter().find(|s| Some(&s.record_id) == r.source_record.as_ref()).unwrap();
            assert_eq!(r.sentiment, src.sentiment);
            assert_eq!(r.moves, src.moves);
            assert!(r.validate().is_ok());
        }
    }

    #[test]
    fn targets_equal_to_counts_are_a_no_op() {
        let train = labeled(&[(Sentiment::Positive, 3), (Sentiment::Neutral, 2)]);
        let targets = LabelDistribution::of(&train);
        assert_eq!(oversample(&train, &RuleParaphraser::bundled(0), &targets).unwrap(), train);
    }

    #[test]
    fn failure_modes() {
        let train = labeled(&[(Sentiment::Positive, 3)]);
        let p = RuleParaphraser::bundled(0);
        let below: LabelDistribution = "pos=2".parse().unwrap();
        assert!(matches!(oversample(&train, &p, &below), Err(CorpusError::TargetBelowCurrent { .. })));
        let missing: LabelDistribution = "pos=3,neg=2".parse().unwrap();
        assert!(matches!(oversample(&train, &p, &missing), Err(CorpusError::AugmenterFailure { .. })));

        let mut bare = record("x", Some(Sentiment::Positive));
        bare.text = "White decided to play e4".into();
        bare.predicate_span = Span::new(17, 21);
        let more: LabelDistribution = "pos=2".parse().unwrap();
        assert!(matches!(oversample(&[bare], &p, &more), Err(CorpusError::AugmenterFailure { .. })));
    }

    struct Vandal;
    impl Augmenter for Vandal {
        fn augment(&self, text: &str, protected: &[Span], _: u64) -> Option<Augmented> {
            Some(Augmented {
                text: text.replace("e4", "d4"),
                spans: protected.to_vec(),
            })
        }
    }

    #[test]
    fn contract_breach_is_reported() {
        let train = labeled(&[(Sentiment::Positive, 1)]);
        let targets: LabelDistribution = "pos=2".parse().unwrap();
        assert!(matches!(oversample(&train, &Vandal, &targets), Err(CorpusError::AugmenterContract { .. })));
    }

    proptest! {
        #[test]
        fn oversampling_conserves_and_preserves(pos in 1usize..30, neg in 1usize..30, neu in 1usize..30, seed in any::<u64>()) {
            let train = labeled(&[(Sentiment::Positive, pos), (Sentiment::Negative, neg), (Sentiment::Neutral, neu)]);
            let targets = default_targets(&LabelDistribution::of(&train));
            let out = oversample(&train, &RuleParaphraser::bundled(seed), &targets).unwrap();
            prop_assert_eq!(LabelDistribution::of(&out), targets);
            let ids: BTreeSet<&String> = out.iter().map(|r| &r.record_id).collect();
            prop_assert_eq!(ids.len(), out.len());
            for r in &train {
                prop_assert!(ids.contains(&r.record_id));
            }
            for r in out.iter().filter(|r| r.has_flag(Flag::Augmented)) {
                let src = train.iter().find(|s| Some(&s.record_id) == r.source_record.as_ref()).unwrap();
                prop_assert_eq!(r.sentiment, src.sentiment);
                prop_assert_eq!(r.predicate_span.slice(&r.text), src.predicate_span.slice(&src.text));
            }
        }
    }
}
