use super::CorpusError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`, for two aligned label lists.
///
/// When chance agreement is already 1 (both raters used one and the same
/// label throughout) the raters agree perfectly and 1.0 is returned.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, CorpusError> {
    if a.len() != b.len() {
        return Err(CorpusError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n = a.len() as f64;
    let mut marginals: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
        agree += usize::from(x == y);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marginals.values().map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n)).sum();
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok(((p_o - p_e) / (1.0 - p_e)).clamp(-1.0, 1.0))
}

/// Which ids every annotator labels, and which each labels alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IaaAssignment {
    pub common: Vec<String>,
    pub specific: BTreeMap<String, Vec<String>>,
}

/// Draws a common subset of `floor(fraction * n)` ids for every annotator,
/// then disjoint annotator-specific subsets from the rest.
///
/// With `specific_fraction` set, each annotator receives
/// `floor(specific_fraction * n)` ids of their own; otherwise the remaining
/// ids are dealt round-robin in annotator order. Ids are shuffled with a
/// generator seeded by `seed` after sorting, so input order is irrelevant.
pub fn assign_iaa_subset(
    ids: &[String],
    annotators: &[String],
    fraction: f64,
    specific_fraction: Option<f64>,
    seed: u64,
) -> Result<IaaAssignment, CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!("common fraction {fraction} outside (0, 1)")));
    }
    if annotators.is_empty() {
        return Err(CorpusError::InvalidArgument("no annotators".into()));
    }
    let n = ids.len();
    let mut pool: Vec<String> = ids.to_vec();
    pool.sort();
    pool.dedup();
    if pool.len() != n {
        return Err(CorpusError::InvalidArgument("duplicate ids".into()));
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let common_n = (fraction * n as f64).floor() as usize;
    let rest = pool.split_off(common_n);
    let mut common = pool;
    common.sort();

    let mut specific: BTreeMap<String, Vec<String>> = annotators.iter().map(|a| (a.clone(), Vec::new())).collect();
    if specific.len() != annotators.len() {
        return Err(CorpusError::InvalidArgument("duplicate annotator ids".into()));
    }
    match specific_fraction {
        Some(f) => {
            let each = (f * n as f64).floor() as usize;
            if !(0.0..1.0).contains(&f) || each * annotators.len() > rest.len() {
                return Err(CorpusError::InvalidArgument(format!(
                    "specific fraction {f} for {} annotators exceeds the {} ids left",
                    annotators.len(),
                    rest.len()
                )));
            }
            for (a, chunk) in annotators.iter().zip(rest.chunks(each.max(1))) {
                if each > 0 {
                    specific.get_mut(a).expect("annotator present").extend_from_slice(chunk);
                }
            }
        }
        None => {
            for (i, id) in rest.into_iter().enumerate() {
                specific.get_mut(&annotators[i % annotators.len()]).expect("annotator present").push(id);
            }
        }
    }
    for list in specific.values_mut() {
        list.sort();
    }
    Ok(IaaAssignment { common, specific })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentiment::{self, Negative as N, Neutral as U, Positive as P};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    // Closed form for two labels: 2(ad - bc) / ((a+b)(b+d) + (a+c)(c+d)).
    fn binary_kappa(a: &[bool], b: &[bool]) -> f64 {
        let count = |x: bool, y: bool| a.iter().zip(b).filter(|&(&p, &q)| p == x && q == y).count() as f64;
        let (tt, tf, ft, ff) = (count(true, true), count(true, false), count(false, true), count(false, false));
        2.0 * (tt * ff - tf * ft) / ((tt + tf) * (tf + ff) + (tt + ft) * (ft + ff))
    }

    #[test]
    fn fixture() {
        let k = cohen_kappa(&[P, P, N, N], &[P, N, N, N]).unwrap();
        assert!((k - 0.5).abs() < 1e-12, "{k}");
        let oracle = binary_kappa(&[true, true, false, false], &[true, false, false, false]);
        assert!((k - oracle).abs() < 1e-12);
    }

    #[test]
    fn chance_level_is_zero() {
        assert_eq!(cohen_kappa(&[P, N], &[P, P]).unwrap(), 0.0);
        let k = cohen_kappa(&[P, P, N, N], &[P, N, P, N]).unwrap();
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(cohen_kappa(&[P], &[P, N]), Err(CorpusError::LengthMismatch { left: 1, right: 2 })));
        assert!(matches!(cohen_kappa::<Sentiment>(&[], &[]), Err(CorpusError::Empty)));
        assert_eq!(cohen_kappa(&[U, U], &[U, U]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[P, P], &[N, N]).unwrap(), 0.0);
    }

    #[test]
    fn iaa_examples() {
        let ids: Vec<String> = (0..726).map(|i| format!("r{i:03}")).collect();
        let annotators = vec!["a".to_string(), "b".to_string()];
        let got = assign_iaa_subset(&ids, &annotators, 0.2, Some(0.1), 7).unwrap();
        assert_eq!(got.common.len(), 145);
        assert_eq!(got.specific["a"].len(), 72);
        assert_eq!(got.specific["b"].len(), 72);

        let ten: Vec<String> = ids[..10].to_vec();
        assert_eq!(assign_iaa_subset(&ten, &annotators, 0.2, None, 7).unwrap().common.len(), 2);
        assert!(assign_iaa_subset(&ten, &annotators, 1.0, None, 7).is_err());
        assert!(assign_iaa_subset(&ten, &annotators, 0.2, Some(0.5), 7).is_err());
    }

    proptest! {
        #[test]
        fn kappa_matches_binary_closed_form(pairs in proptest::collection::vec(any::<(bool, bool)>(), 1..60)) {
            let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            let k = cohen_kappa(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&k));
            let oracle = binary_kappa(&a, &b);
            if oracle.is_finite() {
                prop_assert!((k - oracle).abs() < 1e-9, "{} vs {}", k, oracle);
            }
        }

        #[test]
        fn kappa_of_self_is_one(labels in proptest::collection::vec(0u8..4, 2..50)) {
            prop_assume!(labels.iter().any(|&l| l != labels[0]));
            prop_assert_eq!(cohen_kappa(&labels, &labels).unwrap(), 1.0);
        }

        #[test]
        fn iaa_subsets_are_disjoint(n in 0usize..300, k in 1usize..4, frac in 0.05f64..0.5, seed in any::<u64>()) {
            let ids: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
            let annotators: Vec<String> = (0..k).map(|i| format!("a{i}")).collect();
            let got = assign_iaa_subset(&ids, &annotators, frac, None, seed).unwrap();
            prop_assert_eq!(got.common.len(), (frac * n as f64).floor() as usize);
            let mut seen: BTreeSet<&String> = got.common.iter().collect();
            for list in got.specific.values() {
                for id in list {
                    prop_assert!(seen.insert(id));
                }
            }
            prop_assert_eq!(seen.len(), n);
        }
    }
}
