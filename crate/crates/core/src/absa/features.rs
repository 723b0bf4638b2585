use super::SEP;
use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::hash::Hasher;

pub const MIN_DIMENSION: usize = 1 << 10;
pub const DEFAULT_DIMENSION: usize = 1 << 16;

const TRIGRAM_WEIGHT: f64 = 0.3;

/// Sparse vector; entries sorted by index, indices unique and below
/// `dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dimension: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn zero(dimension: usize) -> Self {
        FeatureVector {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds from arbitrary `(index, value)` pairs, summing duplicates and
    /// dropping zeros. `None` if an index is out of range.
    pub fn from_pairs(dimension: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Option<Self> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i as usize >= dimension {
                return None;
            }
            *acc.entry(i).or_default() += v;
        }
        Some(FeatureVector {
            dimension,
            entries: acc.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Turns serialized inputs into feature vectors. Implement this to put a
/// different encoder in front of the classification head.
pub trait Encoder: Send + Sync {
    fn name(&self) -> String;
    fn dimension(&self) -> usize;
    fn encode(&self, serialized: &str) -> FeatureVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEncoder {
    pub dimension: usize,
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder {
            dimension: DEFAULT_DIMENSION,
        }
    }
}

impl Encoder for HashingEncoder {
    fn name(&self) -> String {
        "hashing".into()
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode(&self, serialized: &str) -> FeatureVector {
        featurize(serialized, self.dimension)
    }
}

fn hash(kind: u8, parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u8(kind);
    for p in parts {
        h.write(p.as_bytes());
        h.write_u8(0xff);
    }
    h.finish()
}

fn tokens(segment: &str) -> Vec<String> {
    segment
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| matches!(c, ',' | ';' | ':' | '"' | '(' | ')' | '\'')))
        .map(|t| t.trim_end_matches('.'))
        .filter(|t| !t.is_empty())
        // Words fold case; move notation keeps it (Bb5 and bb5 differ).
        .map(|t| {
            if t.chars().all(char::is_alphabetic) {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect()
}

/// Hashed bag of unigrams, bigrams and character trigrams, L2-normalized
/// per segment.
fn segment_features(segment: &str, offset: usize, width: usize, out: &mut BTreeMap<u32, f64>) {
    let toks = tokens(segment);
    let mut local: BTreeMap<u32, f64> = BTreeMap::new();
    let mut add = |h: u64, w: f64| {
        *local.entry((offset + (h % width as u64) as usize) as u32).or_default() += w;
    };
    for t in &toks {
        add(hash(1, &[t]), 1.0);
        let padded: Vec<char> = format!("<{t}>").chars().collect();
        for tri in padded.windows(3) {
            add(hash(3, &[&tri.iter().collect::<String>()]), TRIGRAM_WEIGHT);
        }
    }
    for pair in toks.windows(2) {
        add(hash(2, &[&pair[0], &pair[1]]), 1.0);
    }
    let norm = local.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (i, v) in local {
            out.insert(i, v / norm);
        }
    }
}

/// Deterministic hashed features of a serialized input.
///
/// The sentence (before the first `[SEP]`) hashes into the lower half of the
/// index space and the aspect segment (everything after it) into the upper
/// half, so the two never collide. `dimension` below [`MIN_DIMENSION`] is
/// raised to it.
pub fn featurize(serialized: &str, dimension: usize) -> FeatureVector {
    let dimension = dimension.max(MIN_DIMENSION);
    let half = dimension / 2;
    let (sentence, aspect) = match serialized.find(SEP) {
        Some(at) => (&serialized[..at], &serialized[at + SEP.len()..]),
        None => (serialized, ""),
    };
    let mut out = BTreeMap::new();
    segment_features(sentence, 0, half, &mut out);
    segment_features(aspect, half, dimension - half, &mut out);
    FeatureVector {
        dimension,
        entries: out.into_iter().collect(),
    }
}
