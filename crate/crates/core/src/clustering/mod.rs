//! Grouping predicate lemmas into move-action types.
//!
//! Lemmas become nodes of a similarity graph, Chinese Whispers partitions the
//! graph, and anchor lemmas name each cluster with one of the five action
//! types.

mod graph;
mod whispers;

pub use graph::{build_verb_graph, Embeddings, VerbGraph};
pub use whispers::chinese_whispers;

use crate::extraction::ActionType;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const DEFAULT_THRESHOLD: f64 = 40.0;
pub const DEFAULT_SEED: u64 = 50;
pub const DEFAULT_ITERATIONS: usize = 50;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("no embedding for lemma {0}")]
    MissingEmbedding(String),
    #[error("vector for {lemma} has {found} components, expected {expected}")]
    DimensionMismatch { lemma: String, expected: usize, found: usize },
    #[error("vector for {0} is all zeros")]
    ZeroVector(String),
    #[error("embedding line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("iterations must be at least 1")]
    InvalidIterations,
    #[error("lemma {0} is not a graph node")]
    UnknownNode(String),
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("clustering line {line}: {message}")]
    ClusteringFormat { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

/// Cluster id of every lemma, with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbClustering {
    pub assignment: BTreeMap<String, usize>,
    pub seed: u64,
    pub iterations: usize,
}

impl VerbClustering {
    pub fn cluster_of(&self, lemma: &str) -> Option<usize> {
        self.assignment.get(lemma).copied()
    }

    pub fn cluster_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }

    /// Members of every cluster, indexed by cluster id, each list sorted.
    pub fn clusters(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (lemma, c) in &self.assignment {
            out[*c].push(lemma.as_str());
        }
        out
    }
}

/// Anchor lemmas per action type.
pub type Anchors = BTreeMap<ActionType, Vec<String>>;

pub fn default_anchors() -> Anchors {
    let mut a = Anchors::new();
    for (t, lemmas) in [
        (ActionType::Attack, &["attack"][..]),
        (ActionType::Capture, &["capture", "take"]),
        (ActionType::Defend, &["defend"]),
        (ActionType::Protect, &["protect", "guard"]),
        (ActionType::Move, &["play", "move"]),
    ] {
        a.insert(t, lemmas.iter().map(|s| s.to_string()).collect());
    }
    a
}

/// Action type of every cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTypeMap {
    pub by_cluster: BTreeMap<usize, ActionType>,
}

impl ActionTypeMap {
    pub fn type_of_cluster(&self, cluster: usize) -> ActionType {
        self.by_cluster.get(&cluster).copied().unwrap_or(ActionType::Move)
    }

    /// Action type of every clustered lemma.
    pub fn lemma_types(&self, clustering: &VerbClustering) -> BTreeMap<String, ActionType> {
        clustering
            .assignment
            .iter()
            .map(|(lemma, c)| (lemma.clone(), self.type_of_cluster(*c)))
            .collect()
    }
}

/// Names each cluster after the type of the anchors it contains. Clusters
/// with no anchor, or with anchors of more than one type, become Move.
pub fn assign_action_types(clustering: &VerbClustering, anchors: &Anchors) -> ActionTypeMap {
    let mut found: BTreeMap<usize, BTreeSet<ActionType>> = BTreeMap::new();
    for (t, lemmas) in anchors {
        for lemma in lemmas {
            if let Some(c) = clustering.cluster_of(lemma) {
                found.entry(c).or_default().insert(*t);
            }
        }
    }
    let by_cluster = (0..clustering.cluster_count())
        .map(|c| {
            let t = match found.get(&c) {
                Some(types) if types.len() == 1 => *types.first().expect("one element"),
                _ => ActionType::Move,
            };
            (c, t)
        })
        .collect();
    ActionTypeMap { by_cluster }
}

/// `lemma<TAB>cluster_id<TAB>action_type` lines, sorted by lemma.
pub fn clustering_to_tsv(clustering: &VerbClustering, types: &ActionTypeMap) -> String {
    clustering
        .assignment
        .iter()
        .map(|(lemma, c)| format!("{lemma}\t{c}\t{}\n", types.type_of_cluster(*c)))
        .collect()
}

/// Reads the output of [`clustering_to_tsv`] into lemma → (cluster, type).
pub fn parse_clustering_tsv(text: &str) -> Result<BTreeMap<String, (usize, ActionType)>, ClusterError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| ClusterError::ClusteringFormat { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        let [lemma, cluster, kind] = cols[..] else {
            return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
        };
        let cluster = cluster.trim().parse().map_err(|_| bad(format!("bad cluster id {cluster:?}")))?;
        let kind = kind.trim().parse().map_err(|_| bad(format!("bad action type {kind:?}")))?;
        out.insert(lemma.trim().to_string(), (cluster, kind));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustering(groups: &[&[&str]]) -> VerbClustering {
        let assignment = groups
            .iter()
            .enumerate()
            .flat_map(|(c, g)| g.iter().map(move |l| (l.to_string(), c)))
            .collect();
        VerbClustering {
            assignment,
            seed: 50,
            iterations: 50,
        }
    }

    #[test]
    fn anchors_name_clusters() {
        let c = clustering(&[&["attack", "assault", "threaten"], &["shuffle"], &["attack2", "defend", "menace"]]);
        let mut anchors = default_anchors();
        anchors.get_mut(&ActionType::Attack).unwrap().push("attack2".into());
        let types = assign_action_types(&c, &anchors);
        assert_eq!(types.type_of_cluster(0), ActionType::Attack);
        assert_eq!(types.type_of_cluster(1), ActionType::Move);
        assert_eq!(types.type_of_cluster(2), ActionType::Move);
        assert_eq!(types.lemma_types(&c)["assault"], ActionType::Attack);
    }

    #[test]
    fn several_anchors_of_one_type_agree() {
        let c = clustering(&[&["capture", "take", "seize"]]);
        assert_eq!(assign_action_types(&c, &default_anchors()).type_of_cluster(0), ActionType::Capture);
    }

    #[test]
    fn every_default_anchor_type_is_covered() {
        let anchors = default_anchors();
        assert_eq!(anchors.keys().copied().collect::<Vec<_>>(), ActionType::ALL.to_vec());
    }

    #[test]
    fn tsv_round_trip() {
        let c = clustering(&[&["attack", "assault"], &["guard"]]);
        let types = assign_action_types(&c, &default_anchors());
        let tsv = clustering_to_tsv(&c, &types);
        assert_eq!(tsv, "assault\t0\tAttack\nattack\t0\tAttack\nguard\t1\tProtect\n");
        let parsed = parse_clustering_tsv(&tsv).unwrap();
        assert_eq!(parsed["guard"], (1, ActionType::Protect));
        assert!(matches!(parse_clustering_tsv("a\t1"), Err(ClusterError::ClusteringFormat { line: 1, .. })));
    }
}
