use super::{ClusterError, VerbClustering, VerbGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Chinese Whispers label propagation.
///
/// Every node starts in its own class. Each iteration visits the nodes in a
/// freshly shuffled order; a visited node adopts the class with the largest
/// summed edge weight among its neighbors, ties broken at random. Isolated
/// nodes keep their class. All randomness comes from one ChaCha8 stream
/// seeded with `seed`, so the result is reproducible on any platform.
///
/// Cluster ids are renumbered from 0 in order of each cluster's
/// alphabetically first lemma.
pub fn chinese_whispers(graph: &VerbGraph, seed: u64, iterations: usize) -> Result<VerbClustering, ClusterError> {
    if graph.is_empty() {
        return Err(ClusterError::EmptyGraph);
    }
    if iterations == 0 {
        return Err(ClusterError::InvalidIterations);
    }
    let n = graph.len();
    let mut class: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    let mut best: Vec<usize> = Vec::new();

    for _ in 0..iterations {
        order.shuffle(&mut rng);
        for &v in &order {
            let neighbors = graph.neighbors(v);
            if neighbors.is_empty() {
                continue;
            }
            scores.clear();
            for &(u, w) in neighbors {
                *scores.entry(class[u]).or_default() += w;
            }
            let top = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
            best.clear();
            best.extend(scores.iter().filter(|(_, s)| **s == top).map(|(c, _)| *c));
            class[v] = if best.len() == 1 {
                best[0]
            } else {
                best[rng.random_range(0..best.len())]
            };
        }
    }

    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    let assignment = graph
        .nodes()
        .iter()
        .zip(&class)
        .map(|(lemma, c)| {
            let next = renumber.len();
            (lemma.clone(), *renumber.entry(*c).or_insert(next))
        })
        .collect();
    Ok(VerbClustering {
        assignment,
        seed,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Probability that a unit-weight triangle has not reached a single class,
    // from exact enumeration of the propagation Markov chain (uniform visiting
    // order, uniform tie-breaks): 1/4 after one iteration, about 1.86e-39
    // after fifty.
    const TRIANGLE_SPLIT_AFTER_1: f64 = 0.25;
    const TRIANGLE_SPLIT_AFTER_50: f64 = 1.8557896141116427e-39;

    fn triangle() -> VerbGraph {
        let mut g = VerbGraph::new(["a", "b", "c"], 40.0);
        for (x, y) in [("a", "b"), ("b", "c"), ("a", "c")] {
            g.add_edge(x, y, 100.0).unwrap();
        }
        g
    }

    pub(crate) fn two_cliques() -> VerbGraph {
        let mut g = VerbGraph::new(["attack", "assault", "threaten", "defend", "parry", "repel"], 40.0);
        for clique in [["attack", "assault", "threaten"], ["defend", "parry", "repel"]] {
            for i in 0..3 {
                for j in i + 1..3 {
                    g.add_edge(clique[i], clique[j], 100.0).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn two_cliques_give_two_clusters() {
        for seed in 0..200 {
            let c = chinese_whispers(&two_cliques(), seed, 50).unwrap();
            assert_eq!(c.cluster_count(), 2, "seed {seed}");
            assert_eq!(c.cluster_of("attack"), c.cluster_of("assault"));
            assert_eq!(c.cluster_of("attack"), c.cluster_of("threaten"));
            assert_eq!(c.cluster_of("defend"), c.cluster_of("repel"));
            assert_ne!(c.cluster_of("attack"), c.cluster_of("defend"));
        }
    }

    #[test]
    fn one_iteration_split_rate_matches_exact_chain() {
        const { assert!(TRIANGLE_SPLIT_AFTER_50 < 1e-30) };
        let trials = 4000;
        let split = (0..trials)
            .filter(|&seed| chinese_whispers(&triangle(), seed, 1).unwrap().cluster_count() > 1)
            .count() as f64;
        let expected = trials as f64 * TRIANGLE_SPLIT_AFTER_1;
        let sigma = (trials as f64 * TRIANGLE_SPLIT_AFTER_1 * (1.0 - TRIANGLE_SPLIT_AFTER_1)).sqrt();
        assert!((split - expected).abs() < 5.0 * sigma, "{split} vs {expected}");
    }

    #[test]
    fn isolated_node_is_its_own_cluster() {
        let c = chinese_whispers(&VerbGraph::new(["castle"], 40.0), 50, 50).unwrap();
        assert_eq!(c.cluster_of("castle"), Some(0));
        assert_eq!(c.cluster_count(), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(chinese_whispers(&VerbGraph::new(Vec::<String>::new(), 40.0), 1, 1), Err(ClusterError::EmptyGraph)));
        assert!(matches!(chinese_whispers(&triangle(), 1, 0), Err(ClusterError::InvalidIterations)));
    }

    #[test]
    fn repeated_runs_are_identical() {
        let a = chinese_whispers(&two_cliques(), 50, 50).unwrap();
        let b = chinese_whispers(&two_cliques(), 50, 50).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    fn random_graph() -> impl Strategy<Value = VerbGraph> {
        (1usize..16).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 40.0f64..=100.0), 0..40).prop_map(move |edges| {
                let mut g = VerbGraph::new((0..n).map(|i| format!("v{i:02}")), 40.0);
                for (a, b, w) in edges {
                    if a != b {
                        g.add_edge(&format!("v{a:02}"), &format!("v{b:02}"), w).unwrap();
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn clusters_respect_components(g in random_graph(), seed in any::<u64>(), iterations in 1usize..60) {
            let c = chinese_whispers(&g, seed, iterations).unwrap();
            prop_assert_eq!(c.assignment.len(), g.len());
            let count = c.cluster_count();
            prop_assert!(count <= g.len());
            let ids: std::collections::BTreeSet<usize> = c.assignment.values().copied().collect();
            prop_assert_eq!(ids, (0..count).collect());
            let comp = g.components();
            for (i, a) in g.nodes().iter().enumerate() {
                for (j, b) in g.nodes().iter().enumerate() {
                    if c.cluster_of(a) == c.cluster_of(b) {
                        prop_assert_eq!(comp[i], comp[j]);
                    }
                }
            }
            prop_assert_eq!(chinese_whispers(&g, seed, iterations).unwrap(), c);
        }
    }
}
