use super::ClusterError;
use crate::extraction::VerbLexicon;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Lemma vectors of one shared dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embeddings {
    vectors: BTreeMap<String, Vec<f64>>,
    dimension: usize,
}

impl Embeddings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lemma: impl Into<String>, vector: Vec<f64>) -> Result<(), ClusterError> {
        let lemma = lemma.into();
        if self.vectors.is_empty() {
            self.dimension = vector.len();
        } else if vector.len() != self.dimension {
            return Err(ClusterError::DimensionMismatch {
                lemma,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::EmbeddingFormat {
                line: 0,
                message: format!("non-finite component in vector for {lemma}"),
            });
        }
        self.vectors.insert(lemma, vector);
        Ok(())
    }

    pub fn get(&self, lemma: &str) -> Option<&[f64]> {
        self.vectors.get(lemma).map(Vec::as_slice)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Parses `lemma v1 v2 ...` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ClusterError> {
        let mut e = Embeddings::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let lemma = fields.next().expect("non-empty line has a field").to_lowercase();
            let vector = fields
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|err| ClusterError::EmbeddingFormat {
                    line: i + 1,
                    message: err.to_string(),
                })?;
            if vector.is_empty() {
                return Err(ClusterError::EmbeddingFormat {
                    line: i + 1,
                    message: format!("no components for {lemma}"),
                });
            }
            e.insert(lemma, vector).map_err(|err| match err {
                ClusterError::EmbeddingFormat { message, .. } => ClusterError::EmbeddingFormat { line: i + 1, message },
                other => other,
            })?;
        }
        Ok(e)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClusterError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ClusterError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (lemma, v) in &self.vectors {
            out.push_str(lemma);
            for x in v {
                write!(out, " {x}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

/// Undirected weighted graph over lemmas; weights on a 0-100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbGraph {
    nodes: Vec<String>,
    adjacency: Vec<Vec<(usize, f64)>>,
    threshold: f64,
}

impl VerbGraph {
    /// Graph with the given nodes (sorted and deduplicated) and no edges.
    pub fn new(nodes: impl IntoIterator<Item = impl Into<String>>, threshold: f64) -> Self {
        let mut nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        nodes.sort();
        nodes.dedup();
        let adjacency = vec![Vec::new(); nodes.len()];
        VerbGraph {
            nodes,
            adjacency,
            threshold,
        }
    }

    pub fn index_of(&self, lemma: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(lemma)).ok()
    }

    /// Adds or raises the edge between two lemmas.
    pub fn add_edge(&mut self, a: &str, b: &str, weight: f64) -> Result<(), ClusterError> {
        let (i, j) = match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => (i, j),
            (None, _) => return Err(ClusterError::UnknownNode(a.to_string())),
            (_, None) => return Err(ClusterError::UnknownNode(b.to_string())),
        };
        if i == j {
            return Err(ClusterError::InvalidEdge(format!("self-loop on {a}")));
        }
        if !(weight >= self.threshold && weight <= 100.0) {
            return Err(ClusterError::InvalidEdge(format!(
                "weight {weight} for {a}-{b} outside [{}, 100]",
                self.threshold
            )));
        }
        for (from, to) in [(i, j), (j, i)] {
            match self.adjacency[from].iter_mut().find(|(n, _)| *n == to) {
                Some(edge) => edge.1 = edge.1.max(weight),
                None => {
                    self.adjacency[from].push((to, weight));
                    self.adjacency[from].sort_by_key(|(n, _)| *n);
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Neighbors of node `i` with edge weights, by ascending index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.index_of(a)?, self.index_of(b)?);
        self.adjacency[i].iter().find(|(n, _)| *n == j).map(|(_, w)| *w)
    }

    /// Each undirected edge once, as `(lower index, higher index, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |(j, _)| *j > i).map(move |&(j, w)| (i, j, w)))
    }

    /// Connected component id of every node.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.len()];
        let mut next = 0;
        for start in 0..self.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.adjacency[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Similarity graph over `lemmas`: an edge joins two lemmas when 100 times
/// their cosine similarity reaches `threshold`, with that value as weight,
/// or when the lexicon lists them as synonyms, with weight 100.
pub fn build_verb_graph(
    lemmas: &[String],
    lexicon: &VerbLexicon,
    embeddings: &Embeddings,
    threshold: f64,
) -> Result<VerbGraph, ClusterError> {
    if !(0.0..=100.0).contains(&threshold) {
        return Err(ClusterError::InvalidEdge(format!("threshold {threshold} outside [0, 100]")));
    }
    let mut graph = VerbGraph::new(lemmas.iter().cloned(), threshold);
    let mut vectors = Vec::with_capacity(graph.len());
    for lemma in graph.nodes() {
        let v = embeddings.get(lemma).ok_or_else(|| ClusterError::MissingEmbedding(lemma.clone()))?;
        if v.iter().all(|x| *x == 0.0) {
            return Err(ClusterError::ZeroVector(lemma.clone()));
        }
        vectors.push(v);
    }
    let nodes = graph.nodes().to_vec();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let weight = if lexicon.are_synonyms(&nodes[i], &nodes[j]) {
                100.0
            } else {
                (100.0 * cosine(vectors[i], vectors[j])).min(100.0)
            };
            if weight >= threshold {
                graph.add_edge(&nodes[i], &nodes[j], weight)?;
            }
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemmas(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn embeddings(rows: &[(&str, &[f64])]) -> Embeddings {
        let mut e = Embeddings::new();
        for (lemma, v) in rows {
            e.insert(*lemma, v.to_vec()).unwrap();
        }
        e
    }

    #[test]
    fn synonyms_get_full_weight() {
        let e = embeddings(&[("attack", &[1.0, 0.0]), ("assault", &[0.0, 1.0])]);
        let g = build_verb_graph(&lemmas(&["attack", "assault"]), &VerbLexicon::bundled(), &e, 40.0).unwrap();
        assert_eq!(g.weight("attack", "assault"), Some(100.0));
    }

    #[test]
    fn cosine_threshold() {
        let e = embeddings(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[0.5, 0.75f64.sqrt()])]);
        let g = build_verb_graph(&lemmas(&["a", "b", "c"]), &VerbLexicon::default(), &e, 40.0).unwrap();
        assert_eq!(g.weight("a", "b"), None);
        assert!((g.weight("a", "c").unwrap() - 50.0).abs() < 1e-9);
        assert!((g.weight("b", "c").unwrap() - 100.0 * 0.75f64.sqrt()).abs() < 1e-9);
        assert_eq!(g.edges().count(), 2);
    }

    #[test]
    fn embedding_errors() {
        let e = embeddings(&[("a", &[1.0, 0.0])]);
        let lex = VerbLexicon::default();
        assert!(matches!(build_verb_graph(&lemmas(&["a", "z"]), &lex, &e, 40.0), Err(ClusterError::MissingEmbedding(l)) if l == "z"));
        let mut e2 = e.clone();
        assert!(matches!(e2.insert("b", vec![1.0]), Err(ClusterError::DimensionMismatch { .. })));
        e2.insert("zero", vec![0.0, 0.0]).unwrap();
        assert!(matches!(build_verb_graph(&lemmas(&["a", "zero"]), &lex, &e2, 40.0), Err(ClusterError::ZeroVector(_))));
    }

    #[test]
    fn embedding_file_round_trip() {
        let e = Embeddings::parse("# vectors\nplay 1 0.5\nmove 0.25 -1\n\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.get("move"), Some(&[0.25, -1.0][..]));
        assert_eq!(Embeddings::parse(&e.to_text()).unwrap(), e);
        assert!(matches!(Embeddings::parse("play 1 x"), Err(ClusterError::EmbeddingFormat { line: 1, .. })));
        assert!(matches!(Embeddings::parse("play 1 2\nmove 1"), Err(ClusterError::DimensionMismatch { .. })));
    }

    #[test]
    fn edges_reject_self_loops_and_low_weights() {
        let mut g = VerbGraph::new(["a", "b"], 40.0);
        assert!(g.add_edge("a", "a", 50.0).is_err());
        assert!(g.add_edge("a", "b", 39.0).is_err());
        assert!(g.add_edge("a", "c", 50.0).is_err());
        g.add_edge("b", "a", 60.0).unwrap();
        assert_eq!(g.weight("a", "b"), Some(60.0));
        assert_eq!(g.components(), vec![0, 0]);
    }
}
