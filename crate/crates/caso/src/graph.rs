//! Undirected simple social graph in compressed row form.

use std::collections::HashMap;

use crate::error::{CasoError, Result};
use crate::sparse::Csr;

/// Maps arbitrary string tokens to dense indices, stable by first appearance.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    forward: HashMap<String, usize>,
    reverse: Vec<String>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, token: &str) -> usize {
        if let Some(&idx) = self.forward.get(token) {
            return idx;
        }
        let idx = self.reverse.len();
        self.forward.insert(token.to_string(), idx);
        self.reverse.push(token.to_string());
        idx
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.forward.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.reverse[idx]
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }
}

/// Symmetric 0/1 adjacency with sorted, deduplicated, self-loop-free rows.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    n_users: usize,
    adjacency: Csr,
    degree: Vec<usize>,
    n_edges: usize,
}

impl SocialGraph {
    /// Builds from dense-index edge pairs. Both orientations and duplicates
    /// may appear; self-loops are dropped and counted. `n_users` may exceed
    /// the largest referenced index (trailing users are isolated).
    pub fn from_edges(
        n_users: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Self, usize)> {
        if n_users == 0 {
            return Err(CasoError::EmptyGraph);
        }
        let mut self_loops = 0usize;
        let mut triplets = Vec::new();
        for (u, v) in edges {
            assert!(u < n_users && v < n_users, "edge ({u},{v}) out of bounds");
            if u == v {
                self_loops += 1;
                continue;
            }
            triplets.push((u, v, 1.0));
            triplets.push((v, u, 1.0));
        }
        // Duplicates collapse to values > 1; clamp back to 0/1.
        let adjacency =
            Csr::from_triplets(n_users, n_users, triplets).map_values(|_, _, _| 1.0);
        let degree: Vec<usize> = (0..n_users).map(|u| adjacency.row_indices(u).len()).collect();
        let n_edges = degree.iter().sum::<usize>() / 2;
        Ok((
            SocialGraph {
                n_users,
                adjacency,
                degree,
                n_edges,
            },
            self_loops,
        ))
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degree[u]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        self.adjacency.row_indices(u)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.contains(u, v)
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }
}

/// Result of building a graph from raw token pairs.
#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: SocialGraph,
    pub ids: IdMap,
    pub self_loops_dropped: usize,
}

/// Remaps token pairs to dense indices (stable by first appearance) and
/// builds the deduplicated symmetric graph.
pub fn build_social_graph<S: AsRef<str>>(edge_pairs: &[(S, S)]) -> Result<BuiltGraph> {
    if edge_pairs.is_empty() {
        return Err(CasoError::EmptyGraph);
    }
    let mut ids = IdMap::new();
    let mut edges = Vec::with_capacity(edge_pairs.len());
    for (a, b) in edge_pairs {
        let u = ids.get_or_insert(a.as_ref());
        let v = ids.get_or_insert(b.as_ref());
        edges.push((u, v));
    }
    let (graph, self_loops_dropped) = SocialGraph::from_edges(ids.len(), edges)?;
    Ok(BuiltGraph {
        graph,
        ids,
        self_loops_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn triangle() {
        let built = build_social_graph(&[("a", "b"), ("b", "c"), ("c", "a")]).unwrap();
        let g = built.graph;
        assert_eq!(g.n_users(), 3);
        assert_eq!(g.n_edges(), 3);
        assert_eq!(g.degrees(), &[2, 2, 2]);
    }

    #[test]
    fn dedup_and_symmetry() {
        let built = build_social_graph(&[("a", "b"), ("b", "a"), ("a", "b")]).unwrap();
        let g = built.graph;
        assert_eq!(g.n_users(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.degrees(), &[1, 1]);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
    }

    #[test]
    fn self_loops_dropped_with_count() {
        let built = build_social_graph(&[("a", "a"), ("a", "b")]).unwrap();
        assert_eq!(built.self_loops_dropped, 1);
        assert_eq!(built.graph.n_edges(), 1);
    }

    #[test]
    fn empty_edge_list_is_error() {
        let pairs: Vec<(&str, &str)> = vec![];
        let err = build_social_graph(&pairs).unwrap_err();
        assert!(err.to_string().contains("empty graph"));
    }

    #[test]
    fn id_map_stable_by_first_appearance() {
        let built = build_social_graph(&[("x", "y"), ("z", "x")]).unwrap();
        assert_eq!(built.ids.get("x"), Some(0));
        assert_eq!(built.ids.get("y"), Some(1));
        assert_eq!(built.ids.get("z"), Some(2));
        assert_eq!(built.ids.token(2), "z");
    }

    /// CSR rows must match a brute-force adjacency-set construction.
    #[test]
    fn csr_matches_set_oracle() {
        let pairs = [
            (3usize, 1usize),
            (1, 3),
            (0, 5),
            (5, 0),
            (2, 2),
            (4, 1),
            (0, 4),
            (5, 4),
            (3, 0),
            (1, 0),
        ];
        let (g, loops) = SocialGraph::from_edges(6, pairs.iter().copied()).unwrap();
        assert_eq!(loops, 1);
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); 6];
        for &(u, v) in &pairs {
            if u != v {
                sets[u].insert(v);
                sets[v].insert(u);
            }
        }
        for u in 0..6 {
            let want: Vec<usize> = sets[u].iter().copied().collect();
            assert_eq!(g.neighbors(u), want.as_slice(), "row {u}");
            assert_eq!(g.degree(u), want.len());
        }
        assert_eq!(g.n_edges(), sets.iter().map(|s| s.len()).sum::<usize>() / 2);
    }
}
