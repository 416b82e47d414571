//! Simple undirected graphs with a fixed vertex order.
//!
//! Neighbor lists are kept sorted, which fixes the order of the edges
//! incident to each vertex. The self-avoiding walk tree uses that order to
//! decide the spin of cycle-closing leaves, so the vertex numbering is part
//! of an instance's identity.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const GRAPH_FORMAT: &str = "rfim-graph-v1";

/// An undirected edge in canonical form, `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    lo: usize,
    hi: usize,
}

impl EdgeRef {
    /// Canonicalizes the endpoints; `None` for a self-loop.
    pub fn new(a: usize, b: usize) -> Option<EdgeRef> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(EdgeRef { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(EdgeRef { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// The endpoint that is not `pivot`.
    pub fn other(self, pivot: usize) -> Option<usize> {
        if pivot == self.lo {
            Some(self.hi)
        } else if pivot == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }

    /// Order of two edges sharing `pivot`: compares the far endpoints.
    pub fn cmp_at(self, other: EdgeRef, pivot: usize) -> Option<std::cmp::Ordering> {
        Some(self.other(pivot)?.cmp(&other.other(pivot)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

/// On-disk form of a graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub format: String,
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for Graph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Graph> {
        if f.format != GRAPH_FORMAT {
            return Err(Error::FormatTag {
                expected: GRAPH_FORMAT,
                found: f.format,
            });
        }
        Graph::from_edges(f.n, f.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<Graph> for GraphFile {
    fn from(g: Graph) -> GraphFile {
        GraphFile {
            format: GRAPH_FORMAT.to_string(),
            n: g.n(),
            edges: g.edges().map(|e| [e.lo, e.hi]).collect(),
        }
    }
}

impl Graph {
    pub fn empty(n: usize) -> Graph {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph, rejecting self-loops, repeated edges in either
    /// orientation, and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Graph> {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            for v in [a, b] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for (v, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            if let Some(w) = nbrs.windows(2).find(|w| w[0] == w[1]) {
                let e = EdgeRef::new(v, w[0]).expect("self-loops rejected above");
                return Err(Error::DuplicateEdge(e.lo, e.hi));
            }
        }
        Ok(Graph { adjacency })
    }

    pub fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("valid path")
    }

    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "a cycle needs at least 3 vertices");
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("valid clique")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("valid star")
    }

    /// Ball of radius `depth` in the infinite `degree`-regular tree, rooted
    /// at 0, with vertices numbered in breadth-first order.
    pub fn regular_tree(degree: usize, depth: usize) -> Graph {
        Self::branching_tree(degree, degree.saturating_sub(1), depth)
    }

    /// Complete tree where the root has `root_children` children and every
    /// other internal vertex has `children`.
    pub fn branching_tree(root_children: usize, children: usize, depth: usize) -> Graph {
        let mut edges = Vec::new();
        let mut level = vec![0usize];
        let mut next_id = 1usize;
        for d in 0..depth {
            let k = if d == 0 { root_children } else { children };
            let mut next = Vec::with_capacity(level.len() * k);
            for &p in &level {
                for _ in 0..k {
                    edges.push((p, next_id));
                    next.push(next_id);
                    next_id += 1;
                }
            }
            level = next;
        }
        Graph::from_edges(next_id, edges).expect("valid tree")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n() && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Edges in canonical lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, nbrs)| {
            nbrs.iter()
                .filter(move |&&b| b > a)
                .map(move |&b| EdgeRef { lo: a, hi: b })
        })
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }

    /// Breadth-first distances from every source in `sources`.
    pub fn distances_from_set(&self, sources: &[usize]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued vertices have a distance");
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distances_from(&self, v: usize) -> Vec<Option<usize>> {
        self.distances_from_set(&[v])
    }

    /// Shortest-path length, `None` when `v` is unreachable from `u`.
    pub fn distance(&self, u: usize, v: usize) -> Result<Option<usize>> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.distances_from(u)[v])
    }

    /// Vertices at distance exactly `radius` from `v`, ascending.
    pub fn sphere(&self, v: usize, radius: usize) -> Result<Vec<usize>> {
        self.check(v)?;
        Ok(self
            .distances_from(v)
            .into_iter()
            .enumerate()
            .filter_map(|(w, d)| (d == Some(radius)).then_some(w))
            .collect())
    }

    /// Largest finite distance from `v`.
    pub fn eccentricity(&self, v: usize) -> usize {
        self.distances_from(v).into_iter().flatten().max().unwrap_or(0)
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in 0..self.n() {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &w in &self.adjacency[u] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.components().len() == 1
    }

    /// Subgraph induced by `vertices` (in the given order); vertex `i` of the
    /// result is `vertices[i]`.
    pub fn induced(&self, vertices: &[usize]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            self.check(v)?;
            if index[v] != usize::MAX {
                return Err(Error::invalid(format!("vertex {v} listed twice")));
            }
            index[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &v) in vertices.iter().enumerate() {
            for &w in &self.adjacency[v] {
                let j = index[w];
                if j != usize::MAX && i < j {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(vertices.len(), edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Graph> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn max_degree_examples() {
        assert_eq!(Graph::cycle(3).max_degree(), 2);
        assert_eq!(Graph::empty(1).max_degree(), 0);
        assert_eq!(Graph::star(5).max_degree(), 5);
    }

    #[test]
    fn distance_examples() {
        let p = Graph::path(3);
        assert_eq!(p.distance(0, 2).unwrap(), Some(2));
        assert_eq!(p.distance(1, 1).unwrap(), Some(0));
        assert_eq!(Graph::empty(2).distance(0, 1).unwrap(), None);
        assert!(matches!(p.distance(0, 3), Err(Error::VertexOutOfRange { vertex: 3, n: 3 })));
    }

    #[test]
    fn sphere_examples() {
        assert_eq!(Graph::cycle(6).sphere(0, 3).unwrap(), vec![3]);
        assert_eq!(Graph::cycle(6).sphere(4, 0).unwrap(), vec![4]);
        assert_eq!(Graph::complete(4).sphere(0, 1).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn loader_rejects_bad_edges() {
        assert!(matches!(Graph::from_edges(3, [(0, 0)]), Err(Error::SelfLoop(0))));
        assert!(matches!(
            Graph::from_edges(3, [(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::from_edges(3, [(0, 3)]),
            Err(Error::VertexOutOfRange { vertex: 3, n: 3 })
        ));
        let bad = r#"{"format":"rfim-graph-v0","n":2,"edges":[[0,1]]}"#;
        assert!(Graph::from_json(bad).is_err());
        let dup = r#"{"format":"rfim-graph-v1","n":3,"edges":[[0,1],[2,1],[1,2]]}"#;
        assert!(Graph::from_json(dup).is_err());
    }

    #[test]
    fn json_is_canonical() {
        let g = Graph::from_edges(4, [(3, 1), (0, 2), (1, 0)]).unwrap();
        assert_eq!(
            g.to_json(),
            r#"{"format":"rfim-graph-v1","n":4,"edges":[[0,1],[0,2],[1,3]]}"#
        );
    }

    #[test]
    fn edge_order_at_pivot() {
        let a = EdgeRef::new(5, 2).unwrap();
        let b = EdgeRef::new(2, 9).unwrap();
        assert_eq!(a.cmp_at(b, 2), Some(std::cmp::Ordering::Less));
        assert_eq!(a.cmp_at(b, 5), None);
        assert!(EdgeRef::new(4, 4).is_none());
    }

    #[test]
    fn regular_tree_shape() {
        let t = Graph::regular_tree(3, 3);
        assert_eq!(t.n(), 1 + 3 + 6 + 12);
        assert_eq!(t.degree(0), 3);
        assert_eq!(t.degree(1), 3);
        assert_eq!(t.degree(t.n() - 1), 1);
        assert!(t.is_connected());
    }

    #[test]
    fn induced_subgraph() {
        let g = Graph::cycle(5);
        let h = g.induced(&[4, 0, 1]).unwrap();
        assert_eq!(h.edges().map(EdgeRef::endpoints).collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if bits[k] {
                            edges.push((i, j));
                        }
                        k += 1;
                    }
                }
                Graph::from_edges(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(g in arb_graph(), a in 0usize..12, b in 0usize..12) {
            let (a, b) = (a % g.n(), b % g.n());
            prop_assert_eq!(g.distance(a, b).unwrap(), g.distance(b, a).unwrap());
        }

        #[test]
        fn spheres_partition_reachable_set(g in arb_graph(), v in 0usize..12) {
            let v = v % g.n();
            let reachable = g.distances_from(v).iter().filter(|d| d.is_some()).count();
            let mut seen = vec![0usize; g.n()];
            for r in 0..g.n() {
                for w in g.sphere(v, r).unwrap() {
                    seen[w] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c <= 1));
            prop_assert_eq!(seen.iter().sum::<usize>(), reachable);
        }

        #[test]
        fn json_round_trip(g in arb_graph()) {
            prop_assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);
        }

        #[test]
        fn incident_edge_order_is_strict(g in arb_graph(), v in 0usize..12) {
            let v = v % g.n();
            let inc: Vec<EdgeRef> = g.neighbors(v).iter().map(|&w| EdgeRef::new(v, w).unwrap()).collect();
            for w in inc.windows(2) {
                prop_assert_eq!(w[0].cmp_at(w[1], v), Some(std::cmp::Ordering::Less));
            }
        }
    }
}
