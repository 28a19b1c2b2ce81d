//! Communication graphs: generation, hop distances, power graphs and clique covers.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Retry cap for Erdos-Renyi draws that come out disconnected.
pub const ER_RETRY_CAP: usize = 10_000;

/// Randomized restarts tried by [`Graph::greedy_clique_cover`] on top of the
/// deterministic pass.
const COVER_RESTARTS: usize = 8;

/// Undirected, connected, simple graph on nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    matrix: Vec<bool>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges are merged; self-loops,
    /// out-of-range endpoints and disconnected results are rejected.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::build(node_count, edges.iter().copied())?;
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("node_count", "must be positive"));
        }
        let mut matrix = vec![false; n * n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::param(
                    "edges",
                    format!("edge ({i}, {j}) out of range for {n} nodes"),
                ));
            }
            if i == j {
                return Err(Error::param("edges", format!("self-loop at node {i}")));
            }
            matrix[i * n + j] = true;
            matrix[j * n + i] = true;
        }
        let adj = (0..n)
            .map(|i| (0..n).filter(|&j| matrix[i * n + j]).collect())
            .collect();
        Ok(Graph { n, adj, matrix })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::build(n, edges).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        Self::build(n, (1..n).map(|i| (i - 1, i))).expect("path graph is valid")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::param("node_count", "a cycle needs at least 3 nodes"));
        }
        Self::build(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Draws G(M, p) until the sample is connected, giving up after
    /// [`ER_RETRY_CAP`] whole-graph draws.
    pub fn erdos_renyi(node_count: usize, p: f64, seed: u64) -> Result<Self> {
        Self::erdos_renyi_with_cap(node_count, p, seed, ER_RETRY_CAP)
    }

    pub fn erdos_renyi_with_cap(node_count: usize, p: f64, seed: u64, cap: usize) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::param("node_count", "need at least 2 nodes"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("p", format!("edge probability {p} outside (0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = node_count;
        for _ in 0..cap {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(p) {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::build(n, edges)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::GenerationExhausted {
            nodes: n,
            p,
            attempts: cap,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.matrix[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.adj[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn is_complete(&self) -> bool {
        self.adj.iter().all(|a| a.len() == self.n - 1)
    }

    fn is_connected(&self) -> bool {
        bfs(self, 0).iter().all(|d| d.is_some())
    }

    pub fn distances(&self) -> DistanceMatrix {
        let n = self.n;
        let mut dist = Vec::with_capacity(n * n);
        for src in 0..n {
            dist.extend(bfs(self, src).into_iter().map(|d| d.expect("graph is connected")));
        }
        DistanceMatrix { n, dist }
    }

    pub fn diameter(&self) -> u32 {
        self.distances().max()
    }

    /// Graph with an edge wherever this graph has a path of length at most `gamma`.
    pub fn power_graph(&self, gamma: u32) -> Result<Self> {
        if gamma == 0 {
            return Err(Error::param("gamma", "power graph order must be at least 1"));
        }
        Ok(self.distances().power_graph(gamma))
    }

    /// Greedy partition of the nodes into cliques.
    ///
    /// Each pass repeatedly seeds a clique at the remaining node of smallest
    /// remaining degree and grows it with the candidate that keeps the most
    /// other candidates, until no node is adjacent to the whole clique. The
    /// first pass breaks ties by lowest index; `seed` drives a few extra passes
    /// with shuffled tie priorities. The smallest cover found is returned.
    pub fn greedy_clique_cover(&self, seed: u64) -> CliqueCover {
        let identity: Vec<usize> = (0..self.n).collect();
        let mut best = greedy_cover_pass(self, &identity);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..COVER_RESTARTS {
            let mut priority = identity.clone();
            priority.shuffle(&mut rng);
            let cover = greedy_cover_pass(self, &priority);
            if cover.len() < best.len() {
                best = cover;
            }
        }
        best
    }

    /// Plain-text edge list: a `M <count>` header, then one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("M {}\n", self.n);
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}").expect("writing to a String");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing `M <count>` header".into(),
        })?;
        let n = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["M", count] => count.parse::<usize>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("bad node count: {e}"),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected `M <count>`, found `{header}`"),
                })
            }
        };
        let mut edges = Vec::new();
        for (line_no, line) in lines {
            let parts: Vec<_> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    reason: format!("bad node index `{s}`: {e}"),
                })
            };
            match parts[..] {
                [a, b] => edges.push((parse(a)?, parse(b)?)),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("expected `i j`, found `{line}`"),
                    })
                }
            }
        }
        Self::from_edges(n, &edges)
    }
}

fn bfs(g: &Graph, src: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; g.n];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        for &v in &g.adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn greedy_cover_pass(g: &Graph, priority: &[usize]) -> CliqueCover {
    let n = g.n;
    let mut remaining = vec![true; n];
    let mut left = n;
    let mut blocks = Vec::new();
    while left > 0 {
        let remaining_degree = |v: usize, remaining: &[bool]| g.adj[v].iter().filter(|&&u| remaining[u]).count();
        let start = (0..n)
            .filter(|&v| remaining[v])
            .min_by_key(|&v| (remaining_degree(v, &remaining), priority[v]))
            .expect("at least one node remains");
        let mut clique = vec![start];
        let mut candidates: Vec<usize> = g.adj[start].iter().copied().filter(|&u| remaining[u]).collect();
        while !candidates.is_empty() {
            let next = *candidates
                .iter()
                .max_by_key(|&&c| {
                    let kept = candidates.iter().filter(|&&o| g.has_edge(c, o)).count();
                    (kept, std::cmp::Reverse(priority[c]))
                })
                .expect("non-empty candidates");
            clique.push(next);
            candidates.retain(|&c| c != next && g.has_edge(c, next));
        }
        for &v in &clique {
            remaining[v] = false;
        }
        left -= clique.len();
        clique.sort_unstable();
        blocks.push(clique);
    }
    CliqueCover { blocks }
}

/// All-pairs hop counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<u32>,
}

impl DistanceMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.dist[i * self.n + j]
    }

    pub fn max(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// Nodes within `gamma` hops of `i`, excluding `i`.
    pub fn neighborhood(&self, i: usize, gamma: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| j != i && self.get(i, j) <= gamma)
    }

    pub fn power_graph(&self, gamma: u32) -> Graph {
        let n = self.n;
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Graph::build(n, edges.filter(|&(i, j)| self.get(i, j) <= gamma)).expect("power graph edges are in range")
    }
}

/// Partition of the nodes into cliques of some graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueCover {
    blocks: Vec<Vec<usize>>,
}

impl CliqueCover {
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Disjoint, exhaustive, and every block pairwise adjacent in `g`.
    pub fn is_valid_for(&self, g: &Graph) -> bool {
        let mut seen = vec![false; g.node_count()];
        for block in &self.blocks {
            for (a, &u) in block.iter().enumerate() {
                if u >= seen.len() || seen[u] {
                    return false;
                }
                seen[u] = true;
                if block[a + 1..].iter().any(|&v| !g.has_edge(u, v)) {
                    return false;
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_er_is_single_edge() {
        for seed in 0..20 {
            let g = Graph::erdos_renyi(2, 0.999, seed).unwrap();
            assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        }
    }

    #[test]
    fn er_is_deterministic_and_connected() {
        let a = Graph::erdos_renyi(60, 0.1, 11).unwrap();
        let b = Graph::erdos_renyi(60, 0.1, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.distances().max(), a.diameter());
    }

    #[test]
    fn er_rejects_bad_parameters() {
        assert!(Graph::erdos_renyi(1, 0.5, 0).is_err());
        assert!(Graph::erdos_renyi(10, 0.0, 0).is_err());
        assert!(Graph::erdos_renyi(10, 1.0, 0).is_err());
    }

    #[test]
    fn er_gives_up_when_p_is_tiny() {
        let err = Graph::erdos_renyi_with_cap(200, 1e-4, 0, 50).unwrap_err();
        assert!(matches!(err, Error::GenerationExhausted { attempts: 50, .. }));
    }

    #[test]
    fn er_large_scale_edge_count() {
        // Binomial(19900, 0.1): mean 1990, sd ~42. Conditioning on connectivity
        // barely moves it at this density.
        let g = Graph::erdos_renyi(200, 0.1, 5).unwrap();
        let e = g.edge_count() as f64;
        assert!((e - 1990.0).abs() < 5.0 * 42.3, "edge count {e}");
    }

    #[test]
    fn distances_on_small_graphs() {
        let k4 = Graph::complete(4);
        let d = k4.distances();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d.get(i, j), u32::from(i != j));
            }
        }
        assert_eq!(k4.diameter(), 1);

        let p4 = Graph::path(4);
        assert_eq!(p4.distances().get(0, 3), 3);
        assert_eq!(p4.diameter(), 3);

        let c6 = Graph::cycle(6).unwrap();
        let d = c6.distances();
        for i in 0..6 {
            assert_eq!(d.get(i, (i + 3) % 6), 3);
        }
    }

    #[test]
    fn power_graph_examples() {
        let p4 = Graph::path(4);
        let sq = p4.power_graph(2).unwrap();
        assert_eq!(
            sq.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]
        );
        assert!(p4.power_graph(3).unwrap().is_complete());

        let c6 = Graph::cycle(6).unwrap().power_graph(2).unwrap();
        assert!((0..6).all(|i| c6.degree(i) == 4));
        assert!(p4.power_graph(0).is_err());
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(matches!(Graph::from_edges(3, &[(0, 1)]), Err(Error::Disconnected)));
        assert!(Graph::from_edges(3, &[(0, 0), (1, 2)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
        assert!(Graph::from_edges(0, &[]).is_err());
        assert!(Graph::from_edges(1, &[]).is_ok());
    }

    #[test]
    fn cover_examples() {
        assert_eq!(Graph::complete(6).greedy_clique_cover(0).len(), 1);
        assert_eq!(Graph::path(3).greedy_clique_cover(0).len(), 2);
        assert_eq!(Graph::path(4).greedy_clique_cover(0).len(), 2);
        assert_eq!(Graph::path(7).greedy_clique_cover(0).len(), 4);
        let c5 = Graph::cycle(5).unwrap();
        let cover = c5.greedy_clique_cover(3);
        assert!(cover.is_valid_for(&c5));
        assert_eq!(cover.len(), 3);
    }

    #[test]
    fn cover_is_deterministic() {
        let g = Graph::erdos_renyi(40, 0.15, 2).unwrap();
        assert_eq!(g.greedy_clique_cover(9), g.greedy_clique_cover(9));
    }

    #[test]
    fn invalid_cover_detected() {
        let p3 = Graph::path(3);
        let bad = CliqueCover {
            blocks: vec![vec![0, 2], vec![1]],
        };
        assert!(!bad.is_valid_for(&p3));
        let overlapping = CliqueCover {
            blocks: vec![vec![0, 1], vec![1, 2]],
        };
        assert!(!overlapping.is_valid_for(&p3));
        let missing = CliqueCover {
            blocks: vec![vec![0, 1]],
        };
        assert!(!missing.is_valid_for(&p3));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Graph::erdos_renyi(25, 0.2, 4).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("M 25\n"));
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
    }

    #[test]
    fn edge_list_errors() {
        assert!(Graph::parse_edge_list("").is_err());
        assert!(Graph::parse_edge_list("N 3\n0 1\n").is_err());
        assert!(Graph::parse_edge_list("M 3\n0 1\n1\n").is_err());
        assert!(Graph::parse_edge_list("M 3\n0 1\n1 x\n").is_err());
        assert!(matches!(Graph::parse_edge_list("M 3\n0 1\n"), Err(Error::Disconnected)));
    }
}
