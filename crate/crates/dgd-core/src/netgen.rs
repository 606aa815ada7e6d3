//! Random communication graphs: uniform edge subsets, resampled until
//! connected, reproducible from a 64-bit seed.
//!
//! The generator draws exactly `floor(n (n-1) / 2 * eta)` distinct edges
//! uniformly at random. Disconnected draws are rejected and resampled from
//! the next ChaCha8 substream of the same seed, so a `(n, eta, seed)` triple
//! always maps to the same graph on every platform.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::Tolerances;

#[derive(Debug, Error, PartialEq)]
pub enum NetgenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("edge budget {edges} cannot connect {n} agents (needs at least {required})")]
    TooFewEdges { n: usize, edges: usize, required: usize },
    #[error("no connected graph found after {retries} resampling attempts")]
    RetriesExhausted { retries: usize },
    #[error("edge list parse error: {0}")]
    Parse(String),
}

/// Undirected simple graph over agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from unordered agent pairs. Rejects self-loops,
    /// duplicates, and out-of-range endpoints.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, NetgenError> {
        if n == 0 {
            return Err(NetgenError::InvalidParameter("agent count must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(NetgenError::InvalidParameter(format!("self-loop at agent {a}")));
            }
            if a >= n || b >= n {
                return Err(NetgenError::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n} agents"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(NetgenError::InvalidParameter(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
        }
        Ok(Self { n, edges: set })
    }

    /// Complete graph on `n` agents.
    pub fn complete(n: usize) -> Self {
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.insert((i, j));
            }
        }
        Self { n, edges }
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self { n, edges }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == agent || b == agent).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Edge-list text form: a `n=<count>` header, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for &(a, b) in &self.edges {
            writeln!(out, "{a} {b}").expect("string write cannot fail");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, NetgenError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| NetgenError::Parse("empty input".into()))?;
        let n = header
            .trim()
            .strip_prefix("n=")
            .ok_or_else(|| NetgenError::Parse(format!("expected n=<count> header, got {header:?}")))?
            .parse::<usize>()
            .map_err(|e| NetgenError::Parse(format!("bad agent count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let a = parts
                .next()
                .ok_or_else(|| NetgenError::Parse(format!("bad edge line {line:?}")))?
                .parse::<usize>()
                .map_err(|e| NetgenError::Parse(format!("bad endpoint in {line:?}: {e}")))?;
            let b = parts
                .next()
                .ok_or_else(|| NetgenError::Parse(format!("bad edge line {line:?}")))?
                .parse::<usize>()
                .map_err(|e| NetgenError::Parse(format!("bad endpoint in {line:?}: {e}")))?;
            if parts.next().is_some() {
                return Err(NetgenError::Parse(format!("trailing tokens in {line:?}")));
            }
            edges.push((a, b));
        }
        Self::new(n, edges)
    }
}

/// True iff a traversal from agent 0 reaches all agents.
pub fn is_connected(g: &Graph) -> bool {
    if g.n <= 1 {
        return true;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count == g.n
}

/// Number of edges for density `eta`: `floor(n (n-1) / 2 * eta)`, with a tiny
/// nudge so decimal densities like 0.3 land on the intended integer.
pub fn edge_budget(n: usize, eta: f64) -> usize {
    let total = (n * (n - 1) / 2) as f64;
    (total * eta + 1e-9).floor() as usize
}

/// Uniform random connected graph with exactly `edge_budget(n, eta)` edges.
pub fn generate_random_graph(n: usize, eta: f64, seed: u64) -> Result<Graph, NetgenError> {
    generate_random_graph_with(n, eta, seed, &Tolerances::default())
}

pub fn generate_random_graph_with(
    n: usize,
    eta: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<Graph, NetgenError> {
    if n < 2 {
        return Err(NetgenError::InvalidParameter(format!("need at least 2 agents, got {n}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(NetgenError::InvalidParameter(format!(
            "edge density must lie in (0, 1], got {eta}"
        )));
    }
    let total = n * (n - 1) / 2;
    let m = edge_budget(n, eta);
    if m < n - 1 {
        return Err(NetgenError::TooFewEdges { n, edges: m, required: n - 1 });
    }

    for attempt in 0..tol.max_connectivity_retries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let picks = rand::seq::index::sample(&mut rng, total, m);
        let edges: BTreeSet<(usize, usize)> =
            picks.iter().map(|idx| pair_from_index(n, idx)).collect();
        let g = Graph { n, edges };
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(NetgenError::RetriesExhausted { retries: tol.max_connectivity_retries })
}

/// Maps a linear index into the lexicographic enumeration of pairs
/// `(0,1), (0,2), ..., (n-2, n-1)`.
fn pair_from_index(n: usize, mut idx: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if idx < row {
            return (i, i + 1 + idx);
        }
        idx -= row;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_agents_full_density_is_the_single_edge() {
        let g = generate_random_graph(2, 1.0, 123).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn three_agents_full_density_is_the_triangle() {
        let g = generate_random_graph(3, 1.0, 9).unwrap();
        assert_eq!(g, Graph::complete(3));
    }

    #[test]
    fn hundred_agents_point_three_density() {
        let g = generate_random_graph(100, 0.3, 7).unwrap();
        assert_eq!(g.edge_count(), 1485);
        assert!(is_connected(&g));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_graph(40, 0.15, 99).unwrap();
        let b = generate_random_graph(40, 0.15, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_random_graph(40, 0.15, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn impossible_edge_budget_is_rejected() {
        let err = generate_random_graph(100, 0.001, 5).unwrap_err();
        assert!(matches!(err, NetgenError::TooFewEdges { .. }));
    }

    #[test]
    fn eta_out_of_range_is_rejected() {
        assert!(generate_random_graph(10, 0.0, 5).is_err());
        assert!(generate_random_graph(10, 1.2, 5).is_err());
        assert!(generate_random_graph(1, 1.0, 5).is_err());
    }

    #[test]
    fn connectivity_check_cases() {
        assert!(is_connected(&Graph::complete(3)));
        assert!(is_connected(&Graph::path(3)));
        let split = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&split));
    }

    #[test]
    fn constructor_rejects_malformed_edges() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn edge_list_round_trips() {
        let g = generate_random_graph(12, 0.4, 3).unwrap();
        let text = g.to_edge_list();
        let parsed = Graph::from_edge_list(&text).unwrap();
        assert_eq!(g, parsed);
    }

    #[test]
    fn pair_indexing_covers_all_pairs() {
        let n = 6;
        let total = n * (n - 1) / 2;
        let mut seen = BTreeSet::new();
        for idx in 0..total {
            let (a, b) = pair_from_index(n, idx);
            assert!(a < b && b < n);
            seen.insert((a, b));
        }
        assert_eq!(seen.len(), total);
    }

    #[test]
    fn edge_budget_handles_decimal_density() {
        assert_eq!(edge_budget(100, 0.3), 1485);
        assert_eq!(edge_budget(100, 1.0), 4950);
        assert_eq!(edge_budget(2, 1.0), 1);
    }
}
