use std::collections::{HashSet, VecDeque};

use super::rng::Streams;
use crate::error::{Error, Result};

/// Simulated CONGEST communication graph.
///
/// Edge ids follow input order. Both endpoints of an edge own it. Aggregation
/// runs over a BFS tree rooted at node 0, so `tree_depth` is the eccentricity
/// of the leader and never exceeds `diameter`.
#[derive(Debug, Clone)]
pub struct Network {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    diameter: usize,
    tree_depth: usize,
    beta: f64,
    bandwidth_bits: u32,
    streams: Streams,
}

impl Network {
    /// Builds a network from an edge list, inferring the node count from the
    /// largest id.
    pub fn build(edge_list: &[(usize, usize)]) -> Result<Self> {
        if edge_list.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let n = edge_list.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) + 1;
        Self::with_nodes(n, edge_list)
    }

    /// Builds a network on exactly `n` nodes. A single node with no edges is
    /// allowed; anything larger must be connected.
    pub fn with_nodes(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (id, &(u, v)) in edge_list.iter().enumerate() {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { id: x, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge(u, v));
            }
            adjacency[u].push(id);
            adjacency[v].push(id);
        }
        let mut net = Self {
            node_count: n,
            edges: edge_list.to_vec(),
            adjacency,
            diameter: 0,
            tree_depth: 0,
            beta: 1.0,
            bandwidth_bits: 1,
            streams: Streams::new(0),
        };
        let mut diameter = 0;
        for src in 0..n {
            let dist = net.bfs(src);
            if dist.iter().any(|d| d.is_none()) {
                return Err(Error::DisconnectedGraph);
            }
            let ecc = dist.iter().flatten().copied().max().unwrap_or(0);
            if src == 0 {
                net.tree_depth = ecc;
            }
            diameter = diameter.max(ecc);
        }
        net.diameter = diameter;
        net.set_beta(1.0);
        Ok(net)
    }

    /// Parses the `n m` header followed by `m` lines of `u v`.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::ParseError {
            line: 1,
            msg: "missing header".into(),
        })?;
        let nums = parse_pair(hline, header)?;
        let (n, m) = (nums.0, nums.1);
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines {
            edges.push(parse_pair(line, l)?);
        }
        if edges.len() != m {
            return Err(Error::ParseError {
                line: hline,
                msg: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        Self::with_nodes(n, &edges)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.streams = Streams::new(seed);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.set_beta(beta);
        self
    }

    fn set_beta(&mut self, beta: f64) {
        assert!(beta > 0.0, "bandwidth factor must be positive");
        self.beta = beta;
        let log_n = (self.node_count as f64).log2();
        self.bandwidth_bits = ((beta * log_n).ceil() as u32).max(1);
    }

    fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &e in &self.adjacency[u] {
                let v = self.other_end(e, u);
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Hop distances from `src`; every entry is finite on a valid network.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        self.bfs(src).into_iter().map(|d| d.unwrap_or(usize::MAX)).collect()
    }

    pub fn other_end(&self, edge: usize, node: usize) -> usize {
        let (u, v) = self.edges[edge];
        if u == node {
            v
        } else {
            u
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn incident(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// Depth of the BFS tree rooted at the leader (node 0).
    pub fn tree_depth(&self) -> usize {
        self.tree_depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn bandwidth_bits(&self) -> u32 {
        self.bandwidth_bits
    }

    pub fn streams(&self) -> &Streams {
        &self.streams
    }

    /// The two endpoints of an edge; these are exactly its owners.
    pub fn owners(&self, edge: usize) -> [usize; 2] {
        let (u, v) = self.edges[edge];
        [u, v]
    }

    /// Rounds needed to push `bits` over one edge.
    pub fn chunks(&self, bits: u64) -> u64 {
        bits.div_ceil(u64::from(self.bandwidth_bits))
    }
}

fn parse_pair(line: usize, text: &str) -> Result<(usize, usize)> {
    let mut it = text.split_whitespace().map(|t| t.parse::<usize>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::ParseError {
            line,
            msg: format!("expected two non-negative integers, got {text:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_diameter() {
        let net = Network::build(&[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(net.diameter(), 3);
        assert_eq!(net.tree_depth(), 3);
    }

    #[test]
    fn single_edge_and_triangle() {
        assert_eq!(Network::build(&[(0, 1)]).unwrap().diameter(), 1);
        let tri = Network::build(&[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(tri.diameter(), 1);
        assert_eq!(tri.incident(1), &[0, 1]);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert_eq!(Network::build(&[(0, 1), (2, 3)]).unwrap_err(), Error::DisconnectedGraph);
        assert_eq!(Network::build(&[(1, 1)]).unwrap_err(), Error::SelfLoop(1));
        assert_eq!(Network::build(&[(0, 1), (1, 0)]).unwrap_err(), Error::DuplicateEdge(1, 0));
        assert_eq!(Network::build(&[]).unwrap_err(), Error::EmptyGraph);
    }

    #[test]
    fn bandwidth_is_ceil_beta_log_n() {
        let path: Vec<_> = (0..15).map(|i| (i, i + 1)).collect();
        let net = Network::build(&path).unwrap();
        assert_eq!(net.bandwidth_bits(), 4);
        assert_eq!(net.clone().with_beta(2.5).bandwidth_bits(), 10);
        assert_eq!(Network::build(&[(0, 1)]).unwrap().bandwidth_bits(), 1);
    }

    #[test]
    fn parses_edge_list_format() {
        let net = Network::parse_edge_list("4 3\n0 1\n1 2\n# tail\n2 3\n").unwrap();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.diameter(), 3);
        let err = Network::parse_edge_list("3 2\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 1, .. }));
        let err = Network::parse_edge_list("3 2\n0 1\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 3, .. }));
    }
}
