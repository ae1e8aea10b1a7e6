//! Undirected simple graphs on nodes `1..=n`, their Laplacians, and the
//! text / JSON / DOT encodings used by the command line.
//!
//! Graph values are immutable: every "mutating" operation returns a new
//! graph, so construction scripts can be replayed and diffed.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::IntMatrix;

/// 1-based node label.
pub type Node = usize;

/// Unordered edge stored as `(low, high)`.
pub type Edge = (Node, Node);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("a graph needs at least one node")]
    NoNodes,
    #[error("self-loop at node {0}")]
    SelfLoop(Node),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(Node, Node),
    #[error("node {node} out of range 1..={n}")]
    NodeOutOfRange { node: Node, n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected header `n=<count>`")]
    MissingHeader,
    #[error("malformed line `{0}`")]
    Malformed(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid JSON: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<Edge>,
}

fn normalize(i: Node, j: Node) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Graph {
    /// Graph with `n` isolated nodes.
    pub fn new(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        Ok(Self { n, edges: BTreeSet::new() })
    }

    /// Builds a graph from an edge list, rejecting self-loops, duplicates and
    /// out-of-range labels.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = Edge>,
    {
        let mut g = Self::new(n)?;
        for (i, j) in edges {
            g.insert(i, j)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, all_pairs(n))
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, (1..n).map(|i| (i, i + 1)))
    }

    /// Cycle `1-2-...-n-1`; requires `n >= 3`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        let mut g = Self::path(n)?;
        if n >= 3 {
            g.insert(1, n)?;
        }
        Ok(g)
    }

    /// Graph whose edge set is selected by the bits of `mask` over
    /// [`all_pairs`]`(n)` (bit `b` set means the `b`-th pair is an edge).
    pub fn from_mask(n: usize, mask: u64) -> Result<Self, GraphError> {
        let pairs = all_pairs(n);
        Self::from_edges(n, pairs.into_iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, e)| e))
    }

    fn check_node(&self, node: Node) -> Result<(), GraphError> {
        if node == 0 || node > self.n {
            Err(GraphError::NodeOutOfRange { node, n: self.n })
        } else {
            Ok(())
        }
    }

    fn insert(&mut self, i: Node, j: Node) -> Result<(), GraphError> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        let e = normalize(i, j);
        if !self.edges.insert(e) {
            return Err(GraphError::DuplicateEdge(e.0, e.1));
        }
        Ok(())
    }

    /// Returns a copy with edge `{i, j}` added; argument order is irrelevant.
    pub fn add_edge(&self, i: Node, j: Node) -> Result<Self, GraphError> {
        let mut g = self.clone();
        g.insert(i, j)?;
        Ok(g)
    }

    /// Returns a copy with one extra isolated node labeled `n + 1`.
    pub fn add_node(&self) -> Self {
        Self { n: self.n + 1, edges: self.edges.clone() }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> {
        1..=self.n
    }

    /// Edges in lexicographic order, each as `(low, high)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: Node, j: Node) -> bool {
        self.edges.contains(&normalize(i, j))
    }

    pub fn neighbors(&self, i: Node) -> Vec<Node> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, i: Node) -> Result<usize, GraphError> {
        self.check_node(i)?;
        Ok(self.edges.iter().filter(|&&(a, b)| a == i || b == i).count())
    }

    /// `L = Δ − A` with `a_ij ∈ {0, 1}`.
    pub fn laplacian(&self) -> Laplacian {
        let mut m = IntMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            let (a, b) = (i - 1, j - 1);
            m[(a, a)] += 1;
            m[(b, b)] += 1;
            m[(a, b)] -= 1;
            m[(b, a)] -= 1;
        }
        Laplacian(m)
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<Node>> {
        let mut adj = vec![Vec::new(); self.n + 1];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n + 1];
        let mut out = Vec::new();
        for start in 1..=self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Relabels node `i` as `perm[i - 1]`. `perm` must be a permutation of
    /// `1..=n`.
    pub fn relabel(&self, perm: &[Node]) -> Result<Self, GraphError> {
        assert_eq!(perm.len(), self.n, "permutation length must equal node count");
        Self::from_edges(self.n, self.edges.iter().map(|&(i, j)| (perm[i - 1], perm[j - 1])))
    }

    /// Canonical edge-list text: `n=<count>` then one sorted `i j` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, ParseError> {
        let mut graph: Option<Graph> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |kind| ParseError { line: line_no, kind };
            match graph.as_mut() {
                None => {
                    let n = line
                        .strip_prefix("n=")
                        .or_else(|| line.strip_prefix("n ="))
                        .and_then(|v| v.trim().parse::<usize>().ok())
                        .ok_or_else(|| err(ParseErrorKind::MissingHeader))?;
                    graph = Some(Graph::new(n).map_err(|e| err(e.into()))?);
                }
                Some(g) => {
                    let mut parts = line.split_whitespace();
                    let parsed = match (parts.next(), parts.next(), parts.next()) {
                        (Some(a), Some(b), None) => a.parse::<Node>().ok().zip(b.parse::<Node>().ok()),
                        _ => None,
                    };
                    let (i, j) = parsed.ok_or_else(|| err(ParseErrorKind::Malformed(line.to_string())))?;
                    g.insert(i, j).map_err(|e| err(e.into()))?;
                }
            }
        }
        graph.ok_or(ParseError { line: text.lines().count().max(1), kind: ParseErrorKind::MissingHeader })
    }

    pub fn to_json(&self) -> String {
        let wire = GraphJson { n: self.n, edges: self.edges.iter().map(|&(i, j)| [i, j]).collect() };
        serde_json::to_string(&wire).expect("graph JSON serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let wire: GraphJson = serde_json::from_str(text)
            .map_err(|e| ParseError { line: e.line(), kind: ParseErrorKind::Json(e.to_string()) })?;
        Graph::from_edges(wire.n, wire.edges.into_iter().map(|[i, j]| (i, j)))
            .map_err(|e| ParseError { line: 1, kind: e.into() })
    }

    /// Parses either the JSON form (text starting with `{`) or the edge list.
    pub fn parse_any(text: &str) -> Result<Self, ParseError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::parse_edge_list(text)
        }
    }

    /// Undirected DOT rendering. Leader nodes are drawn as filled double circles.
    pub fn to_dot(&self, leaders: &[Node]) -> String {
        let mut s = String::from("graph G {\n");
        for v in self.nodes() {
            if leaders.contains(&v) {
                let _ = writeln!(s, "  {v} [label=\"{v}\", leader=true, shape=doublecircle, style=filled];");
            } else {
                let _ = writeln!(s, "  {v} [label=\"{v}\"];");
            }
        }
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "  {i} -- {j};");
        }
        s.push_str("}\n");
        s
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_edge_list())
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[Node; 2]>,
}

/// All unordered pairs `(i, j)`, `1 <= i < j <= n`, in lexicographic order.
pub fn all_pairs(n: usize) -> Vec<Edge> {
    (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect()
}

/// Integer Laplacian `L = Δ − A` of an undirected simple graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Laplacian(IntMatrix);

impl Laplacian {
    /// Wraps an arbitrary square integer matrix without validation; the
    /// spectral routines still reject non-symmetric input.
    pub fn from_matrix_unchecked(m: IntMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.rows()
    }

    pub fn trace(&self) -> i64 {
        (0..self.order()).map(|i| self.0[(i, i)]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        Graph::path(3).unwrap()
    }

    #[test]
    fn new_graph_boundaries() {
        assert_eq!(Graph::new(1).unwrap().edge_count(), 0);
        let g = Graph::new(8).unwrap();
        assert_eq!(g.node_count(), 8);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(Graph::new(0), Err(GraphError::NoNodes));
    }

    #[test]
    fn add_edge_rules() {
        let g = Graph::new(2).unwrap();
        let k2 = g.add_edge(2, 1).unwrap();
        assert!(k2.has_edge(1, 2));
        assert_eq!(k2.add_edge(1, 2), Err(GraphError::DuplicateEdge(1, 2)));
        let g3 = Graph::new(3).unwrap();
        assert_eq!(g3.add_edge(3, 3), Err(GraphError::SelfLoop(3)));
        assert_eq!(g3.add_edge(1, 4), Err(GraphError::NodeOutOfRange { node: 4, n: 3 }));
        // original value is untouched
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn laplacian_examples() {
        let k2 = Graph::complete(2).unwrap().laplacian();
        assert_eq!(k2.matrix().to_rows(), vec![vec![1, -1], vec![-1, 1]]);
        assert_eq!(p3().laplacian().matrix().to_rows(), vec![vec![1, -1, 0], vec![-1, 2, -1], vec![0, -1, 1]]);
        assert_eq!(Graph::new(1).unwrap().laplacian().matrix().to_rows(), vec![vec![0]]);
    }

    #[test]
    fn degrees() {
        assert_eq!(Graph::complete(2).unwrap().degree(1), Ok(1));
        assert_eq!(p3().degree(2), Ok(2));
        assert_eq!(Graph::new(1).unwrap().degree(1), Ok(0));
        assert!(p3().degree(0).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(Graph::complete(2).unwrap().connected_components(), vec![vec![1, 2]]);
        assert_eq!(Graph::new(2).unwrap().connected_components(), vec![vec![1], vec![2]]);
        let g = Graph::from_edges(4, [(1, 2), (2, 3)]).unwrap();
        assert_eq!(g.connected_components(), vec![vec![1, 2, 3], vec![4]]);
    }

    #[test]
    fn edge_list_format() {
        let k2 = Graph::parse_edge_list("n=2\n1 2\n").unwrap();
        assert_eq!(k2, Graph::complete(2).unwrap());
        assert_eq!(p3().to_edge_list(), "n=3\n1 2\n2 3\n");
        let err = Graph::parse_edge_list("n=2\n2 2\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.kind, ParseErrorKind::Graph(GraphError::SelfLoop(2)));
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let e = Graph::parse_edge_list("# comment\nn=3\n1 2\n\n1 x\n").unwrap_err();
        assert_eq!(e.line, 5);
        assert!(matches!(e.kind, ParseErrorKind::Malformed(_)));
        let e = Graph::parse_edge_list("n=3\n1 2\n2 1\n").unwrap_err();
        assert_eq!((e.line, e.kind), (3, ParseErrorKind::Graph(GraphError::DuplicateEdge(1, 2))));
        let e = Graph::parse_edge_list("n=3\n1 7\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = Graph::parse_edge_list("1 2\n").unwrap_err();
        assert_eq!((e.line, e.kind), (1, ParseErrorKind::MissingHeader));
    }

    #[test]
    fn json_round_trip() {
        let g = p3();
        assert_eq!(g.to_json(), r#"{"n":3,"edges":[[1,2],[2,3]]}"#);
        assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);
        assert_eq!(Graph::parse_any(&g.to_json()).unwrap(), g);
        assert!(Graph::from_json(r#"{"n":2,"edges":[[1,1]]}"#).is_err());
    }

    #[test]
    fn dot_marks_leaders() {
        let dot = p3().to_dot(&[1]);
        assert!(dot.starts_with("graph G {"));
        assert!(dot.contains("1 [label=\"1\", leader=true"));
        assert!(dot.contains("2 [label=\"2\"];"));
        assert!(dot.contains("1 -- 2;"));
    }

    #[test]
    fn cycle_and_mask() {
        assert_eq!(Graph::cycle(4).unwrap().edge_count(), 4);
        let all = Graph::from_mask(4, (1 << 6) - 1).unwrap();
        assert_eq!(all, Graph::complete(4).unwrap());
    }
}
