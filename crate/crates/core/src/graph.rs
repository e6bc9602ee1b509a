//! Base graphs for the reduction: edge-list I/O, random regular generators and
//! an exhaustive MAX-CUT oracle for desk-sized instances.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest vertex count accepted by [`max_cut_exact`].
pub const MAX_CUT_ENUMERATION_LIMIT: usize = 30;

const REGULAR_RETRY_BUDGET: usize = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("empty edge-list document")]
    Empty,
    #[error("line {line}: malformed ({reason})")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: self-loop at vertex {vertex}")]
    Loop { line: usize, vertex: usize },
    #[error("line {line}: duplicate edge {{{u}, {v}}}")]
    DuplicateEdge { line: usize, u: usize, v: usize },
    #[error("line {line}: vertex id {vertex} out of range for n = {n}")]
    OutOfRange { line: usize, vertex: usize, n: usize },
    #[error("header declares {declared} edges but {found} were listed")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error("no simple {d}-regular graph on {n} vertices (need n > d and n*d even)")]
    InfeasibleRegular { n: usize, d: usize },
    #[error("pairing model failed to produce a simple graph after {0} attempts")]
    GenerationFailed(usize),
    #[error("instance has {n} vertices; exact MAX-CUT enumerates at most {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("cut assignment has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid cut character {0:?}; expected '+' or '-'")]
    BadSide(char),
}

/// A simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = GraphError;
    fn try_from(r: GraphRepr) -> Result<Self, GraphError> {
        Graph::from_edges(r.n, r.edges)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr { n: g.n, edges: g.edges }
    }
}

impl Graph {
    /// Builds a graph from an edge list, rejecting loops, duplicates and
    /// out-of-range ids. Edges are stored normalized as `(min, max)` and sorted.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for (i, (a, b)) in edges.into_iter().enumerate() {
            let line = i + 2;
            for v in [a, b] {
                if v >= n {
                    return Err(GraphError::OutOfRange { line, vertex: v, n });
                }
            }
            if a == b {
                return Err(GraphError::Loop { line, vertex: a });
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge { line, u: e.0, v: e.1 });
            }
        }
        Ok(Self::from_sorted_unchecked(n, seen.into_iter().collect()))
    }

    fn from_sorted_unchecked(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Graph {
            n,
            edges,
            adjacency,
            max_degree,
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_sorted_unchecked(n, edges)
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (0..n).map(|u| (u.min((u + 1) % n), u.max((u + 1) % n))).collect();
        edges.sort_unstable();
        edges.dedup();
        Self::from_sorted_unchecked(n, edges)
    }

    pub fn complete_bipartite(a: usize, b: usize) -> Self {
        let edges = (0..a).flat_map(|u| (a..a + b).map(move |v| (u, v))).collect();
        Self::from_sorted_unchecked(a + b, edges)
    }

    /// Path on `n` vertices.
    pub fn path(n: usize) -> Self {
        let edges = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_sorted_unchecked(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// True when every vertex has degree exactly `d`.
    pub fn is_regular(&self, d: usize) -> bool {
        self.adjacency.iter().all(|nb| nb.len() == d)
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length");
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        Self::from_edges(self.n, edges).expect("relabeling preserves simplicity")
    }

    /// Dense 0/1 adjacency matrix in row-major order.
    pub fn adjacency_matrix(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        for &(u, v) in &self.edges {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
        a
    }

    /// Renders the edge-list document accepted by [`parse_graph`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

/// Parses the edge-list format: a header `n m`, then `m` lines `u v` with
/// `u < v`. Blank lines and `#` comments are ignored.
pub fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(GraphError::Empty)?;
    let (n, m) = parse_pair(hline, header)?;

    let mut seen = BTreeSet::new();
    for (line, body) in lines {
        let (u, v) = parse_pair(line, body)?;
        for w in [u, v] {
            if w >= n {
                return Err(GraphError::OutOfRange { line, vertex: w, n });
            }
        }
        if u == v {
            return Err(GraphError::Loop { line, vertex: u });
        }
        if u > v {
            return Err(GraphError::Malformed {
                line,
                reason: format!("expected u < v, got {u} {v}"),
            });
        }
        if !seen.insert((u, v)) {
            return Err(GraphError::DuplicateEdge { line, u, v });
        }
    }
    if seen.len() != m {
        return Err(GraphError::EdgeCountMismatch {
            declared: m,
            found: seen.len(),
        });
    }
    Ok(Graph::from_sorted_unchecked(n, seen.into_iter().collect()))
}

fn parse_pair(line: usize, body: &str) -> Result<(usize, usize), GraphError> {
    let malformed = |reason: &str| GraphError::Malformed {
        line,
        reason: reason.to_string(),
    };
    let mut it = body.split_whitespace();
    let a = it.next().ok_or_else(|| malformed("missing field"))?;
    let b = it.next().ok_or_else(|| malformed("missing second field"))?;
    if it.next().is_some() {
        return Err(malformed("more than two fields"));
    }
    let a = a.parse().map_err(|_| malformed("not a non-negative integer"))?;
    let b = b.parse().map_err(|_| malformed("not a non-negative integer"))?;
    Ok((a, b))
}

/// Uniform-ish random simple `d`-regular graph from the pairing (configuration)
/// model, restarting whenever a loop or parallel edge appears. Deterministic in
/// `seed`.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    if n <= d || (n * d) % 2 == 1 {
        return Err(GraphError::InfeasibleRegular { n, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    let half = points.len() / 2;

    'attempt: for _ in 0..REGULAR_RETRY_BUDGET {
        points.shuffle(&mut rng);
        let mut edges = BTreeSet::new();
        for k in 0..half {
            let (a, b) = (points[2 * k], points[2 * k + 1]);
            if a == b || !edges.insert((a.min(b), a.max(b))) {
                continue 'attempt;
            }
        }
        return Ok(Graph::from_sorted_unchecked(n, edges.into_iter().collect()));
    }
    Err(GraphError::GenerationFailed(REGULAR_RETRY_BUDGET))
}

/// Side of a base vertex in a cut; doubles as the phase sign of its cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Minus => -1,
            Side::Plus => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

/// Per-vertex side labels, serialized as a string over `{+, -}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CutAssignment(Vec<Side>);

impl CutAssignment {
    pub fn new(sides: Vec<Side>) -> Self {
        CutAssignment(sides)
    }

    pub fn uniform(n: usize, side: Side) -> Self {
        CutAssignment(vec![side; n])
    }

    /// Bit `i` of `mask` set means vertex `i` is on the `+` side.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        CutAssignment((0..n).map(|i| if mask >> i & 1 == 1 { Side::Plus } else { Side::Minus }).collect())
    }

    pub fn sides(&self) -> &[Side] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> Self {
        CutAssignment(self.0.iter().map(|s| s.flip()).collect())
    }
}

impl fmt::Display for CutAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(if *s == Side::Plus { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for CutAssignment {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, GraphError> {
        s.trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(Side::Plus),
                '-' => Ok(Side::Minus),
                other => Err(GraphError::BadSide(other)),
            })
            .collect::<Result<_, _>>()
            .map(CutAssignment)
    }
}

impl TryFrom<String> for CutAssignment {
    type Error = GraphError;
    fn try_from(s: String) -> Result<Self, GraphError> {
        s.parse()
    }
}

impl From<CutAssignment> for String {
    fn from(c: CutAssignment) -> String {
        c.to_string()
    }
}

/// Number of edges whose endpoints lie on different sides.
pub fn cut_size(g: &Graph, cut: &CutAssignment) -> Result<usize, GraphError> {
    if cut.len() != g.n() {
        return Err(GraphError::LengthMismatch {
            expected: g.n(),
            got: cut.len(),
        });
    }
    let s = cut.sides();
    Ok(g.edges().iter().filter(|&&(u, v)| s[u] != s[v]).count())
}

/// Exact maximum cut by Gray-code enumeration of the `2^(n-1)` bipartitions
/// with vertex 0 pinned to `-`. Ties go to the lexicographically smallest
/// witness (`-` before `+`, vertex 0 first).
pub fn max_cut_exact(g: &Graph) -> Result<(usize, CutAssignment), GraphError> {
    let n = g.n();
    if n > MAX_CUT_ENUMERATION_LIMIT {
        return Err(GraphError::TooLarge {
            n,
            limit: MAX_CUT_ENUMERATION_LIMIT,
        });
    }
    if n <= 1 {
        return Ok((0, CutAssignment::uniform(n, Side::Minus)));
    }
    // Lexicographic key: vertex i's bit placed at position n-1-i.
    let key = |mask: u64| -> u64 {
        (1..n).fold(0, |acc, i| acc | ((mask >> i & 1) << (n - 1 - i)))
    };

    let mut mask = 0u64;
    let mut cut = 0i64;
    let mut best = (0i64, 0u64);
    let total = 1u64 << (n - 1);
    for step in 1..total {
        // Gray code: flip vertex 1 + trailing_zeros(step).
        let v = 1 + step.trailing_zeros() as usize;
        let side = mask >> v & 1;
        let mut delta = 0i64;
        for &u in g.neighbors(v) {
            // Edge currently cut iff sides differ; flipping v toggles it.
            delta += if (mask >> u & 1) != side { -1 } else { 1 };
        }
        mask ^= 1 << v;
        cut += delta;
        if cut > best.0 || (cut == best.0 && key(mask) < key(best.1)) {
            best = (cut, mask);
        }
    }
    Ok((best.0 as usize, CutAssignment::from_mask(n, best.1)))
}
