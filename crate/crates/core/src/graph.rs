//! Undirected graphs, the self-loop normalized adjacency `D^{-1/2}(A+I)D^{-1/2}`,
//! shortest-path utilities, Gromov δ-hyperbolicity and synthetic generators.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("node id {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("no node pair at distance {0}")]
    NoPairAtDistance(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid generator parameters: {0}")]
    BadParameters(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Simple undirected graph on nodes `0..n`. Self-loops are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, dropping self-loops and duplicate (or reversed) edges.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &set {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self {
            n,
            edges: set,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors[u].len()
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.bfs(0).iter().all(Option::is_some)
    }

    /// All-pairs hop distances. Errors if the graph is disconnected.
    pub fn distance_matrix(&self) -> Result<Vec<Vec<usize>>> {
        if self.n == 0 {
            return Err(GraphError::Empty);
        }
        (0..self.n)
            .into_par_iter()
            .map(|s| {
                self.bfs(s)
                    .into_iter()
                    .map(|d| d.ok_or(GraphError::Disconnected))
                    .collect()
            })
            .collect()
    }

    /// Same graph with node `u` renamed to `perm[u]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.n);
        Self::new(self.n, self.edges().map(|(u, v)| (perm[u], perm[v])))
    }

    /// Writes one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

/// Dense `D^{-1/2}(A+I)D^{-1/2}` with `d_i = 1 + deg(i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: Matrix,
    /// Column indices of the nonzero entries of each row (self included).
    support: Vec<Vec<usize>>,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.node_count();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let d: Vec<f64> = (0..n).map(|i| 1.0 + g.degree(i) as f64).collect();
        let mut matrix = Matrix::zeros(n, n);
        let mut support = Vec::with_capacity(n);
        for i in 0..n {
            let mut cols: Vec<usize> = g.neighbors(i).to_vec();
            cols.push(i);
            cols.sort_unstable();
            for &j in &cols {
                matrix.set(i, j, 1.0 / (d[i] * d[j]).sqrt());
            }
            support.push(cols);
        }
        Ok(Self { matrix, support })
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Nonzero columns of row `i` (its closed neighbourhood), ascending.
    pub fn row_support(&self, i: usize) -> &[usize] {
        &self.support[i]
    }

    /// `Ã^ℓ` by repeated multiplication.
    pub fn power(&self, ell: usize) -> Matrix {
        let mut p = Matrix::identity(self.n());
        for _ in 0..ell {
            p = p.matmul(&self.matrix);
        }
        p
    }

    /// Row `i` of `Ã^ℓ`, computed as `e_iᵀ Ã … Ã`.
    pub fn power_row(&self, ell: usize, i: usize) -> Vec<f64> {
        let n = self.n();
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        for _ in 0..ell {
            let mut next = vec![0.0; n];
            for (z, &rz) in row.iter().enumerate() {
                if rz == 0.0 {
                    continue;
                }
                for &j in &self.support[z] {
                    next[j] += rz * self.matrix.get(z, j);
                }
            }
            row = next;
        }
        row
    }

    /// `(Ã^ℓ)_{ij}`.
    pub fn power_entry(&self, ell: usize, i: usize, j: usize) -> f64 {
        self.power_row(ell, i)[j]
    }
}

/// Free-function form of [`NormalizedAdjacency::new`].
pub fn normalized_adjacency(g: &Graph) -> Result<NormalizedAdjacency> {
    NormalizedAdjacency::new(g)
}

/// Uniform sample (without replacement) of unordered pairs `(i, j)`, `i < j`,
/// at exact hop distance `d`. Returns every such pair if there are at most
/// `count`. The result is sorted.
pub fn pairs_at_distance(
    g: &Graph,
    d: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let n = g.node_count();
    let mut all: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            g.bfs(i)
                .into_iter()
                .enumerate()
                .filter(move |&(j, dj)| j > i && dj == Some(d))
                .map(move |(j, _)| (i, j))
        })
        .collect();
    if all.is_empty() {
        return Err(GraphError::NoPairAtDistance(d));
    }
    all.sort_unstable();
    if all.len() <= count {
        return Ok(all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, all.len(), count)
        .into_iter()
        .map(|k| all[k])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Four-point-condition δ: the maximum over node quadruples of half the gap
/// between the two largest of the three pairwise distance sums. Exact,
/// `O(n⁴)`.
pub fn gromov_delta(g: &Graph) -> Result<f64> {
    let dist = g.distance_matrix()?;
    let n = g.node_count();
    let twice = (0..n)
        .into_par_iter()
        .map(|i| {
            let di = &dist[i];
            let mut best = 0usize;
            for j in i + 1..n {
                let dj = &dist[j];
                for k in j + 1..n {
                    let dk = &dist[k];
                    for l in k + 1..n {
                        let s1 = di[j] + dk[l];
                        let s2 = di[k] + dj[l];
                        let s3 = di[l] + dj[k];
                        let (hi, mid) = top_two(s1, s2, s3);
                        best = best.max(hi - mid);
                    }
                }
            }
            best
        })
        .max()
        .unwrap_or(0);
    Ok(twice as f64 / 2.0)
}

fn top_two(a: usize, b: usize, c: usize) -> (usize, usize) {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if c >= hi {
        (c, hi)
    } else if c >= lo {
        (hi, c)
    } else {
        (hi, lo)
    }
}

/// Synthetic graph families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    /// Complete binary tree with `2^{depth+1} − 1` nodes (heap numbering).
    BinaryTree { depth: usize },
    /// Complete `r`-ary tree of the given depth.
    RaryTree { r: usize, depth: usize },
    Path { n: usize },
    Cycle { n: usize },
    /// `cliques` copies of `K_size`, consecutive cliques joined by one edge.
    RingOfCliques { cliques: usize, size: usize },
    /// Uniform random labelled tree (Prüfer code).
    RandomTree { n: usize, seed: u64 },
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BinaryTree { depth } => write!(f, "binary_tree({depth})"),
            Self::RaryTree { r, depth } => write!(f, "rary_tree({r}, {depth})"),
            Self::Path { n } => write!(f, "path({n})"),
            Self::Cycle { n } => write!(f, "cycle({n})"),
            Self::RingOfCliques { cliques, size } => write!(f, "ring_of_cliques({cliques}, {size})"),
            Self::RandomTree { n, seed } => write!(f, "random_tree({n}, seed={seed})"),
        }
    }
}

pub fn generate(kind: GraphKind) -> Result<Graph> {
    let bad = |m: &str| Err(GraphError::BadParameters(format!("{kind}: {m}")));
    match kind {
        GraphKind::BinaryTree { depth } => generate(GraphKind::RaryTree { r: 2, depth }),
        GraphKind::RaryTree { r, depth } => {
            if r == 0 {
                return bad("arity must be positive");
            }
            let mut n = 1usize;
            let mut level = 1usize;
            for _ in 0..depth {
                level = level.checked_mul(r).ok_or_else(|| GraphError::BadParameters("tree too large".into()))?;
                n += level;
            }
            let internal = n - level;
            let edges = (0..internal).flat_map(|p| (1..=r).map(move |c| (p, r * p + c)));
            Graph::new(n, edges)
        }
        GraphKind::Path { n } => {
            if n == 0 {
                return bad("n must be positive");
            }
            Graph::new(n, (1..n).map(|v| (v - 1, v)))
        }
        GraphKind::Cycle { n } => {
            if n < 3 {
                return bad("a cycle needs at least 3 nodes");
            }
            Graph::new(n, (0..n).map(|v| (v, (v + 1) % n)))
        }
        GraphKind::RingOfCliques { cliques, size } => {
            if cliques == 0 || size == 0 {
                return bad("parameters must be positive");
            }
            let n = cliques * size;
            let mut edges = Vec::new();
            for c in 0..cliques {
                let base = c * size;
                for a in 0..size {
                    for b in a + 1..size {
                        edges.push((base + a, base + b));
                    }
                }
                if cliques > 1 {
                    let next = ((c + 1) % cliques) * size;
                    edges.push((base + size - 1, next));
                }
            }
            Graph::new(n, edges)
        }
        GraphKind::RandomTree { n, seed } => {
            if n == 0 {
                return bad("n must be positive");
            }
            random_tree(n, seed)
        }
    }
}

fn random_tree(n: usize, seed: u64) -> Result<Graph> {
    if n <= 2 {
        return generate(GraphKind::Path { n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    // Prüfer decoding with a min-heap of current leaves
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = *leaves.iter().next().expect("Prüfer decoding always has a leaf");
        leaves.remove(&leaf);
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1]));
    Graph::new(n, edges)
}

/// Parses whitespace-separated `u v` lines. `#` starts a comment; blank
/// lines are skipped; self-loops and duplicates are dropped. Node ids may be
/// arbitrary non-negative integers and are compacted to `0..n` in ascending
/// id order.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = line.split('#').next().unwrap_or("");
        let mut toks = body.split_whitespace();
        let Some(a) = toks.next() else { continue };
        let parse = |t: Option<&str>| -> Result<u64> {
            let t = t.ok_or_else(|| GraphError::Parse {
                line: lineno,
                message: "expected two node ids".into(),
            })?;
            t.parse::<u64>().map_err(|_| GraphError::Parse {
                line: lineno,
                message: format!("invalid node id {t:?}"),
            })
        };
        let u = parse(Some(a))?;
        let v = parse(toks.next())?;
        if let Some(extra) = toks.next() {
            return Err(GraphError::Parse {
                line: lineno,
                message: format!("unexpected token {extra:?}"),
            });
        }
        raw.push((u, v));
    }
    let ids: BTreeMap<u64, usize> = raw
        .iter()
        .flat_map(|&(u, v)| [u, v])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(k, id)| (id, k))
        .collect();
    if ids.is_empty() {
        return Err(GraphError::Empty);
    }
    Graph::new(ids.len(), raw.into_iter().map(|(u, v)| (ids[&u], ids[&v])))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_edge_list(&text)
}

/// Random permutation of `0..n`, for relabeling checks.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}
