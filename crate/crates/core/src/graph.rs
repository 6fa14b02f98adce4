//! Undirected weighted graphs, k-nearest-neighbour construction and the
//! normalized Laplacian family used by the convolutions.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{ensure, Error, Result};
use crate::linalg::{power_iteration, DenseMatrix, SparseMatrix};

/// An undirected edge with `i < j` and positive weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Undirected graph without self-loops. Each unordered pair appears once,
/// and edges are kept sorted by `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Validates and canonicalises an edge list. Endpoints may be given in
    /// either order.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut out: Vec<Edge> = Vec::new();
        for (a, b, w) in edges {
            ensure(a < n_nodes && b < n_nodes, || {
                format!("edge ({a}, {b}) references a node outside 0..{n_nodes}")
            })?;
            ensure(a != b, || format!("self-loop at node {a}"))?;
            ensure(w > 0.0 && w.is_finite(), || {
                format!("edge ({a}, {b}) has non-positive or non-finite weight {w}")
            })?;
            out.push(Edge {
                i: a.min(b),
                j: a.max(b),
                w,
            });
        }
        out.sort_by_key(|e| (e.i, e.j));
        if let Some(dup) = out
            .windows(2)
            .find(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j))
        {
            return Err(Error::contract(format!(
                "duplicate edge ({}, {})",
                dup[0].i, dup[0].j
            )));
        }
        Ok(Self {
            n_nodes,
            edges: out,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by(|e| (e.i, e.j).cmp(&key))
            .is_ok()
    }

    /// Number of incident edges per node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }

    /// Weighted degree vector `d = A·1`.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_nodes];
        for e in &self.edges {
            d[e.i] += e.w;
            d[e.j] += e.w;
        }
        d
    }

    /// Symmetric weighted adjacency matrix.
    pub fn adjacency(&self) -> SparseMatrix {
        let triplets: Vec<_> = self
            .edges
            .iter()
            .flat_map(|e| [(e.i, e.j, e.w), (e.j, e.i, e.w)])
            .collect();
        SparseMatrix::from_triplets(self.n_nodes, self.n_nodes, &triplets)
            .expect("edges validated at construction")
    }

    /// Serialises to the edge-list text format: a `N M` header followed by
    /// `M` lines `i j w`.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n_nodes, self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {:.16e}", e.i, e.j, e.w);
        }
        s
    }

    /// Parses the edge-list format. Blank lines and lines starting with `#`
    /// are ignored.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty edge-list file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(hline, "expected header `N M`"));
        }
        let n: usize = parse_field(fields[0], hline, "node count")?;
        let m: usize = parse_field(fields[1], hline, "edge count")?;

        let mut edges = Vec::with_capacity(m);
        let mut last_line = hline;
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::parse(ln, "expected `i j w`"));
            }
            let i: usize = parse_field(f[0], ln, "node index")?;
            let j: usize = parse_field(f[1], ln, "node index")?;
            let w: f64 = parse_field(f[2], ln, "weight")?;
            edges.push((i, j, w));
            last_line = ln;
        }
        if edges.len() != m {
            return Err(Error::parse(
                last_line,
                format!("header declares {m} edges but {} were found", edges.len()),
            ));
        }
        Graph::new(n, edges).map_err(|e| Error::parse(last_line, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_edge_list(&text)
    }

    /// SHA-256 of the canonical edge-list text, hex encoded.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_edge_list().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{s}`")))
}

/// Connects each point to its `k` nearest neighbours (Euclidean distance)
/// and symmetrises by union with unit weights.
///
/// Distance ties go to the lower node index, so the result is deterministic.
/// Every node ends up with between `k` and `2k` incident edges.
pub fn build_knn_graph(points: &DenseMatrix, k: usize) -> Result<Graph> {
    let n = points.n_rows();
    ensure(k >= 1, || "k must be at least 1".into())?;
    ensure(n > k, || {
        format!("kNN graph needs more points than neighbours (N = {n}, k = {k})")
    })?;
    ensure(points.is_finite(), || {
        "point coordinates must be finite".into()
    })?;

    let mut pairs = Vec::with_capacity(n * k);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        let pi = points.row(i);
        for j in (0..n).filter(|&j| j != i) {
            let d2: f64 = pi
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            candidates.push((d2, j));
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &candidates[..k] {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Graph::new(n, pairs.into_iter().map(|(i, j)| (i, j, 1.0)))
}

/// The operators derived from a graph's normalized Laplacian.
#[derive(Clone, Debug)]
pub struct LaplacianSet {
    /// `L = I − D^{-1/2} A D^{-1/2}`; isolated nodes get an identity row.
    pub laplacian: SparseMatrix,
    /// `L̃ = 2L/λ_max − I`, spectrum mapped into `[-1, 1]`.
    pub scaled: SparseMatrix,
    /// `L̃₁ = I + D^{-1/2} A D^{-1/2} = 2I − L`.
    pub first_order: SparseMatrix,
    pub lambda_max: f64,
    /// Whether the power iteration for `lambda_max` converged.
    pub lambda_converged: bool,
    /// Weighted degrees `d = A·1`.
    pub degree: Vec<f64>,
}

impl LaplacianSet {
    pub fn n_nodes(&self) -> usize {
        self.laplacian.n_rows()
    }
}

/// Iteration cap for the `λ_max` power iteration.
pub const LAMBDA_MAX_ITER: usize = 100_000;

/// Builds `L`, `L̃` and `L̃₁` for a graph. `tol` is the power-iteration
/// tolerance on successive Rayleigh quotients.
pub fn build_laplacians(g: &Graph, tol: f64) -> Result<LaplacianSet> {
    let n = g.n_nodes();
    ensure(n >= 1, || "graph has no nodes".into())?;
    let degree = g.weighted_degrees();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();

    let mut lap = Vec::with_capacity(n + 2 * g.n_edges());
    let mut first = Vec::with_capacity(n + 2 * g.n_edges());
    for i in 0..n {
        lap.push((i, i, 1.0));
        first.push((i, i, 1.0));
    }
    for e in g.edges() {
        let s = e.w * inv_sqrt[e.i] * inv_sqrt[e.j];
        for (a, b) in [(e.i, e.j), (e.j, e.i)] {
            lap.push((a, b, -s));
            first.push((a, b, s));
        }
    }
    let laplacian = SparseMatrix::from_triplets(n, n, &lap)?;
    let first_order = SparseMatrix::from_triplets(n, n, &first)?;

    let est = power_iteration(&laplacian, tol, LAMBDA_MAX_ITER, 0x5eed)?;
    let lambda_max = est.value;
    ensure(lambda_max > 0.0, || {
        format!("non-positive lambda_max estimate {lambda_max}")
    })?;
    let scaled = laplacian.scale_shift(2.0 / lambda_max, -1.0)?;

    Ok(LaplacianSet {
        laplacian,
        scaled,
        first_order,
        lambda_max,
        lambda_converged: est.converged,
        degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_eq(a: &SparseMatrix, rows: &[&[f64]], tol: f64) {
        let d = a.to_dense();
        let expect = DenseMatrix::from_rows(rows);
        assert!(
            d.max_abs_diff(&expect).unwrap() <= tol,
            "got {d:?}, expected {expect:?}"
        );
    }

    #[test]
    fn knn_collinear_points() {
        let pts = DenseMatrix::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        let g = build_knn_graph(&pts, 1).unwrap();
        let edges: Vec<_> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_square_has_no_diagonals() {
        let pts = DenseMatrix::from_rows(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ]);
        let g = build_knn_graph(&pts, 2).unwrap();
        let edges: Vec<_> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(edges, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn knn_with_k_n_minus_one_is_complete() {
        let pts = DenseMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let g = build_knn_graph(&pts, 4).unwrap();
        assert_eq!(g.n_edges(), 10);
    }

    #[test]
    fn knn_duplicate_points_break_ties_by_index() {
        let pts = DenseMatrix::from_rows(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let g = build_knn_graph(&pts, 1).unwrap();
        // 0 -> 1, 1 -> 0, 2 -> 0
        let edges: Vec<_> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(edges, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn knn_rejects_too_few_points() {
        let pts = DenseMatrix::zeros(3, 3);
        assert!(matches!(build_knn_graph(&pts, 3), Err(Error::Contract(_))));
        assert!(build_knn_graph(&pts, 0).is_err());
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(2, [(0, 0, 1.0)]).is_err());
        assert!(Graph::new(2, [(0, 1, -1.0)]).is_err());
        assert!(Graph::new(2, [(0, 2, 1.0)]).is_err());
        assert!(Graph::new(2, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        let g = Graph::new(3, [(2, 0, 1.5)]).unwrap();
        assert_eq!(g.edges()[0], Edge { i: 0, j: 2, w: 1.5 });
    }

    #[test]
    fn laplacians_of_single_edge() {
        let g = Graph::new(2, [(0, 1, 1.0)]).unwrap();
        let lap = build_laplacians(&g, 1e-14).unwrap();
        dense_eq(&lap.laplacian, &[&[1.0, -1.0], &[-1.0, 1.0]], 1e-15);
        assert!((lap.lambda_max - 2.0).abs() < 1e-10);
        dense_eq(&lap.scaled, &[&[0.0, -1.0], &[-1.0, 0.0]], 1e-9);
        dense_eq(&lap.first_order, &[&[1.0, 1.0], &[1.0, 1.0]], 1e-15);
        assert_eq!(lap.degree, vec![1.0, 1.0]);
    }

    #[test]
    fn laplacians_of_triangle() {
        let g = Graph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let lap = build_laplacians(&g, 1e-14).unwrap();
        dense_eq(
            &lap.laplacian,
            &[&[1.0, -0.5, -0.5], &[-0.5, 1.0, -0.5], &[-0.5, -0.5, 1.0]],
            1e-15,
        );
        let (vals, _) = crate::linalg::dense_eig_sym(&lap.laplacian.to_dense()).unwrap();
        for (v, e) in vals.iter().zip([0.0, 1.5, 1.5]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!((lap.lambda_max - 1.5).abs() < 1e-9);
    }

    #[test]
    fn edgeless_graph_uses_identity_rows() {
        let g = Graph::new(3, []).unwrap();
        let lap = build_laplacians(&g, 1e-12).unwrap();
        assert_eq!(lap.laplacian.to_dense(), DenseMatrix::identity(3));
        assert_eq!(lap.first_order.to_dense(), DenseMatrix::identity(3));
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = Graph::new(4, [(0, 1, 1.0), (2, 3, 0.1), (1, 3, 2.5)]).unwrap();
        let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.checksum(), g.checksum());

        assert!(matches!(
            Graph::from_edge_list(""),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("3 2\n0 1 1.0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("3 1\n0 x 1.0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn checksum_distinguishes_graphs() {
        let a = Graph::new(3, [(0, 1, 1.0)]).unwrap();
        let b = Graph::new(3, [(0, 2, 1.0)]).unwrap();
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum().len(), 64);
    }
}
