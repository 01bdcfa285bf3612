//! Undirected graphs in CSR form and the propagation operators built on them.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng;

/// Above this node count polynomial filters are applied lazily instead of
/// being materialized as sparse matrices.
pub const MATERIALIZE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfLoops {
    #[default]
    Reject,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeStats {
    pub deg_min: usize,
    pub deg_max: usize,
    pub n: usize,
    pub edge_count: usize,
}

/// Build a symmetric, deduplicated CSR graph from an undirected edge list.
pub fn build_graph(
    edges: &[(usize, usize)],
    n: usize,
    self_loops: SelfLoops,
) -> Result<SparseGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "graph needs at least one node".into(),
        ));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidData(format!(
                "edge ({u},{v}) out of range for n={n}"
            )));
        }
        if u == v {
            match self_loops {
                SelfLoops::Reject => {
                    return Err(Error::InvalidData(format!("self-loop at node {u}")))
                }
                SelfLoops::Ignore => continue,
            }
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    Ok(SparseGraph::from_adjacency(adj))
}

impl SparseGraph {
    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> SparseGraph {
        let n = adj.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        SparseGraph {
            n,
            row_ptr,
            col_idx,
        }
    }

    /// Validate raw CSR arrays.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<SparseGraph> {
        let bad = |m: &str| Err(Error::InvalidData(format!("invalid CSR: {m}")));
        if n == 0 || row_ptr.len() != n + 1 || row_ptr[0] != 0 {
            return bad("row_ptr shape");
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) || row_ptr[n] != col_idx.len() {
            return bad("row_ptr not monotone");
        }
        let g = SparseGraph {
            n,
            row_ptr,
            col_idx,
        };
        for i in 0..n {
            let nb = g.neighbors(i);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return bad("row not strictly sorted");
            }
            for &j in nb {
                if j >= n || j == i {
                    return bad("index out of range or self-loop");
                }
                if g.neighbors(j).binary_search(&i).is_err() {
                    return bad("asymmetric entry");
                }
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn edge_count(&self) -> usize {
        self.col_idx.len() / 2
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degs = (0..self.n).map(|i| self.degree(i));
        DegreeStats {
            deg_min: degs.clone().min().unwrap_or(0),
            deg_max: degs.max().unwrap_or(0),
            n: self.n,
            edge_count: self.edge_count(),
        }
    }
}

/// Sparse nonnegative operator in CSR form with its cached max row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    inf_norm: f64,
}

impl PropagationMatrix {
    fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        let mut m = PropagationMatrix {
            n,
            row_ptr,
            col_idx,
            values,
            inf_norm: 0.0,
        };
        m.inf_norm = m.row_sums().into_iter().fold(0.0, f64::max);
        m
    }

    pub fn identity(n: usize) -> Self {
        PropagationMatrix::new(n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn inf_norm(&self) -> f64 {
        self.inf_norm
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Row sums, accumulated left to right.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                for &v in self.row(i).1 {
                    s += v;
                }
                s
            })
            .collect()
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut s = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    s += v * x[j];
                }
                s
            })
            .collect()
    }

    /// `self * x` for a dense `n x k` matrix.
    pub fn apply(&self, x: &Mat) -> Mat {
        assert_eq!(x.rows(), self.n, "propagation row count");
        let mut out = Mat::zeros(self.n, x.cols());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let o = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (a, &b) in o.iter_mut().zip(x.row(j)) {
                    *a += v * b;
                }
            }
        }
        out
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &PropagationMatrix) -> PropagationMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut mark = vec![false; n];
        let mut touched = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
            row_ptr.push(col_idx.len());
        }
        PropagationMatrix::new(n, row_ptr, col_idx, values)
    }

    /// `a * self + b * other` on the union pattern.
    pub fn lin_comb(&self, a: f64, other: &PropagationMatrix, b: f64) -> PropagationMatrix {
        assert_eq!(self.n, other.n);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n {
            let (xc, xv) = self.row(i);
            let (yc, yv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < xc.len() || q < yc.len() {
                let cx = xc.get(p).copied().unwrap_or(usize::MAX);
                let cy = yc.get(q).copied().unwrap_or(usize::MAX);
                if cx < cy {
                    col_idx.push(cx);
                    values.push(a * xv[p]);
                    p += 1;
                } else if cy < cx {
                    col_idx.push(cy);
                    values.push(b * yv[q]);
                    q += 1;
                } else {
                    col_idx.push(cx);
                    values.push(a * xv[p] + b * yv[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        PropagationMatrix::new(self.n, row_ptr, col_idx, values)
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.set(i, j, v);
            }
        }
        m
    }
}

/// `(D+I)^{-1/2} (A+I) (D+I)^{-1/2}`
pub fn normalized_adjacency(g: &SparseGraph) -> PropagationMatrix {
    let n = g.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.col_idx().len() + n);
    let mut values = Vec::with_capacity(g.col_idx().len() + n);
    row_ptr.push(0);
    for i in 0..n {
        let nb = g.neighbors(i);
        let split = nb.partition_point(|&j| j < i);
        for &j in &nb[..split] {
            col_idx.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        col_idx.push(i);
        values.push(inv_sqrt[i] * inv_sqrt[i]);
        for &j in &nb[split..] {
            col_idx.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        row_ptr.push(col_idx.len());
    }
    PropagationMatrix::new(n, row_ptr, col_idx, values)
}

/// `||P^k||_inf` as the largest entry of `P^k 1` (exact for nonnegative `P`).
pub fn inf_norm_power(p: &PropagationMatrix, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut v = vec![1.0; p.n()];
    for _ in 0..k {
        v = p.mat_vec(&v);
    }
    v.into_iter().fold(0.0, f64::max)
}

/// `sqrt((deg_max + 1) / (deg_min + 1))`
pub fn degree_bound(s: &DegreeStats) -> f64 {
    ((s.deg_max as f64 + 1.0) / (s.deg_min as f64 + 1.0)).sqrt()
}

/// Coefficients `c_k` of the APPNP filter `sum_k c_k P^k`, `k = 0..=K`.
pub fn appnp_coefficients(gamma: f64, k: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma={gamma} outside [0,1]"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("APPNP needs K >= 1".into()));
    }
    let mut c: Vec<f64> = (0..k)
        .map(|i| gamma * (1.0 - gamma).powi(i as i32))
        .collect();
    c.push((1.0 - gamma).powi(k as i32));
    Ok(c)
}

/// Materialize `sum_k c_k P^k` by Horner's rule.
pub fn poly_filter(p: &PropagationMatrix, coeffs: &[f64]) -> PropagationMatrix {
    let id = PropagationMatrix::identity(p.n());
    let Some((&last, rest)) = coeffs.split_last() else {
        return id.lin_comb(0.0, &id, 0.0);
    };
    let mut m = id.lin_comb(last, &id, 0.0);
    for &c in rest.iter().rev() {
        m = m.matmul(p).lin_comb(1.0, &id, c);
    }
    m
}

pub fn appnp_filter(p: &PropagationMatrix, gamma: f64, k: usize) -> Result<PropagationMatrix> {
    Ok(poly_filter(p, &appnp_coefficients(gamma, k)?))
}

/// `[X, PX, ..., P^K X]`
pub fn gpr_powers(p: &PropagationMatrix, x: &Mat, k: usize) -> Result<Vec<Mat>> {
    if x.rows() != p.n() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} rows, graph has {} nodes",
            x.rows(),
            p.n()
        )));
    }
    let mut out = Vec::with_capacity(k + 1);
    out.push(x.clone());
    for i in 0..k {
        let next = p.apply(&out[i]);
        out.push(next);
    }
    Ok(out)
}

/// A polynomial filter in a propagation matrix, either stored or applied on the fly.
#[derive(Debug, Clone)]
pub enum Filter {
    Materialized(PropagationMatrix),
    Lazy {
        base: PropagationMatrix,
        coeffs: Vec<f64>,
    },
}

impl Filter {
    pub fn appnp(p: &PropagationMatrix, gamma: f64, k: usize) -> Result<Filter> {
        let coeffs = appnp_coefficients(gamma, k)?;
        Ok(Filter::from_coeffs(p, coeffs, p.n() <= MATERIALIZE_LIMIT))
    }

    pub fn from_coeffs(p: &PropagationMatrix, coeffs: Vec<f64>, materialize: bool) -> Filter {
        if materialize {
            Filter::Materialized(poly_filter(p, &coeffs))
        } else {
            Filter::Lazy {
                base: p.clone(),
                coeffs,
            }
        }
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        match self {
            Filter::Materialized(m) => m.apply(x),
            Filter::Lazy { base, coeffs } => {
                let Some((&last, rest)) = coeffs.split_last() else {
                    return Mat::zeros(x.rows(), x.cols());
                };
                let mut acc = x.scale(last);
                for &c in rest.iter().rev() {
                    acc = base.apply(&acc);
                    acc.axpy(c, x);
                }
                acc
            }
        }
    }

    /// Max absolute row sum. Exact when all coefficients are nonnegative.
    pub fn inf_norm(&self) -> f64 {
        match self {
            Filter::Materialized(m) => (0..m.n())
                .map(|i| m.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Filter::Lazy { base, .. } => {
                let ones = Mat::from_fn(base.n(), 1, |_, _| 1.0);
                self.apply(&ones)
                    .as_slice()
                    .iter()
                    .fold(0.0, |a, &b| a.max(b.abs()))
            }
        }
    }
}

/// Remove each undirected edge independently with probability `p`.
pub fn drop_edge(g: &SparseGraph, p: f64, seed: u64) -> Result<SparseGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "drop probability {p} outside [0,1]"
        )));
    }
    let mut r = rng::stream(seed, "drop-edge");
    let kept: Vec<(usize, usize)> = g
        .edges()
        .into_iter()
        .filter(|_| r.random::<f64>() >= p)
        .collect();
    build_graph(&kept, g.n(), SelfLoops::Reject)
}

/// Planted-partition graph; node labels are block indices in order.
pub fn sbm_generate(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(SparseGraph, Vec<usize>)> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidArgument(
            "block sizes must be nonempty and positive".into(),
        ));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} outside [0,1]"
            )));
        }
    }
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut r = rng::stream(seed, "sbm-edges");
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok((build_graph(&edges, n, SelfLoops::Reject)?, labels))
}
