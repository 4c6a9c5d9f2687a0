//! Compressed sparse row adjacency and the sparse-dense product.

use std::cell::Cell;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, PAR_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square CSR from raw arrays. Column indices must be strictly increasing
    /// within each row.
    pub fn from_parts(
        n: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n + 1 || indptr[0] != 0 || indptr[n] != indices.len() {
            return Err(Error::Validation("malformed CSR row pointer".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::Validation("CSR index/value length mismatch".into()));
        }
        for r in 0..n {
            if indptr[r] > indptr[r + 1] {
                return Err(Error::Validation("CSR row pointer not monotone".into()));
            }
            let cols = &indices[indptr[r]..indptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "CSR columns of row {r} not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= n {
                    return Err(Error::Index {
                        index: c,
                        num_nodes: n,
                    });
                }
            }
        }
        Ok(Self {
            n,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `(column, value)` pairs of row `r` in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = self.row_indices(r);
        match cols.binary_search(&c) {
            Ok(pos) => self.values[self.indptr[r] + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d.set(r, c, v);
            }
        }
        d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

thread_local! {
    static SPMM_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`spmm`] calls issued from the current thread so far.
pub fn spmm_count() -> u64 {
    SPMM_CALLS.with(Cell::get)
}

/// `adjacency · dense`; row `i` of the result is `Σ_j A_ij · dense_j`.
pub fn spmm(adjacency: &CsrMatrix, dense: &DenseMatrix) -> Result<DenseMatrix> {
    if adjacency.n != dense.rows() {
        return Err(Error::shape(
            "spmm",
            format!(
                "{}x{} sparse · {}x{} dense",
                adjacency.n,
                adjacency.n,
                dense.rows(),
                dense.cols()
            ),
        ));
    }
    SPMM_CALLS.with(|c| c.set(c.get() + 1));
    let d = dense.cols();
    let mut out = DenseMatrix::zeros(adjacency.n, d);
    if d == 0 {
        return Ok(out);
    }
    let kernel = |(i, out_row): (usize, &mut [f64])| {
        for (j, a_ij) in adjacency.row(i) {
            for (o, &x) in out_row.iter_mut().zip(dense.row(j)) {
                *o += a_ij * x;
            }
        }
    };
    if adjacency.nnz() * d >= PAR_THRESHOLD {
        out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(kernel);
    } else {
        out.as_mut_slice().chunks_mut(d).enumerate().for_each(kernel);
    }
    Ok(out)
}

/// Symmetric normalisation `D^{-1/2}(A + I)D^{-1/2}` of an undirected edge
/// list, with `D` the degree matrix of `A + I`.
///
/// Edges may be listed once or in both directions and may repeat; explicit
/// self-loops merge with the one added here.
pub fn normalize_adjacency(edges: &[(usize, usize)], num_nodes: usize) -> Result<CsrMatrix> {
    let mut neighbours: Vec<Vec<usize>> = (0..num_nodes).map(|i| vec![i]).collect();
    for &(s, t) in edges {
        for idx in [s, t] {
            if idx >= num_nodes {
                return Err(Error::Index {
                    index: idx,
                    num_nodes,
                });
            }
        }
        if s != t {
            neighbours[s].push(t);
            neighbours[t].push(s);
        }
    }
    for list in &mut neighbours {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<f64> = neighbours.iter().map(|l| l.len() as f64).collect();

    let mut indptr = Vec::with_capacity(num_nodes + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for (i, list) in neighbours.iter().enumerate() {
        for &j in list {
            indices.push(j);
            // d_i * d_j commutes exactly, so A_ij and A_ji are bit-identical.
            values.push(1.0 / (degree[i] * degree[j]).sqrt());
        }
        indptr.push(indices.len());
    }
    Ok(CsrMatrix {
        n: num_nodes,
        indptr,
        indices,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_reference(a: &DenseMatrix, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), x.cols());
        for i in 0..a.rows() {
            for c in 0..x.cols() {
                let mut s = 0.0;
                for j in 0..a.cols() {
                    s += a.get(i, j) * x.get(j, c);
                }
                out.set(i, c, s);
            }
        }
        out
    }

    #[test]
    fn isolated_node_gets_unit_self_loop() {
        let a = normalize_adjacency(&[], 1).unwrap();
        assert_eq!(a.to_dense().as_slice(), &[1.0]);
    }

    #[test]
    fn single_edge_gives_halves() {
        let a = normalize_adjacency(&[(0, 1)], 2).unwrap();
        assert_eq!(a.to_dense().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn three_node_path() {
        let a = normalize_adjacency(&[(0, 1), (1, 2)], 3).unwrap();
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(0, 1) - 0.4082).abs() < 1e-4);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn explicit_self_loops_and_duplicates_are_merged() {
        let a = normalize_adjacency(&[(0, 0), (0, 1), (1, 0), (0, 1)], 2).unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.to_dense().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn out_of_range_edge_is_an_index_error() {
        let err = normalize_adjacency(&[(0, 3)], 3).unwrap_err();
        assert!(matches!(err, Error::Index { index: 3, num_nodes: 3 }));
    }

    #[test]
    fn regular_graph_entries_are_one_over_degree_plus_one() {
        // 6-cycle: every node has degree 2.
        let edges: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let a = normalize_adjacency(&edges, 6).unwrap();
        assert!(a.values().iter().all(|&v| v == 1.0 / 3.0));
    }

    #[test]
    fn spmm_identity_and_hand_case() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![3.5, 0.25], vec![0.0, 9.0]]);
        assert_eq!(spmm(&CsrMatrix::identity(3), &x).unwrap(), x);
        let a = normalize_adjacency(&[(0, 1)], 2).unwrap();
        let y = spmm(&a, &DenseMatrix::from_rows(&[vec![2.0], vec![4.0]])).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 3.0]);
    }

    #[test]
    fn spmm_rejects_mismatched_rows() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(spmm(&a, &DenseMatrix::zeros(2, 1)), Err(Error::Shape { .. })));
    }

    #[test]
    fn spmm_counter_advances() {
        let a = CsrMatrix::identity(2);
        let before = spmm_count();
        spmm(&a, &DenseMatrix::zeros(2, 1)).unwrap();
        assert_eq!(spmm_count(), before + 1);
    }

    #[test]
    fn from_parts_validates_ordering() {
        assert!(CsrMatrix::from_parts(2, vec![0, 2, 3], vec![1, 0, 1], vec![1.0; 3]).is_err());
        assert!(CsrMatrix::from_parts(2, vec![0, 1, 2], vec![0, 1], vec![1.0; 2]).is_ok());
    }

    fn random_edges(seed: u64, n: usize) -> Vec<(usize, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i..n {
                if rng.gen_bool(0.3) {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    proptest! {
        #[test]
        fn spmm_matches_dense_product(seed in 0u64..10_000, d in 1usize..5) {
            let n = 8;
            let a = normalize_adjacency(&random_edges(seed, n), n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let x = DenseMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
            let diff = spmm(&a, &x).unwrap().max_abs_diff(&dense_reference(&a.to_dense(), &x)).unwrap();
            prop_assert!(diff <= 1e-12);
        }

        #[test]
        fn normalisation_is_exactly_symmetric(seed in 0u64..10_000, n in 1usize..12) {
            let a = normalize_adjacency(&random_edges(seed, n), n).unwrap();
            let d = a.to_dense();
            for i in 0..n {
                prop_assert!(a.row_indices(i).contains(&i));
                for j in 0..n {
                    prop_assert_eq!(d.get(i, j).to_bits(), d.get(j, i).to_bits());
                    let v = d.get(i, j);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
