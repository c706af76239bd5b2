//! Compressed-sparse-row matrices and the GCN propagation operator.

use rayon::prelude::*;

use super::{DenseMatrix, NumericsError};

const PAR_ROWS: usize = 2048;

/// CSR matrix. Column indices are sorted within each row and no stored
/// value is exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// resulting zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, NumericsError> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(NumericsError::Shape(format!(
                "entry ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|(_, _, v)| !v.is_finite()) {
            return Err(NumericsError::NonFinite { row: r, col: c });
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((c, v), r) in indices.into_iter().zip(values).zip(row_of) {
            if v != 0.0 {
                keep_idx.push(c);
                keep_val.push(v);
                offsets[r + 1] += 1;
            }
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Ok(Self { rows, cols, offsets, indices: keep_idx, values: keep_val })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.offsets[r]..self.offsets[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        SparseMatrix::from_triplets(self.cols, self.rows, triplets).expect("transpose of valid CSR")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    /// Row-parallel sparse × dense product. Each output row is accumulated
    /// in column order, so the result is independent of the thread count.
    pub fn spmm(&self, dense: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
        if self.cols != dense.rows() {
            return Err(NumericsError::Shape(format!(
                "spmm: {}x{} sparse vs {}x{} dense",
                self.rows,
                self.cols,
                dense.rows(),
                dense.cols()
            )));
        }
        let n = dense.cols();
        let mut out = DenseMatrix::zeros(self.rows, n);
        if n == 0 {
            return Ok(out);
        }
        let kernel = |(r, out_row): (usize, &mut [f64])| {
            for (c, v) in self.row(r) {
                for (o, &d) in out_row.iter_mut().zip(dense.row(c)) {
                    *o += v * d;
                }
            }
        };
        let data = out.as_mut_slice();
        if self.rows >= PAR_ROWS {
            data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(out)
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` holds the row sums of `A + I`.
///
/// With `symmetrize`, `A` is first replaced by the binary union of `A` and
/// `Aᵀ`, which makes the result symmetric.
pub fn normalize_adjacency(adj: &SparseMatrix, symmetrize: bool) -> Result<SparseMatrix, NumericsError> {
    if adj.rows != adj.cols {
        return Err(NumericsError::Shape(format!(
            "adjacency must be square, got {}x{}",
            adj.rows, adj.cols
        )));
    }
    let n = adj.rows;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * adj.nnz() + n);
    for r in 0..n {
        for (c, v) in adj.row(r) {
            if r == c {
                continue;
            }
            if symmetrize {
                triplets.push((r, c, 1.0));
                triplets.push((c, r, 1.0));
            } else {
                triplets.push((r, c, v));
            }
        }
    }
    let mut a = SparseMatrix::from_triplets(n, n, triplets)?;
    if symmetrize {
        // union, not sum: reciprocal edges must stay binary
        for v in a.values.iter_mut() {
            *v = 1.0;
        }
    }
    let mut with_loops: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + n);
    for r in 0..n {
        with_loops.extend(a.row(r).map(|(c, v)| (r, c, v)));
        with_loops.push((r, r, 1.0 + adj.get(r, r)));
    }
    let tilde = SparseMatrix::from_triplets(n, n, with_loops)?;
    let degree: Vec<f64> = (0..n).map(|r| tilde.row(r).map(|(_, v)| v).sum()).collect();
    let mut out = tilde;
    for r in 0..n {
        let span = out.offsets[r]..out.offsets[r + 1];
        for k in span {
            let c = out.indices[k];
            let d = degree[r] * degree[c];
            out.values[k] = if d > 0.0 { out.values[k] / d.sqrt() } else { 0.0 };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        SparseMatrix::from_triplets(n, n, edges.iter().map(|&(a, b)| (a, b, 1.0)).collect()).unwrap()
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let a = SparseMatrix::from_triplets(1, 1, vec![]).unwrap();
        let hat = normalize_adjacency(&a, true).unwrap();
        assert_eq!(hat.to_dense().as_slice(), &[1.0]);
    }

    #[test]
    fn single_edge_gives_halves() {
        let hat = normalize_adjacency(&undirected(2, &[(0, 1)]), true).unwrap();
        assert_eq!(hat.to_dense().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn path_of_three() {
        // degrees with self-loops: 2, 3, 2
        let hat = normalize_adjacency(&undirected(3, &[(0, 1), (1, 2)]), true).unwrap();
        let tol = 1e-15;
        assert!((hat.get(0, 0) - 0.5).abs() < tol);
        assert!((hat.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < tol);
        assert!((hat.get(1, 1) - 1.0 / 3.0).abs() < tol);
        assert!((hat.get(2, 2) - 0.5).abs() < tol);
        assert_eq!(hat.get(0, 2), 0.0);
        assert_eq!(hat.nnz(), 7);
        assert!(hat.is_symmetric(0.0));
    }

    #[test]
    fn reciprocal_edges_stay_binary() {
        let one_way = normalize_adjacency(&undirected(2, &[(0, 1)]), true).unwrap();
        let both = normalize_adjacency(&undirected(2, &[(0, 1), (1, 0)]), true).unwrap();
        assert_eq!(one_way, both);
    }

    #[test]
    fn non_square_rejected() {
        let a = SparseMatrix::from_triplets(2, 3, vec![]).unwrap();
        assert!(normalize_adjacency(&a, true).is_err());
    }

    #[test]
    fn identity_spmm_is_noop() {
        let mut rng = RngStream::new(5);
        let d = DenseMatrix::glorot(6, 3, &mut rng);
        assert_eq!(SparseMatrix::identity(6).spmm(&d).unwrap(), d);
    }

    #[test]
    fn averaging_product() {
        let hat = normalize_adjacency(&undirected(2, &[(0, 1)]), true).unwrap();
        let x = DenseMatrix::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
        assert_eq!(hat.spmm(&x).unwrap().as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn spmm_matches_dense_oracle() {
        let mut rng = RngStream::new(99);
        let mut triplets = Vec::new();
        for r in 0..20 {
            for c in 0..20 {
                if rng.bernoulli(0.2) {
                    triplets.push((r, c, rng.normal()));
                }
            }
        }
        let s = SparseMatrix::from_triplets(20, 20, triplets).unwrap();
        let d = DenseMatrix::glorot(20, 5, &mut rng);
        let sparse = s.spmm(&d).unwrap();
        // independent triple loop over the dense form
        let sd = s.to_dense();
        for i in 0..20 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..20 {
                    acc += sd.get(i, k) * d.get(k, j);
                }
                assert!((sparse.get(i, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let s = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 0, 1.0)])
            .unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.get(1, 0), 3.0);
    }
}
