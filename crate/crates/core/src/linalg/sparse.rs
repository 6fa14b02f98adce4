use crate::error::{ensure, Error, Result};

use super::DenseMatrix;

/// Compressed sparse row matrix in canonical form: column indices within
/// each row are strictly increasing and duplicates have been summed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        ensure(row_offsets.len() == n_rows + 1, || {
            format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )
        })?;
        ensure(row_offsets[0] == 0, || "row_offsets[0] must be 0".into())?;
        ensure(
            row_offsets[n_rows] == values.len() && values.len() == col_indices.len(),
            || "row_offsets, col_indices and values disagree on nnz".into(),
        )?;
        for i in 0..n_rows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            ensure(start <= end, || format!("row_offsets decreases at row {i}"))?;
            let cols = &col_indices[start..end];
            ensure(cols.windows(2).all(|w| w[0] < w[1]), || {
                format!("column indices of row {i} are not strictly increasing")
            })?;
            ensure(cols.iter().all(|&c| c < n_cols), || {
                format!("column index out of range in row {i}")
            })?;
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a canonical CSR matrix from `(row, col, value)` triplets.
    /// Repeated coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, _) in triplets {
            ensure(i < n_rows && j < n_cols, || {
                format!("triplet ({i}, {j}) outside a {n_rows}x{n_cols} matrix")
            })?;
        }
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
                continue;
            }
            col_indices.push(j);
            values.push(v);
            row_offsets[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.n_rows() {
            for j in 0..m.n_cols() {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.n_rows(), m.n_cols(), &triplets).expect("indices in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Sparse-dense product `self · x`.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        ensure(self.n_cols == x.n_rows(), || {
            format!(
                "spmm dimension mismatch: {}x{} · {}x{}",
                self.n_rows,
                self.n_cols,
                x.n_rows(),
                x.n_cols()
            )
        })?;
        let f = x.n_cols();
        let mut out = DenseMatrix::zeros(self.n_rows, f);
        for i in 0..self.n_rows {
            let out_row = out.row_mut(i);
            for (j, a) in self.row(i) {
                for (o, &b) in out_row.iter_mut().zip(x.row(j)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure(self.n_cols == x.len(), || {
            format!(
                "spmv dimension mismatch: {}x{} · {}",
                self.n_rows,
                self.n_cols,
                x.len()
            )
        })?;
        Ok((0..self.n_rows)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect())
    }

    /// `scale · self + shift · I` for a square matrix.
    pub fn scale_shift(&self, scale: f64, shift: f64) -> Result<Self> {
        ensure(self.n_rows == self.n_cols, || {
            "scale_shift needs a square matrix".into()
        })?;
        let mut triplets: Vec<_> = (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, scale * v)))
            .collect();
        triplets.extend((0..self.n_rows).map(|i| (i, i, shift)));
        Self::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    /// Largest `|A[i,j] − A[j,i]|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Checks symmetry on up to `samples` stored entries spread evenly over
    /// the storage order.
    pub(crate) fn sampled_symmetry_check(&self, samples: usize, tol: f64) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::contract(format!(
                "expected a square matrix, got {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        let nnz = self.nnz();
        if nnz == 0 {
            return Ok(());
        }
        let stride = (nnz / samples.max(1)).max(1);
        let mut row = 0;
        for k in (0..nnz).step_by(stride) {
            while self.row_offsets[row + 1] <= k {
                row += 1;
            }
            let (col, v) = (self.col_indices[k], self.values[k]);
            let mirror = self.get(col, row);
            if (v - mirror).abs() > tol * v.abs().max(1.0) {
                return Err(Error::contract(format!(
                    "matrix is not symmetric: A[{row},{col}]={v} but A[{col},{row}]={mirror}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_times_x_is_x() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(SparseMatrix::identity(3).spmm(&x).unwrap(), x);
    }

    #[test]
    fn empty_matrix_gives_zeros() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let out = SparseMatrix::zeros(3, 3).spmm(&x).unwrap();
        assert_eq!(out, DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn swap_matrix() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0], [2.0]]);
        assert_eq!(a.spmm(&x).unwrap(), DenseMatrix::from_rows(&[[2.0], [1.0]]));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = SparseMatrix::identity(3);
        assert!(matches!(
            a.spmm(&DenseMatrix::zeros(2, 1)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn triplets_are_canonicalised() {
        let a = SparseMatrix::from_triplets(
            2,
            3,
            &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (0, 1, 0.5)],
        )
        .unwrap();
        assert_eq!(a.row_offsets(), &[0, 1, 3]);
        assert_eq!(a.col_indices(), &[1, 0, 2]);
        assert_eq!(a.values(), &[2.5, 3.0, 1.0]);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn from_csr_validates_invariants() {
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
        // unsorted columns
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        // column out of range
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        // nnz disagreement
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 2], vec![0], vec![1.0]).is_err());
    }

    #[test]
    fn scale_shift_adds_diagonal() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let b = a.scale_shift(2.0, -1.0).unwrap();
        assert_eq!(
            b.to_dense(),
            DenseMatrix::from_rows(&[[-1.0, 2.0], [2.0, -1.0]])
        );
    }

    #[test]
    fn sampled_symmetry_detects_asymmetry() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert!(a.sampled_symmetry_check(16, 1e-12).is_err());
        assert!(SparseMatrix::identity(4)
            .sampled_symmetry_check(16, 1e-12)
            .is_ok());
    }
}
