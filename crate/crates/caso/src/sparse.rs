//! Compressed sparse row matrices over f64.

use ndarray::{Array2, ArrayView2};

/// Sparse matrix in compressed row form. Column indices within a row are
/// strictly increasing; duplicate entries are summed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets. Duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices of row `r`.
    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Values of row `r`, parallel to `row_indices`.
    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn iter_row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_indices(r)
            .iter()
            .copied()
            .zip(self.row_values(r).iter().copied())
    }

    /// True iff entry (r, c) is structurally present.
    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row_indices(r).binary_search(&c).is_ok()
    }

    /// Returns a copy with every value mapped through `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Csr {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            let (start, end) = (self.row_ptr[r], self.row_ptr[r + 1]);
            for k in start..end {
                out.values[k] = f(r, self.col_idx[k], self.values[k]);
            }
        }
        out
    }

    /// out = self · v, shape (n_rows, d).
    pub fn apply(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, v.nrows(), "operand row count mismatch");
        let d = v.ncols();
        let mut out = Array2::zeros((self.n_rows, d));
        for r in 0..self.n_rows {
            let mut acc = out.row_mut(r);
            for (c, w) in self.iter_row(r) {
                acc.scaled_add(w, &v.row(c));
            }
        }
        out
    }

    /// out = selfᵀ · v, shape (n_cols, d). Scatters row contributions.
    pub fn apply_transpose(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.n_rows, v.nrows(), "operand row count mismatch");
        let d = v.ncols();
        let mut out = Array2::zeros((self.n_cols, d));
        for r in 0..self.n_rows {
            let src = v.row(r);
            for (c, w) in self.iter_row(r) {
                out.row_mut(c).scaled_add(w, &src);
            }
        }
        out
    }

    /// Dense copy; intended for small test oracles only.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, w) in self.iter_row(r) {
                out[[r, c]] += w;
            }
        }
        out
    }
}
