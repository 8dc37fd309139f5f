//! Compressed sparse row storage for the `N² × N²` Kronecker moment matrices.
//!
//! The moment matrices of the activation model (`Ā⊗Ā + C_A` and friends) are
//! extremely sparse once `N` grows past a handful of nodes, and they only ever
//! act on block vectors through `(S ⊗ I_b) x`, which [`SparseMatrix::apply_blocks`]
//! evaluates without forming the identity factor.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
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

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |j| (r, self.col_idx[j], self.values[j]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match span.binary_search(&c) {
            Ok(j) => self.values[self.row_ptr[r] + j],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_triplets(self.rows, self.cols, self.iter().chain(other.iter()).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Ordinary Kronecker product `a ⊗ b`.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let mut triplets = Vec::with_capacity(a.nnz() * b.nnz());
        for (i, j, x) in a.iter() {
            for (k, l, y) in b.iter() {
                triplets.push((i * b.rows + k, j * b.cols + l, x * y));
            }
        }
        Self::from_triplets(a.rows * b.rows, a.cols * b.cols, triplets)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, c, v) in self.iter() {
            sums[c] += v;
        }
        sums
    }

    pub fn min_value(&self) -> f64 {
        // implicit zeros count when the matrix is not full
        let implicit = if self.nnz() < self.rows * self.cols { 0.0 } else { f64::INFINITY };
        self.values.iter().copied().fold(implicit, f64::min)
    }

    /// `y = (S ⊗ I_block) x` where `x` and `y` are block vectors.
    pub fn apply_blocks(&self, x: &[f64], block: usize, y: &mut [f64]) {
        assert_eq!(x.len(), self.cols * block);
        assert_eq!(y.len(), self.rows * block);
        for r in 0..self.rows {
            let out = &mut y[r * block..(r + 1) * block];
            out.iter_mut().for_each(|v| *v = 0.0);
            for j in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[j];
                let s = self.values[j];
                let src = &x[c * block..(c + 1) * block];
                for (o, &v) in out.iter_mut().zip(src) {
                    *o += s * v;
                }
            }
        }
    }

    /// `y = (Sᵀ ⊗ I_block) x` without materializing the transpose.
    pub fn apply_blocks_transposed(&self, x: &[f64], block: usize, y: &mut [f64]) {
        assert_eq!(x.len(), self.rows * block);
        assert_eq!(y.len(), self.cols * block);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.rows {
            let src = &x[r * block..(r + 1) * block];
            for j in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[j];
                let s = self.values[j];
                let out = &mut y[c * block..(c + 1) * block];
                for (o, &v) in out.iter_mut().zip(src) {
                    *o += s * v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let s = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 0.5)]);
        assert_eq!(s.get(0, 1), 1.5);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.get(1, 1), 0.0);
        assert_eq!(s.nnz(), 2);
    }

    #[test]
    fn kron_matches_dense() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 4.0, 5.0, 0.0]);
        let k = SparseMatrix::kron(&SparseMatrix::from_dense(&a), &SparseMatrix::from_dense(&b));
        assert_eq!(k.to_dense(), a.kronecker(&b));
    }

    #[test]
    fn block_apply_matches_dense_kron() {
        let s = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.5]);
        let sp = SparseMatrix::from_dense(&s);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let mut y = vec![0.0; 4];
        sp.apply_blocks(&x, 2, &mut y);
        let dense = s.kronecker(&DMatrix::<f64>::identity(2, 2)) * nalgebra::DVector::from_column_slice(&x);
        assert_eq!(y, dense.as_slice());

        let xt = [1.0, 2.0, 3.0, 4.0];
        let mut yt = vec![0.0; 6];
        sp.apply_blocks_transposed(&xt, 2, &mut yt);
        let dense_t =
            s.transpose().kronecker(&DMatrix::<f64>::identity(2, 2)) * nalgebra::DVector::from_column_slice(&xt);
        assert_eq!(yt, dense_t.as_slice());
    }
}
