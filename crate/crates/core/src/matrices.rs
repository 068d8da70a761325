//! Non-negative encoder matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major non-negative matrix `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    lower_triangular: bool,
}

impl EncoderMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix("matrix must have at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) = {} is not a finite non-negative number",
                pos / cols,
                pos % cols,
                entries[pos]
            )));
        }
        let lower_triangular =
            rows == cols && (0..rows).all(|i| entries[i * cols + i + 1..(i + 1) * cols].iter().all(|&v| v == 0.0));
        Ok(Self {
            rows,
            cols,
            entries,
            lower_triangular,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidMatrix(format!("row {i} has {} entries, expected {cols}", rows[i].len())));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.lower_triangular
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        libm::sqrt((0..self.rows).map(|i| self.get(i, j) * self.get(i, j)).sum())
    }

    /// `|| C 1 ||_2`: sensitivity when one example touches every column.
    pub fn row_sum_norm(&self) -> f64 {
        libm::sqrt(
            (0..self.rows)
                .map(|i| {
                    let s: f64 = self.row(i).iter().sum();
                    s * s
                })
                .sum(),
        )
    }

    /// Submatrix with the first `rows` rows and `cols` columns removed.
    pub fn trailing(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows >= self.rows || cols >= self.cols {
            return Err(Error::InvalidMatrix(format!(
                "cannot drop {rows} rows and {cols} columns from a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let entries = (rows..self.rows).flat_map(|i| self.row(i)[cols..].iter().copied()).collect();
        Self::new(self.rows - rows, self.cols - cols, entries)
    }

    /// Keeps the listed columns, in order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        if keep.iter().any(|&j| j >= self.cols) {
            return Err(Error::InvalidMatrix("column index out of range".into()));
        }
        let entries = (0..self.rows).flat_map(|i| keep.iter().map(move |&j| (i, j))).map(|(i, j)| self.get(i, j)).collect();
        Self::new(self.rows, keep.len(), entries)
    }
}

/// Binary-tree encoder on `n = 2^h` steps: one row per dyadic interval,
/// singletons first, the full interval last. `(2n - 1) x n`.
pub fn binary_tree(n: usize) -> Result<EncoderMatrix> {
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut entries = Vec::with_capacity((2 * n - 1) * n);
    let mut width = 1;
    while width <= n {
        for start in (0..n).step_by(width) {
            let mut row = vec![0.0; n];
            row[start..start + width].fill(1.0);
            entries.extend(row);
        }
        width *= 2;
    }
    EncoderMatrix::new(2 * n - 1, n, entries)
}

/// `f(0) = 1`, `f(k) = f(k - 1) (1 - 1/(2k))`.
pub fn prefix_opt_coefficients(n: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(n);
    let mut v = 1.0;
    for k in 0..n {
        if k > 0 {
            v *= 1.0 - 1.0 / (2.0 * k as f64);
        }
        f.push(v);
    }
    f
}

/// Lower-triangular Toeplitz matrix `C[i][j] = f(i - j)` for `i >= j`.
pub fn toeplitz(coefficients: &[f64], n: usize) -> Result<EncoderMatrix> {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            entries[i * n + j] = coefficients.get(i - j).copied().unwrap_or(0.0);
        }
    }
    EncoderMatrix::new(n, n, entries)
}

/// Square-root factorization of the prefix-sum matrix.
pub fn prefix_opt(n: usize) -> Result<EncoderMatrix> {
    toeplitz(&prefix_opt_coefficients(n), n)
}

/// `n / 2^(h-1)` consecutive binary trees of size `2^(h-1)` on the diagonal.
pub fn tree_restart(n: usize, height: u32) -> Result<EncoderMatrix> {
    if height == 0 || height > 62 {
        return Err(Error::InvalidParameter(format!("tree height must be in 1..=62, got {height}")));
    }
    let block = 1usize << (height - 1);
    if n == 0 || !n.is_multiple_of(block) {
        return Err(Error::Divisibility { n, block });
    }
    let tree = binary_tree(block)?;
    let copies = n / block;
    let rows = tree.rows * copies;
    let mut entries = vec![0.0; rows * n];
    for c in 0..copies {
        for i in 0..tree.rows {
            let r = c * tree.rows + i;
            entries[r * n + c * block..r * n + (c + 1) * block].copy_from_slice(tree.row(i));
        }
    }
    EncoderMatrix::new(rows, n, entries)
}

pub fn identity(n: usize) -> Result<EncoderMatrix> {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
    }
    EncoderMatrix::new(n, n, entries)
}
