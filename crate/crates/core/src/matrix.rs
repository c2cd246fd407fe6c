//! Dense square complex matrices and first-row minors.
//!
//! Indices are 0-based throughout the code. Documentation that talks about
//! "column j" of the first row in the mathematical sense uses 1-based
//! numbering; `Minor::removed_column` is stored 0-based.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::MatrixError;

/// A dense `dim x dim` complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, checking squareness and finiteness.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::DimensionTooSmall { dim, min: 1 });
        }
        if entries.len() != dim * dim {
            return Err(MatrixError::NotSquare {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MatrixError::NonFinite);
        }
        Ok(Self { dim, entries })
    }

    /// Row-major entries with the dimension inferred from their count.
    pub fn from_entries(entries: Vec<Complex64>) -> Result<Self, MatrixError> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        Self::new(dim, entries)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, MatrixError> {
        let dim = rows.len();
        let entries: Vec<Complex64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MatrixError::NotSquare {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Self::new(dim, entries)
    }

    /// Convenience constructor for real-valued matrices.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, entries }
    }

    /// Internal constructor for entries already known to be valid.
    pub(crate) fn from_parts_unchecked(dim: usize, entries: Vec<Complex64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    /// Returns a copy with row `row` replaced by `values`.
    pub fn with_row(&self, row: usize, values: &[Complex64]) -> Result<Self, MatrixError> {
        if values.len() != self.dim {
            return Err(MatrixError::NotSquare {
                expected: self.dim,
                actual: values.len(),
            });
        }
        let mut entries = self.entries.clone();
        entries[row * self.dim..(row + 1) * self.dim].copy_from_slice(values);
        Self::new(self.dim, entries)
    }

    /// Reorders rows so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for &src in perm {
            entries.extend_from_slice(self.row(src));
        }
        Self::from_parts_unchecked(n, entries)
    }

    /// Reorders columns so that new column `j` is old column `perm[j]`.
    pub fn permute_cols(&self, perm: &[usize]) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            entries.extend(perm.iter().map(|&src| self.get(i, src)));
        }
        Self::from_parts_unchecked(n, entries)
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let entries = (0..n * n).map(|idx| self.get(idx % n, idx / n)).collect();
        Self::from_parts_unchecked(n, entries)
    }

    /// The matrix with the first row and column `col` (0-based) deleted.
    ///
    /// Callers guarantee `dim >= 2` and `col < dim`.
    pub(crate) fn first_row_minor(&self, col: usize) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity((n - 1) * (n - 1));
        for i in 1..n {
            let row = self.row(i);
            entries.extend_from_slice(&row[..col]);
            entries.extend_from_slice(&row[col + 1..]);
        }
        Self::from_parts_unchecked(n - 1, entries)
    }
}

/// The minor `X_j` of a parent matrix: first row and column `j` removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Minor {
    pub parent_dim: usize,
    /// 0-based index of the deleted column.
    pub removed_column: usize,
    pub matrix: ComplexMatrix,
}

/// Serialized form: a list of `[re, im]` pairs in row-major order.
#[derive(Serialize, Deserialize)]
struct RawMatrix(Vec<[f64; 2]>);

impl TryFrom<RawMatrix> for ComplexMatrix {
    type Error = MatrixError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        ComplexMatrix::from_entries(raw.0.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<ComplexMatrix> for RawMatrix {
    fn from(m: ComplexMatrix) -> Self {
        RawMatrix(m.entries.into_iter().map(|z| [z.re, z.im]).collect())
    }
}
