//! Exact permanent kernels.
//!
//! `permanent_naive` enumerates permutations and stays simple:
//! it is the reference every other permanent computation is checked against.
//! `permanent_ryser` is the production kernel, O(k * 2^k) via Gray-code
//! updates of running row sums.

use num_complex::Complex64;

use crate::error::MatrixError;
use crate::matrix::{ComplexMatrix, Minor};

/// Largest dimension accepted by the enumeration kernel.
pub const NAIVE_MAX_DIM: usize = 10;
/// Largest dimension accepted by the Ryser kernel and the samplers.
pub const MAX_DIM: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `k!` in double precision for `k <= MAX_DIM`.
pub fn factorial(k: usize) -> f64 {
    assert!(k <= MAX_DIM, "factorial({k}) is outside the supported range");
    (2..=k).fold(1.0, |acc, i| acc * i as f64)
}

fn check(m: &ComplexMatrix, max: usize) -> Result<(), MatrixError> {
    if m.dim() > max {
        return Err(MatrixError::DimensionTooLarge { dim: m.dim(), max });
    }
    if m.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    Ok(())
}

/// Sum over all permutations of the products `m[i, pi(i)]`.
pub fn permanent_naive(m: &ComplexMatrix) -> Result<Complex64, MatrixError> {
    check(m, NAIVE_MAX_DIM)?;
    let n = m.dim();
    let mut used = vec![false; n];
    Ok(enumerate(m, 0, Complex64::new(1.0, 0.0), &mut used))
}

// Depth-first over row assignments; `prefix` is the product for rows < `row`.
fn enumerate(m: &ComplexMatrix, row: usize, prefix: Complex64, used: &mut [bool]) -> Complex64 {
    let n = m.dim();
    if row == n {
        return prefix;
    }
    let mut total = ZERO;
    for col in 0..n {
        if !used[col] {
            used[col] = true;
            total += enumerate(m, row + 1, prefix * m.get(row, col), used);
            used[col] = false;
        }
    }
    total
}

/// Ryser's inclusion-exclusion formula with Gray-code subset iteration.
///
/// `Per(A) = (-1)^k * sum over column subsets S of (-1)^|S| * prod_i sum_{j in S} a_ij`.
/// Consecutive Gray codes differ in one column, so each step updates the
/// `k` running row sums with a single add or subtract.
pub fn permanent_ryser(m: &ComplexMatrix) -> Result<Complex64, MatrixError> {
    check(m, MAX_DIM)?;
    Ok(ryser_unchecked(m))
}

pub(crate) fn ryser_unchecked(m: &ComplexMatrix) -> Complex64 {
    let n = m.dim();
    match n {
        1 => return m.get(0, 0),
        2 => return m.get(0, 0) * m.get(1, 1) + m.get(0, 1) * m.get(1, 0),
        _ => {}
    }
    let a = m.entries();
    let mut row_sums = [ZERO; MAX_DIM];
    let row_sums = &mut row_sums[..n];
    let mut total = ZERO;
    let mut gray: u32 = 0;
    for step in 1u32..(1u32 << n) {
        let col = step.trailing_zeros() as usize;
        gray ^= 1 << col;
        if gray & (1 << col) != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a[i * n + col];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a[i * n + col];
            }
        }
        let prod = row_sums.iter().skip(1).fold(row_sums[0], |acc, &s| acc * s);
        // |S| has the parity of the step count.
        if step & 1 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Minors `X_1 .. X_k` obtained by deleting the first row and each column in turn.
pub fn first_row_minors(m: &ComplexMatrix) -> Result<Vec<Minor>, MatrixError> {
    if m.dim() < 2 {
        return Err(MatrixError::DimensionTooSmall { dim: m.dim(), min: 2 });
    }
    Ok((0..m.dim())
        .map(|col| Minor {
            parent_dim: m.dim(),
            removed_column: col,
            matrix: m.first_row_minor(col),
        })
        .collect())
}

/// `sum_j x_1j * values[j]`, the first-row expansion given per-minor values.
pub fn first_row_expansion(m: &ComplexMatrix, minor_values: &[Complex64]) -> Complex64 {
    debug_assert_eq!(minor_values.len(), m.dim());
    m.row(0)
        .iter()
        .zip(minor_values)
        .fold(ZERO, |acc, (&x, &v)| acc + x * v)
}
