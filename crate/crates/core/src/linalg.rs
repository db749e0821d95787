//! Dense least squares and row compression.
//!
//! Regression systems here are tall (`p` up to ~10⁶ rows) and thin (at most a
//! few dozen columns). Every quantity the regression needs, from residuals of
//! arbitrary column subsets to rank decisions, is available from the
//! triangular factor of `[Ω | ṅ]`, so the rows are streamed once through
//! [`RowCompressor`] and discarded.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for the inner least-squares solves.
pub const SVD_CUTOFF: f64 = 1e-13;

/// Streaming Householder reduction of a tall matrix to its `n × n`
/// triangular factor `R` (so that `AᵀA = RᵀR`).
#[derive(Debug, Clone)]
pub struct RowCompressor {
    ncols: usize,
    r: DMatrix<f64>,
    pending: Vec<f64>,
    pending_rows: usize,
    rows: usize,
    block: usize,
}

impl RowCompressor {
    pub fn new(ncols: usize) -> Self {
        Self::with_block(ncols, 4096)
    }

    pub fn with_block(ncols: usize, block: usize) -> Self {
        Self {
            ncols,
            r: DMatrix::zeros(0, ncols),
            pending: Vec::with_capacity(block * ncols),
            pending_rows: 0,
            rows: 0,
            block: block.max(1),
        }
    }

    /// Appends one row.
    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.ncols);
        self.pending.extend_from_slice(row);
        self.pending_rows += 1;
        self.rows += 1;
        if self.pending_rows >= self.block {
            self.flush();
        }
    }

    /// Appends every row of `m`.
    pub fn push_matrix(&mut self, m: &DMatrix<f64>) {
        let mut row = vec![0.0; self.ncols];
        for i in 0..m.nrows() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(i, c)];
            }
            self.push_row(&row);
        }
    }

    fn flush(&mut self) {
        if self.pending_rows == 0 {
            return;
        }
        let n = self.ncols;
        let top = self.r.nrows();
        let stacked = DMatrix::from_fn(top + self.pending_rows, n, |i, c| {
            if i < top {
                self.r[(i, c)]
            } else {
                self.pending[(i - top) * n + c]
            }
        });
        self.r = stacked.qr().r();
        self.pending.clear();
        self.pending_rows = 0;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// The square factor; padded with zero rows when fewer rows than columns
    /// were pushed.
    pub fn finish(mut self) -> DMatrix<f64> {
        self.flush();
        let n = self.ncols;
        let mut out = DMatrix::zeros(n, n);
        let k = self.r.nrows().min(n);
        out.view_mut((0, 0), (k, n)).copy_from(&self.r.rows(0, k));
        out
    }
}

/// Triangular factor of a small matrix.
pub fn triangular_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = RowCompressor::with_block(a.ncols(), a.nrows().max(1));
    c.push_matrix(a);
    c.finish()
}

/// Euclidean column norms.
pub fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm()).collect()
}

fn svd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = SVD_CUTOFF * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let x = svd
        .solve(b, cutoff)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    (x, rank)
}

/// Minimizer of `‖A ξ − b‖₂`; the minimum-norm one when `A` is rank deficient.
///
/// Full-rank systems are solved on unit-norm columns and rescaled, which keeps
/// columns of very different magnitude accurate.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    assert_eq!(a.nrows(), b.len(), "row count of A must match b");
    let q = a.ncols();
    if q == 0 {
        return DVector::zeros(0);
    }
    let norms = column_norms(a);
    let mut scaled = a.clone();
    for (c, &s) in norms.iter().enumerate() {
        if s > 0.0 {
            scaled.column_mut(c).unscale_mut(s);
        }
    }
    let (z, rank) = svd_solve(&scaled, b);
    let nonzero = norms.iter().filter(|&&s| s > 0.0).count();
    if rank < nonzero {
        return svd_solve(a, b).0;
    }
    DVector::from_iterator(
        q,
        z.iter()
            .zip(&norms)
            .map(|(v, &s)| if s > 0.0 { v / s } else { 0.0 }),
    )
}

/// Smallest singular value of `a` after scaling its columns to unit norm.
pub fn min_normalized_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return f64::INFINITY;
    }
    let mut scaled = a.clone();
    for c in 0..a.ncols() {
        let s = scaled.column(c).norm();
        if s > 0.0 {
            scaled.column_mut(c).unscale_mut(s);
        }
    }
    let sv = scaled.singular_values();
    if a.nrows() < a.ncols() {
        0.0
    } else {
        sv.min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_system() {
        let a = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![5.0, 0.1, 3.0]);
        let x = least_squares(&a, &b);
        assert!((x - &b).norm() < 1e-14);
    }

    #[test]
    fn consistent_system_has_zero_residual() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let x = least_squares(&a, &b);
        assert!((&a * &x - &b).norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = least_squares(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 10.0, 2.0, 20.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = least_squares(&a, &b);
        // minimum-norm point of x + 10 y = 1
        assert!((x[0] - 1.0 / 101.0).abs() < 1e-12 && (x[1] - 10.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(200, 10, |_, _| rng.random_range(-1.0..1.0));
        let truth = DVector::from_fn(10, |i, _| i as f64 - 4.5);
        let noise = DVector::from_fn(200, |_, _| 1e-9 * rng.random_range(-1.0..1.0));
        let x = least_squares(&a, &(&a * &truth + noise));
        assert!((x - truth).amax() < 1e-8);
    }

    #[test]
    fn empty_matrix() {
        assert_eq!(least_squares(&DMatrix::zeros(3, 0), &DVector::zeros(3)).len(), 0);
    }

    #[test]
    fn compressor_preserves_gram_and_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(1000, 5, |_, _| rng.random_range(-1.0..1.0));
        let mut c = RowCompressor::with_block(5, 37);
        c.push_matrix(&a);
        assert_eq!(c.rows(), 1000);
        let r = c.finish();
        let g1 = a.transpose() * &a;
        let g2 = r.transpose() * &r;
        assert!((g1 - g2).amax() < 1e-10);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
        assert!(((&a * &v).norm() - (&r * &v).norm()).abs() < 1e-10);
    }

    #[test]
    fn compressor_with_few_rows_pads() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = triangular_factor(&a);
        assert_eq!(r.shape(), (3, 3));
        assert!(((a.transpose() * &a) - (r.transpose() * &r)).amax() < 1e-12);
    }
}
