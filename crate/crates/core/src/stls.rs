//! Sequential thresholded least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{Combination, Library};
use crate::linalg::least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlsConfig {
    /// Sparsity index: coefficients with magnitude strictly below it are zeroed.
    pub lambda: f64,
    pub max_iterations: usize,
}

impl StlsConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iterations: 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

impl Default for StlsConfig {
    fn default() -> Self {
        Self::new(0.0)
    }
}

/// A sparse coefficient vector and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    /// One entry per library column; zeros outside the support.
    pub coefficients: Vec<f64>,
    /// Sorted indices of the nonzero entries.
    pub support: Vec<usize>,
    pub lambda: f64,
    /// `‖Ω ξ − ṅ‖₂²`.
    pub residual: f64,
    /// `‖Ω ξ − ṅ‖₂² / ‖ṅ‖₂²`.
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default)]
    pub combination: Option<Combination>,
    /// Realizability penalty, filled in by the selector.
    #[serde(default)]
    pub penalty: Option<u32>,
    /// Total cost, filled in by the selector.
    #[serde(default)]
    pub cost: Option<f64>,
}

impl SparseSolution {
    /// `‖ξ‖₀`.
    pub fn terms(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Runs STLS and also returns the support entering every iteration.
pub fn stls_with_trace(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    config: StlsConfig,
) -> Result<(SparseSolution, Vec<Vec<usize>>)> {
    config.validate()?;
    if a.nrows() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let q = a.ncols();
    let mut support: Vec<usize> = (0..q).collect();
    let mut xi = vec![0.0; q];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        trace.push(support.clone());
        xi.iter_mut().for_each(|v| *v = 0.0);
        if support.is_empty() {
            converged = true;
            break;
        }
        let sub = a.select_columns(&support);
        let sol = least_squares(&sub, b);
        for (k, &c) in support.iter().enumerate() {
            xi[c] = sol[k];
        }
        let next: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&c| xi[c].abs() >= config.lambda)
            .collect();
        if next == support {
            converged = true;
            break;
        }
        support = next;
    }
    if !converged {
        for (c, v) in xi.iter_mut().enumerate() {
            if !support.contains(&c) {
                *v = 0.0;
            }
        }
    }

    let coef = DVector::from_column_slice(&xi);
    let residual = (a * coef - b).norm_squared();
    let bn = b.norm_squared();
    let relative_residual = if bn > 0.0 { residual / bn } else { 0.0 };
    Ok((
        SparseSolution {
            coefficients: xi,
            support,
            lambda: config.lambda,
            residual,
            relative_residual,
            iterations,
            converged,
            combination: None,
            penalty: None,
            cost: None,
        },
        trace,
    ))
}

/// Repeated least squares on the surviving columns, zeroing every coefficient
/// smaller than `λ`, until the support stops changing.
pub fn stls(a: &DMatrix<f64>, b: &DVector<f64>, config: StlsConfig) -> Result<SparseSolution> {
    stls_with_trace(a, b, config).map(|(s, _)| s)
}

/// STLS on a compressed library; residuals refer to the full data rows.
pub fn stls_library(lib: &Library, config: StlsConfig) -> Result<SparseSolution> {
    let mut s = stls(&lib.design(), &lib.target(), config)?;
    s.combination = Some(lib.combination());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholded_identity() {
        let a = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![5.0, 0.1, 3.0]);
        let s = stls(&a, &b, StlsConfig::new(1.0)).unwrap();
        for (a, b) in s.coefficients.iter().zip([5.0, 0.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(s.terms(), 2);
        assert!(s.converged);
        assert!((s.residual - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.1]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let s = stls(&a, &b, StlsConfig::new(0.0)).unwrap();
        let ls = least_squares(&a, &b);
        assert_eq!(s.coefficients, ls.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn equal_to_lambda_survives() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![0.5, 0.25]);
        let s = stls(&a, &b, StlsConfig::new(0.5)).unwrap();
        assert_eq!(s.support, vec![0]);
    }

    #[test]
    fn everything_below_threshold_gives_empty_support() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![0.1, 0.2]);
        let s = stls(&a, &b, StlsConfig::new(1.0)).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.coefficients, vec![0.0, 0.0]);
        assert!((s.relative_residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::zeros(2);
        assert!(stls(&a, &b, StlsConfig::new(-1.0)).is_err());
        assert!(stls(
            &a,
            &b,
            StlsConfig {
                lambda: 0.1,
                max_iterations: 0
            }
        )
        .is_err());
        assert!(stls(&a, &DVector::zeros(3), StlsConfig::new(0.1)).is_err());
    }
}
