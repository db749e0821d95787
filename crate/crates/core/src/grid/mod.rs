//! Transient number-density data: the internal-coordinate and time grids, the
//! density matrix itself, and the preprocessing applied before regression
//! (time differentiation, noise injection, smoothing and row subsampling).
//!
//! Storage is time-major with the internal coordinate varying fastest, so the
//! flattened density and every library column share one row ordering: row
//! `m * j + i` holds the value at `(x_i, t_m)`.

mod io;
mod preprocess;

pub use io::{load_density, load_sidecar, save_density, save_density_with_sidecar, Sidecar};
pub use preprocess::{
    add_white_noise, add_white_noise_with, estimate_time_derivative, local_polynomial_weights,
    polyfit_derivative, smooth_savgol, subsample_rows, time_derivative, DerivativeScheme,
    FiniteDifference, NoiseMode,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on spacing uniformity.
pub const UNIFORMITY_TOLERANCE: f64 = 1e-9;

fn check_uniform(points: &[f64], axis: &'static str) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints {
            axis,
            needed: 2,
            found: points.len(),
        });
    }
    if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "{axis} point {bad} is not finite"
        )));
    }
    let n = points.len();
    let spacing = (points[n - 1] - points[0]) / (n - 1) as f64;
    if spacing <= 0.0 {
        return Err(Error::InvalidGrid(format!("{axis} grid is not increasing")));
    }
    for (k, w) in points.windows(2).enumerate() {
        let step = w[1] - w[0];
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "{axis} grid is not strictly increasing at index {k}"
            )));
        }
        if ((step - spacing) / spacing).abs() > UNIFORMITY_TOLERANCE {
            return Err(Error::NonUniformGrid {
                axis,
                detail: format!(
                    "step {step} between points {k} and {} differs from mean spacing {spacing}",
                    k + 1
                ),
            });
        }
    }
    Ok(spacing)
}

/// Number of nodes of `start, start + step, ...` that fit in `[start, end]`.
fn node_count(start: f64, end: f64, step: f64) -> usize {
    ((end - start) / step + 1e-9).floor() as usize + 1
}

/// Uniform grid over the internal coordinate (particle size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalGrid {
    points: Vec<f64>,
    spacing: f64,
}

impl InternalGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let spacing = check_uniform(&points, "x")?;
        if points[0] <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "internal coordinate must start above zero, got {}",
                points[0]
            )));
        }
        Ok(Self { points, spacing })
    }

    /// Nodes `start + i * spacing` up to and including `end` (within rounding).
    pub fn from_range(start: f64, end: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || end <= start {
            return Err(Error::InvalidGrid(format!(
                "empty x range [{start}, {end}] with spacing {spacing}"
            )));
        }
        let n = node_count(start, end, spacing);
        Self::new((0..n).map(|i| start + i as f64 * spacing).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Uniform grid over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGrid {
    points: Vec<f64>,
    spacing: f64,
}

impl TemporalGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let spacing = check_uniform(&points, "t")?;
        Ok(Self { points, spacing })
    }

    pub fn from_range(start: f64, end: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || end <= start {
            return Err(Error::InvalidGrid(format!(
                "empty t range [{start}, {end}] with spacing {spacing}"
            )));
        }
        let n = node_count(start, end, spacing);
        Self::new((0..n).map(|m| start + m as f64 * spacing).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Where a density field came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Clean,
    /// Read from a file without a sidecar; no sign guarantee.
    Imported,
    Noisy {
        level: f64,
        seed: u64,
        mode: NoiseMode,
        parent: Box<Provenance>,
    },
    Smoothed {
        window: usize,
        polyorder: usize,
        parent: Box<Provenance>,
    },
    Subsampled {
        fraction: f64,
        seed: u64,
        parent: Box<Provenance>,
    },
}

/// Number density `n(x_i, t_m)` on a uniform `(x, t)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    xgrid: InternalGrid,
    tgrid: TemporalGrid,
    values: Vec<f64>,
    provenance: Provenance,
}

impl DensityField {
    /// Builds a field from time-major values (`values[m * j + i]`).
    pub fn new(
        xgrid: InternalGrid,
        tgrid: TemporalGrid,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let p = xgrid.len() * tgrid.len();
        if values.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "entry {k} is not finite ({})",
                values[k]
            )));
        }
        if provenance == Provenance::Clean {
            if let Some(k) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidField(format!(
                    "clean field has negative entry {} at row {k}",
                    values[k]
                )));
            }
        }
        Ok(Self {
            xgrid,
            tgrid,
            values,
            provenance,
        })
    }

    /// Evaluates `f(x, t)` on every grid node.
    pub fn from_fn(
        xgrid: InternalGrid,
        tgrid: TemporalGrid,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(xgrid.len() * tgrid.len());
        for &t in tgrid.points() {
            for &x in xgrid.points() {
                values.push(f(x, t));
            }
        }
        Self::new(xgrid, tgrid, values, Provenance::Clean)
    }

    /// Builds a field from a `j x k` matrix (rows = sizes, columns = times).
    pub fn from_matrix(
        xgrid: InternalGrid,
        tgrid: TemporalGrid,
        matrix: &DMatrix<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if matrix.nrows() != xgrid.len() || matrix.ncols() != tgrid.len() {
            return Err(Error::InvalidField(format!(
                "matrix is {}x{}, grids are {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                xgrid.len(),
                tgrid.len()
            )));
        }
        // nalgebra is column-major, which is exactly the time-major flattening.
        Self::new(xgrid, tgrid, matrix.as_slice().to_vec(), provenance)
    }

    pub fn xgrid(&self) -> &InternalGrid {
        &self.xgrid
    }

    pub fn tgrid(&self) -> &TemporalGrid {
        &self.tgrid
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of internal-coordinate points `j`.
    pub fn nx(&self) -> usize {
        self.xgrid.len()
    }

    /// Number of time points `k`.
    pub fn nt(&self) -> usize {
        self.tgrid.len()
    }

    /// Flattened system length `p = j * k`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize, m: usize) -> f64 {
        self.values[m * self.nx() + i]
    }

    /// The density profile over `x` at time index `m`.
    pub fn slice(&self, m: usize) -> &[f64] {
        let j = self.nx();
        &self.values[m * j..(m + 1) * j]
    }

    /// Flattened values in row order (time-major, `x` fastest).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.nx(), self.nt(), &self.values)
    }

    pub(crate) fn with_values(&self, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        Self::new(self.xgrid.clone(), self.tgrid.clone(), values, provenance)
    }

    /// Restricts the field to time indices `range`.
    pub fn time_window(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let t = self.tgrid.points()[range.clone()].to_vec();
        let j = self.nx();
        let values = self.values[range.start * j..range.end * j].to_vec();
        Self::new(
            self.xgrid.clone(),
            TemporalGrid::new(t)?,
            values,
            self.provenance.clone(),
        )
    }
}

/// Estimated `dn/dt`, flattened in the same order as [`DensityField::values`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeVector {
    entries: Vec<f64>,
    nx: usize,
    nt: usize,
}

impl DerivativeVector {
    pub fn new(entries: Vec<f64>, nx: usize, nt: usize) -> Result<Self> {
        if entries.len() != nx * nt {
            return Err(Error::LengthMismatch {
                expected: nx * nt,
                found: entries.len(),
            });
        }
        Ok(Self { entries, nx, nt })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Row index of `(x_i, t_m)`.
    pub fn row(&self, i: usize, m: usize) -> usize {
        m * self.nx + i
    }

    pub fn at(&self, i: usize, m: usize) -> f64 {
        self.entries[self.row(i, m)]
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    /// Reshapes into the `j x k` matrix layout.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.nx, self.nt, &self.entries)
    }
}

/// Sorted, unique subset of the `p` flattened rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMask {
    indices: Vec<usize>,
    total: usize,
    fraction: f64,
    seed: Option<u64>,
}

impl RowMask {
    /// Every row of a length-`p` system.
    pub fn full(p: usize) -> Self {
        Self {
            indices: (0..p).collect(),
            total: p,
            fraction: 1.0,
            seed: None,
        }
    }

    pub(crate) fn from_sorted(indices: Vec<usize>, total: usize, fraction: f64, seed: u64) -> Self {
        Self {
            indices,
            total,
            fraction,
            seed: Some(seed),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Length of the system the mask was drawn from.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grids() -> (InternalGrid, TemporalGrid) {
        (
            InternalGrid::from_range(0.1, 1.0, 0.1).unwrap(),
            TemporalGrid::from_range(0.0, 0.5, 0.1).unwrap(),
        )
    }

    #[test]
    fn range_constructors_count_nodes() {
        assert_eq!(InternalGrid::from_range(0.01, 20.01, 0.1).unwrap().len(), 201);
        assert_eq!(InternalGrid::from_range(0.01, 25.1, 0.1).unwrap().len(), 251);
        assert_eq!(InternalGrid::from_range(0.1, 5.0, 0.1).unwrap().len(), 50);
        assert_eq!(InternalGrid::from_range(0.01, 10.0, 0.01).unwrap().len(), 1000);
        assert_eq!(TemporalGrid::from_range(0.0, 5.0, 0.1).unwrap().len(), 51);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            InternalGrid::new(vec![0.1, 0.2, 0.4]),
            Err(Error::NonUniformGrid { .. })
        ));
        assert!(InternalGrid::new(vec![0.0, 0.1, 0.2]).is_err());
        assert!(InternalGrid::new(vec![0.3, 0.2, 0.1]).is_err());
        assert!(TemporalGrid::new(vec![0.0]).is_err());
        assert!(TemporalGrid::new(vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn clean_fields_must_be_nonnegative_and_finite() {
        let (x, t) = grids();
        let p = x.len() * t.len();
        let mut v = vec![1.0; p];
        v[3] = -1e-3;
        assert!(DensityField::new(x.clone(), t.clone(), v.clone(), Provenance::Clean).is_err());
        assert!(DensityField::new(x.clone(), t.clone(), v, Provenance::Imported).is_ok());
        let mut w = vec![1.0; p];
        w[0] = f64::NAN;
        assert!(DensityField::new(x, t, w, Provenance::Imported).is_err());
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let (x, t) = grids();
        let field = DensityField::from_fn(x.clone(), t.clone(), |x, t| x * 10.0 + t).unwrap();
        let m = field.to_matrix();
        for i in 0..field.nx() {
            for k in 0..field.nt() {
                assert_eq!(m[(i, k)], field.value(i, k));
                assert_eq!(field.values()[k * field.nx() + i], m[(i, k)]);
            }
        }
        let back = DensityField::from_matrix(x, t, &m, Provenance::Clean).unwrap();
        assert_eq!(back, field);
    }

    #[test]
    fn full_mask_covers_everything() {
        let mask = RowMask::full(12);
        assert!(mask.is_full());
        assert_eq!(mask.indices(), (0..12).collect::<Vec<_>>().as_slice());
    }
}
