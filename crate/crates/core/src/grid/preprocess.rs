use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DensityField, DerivativeVector, Provenance, RowMask};
use crate::error::{Error, Result};

/// Finite-difference order for [`time_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FiniteDifference {
    /// 3-point central differences, 3-point one-sided at the ends.
    #[default]
    Second,
    /// 5-point central differences, 5-point one-sided near the ends.
    Fourth,
}

/// How `dn/dt` is estimated from a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DerivativeScheme {
    FiniteDifference { order: FiniteDifference },
    Polyfit { degree: usize, halfwidth: usize },
}

impl Default for DerivativeScheme {
    fn default() -> Self {
        DerivativeScheme::FiniteDifference {
            order: FiniteDifference::Second,
        }
    }
}

pub fn estimate_time_derivative(
    field: &DensityField,
    scheme: DerivativeScheme,
) -> Result<DerivativeVector> {
    match scheme {
        DerivativeScheme::FiniteDifference { order } => time_derivative(field, order),
        DerivativeScheme::Polyfit { degree, halfwidth } => {
            polyfit_derivative(field, degree, halfwidth)
        }
    }
}

/// Finite-difference `dn/dt` at every `(x_i, t_m)`.
pub fn time_derivative(field: &DensityField, order: FiniteDifference) -> Result<DerivativeVector> {
    let (j, k) = (field.nx(), field.nt());
    let h = field.tgrid().spacing();
    let values = field.values();
    let at = |i: usize, m: usize| values[m * j + i];
    let mut out = vec![0.0; j * k];

    match order {
        FiniteDifference::Second => {
            if k < 3 {
                return Err(Error::InsufficientPoints {
                    axis: "t",
                    needed: 3,
                    found: k,
                });
            }
            for m in 0..k {
                for i in 0..j {
                    let d = if m == 0 {
                        -3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)
                    } else if m == k - 1 {
                        3.0 * at(i, k - 1) - 4.0 * at(i, k - 2) + at(i, k - 3)
                    } else {
                        at(i, m + 1) - at(i, m - 1)
                    };
                    out[m * j + i] = d / (2.0 * h);
                }
            }
        }
        FiniteDifference::Fourth => {
            if k < 5 {
                return Err(Error::InsufficientPoints {
                    axis: "t",
                    needed: 5,
                    found: k,
                });
            }
            const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
            const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
            const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
            for m in 0..k {
                let (start, w, sign) = match m {
                    0 => (0, EDGE0, 1.0),
                    1 => (0, EDGE1, 1.0),
                    _ if m == k - 1 => (k - 5, rev(EDGE0), -1.0),
                    _ if m == k - 2 => (k - 5, rev(EDGE1), -1.0),
                    _ => (m - 2, CENTRAL, 1.0),
                };
                for i in 0..j {
                    let d: f64 = (0..5).map(|s| w[s] * at(i, start + s)).sum();
                    out[m * j + i] = sign * d / (12.0 * h);
                }
            }
        }
    }
    DerivativeVector::new(out, j, k)
}

fn rev(w: [f64; 5]) -> [f64; 5] {
    [w[4], w[3], w[2], w[1], w[0]]
}

/// How the additive noise scale is referenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `sigma = level * std(all entries of the clean field)`.
    #[default]
    GlobalStd,
    /// `n' = n * (1 + level * eps)`.
    Multiplicative,
}

/// Gaussian white noise scaled by the field's global sample standard deviation.
pub fn add_white_noise(field: &DensityField, level: f64, seed: u64) -> Result<DensityField> {
    add_white_noise_with(field, level, seed, NoiseMode::GlobalStd)
}

/// Adds independent Gaussian noise to every entry.
///
/// Draws come from `ChaCha8Rng::seed_from_u64(seed)` through `rand_distr`'s
/// ziggurat standard normal, consumed in flattened row order, so the result
/// is reproducible across platforms.
pub fn add_white_noise_with(
    field: &DensityField,
    level: f64,
    seed: u64,
    mode: NoiseMode,
) -> Result<DensityField> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(field.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let values = field.values();
    let noisy: Vec<f64> = match mode {
        NoiseMode::GlobalStd => {
            let sigma = level * sample_std(values);
            values
                .iter()
                .map(|&v| v + sigma * normal.sample(&mut rng))
                .collect()
        }
        NoiseMode::Multiplicative => values
            .iter()
            .map(|&v| v * (1.0 + level * normal.sample(&mut rng)))
            .collect(),
    };
    field.with_values(
        noisy,
        Provenance::Noisy {
            level,
            seed,
            mode,
            parent: Box::new(field.provenance().clone()),
        },
    )
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Least-squares polynomial weights on `len` equally spaced samples.
///
/// Returns `w` such that `sum_k w[k] * y[k]` is the `deriv`-th derivative (0 or
/// 1, per unit sample spacing) at sample position `at` of the degree-`degree`
/// polynomial fitted to `y`.
pub fn local_polynomial_weights(len: usize, degree: usize, at: usize, deriv: usize) -> Vec<f64> {
    assert!(len > degree, "window must exceed the polynomial degree");
    assert!(deriv <= 1);
    let center = (len as f64 - 1.0) / 2.0;
    let scale = center.max(1.0);
    let vander = DMatrix::from_fn(len, degree + 1, |r, c| ((r as f64 - center) / scale).powi(c as i32));
    let pinv = vander
        .pseudo_inverse(1e-13)
        .expect("vandermonde pseudo-inverse");
    let s = (at as f64 - center) / scale;
    (0..len)
        .map(|k| {
            (0..=degree)
                .map(|d| {
                    let coef = pinv[(d, k)];
                    match deriv {
                        0 => coef * s.powi(d as i32),
                        _ if d == 0 => 0.0,
                        _ => coef * d as f64 * s.powi(d as i32 - 1) / scale,
                    }
                })
                .sum()
        })
        .collect()
}

/// Per-position weights for a sliding local fit over `n` samples: interior
/// points use the centred window, the first and last `half` points evaluate the
/// fit of the one-sided edge window.
struct SlidingFit {
    half: usize,
    central: Vec<f64>,
    head: Vec<Vec<f64>>,
    tail: Vec<Vec<f64>>,
}

impl SlidingFit {
    fn new(window: usize, degree: usize, deriv: usize) -> Self {
        let half = window / 2;
        Self {
            half,
            central: local_polynomial_weights(window, degree, half, deriv),
            head: (0..half)
                .map(|a| local_polynomial_weights(window, degree, a, deriv))
                .collect(),
            tail: (0..half)
                .map(|a| local_polynomial_weights(window, degree, window - half + a, deriv))
                .collect(),
        }
    }

    /// Applies the fit to samples `get(0..n)`, writing `put(index, value)`.
    fn apply(&self, n: usize, get: impl Fn(usize) -> f64, mut put: impl FnMut(usize, f64)) {
        let window = 2 * self.half + 1;
        let dot = |w: &[f64], start: usize| -> f64 {
            w.iter().enumerate().map(|(s, c)| c * get(start + s)).sum()
        };
        for pos in 0..n {
            let v = if pos < self.half {
                dot(&self.head[pos], 0)
            } else if pos + self.half >= n {
                dot(&self.tail[pos + self.half - n], n - window)
            } else {
                dot(&self.central, pos - self.half)
            };
            put(pos, v);
        }
    }
}

/// Savitzky-Golay smoothing along `x`, independently for each time slice.
pub fn smooth_savgol(field: &DensityField, window: usize, polyorder: usize) -> Result<DensityField> {
    if window % 2 == 0 {
        return Err(Error::invalid(format!("savgol window must be odd, got {window}")));
    }
    if window <= polyorder {
        return Err(Error::invalid(format!(
            "savgol window {window} must exceed polyorder {polyorder}"
        )));
    }
    let j = field.nx();
    if window > j {
        return Err(Error::InsufficientPoints {
            axis: "x",
            needed: window,
            found: j,
        });
    }
    let fit = SlidingFit::new(window, polyorder, 0);
    let mut out = vec![0.0; field.len()];
    for m in 0..field.nt() {
        let slice = field.slice(m);
        let dst = &mut out[m * j..(m + 1) * j];
        fit.apply(j, |i| slice[i], |i, v| dst[i] = v);
    }
    field.with_values(
        out,
        Provenance::Smoothed {
            window,
            polyorder,
            parent: Box::new(field.provenance().clone()),
        },
    )
}

/// `dn/dt` from local polynomial fits in time over `2 * halfwidth + 1` samples.
pub fn polyfit_derivative(
    field: &DensityField,
    degree: usize,
    halfwidth: usize,
) -> Result<DerivativeVector> {
    let window = 2 * halfwidth + 1;
    if window <= degree {
        return Err(Error::invalid(format!(
            "polyfit window {window} must exceed degree {degree}"
        )));
    }
    let (j, k) = (field.nx(), field.nt());
    if k < window {
        return Err(Error::InsufficientPoints {
            axis: "t",
            needed: window,
            found: k,
        });
    }
    let h = field.tgrid().spacing();
    let fit = SlidingFit::new(window, degree, 1);
    let values = field.values();
    let mut out = vec![0.0; j * k];
    for i in 0..j {
        fit.apply(k, |m| values[m * j + i], |m, v| out[m * j + i] = v / h);
    }
    DerivativeVector::new(out, j, k)
}

/// Uniform random subset of `round(fraction * p)` distinct rows.
pub fn subsample_rows(p: usize, fraction: f64, seed: u64) -> Result<RowMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(RowMask::full(p));
    }
    let count = (fraction * p as f64).round() as usize;
    if count == 0 {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {p} rows selects nothing"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, p, count).into_vec();
    picked.sort_unstable();
    Ok(RowMask::from_sorted(picked, p, fraction, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{InternalGrid, TemporalGrid};

    fn field(f: impl Fn(f64, f64) -> f64, dx: f64, xmax: f64, dt: f64, tmax: f64) -> DensityField {
        DensityField::from_fn(
            InternalGrid::from_range(dx, xmax, dx).unwrap(),
            TemporalGrid::from_range(0.0, tmax, dt).unwrap(),
            f,
        )
        .unwrap()
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let f = field(|_, _| 3.5, 0.1, 1.0, 0.1, 1.0);
        for order in [FiniteDifference::Second, FiniteDifference::Fourth] {
            let d = time_derivative(&f, order).unwrap();
            assert!(d.entries().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn derivative_exact_on_linear_in_time() {
        let f = field(|x, t| x * t, 0.1, 2.0, 0.05, 1.0);
        let d = time_derivative(&f, FiniteDifference::Second).unwrap();
        for m in 0..f.nt() {
            for (i, &x) in f.xgrid().points().iter().enumerate() {
                assert!((d.at(i, m) - x).abs() < 1e-12, "{} vs {x}", d.at(i, m));
            }
        }
    }

    #[test]
    fn derivative_matches_analytic_interior() {
        let f = field(|x, t| (-t).exp() * (-x).exp(), 0.01, 2.0, 0.01, 1.0);
        let d = time_derivative(&f, FiniteDifference::Second).unwrap();
        let i = f.xgrid().points().iter().position(|&x| (x - 1.0).abs() < 1e-9).unwrap();
        let m = f.tgrid().points().iter().position(|&t| (t - 0.5).abs() < 1e-9).unwrap();
        assert!((d.at(i, m) + (-1.5f64).exp()).abs() < 1e-5);
        let d4 = time_derivative(&f, FiniteDifference::Fourth).unwrap();
        assert!((d4.at(i, m) + (-1.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn derivative_needs_three_times() {
        let f = field(|x, _| x, 0.1, 1.0, 0.1, 0.1);
        assert!(matches!(
            time_derivative(&f, FiniteDifference::Second),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let f = field(|x, t| (-x - t).exp(), 0.1, 2.0, 0.1, 1.0);
        assert_eq!(add_white_noise(&f, 0.0, 9).unwrap(), f);
        let a = add_white_noise(&f, 0.01, 7).unwrap();
        let b = add_white_noise(&f, 0.01, 7).unwrap();
        assert_eq!(a, b);
        let c = add_white_noise(&f, 0.01, 8).unwrap();
        assert_ne!(a.values(), c.values());
        assert!(add_white_noise(&f, -0.1, 1).is_err());
        let m = add_white_noise_with(&f, 0.01, 7, NoiseMode::Multiplicative).unwrap();
        assert_ne!(m.values(), a.values());
    }

    #[test]
    fn savgol_reproduces_polynomials() {
        let f = field(|x, t| 1.0 + 2.0 * x - 0.5 * x * x + 0.1 * t * x.powi(3), 0.1, 3.0, 0.1, 0.5);
        let s = smooth_savgol(&f, 7, 3).unwrap();
        for (a, b) in s.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn savgol_rejects_bad_windows() {
        let f = field(|x, _| x, 0.1, 3.0, 0.1, 0.5);
        assert!(smooth_savgol(&f, 6, 3).is_err());
        assert!(smooth_savgol(&f, 3, 3).is_err());
        assert!(smooth_savgol(&f, 101, 3).is_err());
    }

    #[test]
    fn polyfit_exact_on_linear_time() {
        let f = field(|x, t| 3.0 * t + x, 0.1, 1.0, 0.1, 2.0);
        let d = polyfit_derivative(&f, 3, 5).unwrap();
        assert!(d.entries().iter().all(|v| (v - 3.0).abs() < 1e-10));
        assert!(polyfit_derivative(&f, 3, 20).is_err());
        assert!(polyfit_derivative(&f, 5, 2).is_err());
    }

    #[test]
    fn local_weights_match_central_difference() {
        let w = local_polynomial_weights(3, 2, 1, 1);
        assert!((w[0] + 0.5).abs() < 1e-12 && w[1].abs() < 1e-12 && (w[2] - 0.5).abs() < 1e-12);
        let e = local_polynomial_weights(3, 2, 0, 1);
        assert!((e[0] + 1.5).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12 && (e[2] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn subsample_contracts() {
        let full = subsample_rows(50, 1.0, 3).unwrap();
        assert!(full.is_full());
        let m = subsample_rows(100, 0.2, 11).unwrap();
        assert_eq!(m.len(), 20);
        let mut u = m.indices().to_vec();
        u.dedup();
        assert_eq!(u.len(), 20);
        assert!(u.windows(2).all(|w| w[0] < w[1]) && *u.last().unwrap() < 100);
        assert_eq!(m, subsample_rows(100, 0.2, 11).unwrap());
        assert!(subsample_rows(100, 0.0, 1).is_err());
        assert!(subsample_rows(100, 1.5, 1).is_err());
    }
}
