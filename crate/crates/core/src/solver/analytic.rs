//! Closed-form solutions for the single- and two-process benchmark systems,
//! all starting from `n₀(x) = e^(−x)`.

use serde::{Deserialize, Serialize};

use super::integrator::{solve_at, Tolerance};
use crate::error::{Error, Result};
use crate::grid::{DensityField, InternalGrid, TemporalGrid};

/// `e^(−z) I₁(z)` for `z ≥ 0`.
pub fn bessel_i1_scaled(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 40.0 {
        // power series: Σ (z/2)^(2k+1) / (k! (k+1)!)
        let q = 0.25 * z * z;
        let mut term = 0.5 * z;
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * (k + 1.0));
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-z).exp()
    } else {
        // asymptotic expansion with μ = 4
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let odd = (2 * k - 1) as f64;
            let next = -term * (4.0 - odd * odd) / (k as f64 * 8.0 * z);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// `Q = 1`: `n = 4/(2+t)² · e^(−2x/(2+t))`.
pub fn constant_aggregation(x: f64, t: f64) -> f64 {
    let s = 2.0 + t;
    4.0 / (s * s) * (-2.0 * x / s).exp()
}

/// `Q = x + y` (unit mass): `n = (1−T)/(x√T) · e^(−(1+T)x) · I₁(2x√T)`, `T = 1 − e^(−t)`.
pub fn sum_aggregation(x: f64, t: f64) -> f64 {
    let big_t = -(-t).exp_m1();
    golovin(x, big_t)
}

fn golovin(x: f64, big_t: f64) -> f64 {
    if big_t <= 0.0 {
        return (-x).exp();
    }
    let r = big_t.sqrt();
    let z = 2.0 * x * r;
    (1.0 - big_t) / (x * r) * (-(1.0 + big_t) * x + z).exp() * bessel_i1_scaled(z)
}

/// `Q = xy` before gelation (`t < 1`):
/// `n = e^(−(1+t)x) Σ_k 2 tᵏ x³ᵏ / (k! (2k+2)!)`.
pub fn product_aggregation(x: f64, t: f64) -> Result<f64> {
    if t >= 1.0 {
        return Err(Error::invalid(format!("product kernel gels at t = 1, asked for t = {t}")));
    }
    if t == 0.0 {
        return Ok((-x).exp());
    }
    let base = (2.0f64).ln() - (1.0 + t) * x;
    let step = t.ln() + 3.0 * x.ln();
    let mut logs = Vec::with_capacity(96);
    let mut peak = f64::NEG_INFINITY;
    // ln k! and ln (2k+2)!
    let (mut lk, mut l2) = (0.0, (2.0f64).ln());
    for k in 0..400usize {
        if k > 0 {
            let kf = k as f64;
            lk += kf.ln();
            l2 += (2.0 * kf + 1.0).ln() + (2.0 * kf + 2.0).ln();
        }
        let v = base + k as f64 * step - lk - l2;
        logs.push(v);
        peak = peak.max(v);
        if k > 4 && v < peak - 40.0 {
            break;
        }
    }
    Ok(peak.exp() * logs.iter().map(|v| (v - peak).exp()).sum::<f64>())
}

/// `Γ = x²`, `β = 2/y`: `n = (1 + 2t(1+x)) e^(−x − t x²)`.
pub fn quadratic_breakage(x: f64, t: f64) -> f64 {
    (1.0 + 2.0 * t * (1.0 + x)) * (-x - t * x * x).exp()
}

/// `Γ = x`, `β = 2/y`: `n = (1+t)² e^(−x(1+t))`.
pub fn linear_breakage(x: f64, t: f64) -> f64 {
    (1.0 + t) * (1.0 + t) * (-x * (1.0 + t)).exp()
}

/// `R = 1`: translation, continued smoothly below the domain floor.
pub fn constant_growth(x: f64, t: f64) -> f64 {
    (t - x).exp()
}

/// `R = x`: `n = e^(−t) e^(−x e^(−t))`.
pub fn linear_growth(x: f64, t: f64) -> f64 {
    let s = (-t).exp();
    s * (-x * s).exp()
}

/// `R = x`, `Q = q`: `n = e^(−t) N² e^(−N x e^(−t))`, `N = 1/(1 + qt/2)`.
pub fn linear_growth_constant_aggregation(x: f64, t: f64, q: f64) -> f64 {
    let n = 1.0 / (1.0 + 0.5 * q * t);
    let s = (-t).exp();
    s * n * n * (-n * x * s).exp()
}

/// `R = x`, `Q = x + y`: the sum-kernel solution in the scaled size `x e^(−t)`
/// at time `e^t − 1`.
pub fn linear_growth_sum_aggregation(x: f64, t: f64) -> f64 {
    let s = (-t).exp();
    s * golovin(x * s, -(-t.exp_m1()).exp_m1())
}

/// `R = 1`, `Q = 1`: `n = A(t) e^(−B(t) x)` with `Ḃ = −A/2`, `Ȧ = AB − A²/B`,
/// `A(0) = B(0) = 1`, which also fixes the inflow `n(0, t) = A(t)`.
pub fn constant_growth_aggregation_parameters(times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut ts = vec![0.0];
    ts.extend(times.iter().copied().filter(|&t| t > 0.0));
    let tol = Tolerance {
        rtol: 1e-12,
        atol: 1e-14,
        max_step: f64::INFINITY,
    };
    let out = solve_at(
        |_, y, d| {
            let (a, b) = (y[0], y[1]);
            d[0] = a * b - a * a / b;
            d[1] = -0.5 * a;
        },
        &[1.0, 1.0],
        &ts,
        tol,
    )?;
    let mut res = Vec::with_capacity(times.len());
    let mut k = 1;
    for &t in times {
        if t <= 0.0 {
            res.push((1.0, 1.0));
        } else {
            res.push((out[k][0], out[k][1]));
            k += 1;
        }
    }
    if let Some(&(_, b)) = res.iter().find(|(_, b)| !(*b > 0.0)) {
        return Err(Error::invalid(format!("exponential ansatz lost positivity (B = {b})")));
    }
    Ok(res)
}

/// The benchmark systems with a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    ConstantAggregation,
    SumAggregation,
    ProductAggregation,
    QuadraticBreakage,
    LinearBreakage,
    ConstantGrowth,
    LinearGrowth,
    LinearGrowthConstantAggregation { q: f64 },
    LinearGrowthSumAggregation,
    ConstantGrowthAggregation,
}

impl ClosedForm {
    /// Samples the solution on the grids.
    pub fn field(&self, xgrid: &InternalGrid, tgrid: &TemporalGrid) -> Result<DensityField> {
        let xs = xgrid.points();
        let mut values = Vec::with_capacity(xs.len() * tgrid.len());
        let params = match self {
            ClosedForm::ConstantGrowthAggregation => Some(constant_growth_aggregation_parameters(tgrid.points())?),
            _ => None,
        };
        for (m, &t) in tgrid.points().iter().enumerate() {
            for &x in xs {
                let v = match *self {
                    ClosedForm::ConstantAggregation => constant_aggregation(x, t),
                    ClosedForm::SumAggregation => sum_aggregation(x, t),
                    ClosedForm::ProductAggregation => product_aggregation(x, t)?,
                    ClosedForm::QuadraticBreakage => quadratic_breakage(x, t),
                    ClosedForm::LinearBreakage => linear_breakage(x, t),
                    ClosedForm::ConstantGrowth => constant_growth(x, t),
                    ClosedForm::LinearGrowth => linear_growth(x, t),
                    ClosedForm::LinearGrowthConstantAggregation { q } => linear_growth_constant_aggregation(x, t, q),
                    ClosedForm::LinearGrowthSumAggregation => linear_growth_sum_aggregation(x, t),
                    ClosedForm::ConstantGrowthAggregation => {
                        let (a, b) = params.as_ref().expect("parameters computed above")[m];
                        a * (-b * x).exp()
                    }
                };
                values.push(v);
            }
        }
        DensityField::new(
            xgrid.clone(),
            tgrid.clone(),
            values,
            crate::grid::Provenance::Clean,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // I₁(1) = 0.5651591039924851, I₁(10) = 2670.988303701255
        assert!((bessel_i1_scaled(1.0) * 1f64.exp() - 0.5651591039924851).abs() < 1e-14);
        assert!((bessel_i1_scaled(10.0) * 10f64.exp() / 2670.988303701255 - 1.0).abs() < 1e-13);
        // both branches agree at the switch
        let lo = bessel_i1_scaled(40.0 - 1e-9);
        let hi = bessel_i1_scaled(40.0);
        assert!((lo / hi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn initial_conditions() {
        for x in [0.01f64, 0.5, 3.0, 12.0] {
            let e = (-x).exp();
            assert!((constant_aggregation(x, 0.0) - e).abs() < 1e-15);
            assert!((sum_aggregation(x, 0.0) - e).abs() < 1e-15);
            assert!((sum_aggregation(x, 1e-12) / e - 1.0).abs() < 1e-9);
            assert!((product_aggregation(x, 0.0).unwrap() - e).abs() < 1e-15);
            assert!((product_aggregation(x, 1e-12).unwrap() / e - 1.0).abs() < 1e-9);
            assert!((quadratic_breakage(x, 0.0) - e).abs() < 1e-15);
            assert!((linear_growth_sum_aggregation(x, 0.0) - e).abs() < 1e-15);
        }
    }

    fn moment(f: impl Fn(f64) -> f64, k: i32) -> f64 {
        // composite Simpson on [0, 200]
        let n = 200_000;
        let h = 200.0 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = (i as f64 * h).max(1e-12);
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * x.powi(k) * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn moments_follow_their_odes() {
        let t = 0.7;
        // constant kernel: N = 2/(2+t), mass 1
        assert!((moment(|x| constant_aggregation(x, t), 0) - 2.0 / (2.0 + t)).abs() < 1e-8);
        assert!((moment(|x| constant_aggregation(x, t), 1) - 1.0).abs() < 1e-8);
        // sum kernel: N' = −N M = −N → N = e^(−t)
        assert!((moment(|x| sum_aggregation(x, t), 0) - (-t).exp()).abs() < 1e-7);
        assert!((moment(|x| sum_aggregation(x, t), 1) - 1.0).abs() < 1e-7);
        // product kernel: N' = −M²/2 → N = 1 − t/2 before gelation; the tail
        // thickens toward t = 1, so check inside the benchmark window
        let tp = 0.2;
        assert!((moment(|x| product_aggregation(x, tp).unwrap(), 0) - (1.0 - tp / 2.0)).abs() < 1e-7);
        assert!((moment(|x| product_aggregation(x, tp).unwrap(), 1) - 1.0).abs() < 1e-6);
        // breakage conserves mass
        assert!((moment(|x| quadratic_breakage(x, t), 1) - 1.0).abs() < 1e-7);
        assert!((moment(|x| linear_breakage(x, t), 1) - 1.0).abs() < 1e-7);
        // linear growth: number constant, mass e^t
        assert!((moment(|x| linear_growth(x, t), 0) - 1.0).abs() < 1e-7);
        assert!((moment(|x| linear_growth(x, t), 1) - t.exp()).abs() < 1e-6);
        // with constant aggregation q: N = 1/(1 + qt/2), mass e^t
        let q = 10.0;
        assert!((moment(|x| linear_growth_constant_aggregation(x, t, q), 0) - 1.0 / (1.0 + 5.0 * t)).abs() < 1e-7);
        assert!((moment(|x| linear_growth_constant_aggregation(x, t, q), 1) - t.exp()).abs() < 1e-6);
        // with sum aggregation: M = e^t, N' = −N M → N = exp(1 − e^t)
        let ts = 0.2;
        assert!((moment(|x| linear_growth_sum_aggregation(x, ts), 0) - (1.0 - ts.exp()).exp()).abs() < 1e-7);
        assert!((moment(|x| linear_growth_sum_aggregation(x, ts), 1) - ts.exp()).abs() < 1e-6);
    }

    #[test]
    fn growth_aggregation_ansatz_satisfies_moment_odes() {
        // N = A/B, M = A/B²; N' = R n(0) − N²/2 = A − N²/2 and M' = N (R = 1, inflow A)
        let times: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
        let p = constant_growth_aggregation_parameters(&times).unwrap();
        for w in 1..times.len() - 1 {
            let dt = 0.1;
            let n = |k: usize| p[k].0 / p[k].1;
            let m = |k: usize| p[k].0 / (p[k].1 * p[k].1);
            let dn = (n(w + 1) - n(w - 1)) / (2.0 * dt);
            let dm = (m(w + 1) - m(w - 1)) / (2.0 * dt);
            assert!((dn - (p[w].0 - 0.5 * n(w) * n(w))).abs() < 2e-3);
            assert!((dm - n(w)).abs() < 2e-3);
        }
        assert!(p.iter().all(|&(a, b)| a > 0.0 && b > 0.0));
    }

    #[test]
    fn product_series_gels() {
        assert!(product_aggregation(1.0, 1.0).is_err());
    }
}
