//! Growth `∂n/∂t + ∂(R n)/∂x = 0`: characteristics for affine `R`,
//! conservative upwind otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KernelExpression;

/// What enters the domain through the lower boundary `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inflow {
    /// The profile continues smoothly below the first node.
    #[default]
    Continuation,
    /// No nucleation: characteristics starting below the domain carry nothing.
    Zero,
}

/// `R(x) = c + g x`, when the rate has that form.
pub fn affine_rate(rate: &KernelExpression) -> Option<(f64, f64)> {
    let mut c = 0.0;
    let mut g = 0.0;
    for (m, &v) in &rate.terms {
        match (m.x, m.y) {
            (0, 0) => c = v,
            (1, 0) => g = v,
            _ => return None,
        }
    }
    Some((c, g))
}

/// Foot of the characteristic through `x` after time `dt`, and the
/// amplification `e^(−g dt)` along it.
pub fn characteristic_foot(c: f64, g: f64, x: f64, dt: f64) -> (f64, f64) {
    if g == 0.0 {
        (x - c * dt, 1.0)
    } else {
        let s = (-g * dt).exp();
        ((x + c / g) * s - c / g, s)
    }
}

/// Whether any characteristic reaching the grid within `span` starts below
/// the first node, i.e. the solution there depends on inflow data.
pub fn needs_inflow(rate: &KernelExpression, x0: f64, span: f64) -> bool {
    match affine_rate(rate) {
        Some((c, g)) => characteristic_foot(c, g, x0, span).0 < x0 - 1e-12,
        None => rate.eval(x0, 0.0) > 0.0,
    }
}

/// Value at `xi` from uniform samples: cubic Lagrange inside, clamped at
/// zero, and zero above.
/// Below the first node: log-linear extrapolation, or zero for [`Inflow::Zero`].
pub fn interpolate(x: &[f64], n: &[f64], xi: f64, inflow: Inflow) -> f64 {
    let j = x.len();
    let h = x[1] - x[0];
    if xi < x[0] && inflow == Inflow::Zero {
        return 0.0;
    }
    if xi < x[0] {
        let (a, b) = (n[0], n[1]);
        return if a > 0.0 && b > 0.0 {
            a * ((b / a).ln() * (xi - x[0]) / h).exp()
        } else {
            a + (b - a) * (xi - x[0]) / h
        };
    }
    if xi > x[j - 1] {
        return 0.0;
    }
    let r = (xi - x[0]) / h;
    let base = (r.floor() as isize - 1).clamp(0, j as isize - 4) as usize;
    let mut v = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (r - (base + b) as f64) / (a as f64 - b as f64);
            }
        }
        v += w * n[base + a];
    }
    v.max(0.0)
}

/// Advances a sampled profile by `dt` of pure growth.
pub fn advance(rate: &KernelExpression, x: &[f64], n: &mut [f64], dt: f64, inflow: Inflow) -> Result<()> {
    if dt <= 0.0 || rate.is_zero() {
        return Ok(());
    }
    if let Some((c, g)) = affine_rate(rate) {
        let old = n.to_vec();
        for (v, &xi) in n.iter_mut().zip(x) {
            let (foot, amp) = characteristic_foot(c, g, xi, dt);
            *v = amp * interpolate(x, &old, foot, inflow);
        }
        return Ok(());
    }
    upwind(rate, x, n, dt, inflow)
}

/// First-order conservative upwind with CFL ≤ 0.9.
fn upwind(rate: &KernelExpression, x: &[f64], n: &mut [f64], dt: f64, inflow: Inflow) -> Result<()> {
    let j = x.len();
    let h = x[1] - x[0];
    // face velocities; face k sits between nodes k−1 and k
    let faces: Vec<f64> = (0..=j).map(|k| rate.eval(x[0] + (k as f64 - 0.5) * h, 0.0)).collect();
    let vmax = faces.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax == 0.0 {
        return Ok(());
    }
    let steps = (dt * vmax / (0.9 * h)).ceil().max(1.0) as usize;
    let tau = dt / steps as f64;
    let mut flux = vec![0.0; j + 1];
    for _ in 0..steps {
        for k in 0..=j {
            let v = faces[k];
            let upstream = if v >= 0.0 {
                if k == 0 {
                    interpolate(x, n, x[0] - h, inflow)
                } else {
                    n[k - 1]
                }
            } else if k == j {
                0.0
            } else {
                n[k]
            };
            flux[k] = v * upstream;
        }
        for i in 0..j {
            n[i] -= tau / h * (flux[i + 1] - flux[i]);
        }
    }
    if n.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepCollapse { time: dt, step: tau });
    }
    Ok(())
}

/// Exact characteristics solution from an analytic initial profile.
pub fn characteristics(c: f64, g: f64, n0: impl Fn(f64) -> f64, x: f64, t: f64, inflow: Inflow) -> f64 {
    let (foot, amp) = characteristic_foot(c, g, x, t);
    if foot < 0.0 && inflow == Inflow::Zero {
        return 0.0;
    }
    amp * n0(foot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelRole;

    #[test]
    fn translation_is_exact_on_exponentials() {
        let x: Vec<f64> = (0..200).map(|i| 0.01 + 0.05 * i as f64).collect();
        let mut n: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let r = KernelExpression::constant(KernelRole::Growth, 1.0);
        for _ in 0..10 {
            advance(&r, &x, &mut n, 0.037, Inflow::Continuation).unwrap();
        }
        for (v, &xi) in n.iter().zip(&x).take(190) {
            let e = (0.37 - xi).exp();
            assert!((v - e).abs() < 1e-4 * e, "{xi}: {v} vs {e}");
        }
    }

    #[test]
    fn linear_rate_matches_characteristics() {
        let x: Vec<f64> = (0..400).map(|i| 0.01 + 0.025 * i as f64).collect();
        let mut n: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let r = KernelExpression::from_terms(KernelRole::Growth, &[(1, 0, 1.0)]);
        for _ in 0..5 {
            advance(&r, &x, &mut n, 0.1, Inflow::Continuation).unwrap();
        }
        for (v, &xi) in n.iter().zip(&x) {
            let e = characteristics(0.0, 1.0, |s| (-s).exp(), xi, 0.5, Inflow::Zero);
            assert!((v - e).abs() < 1e-6, "{xi}");
        }
    }

    #[test]
    fn upwind_conserves_number_without_boundary_flux() {
        let x: Vec<f64> = (0..300).map(|i| 0.01 + 0.01 * i as f64).collect();
        let mut n: Vec<f64> = x.iter().map(|&v| (-(v - 1.0) * (v - 1.0) * 20.0).exp()).collect();
        let r = KernelExpression::from_terms(KernelRole::Growth, &[(2, 0, 0.5)]);
        let before: f64 = n.iter().sum();
        advance(&r, &x, &mut n, 0.2, Inflow::Zero).unwrap();
        let after: f64 = n.iter().sum();
        assert!((before - after).abs() < 1e-6 * before);
        assert!(needs_inflow(&r, 0.01, 1.0));
        let zero = KernelExpression::new(KernelRole::Growth);
        let shift = KernelExpression::constant(KernelRole::Growth, 1.0);
        assert_eq!(characteristics(1.0, 0.0, |s| (-s).exp(), 0.5, 1.0, Inflow::Zero), 0.0);
        assert!(characteristics(1.0, 0.0, |s| (-s).exp(), 0.5, 1.0, Inflow::Continuation) > 1.0);
        assert!(needs_inflow(&shift, 0.01, 0.1));
        assert!(!needs_inflow(&zero, 0.01, 1.0));
    }
}
