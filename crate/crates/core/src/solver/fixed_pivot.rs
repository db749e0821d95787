//! Fixed Pivot discretization of breakage and aggregation on a uniform pivot
//! grid. The state is the number density at the pivots; `N_i = n_i Δx`.

use crate::model::KernelExpression;

/// Aggregation and breakage right-hand side on fixed pivots.
#[derive(Debug, Clone)]
pub struct PivotSystem {
    x: Vec<f64>,
    h: f64,
    aggregation: Option<AggregationTable>,
    breakage: Option<BreakageTable>,
}

#[derive(Debug, Clone)]
struct AggregationTable {
    /// `Q(x_j, x_k)`, row-major `J × J`.
    q: Vec<f64>,
    /// For pair index sum `s = j + k`: lower receiving pivot and the fraction
    /// sent to the pivot above it.
    targets: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct BreakageTable {
    /// `Γ(x_i)`.
    rate: Vec<f64>,
    /// `b(x_k) = β Γ` at the parent pivots.
    birth: Vec<f64>,
    /// Hat-function mass below and above each pivot.
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PivotSystem {
    /// `x` must be uniform. `breakage` is `(Γ(x), b(y))`.
    pub fn new(
        x: &[f64],
        aggregation: Option<&KernelExpression>,
        breakage: Option<(&KernelExpression, &KernelExpression)>,
    ) -> Self {
        let j = x.len();
        let h = if j > 1 { x[1] - x[0] } else { x[0] };
        let aggregation = aggregation.filter(|q| !q.is_zero()).map(|q| {
            let mut tab = vec![0.0; j * j];
            for a in 0..j {
                for b in 0..j {
                    tab[a * j + b] = q.eval(x[a], x[b]);
                }
            }
            let targets = (0..2 * j)
                .map(|s| {
                    let v = 2.0 * x[0] + s as f64 * h;
                    let r = (v - x[0]) / h;
                    let mut lo = (r + 1e-9).floor();
                    let mut frac = r - lo;
                    if frac < 1e-9 {
                        frac = 0.0;
                    }
                    if lo < 0.0 {
                        lo = 0.0;
                        frac = 0.0;
                    }
                    (lo as usize, frac)
                })
                .collect();
            AggregationTable { q: tab, targets }
        });
        let breakage = breakage.map(|(rate, birth)| {
            let lower = (0..j)
                .map(|i| 0.5 * (x[i] - if i == 0 { 0.0 } else { x[i - 1] }))
                .collect();
            let upper = (0..j)
                .map(|i| if i + 1 < j { 0.5 * (x[i + 1] - x[i]) } else { 0.0 })
                .collect();
            BreakageTable {
                rate: x.iter().map(|&v| rate.eval(v, 0.0)).collect(),
                birth: x.iter().map(|&v| birth.eval(0.0, v)).collect(),
                lower,
                upper,
            }
        });
        Self {
            x: x.to_vec(),
            h,
            aggregation,
            breakage,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `dn/dt` at the pivots.
    pub fn rhs(&self, n: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let j = self.x.len();
        if let Some(agg) = &self.aggregation {
            let h = self.h;
            for a in 0..j {
                let row = &agg.q[a * j..(a + 1) * j];
                let na = n[a];
                if na == 0.0 {
                    continue;
                }
                let mut death = 0.0;
                for (b, (&qab, &nb)) in row.iter().zip(n).enumerate() {
                    death += qab * nb;
                    if b > a {
                        continue;
                    }
                    let w = if a == b { 0.5 } else { 1.0 } * qab * na * nb * h;
                    let (lo, frac) = agg.targets[a + b];
                    if lo < j {
                        out[lo] += (1.0 - frac) * w;
                    }
                    if frac > 0.0 && lo + 1 < j {
                        out[lo + 1] += frac * w;
                    }
                }
                out[a] -= na * death * h;
            }
        }
        if let Some(bkg) = &self.breakage {
            // Σ_{k>i} b_k n_k accumulated from the top
            let mut above = 0.0;
            for i in (0..j).rev() {
                let g = bkg.birth[i] * n[i];
                out[i] += bkg.lower[i] * g + (bkg.lower[i] + bkg.upper[i]) * above - bkg.rate[i] * n[i];
                above += g;
            }
        }
    }

    /// Pivot sums `Σ N_i` and `Σ x_i N_i`.
    pub fn pivot_moments(&self, n: &[f64]) -> (f64, f64) {
        let m0 = n.iter().sum::<f64>() * self.h;
        let m1 = n.iter().zip(&self.x).map(|(a, b)| a * b).sum::<f64>() * self.h;
        (m0, m1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelRole;

    fn grid(n: usize, x0: f64, h: f64) -> Vec<f64> {
        (0..n).map(|i| x0 + i as f64 * h).collect()
    }

    #[test]
    fn breakage_conserves_pivot_mass() {
        let x = grid(60, 0.05, 0.1);
        let rate = KernelExpression::from_terms(KernelRole::BreakageRate, &[(2, 0, 1.0)]);
        let birth = KernelExpression::from_terms(KernelRole::BreakageBirth, &[(0, 1, 2.0)]);
        let sys = PivotSystem::new(&x, None, Some((&rate, &birth)));
        let n: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let mut d = vec![0.0; x.len()];
        sys.rhs(&n, &mut d);
        let (dm0, dm1) = sys.pivot_moments(&d);
        assert!(dm1.abs() < 1e-12, "mass rate {dm1}");
        assert!(dm0 > 0.0);
    }

    #[test]
    fn aggregation_conserves_pivot_mass_inside_domain() {
        // a compactly supported profile so no pair leaves the grid
        let x = grid(80, 0.1, 0.1);
        let q = KernelExpression::from_terms(KernelRole::Aggregation, &[(1, 0, 1.0), (0, 1, 1.0)]);
        let sys = PivotSystem::new(&x, Some(&q), None);
        let n: Vec<f64> = x.iter().map(|&v| if v < 3.0 { v * (3.0 - v) } else { 0.0 }).collect();
        let mut d = vec![0.0; x.len()];
        sys.rhs(&n, &mut d);
        let (dm0, dm1) = sys.pivot_moments(&d);
        assert!(dm1.abs() < 1e-10, "mass rate {dm1}");
        // pivot number rate: −½ Σ_j Σ_k Q N_j N_k
        let h = 0.1;
        let mut expect = 0.0;
        for a in 0..x.len() {
            for b in 0..x.len() {
                expect -= 0.5 * q.eval(x[a], x[b]) * n[a] * n[b] * h * h;
            }
        }
        assert!((dm0 - expect).abs() < 1e-10);
    }

    #[test]
    fn offset_pivots_split_between_neighbours() {
        let x = grid(10, 0.01, 0.1);
        let q = KernelExpression::constant(KernelRole::Aggregation, 1.0);
        let sys = PivotSystem::new(&x, Some(&q), None);
        let t = &sys.aggregation.as_ref().unwrap().targets;
        assert_eq!(t[0].0, 0);
        assert!((t[0].1 - 0.1).abs() < 1e-9);
        let x = grid(10, 0.1, 0.1);
        let sys = PivotSystem::new(&x, Some(&q), None);
        let t = &sys.aggregation.as_ref().unwrap().targets;
        assert_eq!(t[3], (4, 0.0));
    }
}
