//! Oracles, strategies and property checks shared by the integration tests
//! and the acceptance harness.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pbe_discovery::grid::{DensityField, InternalGrid, TemporalGrid};
use pbe_discovery::library::{BasisCatalog, Combination};
use pbe_discovery::model::{KernelExpression, KernelRole};
use pbe_discovery::operators::{evaluate_column, trapz, BasisFunction, ColumnDescriptor, Process};
use pbe_discovery::solver::{simulate, Breakage, Processes, SimulationOptions};
use pbe_discovery::stls::{stls, stls_with_trace, StlsConfig};

pub const STLS_CASES: u32 = 200;
pub const CONSERVATION_CASES: u32 = 50;

/// Relative tolerance of the operator oracles and quadrature balances.
pub const QUADRATURE_TOL: f64 = 1e-3;
pub const BILINEAR_TOL: f64 = 1e-12;
pub const IDEMPOTENCE_TOL: f64 = 1e-12;
pub const PIVOT_MOMENT_TOL: f64 = 1e-6;

pub const X1: f64 = 0.01;
pub const XJ: f64 = 10.01;
pub const H: f64 = 0.01;
/// Oracle comparisons skip the ends of the domain.
pub const CHECK_RANGE: (f64, f64) = (1.0, 8.0);

pub fn field_from(f: impl Fn(f64) -> f64) -> DensityField {
    let x = InternalGrid::from_range(X1, XJ, H).unwrap();
    let t = TemporalGrid::from_range(0.0, 0.1, 0.1).unwrap();
    DensityField::from_fn(x, t, |x, _| f(x)).unwrap()
}

pub fn first_slice(field: &DensityField, d: ColumnDescriptor) -> Vec<f64> {
    let c = evaluate_column(field, d).unwrap();
    c.values[..field.nx()].to_vec()
}

/// `∫ y^b e^(−y) dy` from `lo` to `hi` for `b ≥ 0`, by repeated integration by parts.
pub fn gamma_segment(b: i32, lo: f64, hi: f64) -> f64 {
    let antiderivative = |y: f64| {
        let mut s = 0.0;
        let mut term = 1.0;
        for k in (0..=b).rev() {
            s += term * y.powi(k);
            term *= k as f64;
        }
        -(-y).exp() * s
    };
    antiderivative(hi) - antiderivative(lo)
}

/// Composite Simpson rule with `2m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// Analytic value of column `d` on `n = e^(−x)` at `x`, with the integrals
/// over the same truncated ranges as the operators.
pub fn exponential_oracle(d: &ColumnDescriptor, x: f64) -> f64 {
    let BasisFunction {
        x_pow: a,
        y_pow: b,
        multiplier: c,
    } = d.basis;
    let e = (-x).exp();
    let v = match d.process {
        Process::AggBirth => {
            let lo = X1;
            let hi = x - X1;
            let p = (b + 1) as f64;
            0.5 * x.powi(a) * e * (hi.powf(p) - lo.powf(p)) / p
        }
        Process::AggDeath => x.powi(a) * e * gamma_segment(b, X1, XJ),
        Process::BkgBirth => {
            if b >= 0 {
                gamma_segment(b, x, XJ)
            } else {
                simpson(|y| y.powi(b) * (-y).exp(), x, XJ, 20_000)
            }
        }
        Process::BkgDeath => x.powi(a) * e,
        Process::Growth => (a as f64 * x.powi(a - 1) - x.powi(a)) * e,
    };
    c * v
}

/// Max-norm relative deviation `‖col − exact‖∞ / ‖exact‖∞` of every
/// default-catalog column from its oracle on `e^(−x)`.
pub fn operator_oracle_errors() -> Vec<(String, f64)> {
    let field = field_from(|x| (-x).exp());
    let xs = field.xgrid().points().to_vec();
    let inside: Vec<usize> = (0..xs.len())
        .filter(|&i| xs[i] >= CHECK_RANGE.0 && xs[i] <= CHECK_RANGE.1)
        .collect();
    let all = Combination::new(true, true, true);
    BasisCatalog::default()
        .master_descriptors(all)
        .into_iter()
        .map(|d| {
            let col = first_slice(&field, d);
            let exact: Vec<f64> = inside.iter().map(|&i| exponential_oracle(&d, xs[i])).collect();
            let peak = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let worst = inside
                .iter()
                .zip(&exact)
                .map(|(&i, &e)| (col[i] - e).abs())
                .fold(0.0f64, f64::max);
            (d.name(), worst / peak)
        })
        .collect()
}

/// `(amplitude, centre, width)` of Gaussian bumps placed well inside the domain.
pub fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.2f64..2.0, 1.5f64..2.5, 0.15f64..0.4), 1..=3)
}

/// `(c₀, c₁, c₂)` of `Q = c₀ + c₁(x + y) + c₂xy`.
pub fn kernels() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.2f64..2.0, 0.0f64..0.5, 0.0f64..0.2)
}

/// Kernels mild enough that no mass reaches the end of the pivot grid
/// within the simulated time.
pub fn mild_kernels() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.2f64..2.0, 0.0f64..0.2, 0.0f64..0.05)
}

pub fn bump_density(b: &[(f64, f64, f64)], x: f64) -> f64 {
    b.iter()
        .map(|&(a, c, w)| a * (-0.5 * ((x - c) / w).powi(2)).exp())
        .sum()
}

fn col(process: Process, a: i32, b: i32, c: f64) -> ColumnDescriptor {
    ColumnDescriptor::new(process, BasisFunction::new(a, b).with_multiplier(c))
}

fn moment(field: &DensityField, v: &[f64], p: i32) -> f64 {
    let xs = field.xgrid().points();
    let g: Vec<f64> = v.iter().zip(xs).map(|(v, x)| v * x.powi(p)).collect();
    trapz(&g, field.xgrid().spacing())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `∫ x (B_agg − D_agg) dx ≈ 0` for `Q = c₀ + c₁(x + y) + c₂xy`, whose birth
/// kernel is `Q(x − y, y) = c₀ + c₁x + c₂(xy − y²)`.
pub fn check_aggregation_mass(b: &[(f64, f64, f64)], q: (f64, f64, f64)) -> Result<(), TestCaseError> {
    let f = field_from(|x| bump_density(b, x));
    let (c0, c1, c2) = q;
    let sum = |cols: &[ColumnDescriptor]| {
        let mut acc = vec![0.0; f.nx()];
        for d in cols {
            for (a, v) in acc.iter_mut().zip(first_slice(&f, *d)) {
                *a += v;
            }
        }
        acc
    };
    let birth = sum(&[
        col(Process::AggBirth, 0, 0, c0),
        col(Process::AggBirth, 1, 0, c1),
        col(Process::AggBirth, 1, 1, c2),
        col(Process::AggBirth, 0, 2, -c2),
    ]);
    let death = sum(&[
        col(Process::AggDeath, 0, 0, c0),
        col(Process::AggDeath, 1, 0, c1),
        col(Process::AggDeath, 0, 1, c1),
        col(Process::AggDeath, 1, 1, c2),
    ]);
    let gained = moment(&f, &birth, 1);
    let lost = moment(&f, &death, 1);
    prop_assert!(rel(gained, lost) <= QUADRATURE_TOL, "birth mass {gained} vs death mass {lost}");
    Ok(())
}

/// `∫ D_agg(1) ≈ N²` and `∫ B_agg(1) ≈ N²/2`.
pub fn check_aggregation_number(b: &[(f64, f64, f64)]) -> Result<(), TestCaseError> {
    let f = field_from(|x| bump_density(b, x));
    let n = simpson(|x| bump_density(b, x), X1, XJ, 5_000);
    let death = moment(&f, &first_slice(&f, col(Process::AggDeath, 0, 0, 1.0)), 0);
    let birth = moment(&f, &first_slice(&f, col(Process::AggBirth, 0, 0, 1.0)), 0);
    prop_assert!(rel(death, n * n) <= QUADRATURE_TOL, "death {death} vs N² {}", n * n);
    prop_assert!(rel(birth, 0.5 * n * n) <= QUADRATURE_TOL, "birth {birth} vs N²/2 {}", 0.5 * n * n);
    Ok(())
}

/// Uniform binary breakage with `Γ = g·x^k`, `b = 2g·y^(k−1)`:
/// `∫ x B_bkg(b) dx ≈ ∫ x Γ n dx`.
pub fn check_breakage_mass(b: &[(f64, f64, f64)], k: i32, g: f64) -> Result<(), TestCaseError> {
    let f = field_from(|x| bump_density(b, x));
    let birth = first_slice(&f, col(Process::BkgBirth, 0, k - 1, 2.0 * g));
    let gained = moment(&f, &birth, 1);
    let lost = simpson(|x| x * g * x.powi(k) * bump_density(b, x), X1, XJ, 5_000);
    prop_assert!(rel(gained, lost) <= QUADRATURE_TOL, "fragment mass {gained} vs broken mass {lost}");
    Ok(())
}

/// Aggregation columns scale by `c²` and the others by `c` when `n → c·n`.
pub fn check_bilinearity(b: &[(f64, f64, f64)], c: f64) -> Result<(), TestCaseError> {
    let f1 = field_from(|x| bump_density(b, x));
    let f2 = field_from(|x| c * bump_density(b, x));
    for d in BasisCatalog::default().master_descriptors(Combination::new(true, true, true)) {
        let s = match d.process {
            Process::AggBirth | Process::AggDeath => c * c,
            _ => c,
        };
        let v1 = first_slice(&f1, d);
        let v2 = first_slice(&f2, d);
        let peak = v2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (p, q) in v1.iter().zip(&v2) {
            prop_assert!(
                (s * p - q).abs() <= BILINEAR_TOL * peak.max(f64::MIN_POSITIVE),
                "{}: {} vs {}",
                d.name(),
                s * p,
                q
            );
        }
    }
    Ok(())
}

/// Pivot-sum moments `Σ n_i Δx` and `Σ x_i n_i Δx` over time.
fn pivot_moments(field: &DensityField) -> (Vec<f64>, Vec<f64>) {
    let xs = field.xgrid().points();
    let h = field.xgrid().spacing();
    (0..field.nt())
        .map(|m| {
            let s = field.slice(m);
            (s.iter().sum::<f64>() * h, s.iter().zip(xs).map(|(n, x)| n * x).sum::<f64>() * h)
        })
        .unzip()
}

/// Unit initial number keeps every run short of the grid end.
fn pivot_run(processes: &Processes, b: &[(f64, f64, f64)]) -> DensityField {
    let h = 0.1;
    let x = InternalGrid::from_range(h, 80.0, h).unwrap();
    let t = TemporalGrid::from_range(0.0, 0.2, 0.05).unwrap();
    let raw: Vec<f64> = x.points().iter().map(|&v| bump_density(b, v)).collect();
    let number = raw.iter().sum::<f64>() * h;
    let n0: Vec<f64> = raw.iter().map(|v| v / number).collect();
    simulate(processes, &x, &t, &n0, 0.0, &SimulationOptions::default()).unwrap()
}

/// Pure aggregation on the pivot grid: number non-increasing, mass conserved.
pub fn check_pivot_aggregation(b: &[(f64, f64, f64)], q: (f64, f64, f64)) -> Result<(), TestCaseError> {
    let kernel = KernelExpression::from_terms(
        KernelRole::Aggregation,
        &[(0, 0, q.0), (1, 0, q.1), (0, 1, q.1), (1, 1, q.2)],
    );
    let processes = Processes {
        aggregation: Some(kernel),
        ..Default::default()
    };
    let (m0, m1) = pivot_moments(&pivot_run(&processes, b));
    for w in m0.windows(2) {
        prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "number grew: {:?}", m0);
    }
    for v in &m1 {
        prop_assert!(rel(*v, m1[0]) <= PIVOT_MOMENT_TOL, "mass drifted: {:?}", m1);
    }
    Ok(())
}

/// Pure uniform binary breakage on the pivot grid: number non-decreasing,
/// mass conserved.
pub fn check_pivot_breakage(b: &[(f64, f64, f64)], k: i32, g: f64) -> Result<(), TestCaseError> {
    let rate = KernelExpression::from_terms(KernelRole::BreakageRate, &[(k, 0, g)]);
    let processes = Processes {
        breakage: Some(Breakage::uniform_binary(rate)),
        ..Default::default()
    };
    let (m0, m1) = pivot_moments(&pivot_run(&processes, b));
    for w in m0.windows(2) {
        prop_assert!(w[1] >= w[0] * (1.0 - 1e-12), "number fell: {:?}", m0);
    }
    for v in &m1 {
        prop_assert!(rel(*v, m1[0]) <= PIVOT_MOMENT_TOL, "mass drifted: {:?}", m1);
    }
    Ok(())
}

/// A random regression problem: a sparse truth plus noise.
#[derive(Debug, Clone)]
pub struct System {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lambda: f64,
}

pub fn systems() -> impl Strategy<Value = System> {
    (10usize..60, 1usize..8, any::<u64>(), 0.0f64..2.0, 0.0f64..0.3).prop_map(|(rows, cols, seed, lambda, noise)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let truth = DVector::from_fn(cols, |_, _| {
            if rng.random_bool(0.5) {
                rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                0.0
            }
        });
        let b = &a * truth + DVector::from_fn(rows, |_, _| noise * rng.random_range(-1.0..1.0));
        System { a, b, lambda }
    })
}

/// Converged nonzero coefficients are at least `λ` in magnitude, and
/// everything off the support is exactly zero.
pub fn check_stls_bound(s: &System) -> Result<(), TestCaseError> {
    let sol = stls(&s.a, &s.b, StlsConfig::new(s.lambda)).unwrap();
    for (c, &v) in sol.coefficients.iter().enumerate() {
        if sol.support.contains(&c) {
            if sol.converged {
                prop_assert!(v.abs() >= s.lambda, "column {c}: |{v}| < {}", s.lambda);
            }
        } else {
            prop_assert_eq!(v, 0.0);
        }
    }
    Ok(())
}

/// Re-running on the converged support alone reproduces it.
pub fn check_stls_idempotent(s: &System) -> Result<(), TestCaseError> {
    let sol = stls(&s.a, &s.b, StlsConfig::new(s.lambda)).unwrap();
    if !sol.converged || sol.support.is_empty() {
        return Ok(());
    }
    let sub = s.a.select_columns(&sol.support);
    let again = stls(&sub, &s.b, StlsConfig::new(s.lambda)).unwrap();
    prop_assert_eq!(again.support.clone(), (0..sol.support.len()).collect::<Vec<_>>());
    for (k, &c) in sol.support.iter().enumerate() {
        let (p, q) = (sol.coefficients[c], again.coefficients[k]);
        prop_assert!((p - q).abs() <= IDEMPOTENCE_TOL * p.abs().max(1.0), "{p} vs {q}");
    }
    Ok(())
}

/// `λ = 0` is ordinary least squares (checked against an SVD solve).
pub fn check_stls_zero_lambda(s: &System) -> Result<(), TestCaseError> {
    prop_assume!(s.a.nrows() > s.a.ncols());
    let sol = stls(&s.a, &s.b, StlsConfig::new(0.0)).unwrap();
    let svd = s.a.clone().svd(true, true);
    let exact = svd.solve(&s.b, 1e-14).unwrap();
    let scale = exact.amax().max(1.0);
    for (c, &v) in sol.coefficients.iter().enumerate() {
        prop_assert!((v - exact[c]).abs() <= 1e-9 * scale, "column {c}: {v} vs {}", exact[c]);
    }
    Ok(())
}

/// Every iteration's support is a subset of the previous one.
pub fn check_stls_monotone(s: &System) -> Result<(), TestCaseError> {
    let (sol, trace) = stls_with_trace(&s.a, &s.b, StlsConfig::new(s.lambda)).unwrap();
    for w in trace.windows(2) {
        prop_assert!(w[1].iter().all(|c| w[0].contains(c)), "{:?} then {:?}", w[0], w[1]);
    }
    if let Some(last) = trace.last() {
        prop_assert!(sol.support.iter().all(|c| last.contains(c)));
    }
    Ok(())
}
