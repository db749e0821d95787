//! Forward simulation: Fixed Pivot breakage/aggregation, growth along
//! characteristics, Strang splitting for combinations, closed forms, and the
//! benchmark case catalog.

pub mod analytic;
pub mod cases;
pub mod fixed_pivot;
pub mod growth;
pub mod integrator;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, InternalGrid, Provenance, TemporalGrid};
use crate::model::{KernelExpression, KernelRole, PBEModel};
use crate::operators::{trapz, Process};

pub use cases::{
    case_ids, case_spec, catalog, generate_case, generate_case_with, CaseSpec, DataSource, GenerationMode, SolverGrid,
};
pub use fixed_pivot::PivotSystem;
pub use growth::Inflow;
pub use integrator::Tolerance;

/// Breakage kernels: rate `Γ(x)` and birth kernel `b(y) = β(x, y) Γ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakage {
    pub rate: KernelExpression,
    pub birth: KernelExpression,
}

impl Breakage {
    /// Binary breakage with uniform daughters, `β = 2/y`.
    pub fn uniform_binary(rate: KernelExpression) -> Self {
        let mut birth = KernelExpression::new(KernelRole::BreakageBirth);
        for (m, &c) in &rate.terms {
            birth.add(crate::operators::Monomial::new(0, m.x - 1), 2.0 * c);
        }
        Self { rate, birth }
    }
}

/// The active processes of a PBE with their kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Processes {
    /// `Q(x, y)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<KernelExpression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakage: Option<Breakage>,
    /// `R(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<KernelExpression>,
}

impl Processes {
    /// Kernels read off a model: `Q` from the aggregation death term, `Γ` and
    /// `b` from the breakage terms, `R` from growth.
    pub fn from_model(model: &PBEModel) -> Self {
        let some = |k: KernelExpression| if k.is_empty() { None } else { Some(k) };
        let rate = model.kernel(Process::BkgDeath);
        let birth = model.kernel(Process::BkgBirth);
        Self {
            aggregation: some(model.kernel(Process::AggDeath)),
            breakage: if rate.is_empty() && birth.is_empty() {
                None
            } else {
                Some(Breakage { rate, birth })
            },
            growth: some(model.kernel(Process::Growth)),
        }
    }

    /// The PBE these kernels define.
    pub fn reference_model(&self) -> Result<PBEModel> {
        PBEModel::from_kernels(
            self.aggregation.as_ref(),
            self.breakage.as_ref().map(|b| (&b.rate, &b.birth)),
            self.growth.as_ref(),
        )
    }

    pub fn has_growth(&self) -> bool {
        self.growth.as_ref().is_some_and(|g| !g.is_zero())
    }

    pub fn has_particulate(&self) -> bool {
        self.aggregation.as_ref().is_some_and(|q| !q.is_zero()) || self.breakage.is_some()
    }

    fn pivot_system(&self, x: &[f64]) -> PivotSystem {
        PivotSystem::new(
            x,
            self.aggregation.as_ref(),
            self.breakage.as_ref().map(|b| (&b.rate, &b.birth)),
        )
    }
}

/// `n₀(x) = amplitude · e^(−rate · x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Exponential { amplitude: f64, rate: f64 },
}

impl InitialCondition {
    /// `e^(−x)`, the benchmark default.
    pub const DECAYING: InitialCondition = InitialCondition::Exponential {
        amplitude: 1.0,
        rate: 1.0,
    };

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Exponential { amplitude, rate } => amplitude * (-rate * x).exp(),
        }
    }

    pub fn sample(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.eval(v)).collect()
    }
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self::DECAYING
    }
}

/// A uniform range `start, start + step, …, ≤ end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Domain {
    pub const fn new(start: f64, end: f64, step: f64) -> Self {
        Self { start, end, step }
    }

    pub fn internal(&self) -> Result<InternalGrid> {
        InternalGrid::from_range(self.start, self.end, self.step)
    }

    pub fn temporal(&self) -> Result<TemporalGrid> {
        TemporalGrid::from_range(self.start, self.end, self.step)
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub tolerance: Tolerance,
    /// Relative change between successive splitting refinements that stops them.
    pub split_tolerance: f64,
    pub max_substeps: usize,
    pub inflow: Inflow,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            tolerance: Tolerance::default(),
            split_tolerance: 1e-5,
            max_substeps: 64,
            inflow: Inflow::Continuation,
        }
    }
}

/// Zeroth and first moments over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub times: Vec<f64>,
    pub zeroth: Vec<f64>,
    pub first: Vec<f64>,
}

/// Trapezoid moments of every time slice.
pub fn moments(field: &DensityField) -> MomentReport {
    let x = field.xgrid().points();
    let h = field.xgrid().spacing();
    let mut zeroth = Vec::with_capacity(field.nt());
    let mut first = Vec::with_capacity(field.nt());
    let mut buf = vec![0.0; x.len()];
    for m in 0..field.nt() {
        let s = field.slice(m);
        zeroth.push(trapz(s, h));
        for (b, (&v, &xi)) in buf.iter_mut().zip(s.iter().zip(x)) {
            *b = v * xi;
        }
        first.push(trapz(&buf, h));
    }
    MomentReport {
        times: field.tgrid().points().to_vec(),
        zeroth,
        first,
    }
}

fn finish_field(xgrid: &InternalGrid, tgrid: &TemporalGrid, rows: Vec<Vec<f64>>) -> Result<DensityField> {
    let mut values = Vec::with_capacity(xgrid.len() * tgrid.len());
    for (row, &t) in rows.iter().zip(tgrid.points()) {
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, &v) in row.iter().enumerate() {
            if v < 0.0 {
                if v < -1e-6 * scale {
                    return Err(Error::NegativeDensity { value: v, index: i, time: t });
                }
                values.push(0.0);
            } else {
                values.push(v);
            }
        }
    }
    DensityField::new(xgrid.clone(), tgrid.clone(), values, Provenance::Clean)
}

/// Simulates `processes` from the profile `n0` at time `t0` (≤ first output
/// time) and samples the result at every time of `tgrid`.
pub fn simulate(
    processes: &Processes,
    xgrid: &InternalGrid,
    tgrid: &TemporalGrid,
    n0: &[f64],
    t0: f64,
    options: &SimulationOptions,
) -> Result<DensityField> {
    if n0.len() != xgrid.len() {
        return Err(Error::LengthMismatch {
            expected: xgrid.len(),
            found: n0.len(),
        });
    }
    if tgrid.points()[0] < t0 {
        return Err(Error::invalid("output times start before the initial time"));
    }
    match (processes.has_growth(), processes.has_particulate()) {
        (true, true) => combined(processes, xgrid, tgrid, n0, t0, options),
        (true, false) => growth_only(processes.growth.as_ref().unwrap(), xgrid, tgrid, n0, t0, options.inflow),
        (false, _) => particulate(processes, xgrid, tgrid, n0, t0, options),
    }
}

fn output_times(tgrid: &TemporalGrid, t0: f64) -> Vec<f64> {
    let mut ts = vec![t0];
    ts.extend(tgrid.points().iter().copied());
    ts
}

fn particulate(
    processes: &Processes,
    xgrid: &InternalGrid,
    tgrid: &TemporalGrid,
    n0: &[f64],
    t0: f64,
    options: &SimulationOptions,
) -> Result<DensityField> {
    let sys = processes.pivot_system(xgrid.points());
    let rows = integrator::solve_at(|_, y, d| sys.rhs(y, d), n0, &output_times(tgrid, t0), options.tolerance)?;
    finish_field(xgrid, tgrid, rows.into_iter().skip(1).collect())
}

fn growth_only(
    rate: &KernelExpression,
    xgrid: &InternalGrid,
    tgrid: &TemporalGrid,
    n0: &[f64],
    t0: f64,
    inflow: Inflow,
) -> Result<DensityField> {
    let x = xgrid.points();
    let mut rows = Vec::with_capacity(tgrid.len());
    if let Some((c, g)) = growth::affine_rate(rate) {
        for &t in tgrid.points() {
            rows.push(
                x.iter()
                    .map(|&xi| {
                        let (foot, amp) = growth::characteristic_foot(c, g, xi, t - t0);
                        amp * growth::interpolate(x, n0, foot, inflow)
                    })
                    .collect(),
            );
        }
    } else {
        let mut n = n0.to_vec();
        let mut t = t0;
        for &tm in tgrid.points() {
            growth::advance(rate, x, &mut n, tm - t, inflow)?;
            t = tm;
            rows.push(n.clone());
        }
    }
    finish_field(xgrid, tgrid, rows)
}

fn strang(
    processes: &Processes,
    xgrid: &InternalGrid,
    tgrid: &TemporalGrid,
    n0: &[f64],
    t0: f64,
    substeps: usize,
    options: &SimulationOptions,
) -> Result<Vec<Vec<f64>>> {
    let x = xgrid.points();
    let rate = processes.growth.as_ref().unwrap();
    let sys = processes.pivot_system(x);
    let mut dp = integrator::DormandPrince::new(x.len(), options.tolerance, |_, y: &[f64], d: &mut [f64]| sys.rhs(y, d));
    let mut n = n0.to_vec();
    let mut t = t0;
    let mut rows = Vec::with_capacity(tgrid.len());
    for &tm in tgrid.points() {
        if tm > t {
            let tau = (tm - t) / substeps as f64;
            for s in 0..substeps {
                let ts = t + s as f64 * tau;
                growth::advance(rate, x, &mut n, 0.5 * tau, options.inflow)?;
                dp.reset();
                dp.integrate(ts, ts + tau, &mut n)?;
                growth::advance(rate, x, &mut n, 0.5 * tau, options.inflow)?;
            }
        }
        t = tm;
        rows.push(n.clone());
    }
    Ok(rows)
}

fn combined(
    processes: &Processes,
    xgrid: &InternalGrid,
    tgrid: &TemporalGrid,
    n0: &[f64],
    t0: f64,
    options: &SimulationOptions,
) -> Result<DensityField> {
    let mut substeps = 1;
    let mut prev = strang(processes, xgrid, tgrid, n0, t0, substeps, options)?;
    while substeps < options.max_substeps {
        substeps *= 2;
        let next = strang(processes, xgrid, tgrid, n0, t0, substeps, options)?;
        let scale = next.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let change = prev
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prev = next;
        if change / scale < options.split_tolerance {
            break;
        }
    }
    finish_field(xgrid, tgrid, prev)
}

fn spec_grids(spec: &CaseSpec) -> Result<(InternalGrid, TemporalGrid)> {
    Ok((spec.x.internal()?, spec.t.temporal()?))
}

/// Solver grid for a spec: the data grid refined, continued down to the
/// lattice node nearest zero and up to the requested extent. The first pivot
/// then owns a full cell, so its density stays consistent with the rest.
struct SolverLattice {
    data: InternalGrid,
    fine: InternalGrid,
    offset: usize,
    stride: usize,
}

fn solver_lattice(spec: &CaseSpec) -> Result<SolverLattice> {
    let data = spec.x.internal()?;
    let stride = spec.solver_grid.refine_for(data.first(), data.spacing());
    let h = data.spacing() / stride as f64;
    let offset = ((data.first() - 1e-9 * h) / h).floor().max(0.0) as usize;
    let first = data.first() - offset as f64 * h;
    let end = spec.solver_grid.extent.unwrap_or(data.last()).max(data.last());
    let count = ((end - first) / h + 1e-6).floor() as usize + 1;
    let fine = InternalGrid::new((0..count).map(|i| first + i as f64 * h).collect())?;
    Ok(SolverLattice {
        data,
        fine,
        offset,
        stride,
    })
}

impl SolverLattice {
    fn sample_back(&self, field: DensityField) -> Result<DensityField> {
        if self.offset == 0 && self.stride == 1 && field.nx() == self.data.len() {
            return Ok(field);
        }
        let mut values = Vec::with_capacity(self.data.len() * field.nt());
        for m in 0..field.nt() {
            let s = field.slice(m);
            values.extend((0..self.data.len()).map(|i| s[self.offset + i * self.stride]));
        }
        DensityField::new(self.data.clone(), field.tgrid().clone(), values, field.provenance().clone())
    }
}

/// Fixed Pivot simulation of a breakage and/or aggregation case from `t = 0`.
pub fn simulate_breakage_aggregation(spec: &CaseSpec) -> Result<DensityField> {
    if spec.processes.has_growth() {
        return Err(Error::invalid("growth present; use simulate_combined"));
    }
    let lattice = solver_lattice(spec)?;
    let tg = spec.t.temporal()?;
    let n0 = spec.initial.sample(lattice.fine.points());
    let field = particulate(&spec.processes, &lattice.fine, &tg, &n0, 0.0, &SimulationOptions::default())?;
    lattice.sample_back(field)
}

/// Growth-only case: exact characteristics from the analytic initial
/// condition for affine rates, upwind otherwise.
pub fn simulate_growth(spec: &CaseSpec) -> Result<DensityField> {
    if spec.processes.has_particulate() {
        return Err(Error::invalid("breakage or aggregation present; use simulate_combined"));
    }
    let (xg, tg) = spec_grids(spec)?;
    let zero = KernelExpression::new(KernelRole::Growth);
    let rate = spec.processes.growth.as_ref().unwrap_or(&zero);
    match growth::affine_rate(rate) {
        Some((c, g)) => {
            let rows = tg
                .points()
                .iter()
                .map(|&t| {
                    xg.points()
                        .iter()
                        .map(|&x| growth::characteristics(c, g, |s| spec.initial.eval(s), x, t, spec.inflow))
                        .collect()
                })
                .collect();
            finish_field(&xg, &tg, rows)
        }
        None => {
            let n0 = spec.initial.sample(xg.points());
            growth_only(rate, &xg, &tg, &n0, 0.0, spec.inflow)
        }
    }
}

/// Growth combined with breakage/aggregation by Strang splitting, refined
/// until successive halvings agree.
pub fn simulate_combined(spec: &CaseSpec) -> Result<DensityField> {
    let lattice = solver_lattice(spec)?;
    let tg = spec.t.temporal()?;
    let n0 = spec.initial.sample(lattice.fine.points());
    let options = SimulationOptions {
        inflow: spec.inflow,
        ..Default::default()
    };
    let field = simulate(&spec.processes, &lattice.fine, &tg, &n0, 0.0, &options)?;
    lattice.sample_back(field)
}

/// Re-simulates a model from the first slice of `field` over its grids.
pub fn resimulate(model: &PBEModel, field: &DensityField) -> Result<DensityField> {
    let processes = Processes::from_model(model);
    let t0 = field.tgrid().points()[0];
    simulate(
        &processes,
        field.xgrid(),
        field.tgrid(),
        field.slice(0),
        t0,
        &SimulationOptions::default(),
    )
}

/// Root-mean-square difference of two fields relative to the RMS of `reference`, in percent.
pub fn relative_rms_percent(field: &DensityField, reference: &DensityField) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in field.values().iter().zip(reference.values()) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    100.0 * (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grids(x: (f64, f64, f64), t: (f64, f64, f64)) -> (InternalGrid, TemporalGrid) {
        (
            InternalGrid::from_range(x.0, x.1, x.2).unwrap(),
            TemporalGrid::from_range(t.0, t.1, t.2).unwrap(),
        )
    }

    fn q(terms: &[(i32, i32, f64)]) -> KernelExpression {
        KernelExpression::from_terms(KernelRole::Aggregation, terms)
    }

    #[test]
    fn zero_initial_condition_stays_zero() {
        let (xg, tg) = grids((0.1, 5.0, 0.1), (0.0, 1.0, 0.1));
        let p = Processes {
            aggregation: Some(q(&[(0, 0, 1.0)])),
            ..Default::default()
        };
        let f = simulate(&p, &xg, &tg, &vec![0.0; xg.len()], 0.0, &SimulationOptions::default()).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_aggregation_number_follows_riccati() {
        // pivot number N obeys N' = −N²/2 while nothing leaves the grid
        let (xg, tg) = grids((0.01, 30.01, 0.05), (0.0, 1.0, 0.25));
        let p = Processes {
            aggregation: Some(q(&[(0, 0, 1.0)])),
            ..Default::default()
        };
        let n0 = InitialCondition::DECAYING.sample(xg.points());
        let f = simulate(&p, &xg, &tg, &n0, 0.0, &SimulationOptions::default()).unwrap();
        let h = xg.spacing();
        let big_n = |m: usize| f.slice(m).iter().sum::<f64>() * h;
        let n_start = big_n(0);
        for (m, &t) in tg.points().iter().enumerate() {
            let expect = 2.0 * n_start / (2.0 + n_start * t);
            assert!((big_n(m) / expect - 1.0).abs() < 1e-4, "t = {t}");
        }
    }

    #[test]
    fn linear_breakage_conserves_mass() {
        let (xg, tg) = grids((0.1, 5.0, 0.1), (0.0, 5.0, 0.5));
        let rate = KernelExpression::from_terms(KernelRole::BreakageRate, &[(1, 0, 1.0)]);
        let p = Processes {
            breakage: Some(Breakage::uniform_binary(rate)),
            ..Default::default()
        };
        let n0 = InitialCondition::DECAYING.sample(xg.points());
        let f = simulate(&p, &xg, &tg, &n0, 0.0, &SimulationOptions::default()).unwrap();
        let sys = p.pivot_system(xg.points());
        let (m0_start, m1_start) = sys.pivot_moments(f.slice(0));
        let mut last = m0_start;
        for m in 1..f.nt() {
            let (m0, m1) = sys.pivot_moments(f.slice(m));
            assert!((m1 / m1_start - 1.0).abs() < 1e-6);
            assert!(m0 > last);
            last = m0;
        }
    }

    #[test]
    fn uniform_binary_birth_kernel() {
        let rate = KernelExpression::from_terms(KernelRole::BreakageRate, &[(2, 0, 1.0)]);
        let b = Breakage::uniform_binary(rate);
        assert_eq!(b.birth.coefficient(crate::operators::Monomial::new(0, 1)), 2.0);
    }

    #[test]
    fn closed_forms_agree_with_fixed_pivot() {
        let cases: [(Processes, fn(f64, f64) -> f64, (f64, f64, f64), f64); 3] = [
            (
                Processes {
                    aggregation: Some(q(&[(0, 0, 1.0)])),
                    ..Default::default()
                },
                analytic::constant_aggregation,
                (0.01, 40.0, 0.02),
                1.0,
            ),
            (
                Processes {
                    breakage: Some(Breakage::uniform_binary(KernelExpression::from_terms(
                        KernelRole::BreakageRate,
                        &[(1, 0, 1.0)],
                    ))),
                    ..Default::default()
                },
                analytic::linear_breakage,
                (0.01, 30.0, 0.02),
                1.0,
            ),
            (
                Processes {
                    aggregation: Some(q(&[(1, 0, 1.0), (0, 1, 1.0)])),
                    ..Default::default()
                },
                analytic::sum_aggregation,
                (0.01, 60.0, 0.02),
                0.5,
            ),
        ];
        for (p, exact, xr, tmax) in cases {
            let (xg, tg) = grids(xr, (0.0, tmax, tmax / 2.0));
            let n0 = InitialCondition::DECAYING.sample(xg.points());
            let f = simulate(&p, &xg, &tg, &n0, 0.0, &SimulationOptions::default()).unwrap();
            let m = f.nt() - 1;
            let mut worst = 0.0f64;
            for (i, &x) in xg.points().iter().enumerate() {
                if x > 0.2 && x < 5.0 {
                    let e = exact(x, tmax);
                    worst = worst.max((f.value(i, m) - e).abs() / e);
                }
            }
            assert!(worst < 2e-2, "worst relative deviation {worst}");
        }
    }

    #[test]
    fn combined_degenerates_to_components() {
        let (xg, tg) = grids((0.01, 10.0, 0.05), (0.0, 0.5, 0.1));
        let n0 = InitialCondition::DECAYING.sample(xg.points());
        let agg = Processes {
            aggregation: Some(q(&[(0, 0, 1.0)])),
            ..Default::default()
        };
        let with_zero_growth = Processes {
            growth: Some(KernelExpression::new(KernelRole::Growth)),
            ..agg.clone()
        };
        let opts = SimulationOptions::default();
        let a = simulate(&agg, &xg, &tg, &n0, 0.0, &opts).unwrap();
        let b = simulate(&with_zero_growth, &xg, &tg, &n0, 0.0, &opts).unwrap();
        assert!(relative_rms_percent(&b, &a) < 1e-8);
        let grow = Processes {
            growth: Some(KernelExpression::from_terms(KernelRole::Growth, &[(1, 0, 1.0)])),
            ..Default::default()
        };
        let grow_zero_agg = Processes {
            aggregation: Some(q(&[])),
            ..grow.clone()
        };
        let a = simulate(&grow, &xg, &tg, &n0, 0.0, &opts).unwrap();
        let b = simulate(&grow_zero_agg, &xg, &tg, &n0, 0.0, &opts).unwrap();
        assert!(relative_rms_percent(&b, &a) < 1e-8);
    }

    #[test]
    fn combined_growth_aggregation_matches_ansatz() {
        let (xg, tg) = grids((0.01, 20.0, 0.01), (0.0, 1.0, 0.25));
        let p = Processes {
            aggregation: Some(q(&[(0, 0, 1.0)])),
            growth: Some(KernelExpression::constant(KernelRole::Growth, 1.0)),
            ..Default::default()
        };
        let n0 = InitialCondition::DECAYING.sample(xg.points());
        let f = simulate(&p, &xg, &tg, &n0, 0.0, &SimulationOptions::default()).unwrap();
        let exact = analytic::ClosedForm::ConstantGrowthAggregation.field(&xg, &tg).unwrap();
        let mut worst = 0.0f64;
        for m in 0..f.nt() {
            for (i, &x) in xg.points().iter().enumerate() {
                if x < 6.0 {
                    let e = exact.value(i, m);
                    worst = worst.max((f.value(i, m) - e).abs() / e);
                }
            }
        }
        assert!(worst < 1e-2, "worst relative deviation {worst}");
    }

    #[test]
    fn growth_aggregation_without_nucleation_follows_moment_odes() {
        // N' = −N²/2 and M' = R N with nothing entering at x = 0
        let (xg, tg) = grids((0.01, 30.0, 0.02), (0.0, 1.0, 0.25));
        let p = Processes {
            aggregation: Some(q(&[(0, 0, 1.0)])),
            growth: Some(KernelExpression::constant(KernelRole::Growth, 1.0)),
            ..Default::default()
        };
        let n0 = InitialCondition::DECAYING.sample(xg.points());
        let opts = SimulationOptions {
            inflow: Inflow::Zero,
            ..Default::default()
        };
        let f = simulate(&p, &xg, &tg, &n0, 0.0, &opts).unwrap();
        let mo = moments(&f);
        let ode = integrator::solve_at(
            |_, y, d| {
                d[0] = -0.5 * y[0] * y[0];
                d[1] = y[0];
            },
            &[mo.zeroth[0], mo.first[0]],
            tg.points(),
            Tolerance::default(),
        )
        .unwrap();
        for m in 0..f.nt() {
            assert!((mo.zeroth[m] / ode[m][0] - 1.0).abs() < 2e-2, "N at {m}: {} vs {}", mo.zeroth[m], ode[m][0]);
            assert!((mo.first[m] / ode[m][1] - 1.0).abs() < 2e-2, "M at {m}: {} vs {}", mo.first[m], ode[m][1]);
        }
        assert!(mo.zeroth.windows(2).all(|w| w[1] < w[0]));
        assert!(mo.first.windows(2).all(|w| w[1] > w[0]));
    }
}
