//! The sixteen benchmark systems with their domains, weights and published
//! outcomes.

use serde::{Deserialize, Serialize};

use super::analytic::ClosedForm;
use super::{Breakage, Domain, Inflow, InitialCondition, Processes};
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::model::{KernelExpression, KernelRole, PBEModel};
use crate::selector::SelectWeights;

/// How benchmark data is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DataSource {
    ClosedForm { form: ClosedForm },
    FixedPivot,
}

/// Whether a case is expected to be identified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOutcome {
    Match,
    /// Structure identified, coefficients poor.
    MatchLargeError,
    /// One reference term is consistently missed.
    Missing { term: String },
}

/// Published noisy-data result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyResult {
    /// Highest identifiable noise level, percent.
    pub level_percent: f64,
    pub mean_error_percent: f64,
    pub std_error_percent: f64,
    /// Fraction of the data used, when not all of it.
    pub data_fraction: f64,
}

/// One benchmark system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: String,
    pub name: String,
    pub processes: Processes,
    pub x: Domain,
    pub t: Domain,
    pub initial: InitialCondition,
    /// Lower boundary treatment for growth.
    #[serde(default)]
    pub inflow: Inflow,
    /// Grid the forward solver runs on before sampling onto `x`.
    #[serde(default)]
    pub solver_grid: SolverGrid,
    pub weights: SelectWeights,
    pub source: DataSource,
    /// Published clean-data average coefficient error, percent.
    pub clean_error_percent: Option<f64>,
    pub noisy: Option<NoisyResult>,
    pub expected: ExpectedOutcome,
}

impl CaseSpec {
    /// The true PBE.
    pub fn reference_model(&self) -> Result<PBEModel> {
        let mut m = self.processes.reference_model()?;
        m.provenance.case = Some(self.id.clone());
        Ok(m)
    }

    /// `(j, k)` implied by the domains.
    pub fn shape(&self) -> Result<(usize, usize)> {
        Ok((self.x.internal()?.len(), self.t.temporal()?.len()))
    }

    pub fn expects_match(&self) -> bool {
        !matches!(self.expected, ExpectedOutcome::Missing { .. })
    }
}

/// Solver grid relative to the data grid: `refine` nodes per data interval,
/// continued up to `extent` when that lies beyond the data. Without an
/// explicit `refine` the smallest factor that puts the first data node on a
/// whole multiple of the solver spacing is used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
}

/// Largest factor tried when searching for an aligned solver lattice.
pub const MAX_AUTO_REFINE: usize = 100;

impl SolverGrid {
    /// Refinement factor for a data grid starting at `first` with `spacing`.
    pub fn refine_for(&self, first: f64, spacing: f64) -> usize {
        if let Some(r) = self.refine {
            return r.max(1);
        }
        (1..=MAX_AUTO_REFINE)
            .find(|&r| {
                let q = first * r as f64 / spacing;
                q >= 1.0 - 1e-9 && (q - q.round()).abs() < 1e-6
            })
            .unwrap_or(1)
    }
}

/// Whether to prefer closed forms or always run the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    #[default]
    Auto,
    Solver,
}

fn agg(terms: &[(i32, i32, f64)]) -> KernelExpression {
    KernelExpression::from_terms(KernelRole::Aggregation, terms)
}

fn rate(power: i32) -> Breakage {
    Breakage::uniform_binary(KernelExpression::from_terms(KernelRole::BreakageRate, &[(power, 0, 1.0)]))
}

fn growth(terms: &[(i32, i32, f64)]) -> KernelExpression {
    KernelExpression::from_terms(KernelRole::Growth, terms)
}

const CONSTANT: &[(i32, i32, f64)] = &[(0, 0, 1.0)];
const SUM: &[(i32, i32, f64)] = &[(1, 0, 1.0), (0, 1, 1.0)];
const PRODUCT: &[(i32, i32, f64)] = &[(1, 1, 1.0)];

struct Row {
    id: &'static str,
    name: &'static str,
    aggregation: Option<&'static [(i32, i32, f64)]>,
    breakage_power: Option<i32>,
    growth: Option<&'static [(i32, i32, f64)]>,
    x: Domain,
    t: Domain,
    weights: [f64; 3],
    closed: Option<ClosedForm>,
    clean: Option<f64>,
    noisy: Option<(f64, f64, f64, f64)>,
}

const ROWS: &[Row] = &[
    Row {
        id: "a",
        name: "Constant Aggregation",
        aggregation: Some(CONSTANT),
        breakage_power: None,
        growth: None,
        x: Domain::new(0.01, 10.01, 0.01),
        t: Domain::new(0.0, 5.0, 0.1),
        weights: [1.0, 1.0, 1.0],
        closed: Some(ClosedForm::ConstantAggregation),
        clean: Some(0.18),
        noisy: Some((1.0, 0.20, 0.20, 1.0)),
    },
    Row {
        id: "b",
        name: "Sum Aggregation",
        aggregation: Some(SUM),
        breakage_power: None,
        growth: None,
        x: Domain::new(0.01, 20.01, 0.1),
        t: Domain::new(0.0, 1.0, 0.1),
        weights: [1.0, 1.0, 1.0],
        closed: Some(ClosedForm::SumAggregation),
        clean: Some(3.72),
        noisy: Some((1.0, 2.30, 2.05, 1.0)),
    },
    Row {
        id: "c",
        name: "Product Aggregation",
        aggregation: Some(PRODUCT),
        breakage_power: None,
        growth: None,
        x: Domain::new(0.01, 25.1, 0.1),
        t: Domain::new(0.0, 0.2, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: Some(ClosedForm::ProductAggregation),
        clean: Some(1.53),
        noisy: Some((0.25, 2.04, 2.74, 1.0)),
    },
    Row {
        id: "d",
        name: "Fx+y Breakage",
        aggregation: None,
        breakage_power: Some(2),
        growth: None,
        x: Domain::new(0.1, 10.1, 0.1),
        t: Domain::new(0.0, 10.0, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: Some(ClosedForm::QuadraticBreakage),
        clean: Some(0.57),
        noisy: Some((1.0, 0.54, 0.40, 1.0)),
    },
    Row {
        id: "e",
        name: "F1 Breakage",
        aggregation: None,
        breakage_power: Some(1),
        growth: None,
        x: Domain::new(0.1, 5.0, 0.1),
        t: Domain::new(0.0, 5.0, 0.1),
        weights: [1.0, 1.0, 1.0],
        closed: Some(ClosedForm::LinearBreakage),
        clean: Some(1.46),
        noisy: Some((1.0, 1.46, 0.75, 1.0)),
    },
    Row {
        id: "f",
        name: "Constant Growth",
        aggregation: None,
        breakage_power: None,
        growth: Some(&[(0, 0, 1.0)]),
        x: Domain::new(0.01, 10.0, 0.01),
        t: Domain::new(0.0, 1.0, 0.1),
        weights: [0.01, 1.0, 1.0],
        closed: Some(ClosedForm::ConstantGrowth),
        clean: Some(0.05),
        noisy: Some((1.0, 3.25, 0.75, 1.0)),
    },
    Row {
        id: "g",
        name: "Linear Growth",
        aggregation: None,
        breakage_power: None,
        growth: Some(&[(1, 0, 1.0)]),
        x: Domain::new(0.01, 10.0, 0.01),
        t: Domain::new(0.0, 1.0, 0.01),
        weights: [0.01, 1.0, 1.0],
        closed: Some(ClosedForm::LinearGrowth),
        clean: Some(0.12),
        noisy: Some((0.5, 0.30, 0.42, 0.2)),
    },
    Row {
        id: "h",
        name: "Linear Growth and Constant Aggregation",
        aggregation: Some(&[(0, 0, 10.0)]),
        breakage_power: None,
        growth: Some(&[(1, 0, 1.0)]),
        x: Domain::new(0.01, 100.01, 0.1),
        t: Domain::new(0.0, 5.0, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: Some(ClosedForm::LinearGrowthConstantAggregation { q: 10.0 }),
        clean: Some(0.66),
        noisy: Some((0.25, 77.18, 1.15, 1.0)),
    },
    Row {
        id: "i",
        name: "Linear Growth and Sum Aggregation",
        aggregation: Some(SUM),
        breakage_power: None,
        growth: Some(&[(1, 0, 1.0)]),
        x: Domain::new(0.01, 50.0, 0.01),
        t: Domain::new(0.01, 0.2, 0.01),
        weights: [2.0, 1.0, 1.0],
        closed: Some(ClosedForm::LinearGrowthSumAggregation),
        clean: Some(0.46),
        noisy: Some((0.25, 1.76, 1.70, 1.0)),
    },
    Row {
        id: "j",
        name: "Constant Growth and Aggregation",
        aggregation: Some(CONSTANT),
        breakage_power: None,
        growth: Some(&[(0, 0, 1.0)]),
        x: Domain::new(0.01, 10.01, 0.01),
        t: Domain::new(0.01, 5.0, 0.01),
        weights: [1.0, 2.0, 1.0],
        closed: Some(ClosedForm::ConstantGrowthAggregation),
        clean: Some(27.51),
        noisy: None,
    },
    Row {
        id: "k",
        name: "Fx+y Breakage and Constant Aggregation",
        aggregation: Some(CONSTANT),
        breakage_power: Some(2),
        growth: None,
        x: Domain::new(0.01, 5.01, 0.1),
        t: Domain::new(0.0, 5.0, 0.01),
        weights: [2.0, 1.0, 1.0],
        closed: None,
        clean: Some(3.45),
        noisy: Some((0.5, 3.44, 0.13, 1.0)),
    },
    Row {
        id: "l",
        name: "Fx+y Breakage and Sum Aggregation",
        aggregation: Some(SUM),
        breakage_power: Some(2),
        growth: None,
        x: Domain::new(0.01, 5.01, 0.1),
        t: Domain::new(0.0, 5.0, 0.01),
        weights: [1.0, 2.0, 1.0],
        closed: None,
        clean: None,
        noisy: None,
    },
    Row {
        id: "m",
        name: "Fx+y Breakage and Product Aggregation",
        aggregation: Some(PRODUCT),
        breakage_power: Some(2),
        growth: None,
        x: Domain::new(0.01, 5.01, 0.1),
        t: Domain::new(0.0, 5.0, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: None,
        clean: Some(3.26),
        noisy: Some((0.5, 3.48, 2.77, 1.0)),
    },
    Row {
        id: "n",
        name: "F1 Breakage and Constant Aggregation",
        aggregation: Some(CONSTANT),
        breakage_power: Some(1),
        growth: None,
        x: Domain::new(0.01, 5.0, 0.01),
        t: Domain::new(0.0, 10.0, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: None,
        clean: Some(1.14),
        noisy: None,
    },
    Row {
        id: "o",
        name: "F1 Breakage and Sum Aggregation",
        aggregation: Some(SUM),
        breakage_power: Some(1),
        growth: None,
        x: Domain::new(0.01, 10.0, 0.01),
        t: Domain::new(0.0, 10.0, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: None,
        clean: Some(3.20),
        noisy: None,
    },
    Row {
        id: "p",
        name: "F1 Breakage and Product Aggregation",
        aggregation: Some(PRODUCT),
        breakage_power: Some(1),
        growth: None,
        x: Domain::new(0.01, 5.0, 0.01),
        t: Domain::new(0.0, 5.0, 0.01),
        weights: [1.0, 1.0, 1.0],
        closed: None,
        clean: Some(4.42),
        noisy: None,
    },
];

fn build(row: &Row) -> CaseSpec {
    let expected = match row.id {
        "j" => ExpectedOutcome::MatchLargeError,
        "l" => ExpectedOutcome::Missing {
            term: "D_agg(y)".into(),
        },
        _ => ExpectedOutcome::Match,
    };
    CaseSpec {
        id: row.id.into(),
        name: row.name.into(),
        processes: Processes {
            aggregation: row.aggregation.map(agg),
            breakage: row.breakage_power.map(rate),
            growth: row.growth.map(growth),
        },
        x: row.x,
        t: row.t,
        initial: InitialCondition::DECAYING,
        inflow: Inflow::Continuation,
        solver_grid: SolverGrid::default(),
        weights: SelectWeights::new(row.weights[0], row.weights[1], row.weights[2]),
        source: match row.closed {
            Some(form) => DataSource::ClosedForm { form },
            None => DataSource::FixedPivot,
        },
        clean_error_percent: row.clean,
        noisy: row.noisy.map(|(l, m, s, f)| NoisyResult {
            level_percent: l,
            mean_error_percent: m,
            std_error_percent: s,
            data_fraction: f,
        }),
        expected,
    }
}

/// All benchmark cases, `a` through `p`.
pub fn catalog() -> Vec<CaseSpec> {
    ROWS.iter().map(build).collect()
}

pub fn case_ids() -> Vec<&'static str> {
    ROWS.iter().map(|r| r.id).collect()
}

/// Looks up a case by id (case-insensitive).
pub fn case_spec(id: &str) -> Result<CaseSpec> {
    let key = id.trim().to_ascii_lowercase();
    ROWS.iter()
        .find(|r| r.id == key)
        .map(build)
        .ok_or_else(|| Error::UnknownCase(id.to_string()))
}

/// Builds the dataset for a case.
pub fn generate_case(id: &str) -> Result<(DensityField, CaseSpec)> {
    generate_case_with(id, GenerationMode::Auto)
}

pub fn generate_case_with(id: &str, mode: GenerationMode) -> Result<(DensityField, CaseSpec)> {
    let spec = case_spec(id)?;
    let field = generate(&spec, mode)?;
    Ok((field, spec))
}

/// Data for an arbitrary spec.
pub fn generate(spec: &CaseSpec, mode: GenerationMode) -> Result<DensityField> {
    match (spec.source, mode) {
        (DataSource::ClosedForm { form }, GenerationMode::Auto) if spec.initial == InitialCondition::DECAYING => {
            form.field(&spec.x.internal()?, &spec.t.temporal()?)
        }
        _ => {
            let p = &spec.processes;
            match (p.has_growth(), p.has_particulate()) {
                (true, true) => super::simulate_combined(spec),
                (true, false) => super::simulate_growth(spec),
                _ => super::simulate_breakage_aggregation(spec),
            }
        }
    }
}
