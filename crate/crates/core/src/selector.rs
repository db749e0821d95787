//! Solution pools over every sub-library combination and the three-term
//! model-selection cost `λ₁·residual + λ₂·‖ξ‖₀ + λ₃·Φ`.
//!
//! `Φ` counts realizability violations: for breakage and for aggregation
//! independently, a birth term without the matching death term (or the
//! reverse) scores one unit.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, DerivativeVector, RowMask};
use crate::library::{
    eliminate_dependent_columns, BasisCatalog, Combination, DependencyGroup, Library, SymbolicVector,
    RANK_TOLERANCE,
};
use crate::operators::{ColumnDescriptor, Family, Process};
use crate::stls::{stls_library, SparseSolution, StlsConfig};

/// How the residual enters the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualConvention {
    /// `‖Ω ξ − ṅ‖₂²` as is.
    #[default]
    Raw,
    /// `‖Ω ξ − ṅ‖₂² / ‖ṅ‖₂²`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectWeights {
    /// `λ₁`, on the residual.
    pub residual: f64,
    /// `λ₂`, on the term count.
    pub terms: f64,
    /// `λ₃`, on the realizability penalty.
    pub realizability: f64,
    /// Score of one realizability violation.
    #[serde(default = "unit")]
    pub unit_penalty: f64,
    #[serde(default)]
    pub convention: ResidualConvention,
}

fn unit() -> f64 {
    1.0
}

impl SelectWeights {
    pub fn new(residual: f64, terms: f64, realizability: f64) -> Self {
        Self {
            residual,
            terms,
            realizability,
            unit_penalty: 1.0,
            convention: ResidualConvention::Raw,
        }
    }

    pub fn with_convention(mut self, convention: ResidualConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("residual", self.residual),
            ("terms", self.terms),
            ("realizability", self.realizability),
            ("unit_penalty", self.unit_penalty),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("weight {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for SelectWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

/// `n` logarithmically spaced values from `min` to `max` inclusive.
pub fn lambda_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            (0..n)
                .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Which combinations to sweep, over which sparsity indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationPlan {
    pub combinations: Vec<Combination>,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub rank_tolerance: f64,
}

fn default_iterations() -> usize {
    20
}

fn default_tolerance() -> f64 {
    RANK_TOLERANCE
}

impl Default for CombinationPlan {
    /// All seven combinations, 60 values of `λ` from 1e-3 to 10.
    fn default() -> Self {
        Self {
            combinations: Combination::all_seven(),
            lambdas: lambda_grid(1e-3, 10.0, 60),
            max_iterations: 20,
            rank_tolerance: RANK_TOLERANCE,
        }
    }
}

impl CombinationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.combinations.is_empty() || self.lambdas.is_empty() {
            return Err(Error::invalid("combination plan needs combinations and lambdas"));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::invalid("lambdas must be >= 0"));
        }
        Ok(())
    }

    /// The union of families the plan touches.
    pub fn union(&self) -> Combination {
        self.combinations.iter().fold(Combination::new(false, false, false), |acc, c| {
            Combination::new(
                acc.growth || c.growth,
                acc.breakage || c.breakage,
                acc.aggregation || c.aggregation,
            )
        })
    }
}

/// The curated library of one combination, kept for interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub combination: Combination,
    pub columns: Vec<ColumnDescriptor>,
    pub symbols: SymbolicVector,
    pub groups: Vec<DependencyGroup>,
    /// Names of the uncurated columns, indexing `groups`.
    pub uncurated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub solution: SparseSolution,
    /// Index into [`SolutionPool::combinations`].
    pub combination: usize,
    /// Every `λ` of the sweep that produced this solution.
    pub lambdas: Vec<f64>,
}

/// Deduplicated sparse solutions from a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPool {
    pub entries: Vec<PoolEntry>,
    pub combinations: Vec<CombinationResult>,
    /// `‖ṅ‖₂²` over the rows used.
    pub target_norm_squared: f64,
    pub rows: usize,
}

impl SolutionPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn symbols(&self, entry: &PoolEntry) -> &SymbolicVector {
        &self.combinations[entry.combination].symbols
    }

    pub fn columns(&self, entry: &PoolEntry) -> &[ColumnDescriptor] {
        &self.combinations[entry.combination].columns
    }

    /// Names of the active columns of `entry`.
    pub fn support_names(&self, entry: &PoolEntry) -> Vec<String> {
        let cols = self.columns(entry);
        entry.solution.support.iter().map(|&c| cols[c].name()).collect()
    }

    /// Flat audit records, one per entry.
    pub fn audit(&self) -> Vec<PoolRecord> {
        self.entries
            .iter()
            .map(|e| {
                let cols = self.columns(e);
                PoolRecord {
                    combination: self.combinations[e.combination].combination.tag(),
                    lambdas: e.lambdas.clone(),
                    support: e
                        .solution
                        .support
                        .iter()
                        .map(|&c| (cols[c].name(), e.solution.coefficients[c]))
                        .collect(),
                    residual: e.solution.residual,
                    relative_residual: e.solution.relative_residual,
                    terms: e.solution.terms(),
                    penalty: e.solution.penalty,
                    cost: e.solution.cost,
                }
            })
            .collect()
    }
}

/// One row of the pool dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub combination: String,
    pub lambdas: Vec<f64>,
    pub support: Vec<(String, f64)>,
    pub residual: f64,
    pub relative_residual: f64,
    pub terms: usize,
    pub penalty: Option<u32>,
    pub cost: Option<f64>,
}

/// Counts unpaired births and deaths, per process, over the support.
pub fn realizability_penalty(solution: &SparseSolution, symbols: &SymbolicVector) -> Result<u32> {
    let mut present: BTreeMap<Process, bool> = BTreeMap::new();
    for &c in &solution.support {
        let entry = symbols
            .get(c)
            .ok_or_else(|| Error::UnresolvableColumn(format!("support index {c}")))?;
        present.insert(entry.column.process, true);
    }
    Ok(penalty_from_processes(|p| present.contains_key(&p)))
}

pub(crate) fn penalty_from_processes(has: impl Fn(Process) -> bool) -> u32 {
    let mut phi = 0;
    for (birth, death) in [
        (Process::BkgBirth, Process::BkgDeath),
        (Process::AggBirth, Process::AggDeath),
    ] {
        if has(birth) != has(death) {
            phi += 1;
        }
    }
    phi
}

/// Cost of `solution`; also stored on it.
pub fn score(
    solution: &mut SparseSolution,
    target_norm_squared: f64,
    penalty: u32,
    weights: &SelectWeights,
) -> Result<f64> {
    if !(target_norm_squared > 0.0) {
        return Err(Error::DegenerateData);
    }
    let fit = match weights.convention {
        ResidualConvention::Raw => solution.residual,
        ResidualConvention::Normalized => solution.residual / target_norm_squared,
    };
    let cost = weights.residual * fit
        + weights.terms * solution.terms() as f64
        + weights.realizability * weights.unit_penalty * penalty as f64;
    solution.penalty = Some(penalty);
    solution.cost = Some(cost);
    Ok(cost)
}

fn dedup_key(tag: &str, cols: &[ColumnDescriptor], s: &SparseSolution) -> String {
    if s.support.is_empty() {
        return "∅".into();
    }
    let mut key = tag.to_string();
    for &c in &s.support {
        key.push_str(&format!("|{}={:.6e}", cols[c].name(), s.coefficients[c]));
    }
    key
}

/// Builds the master library from the data and sweeps it.
pub fn sweep_solutions(
    field: &DensityField,
    target: &DerivativeVector,
    plan: &CombinationPlan,
    catalog: &BasisCatalog,
    mask: &RowMask,
) -> Result<SolutionPool> {
    plan.validate()?;
    let master = Library::from_field(field, target, catalog, plan.union(), mask)?;
    sweep_library(&master, plan)
}

/// Curates every combination of `master` and runs STLS along the `λ` grid.
pub fn sweep_library(master: &Library, plan: &CombinationPlan) -> Result<SolutionPool> {
    plan.validate()?;
    let per_combination: Vec<Result<(CombinationResult, Vec<SparseSolution>)>> = plan
        .combinations
        .par_iter()
        .map(|&combo| {
            let lib = master.restrict_to(combo);
            let uncurated = lib.names();
            let cur = eliminate_dependent_columns(&lib, plan.rank_tolerance)?;
            let solutions = plan
                .lambdas
                .iter()
                .map(|&lambda| {
                    stls_library(
                        &cur.library,
                        StlsConfig {
                            lambda,
                            max_iterations: plan.max_iterations,
                        },
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                CombinationResult {
                    combination: combo,
                    columns: cur.library.descriptors().to_vec(),
                    symbols: cur.symbols,
                    groups: cur.groups,
                    uncurated,
                },
                solutions,
            ))
        })
        .collect();

    let mut combinations = Vec::new();
    let mut entries: Vec<PoolEntry> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (ci, res) in per_combination.into_iter().enumerate() {
        let (result, solutions) = res?;
        for mut s in solutions {
            s.combination = Some(result.combination);
            let key = dedup_key(&result.combination.tag(), &result.columns, &s);
            match index.get(&key) {
                Some(&k) => {
                    let e = &mut entries[k];
                    e.lambdas.push(s.lambda);
                    if s.residual < e.solution.residual {
                        e.solution = s;
                        e.combination = ci;
                    }
                }
                None => {
                    index.insert(key, entries.len());
                    entries.push(PoolEntry {
                        lambdas: vec![s.lambda],
                        solution: s,
                        combination: ci,
                    });
                }
            }
        }
        combinations.push(result);
    }
    Ok(SolutionPool {
        entries,
        combinations,
        target_norm_squared: master.target_norm_squared(),
        rows: master.rows(),
    })
}

/// Scores every entry in place.
pub fn score_pool(pool: &mut SolutionPool, weights: &SelectWeights) -> Result<()> {
    weights.validate()?;
    let tn = pool.target_norm_squared;
    for k in 0..pool.entries.len() {
        let phi = realizability_penalty(&pool.entries[k].solution, pool.symbols(&pool.entries[k]))?;
        score(&mut pool.entries[k].solution, tn, phi, weights)?;
    }
    Ok(())
}

fn near_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn compare(pool: &SolutionPool, a: &PoolEntry, b: &PoolEntry) -> Ordering {
    let (sa, sb) = (&a.solution, &b.solution);
    let (ca, cb) = (sa.cost.unwrap_or(f64::INFINITY), sb.cost.unwrap_or(f64::INFINITY));
    if !near_equal(ca, cb) {
        return ca.total_cmp(&cb);
    }
    sa.penalty
        .cmp(&sb.penalty)
        .then(sa.terms().cmp(&sb.terms()))
        .then(sa.residual.total_cmp(&sb.residual))
        .then_with(|| {
            pool.combinations[a.combination]
                .combination
                .tag()
                .cmp(&pool.combinations[b.combination].combination.tag())
        })
}

/// Scores the pool and returns the index of the minimum-cost entry. Ties go
/// to lower `Φ`, then fewer terms, then lower residual, then combination tag.
pub fn select_optimal(pool: &mut SolutionPool, weights: &SelectWeights) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    score_pool(pool, weights)?;
    let mut best = 0;
    for k in 1..pool.entries.len() {
        if compare(pool, &pool.entries[k], &pool.entries[best]) == Ordering::Less {
            best = k;
        }
    }
    Ok(best)
}

/// Whether the combination of `entry` contains the family.
pub fn entry_has_family(pool: &SolutionPool, entry: &PoolEntry, f: Family) -> bool {
    pool.combinations[entry.combination].combination.contains(f)
}
