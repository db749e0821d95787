//! End-to-end discovery: load, preprocess, sweep, select, formulate, resolve,
//! deduce kernels, compare with the reference.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Preprocessing, RunConfig};
use crate::error::{Error, Result, StageExt};
use crate::grid::{
    add_white_noise_with, estimate_time_derivative, load_density, load_sidecar, smooth_savgol, subsample_rows,
    DensityField, DerivativeVector, Provenance, RowMask,
};
use crate::library::{BasisCatalog, Library};
use crate::model::{
    coefficient_error, deduce_breakage_stoichiometry, formulate_pbe, resolve_dependent_terms, CoefficientError,
    PBEModel, Resolution, Stoichiometry,
};
use crate::selector::{select_optimal, sweep_library, CombinationPlan, PoolRecord, SelectWeights, SolutionPool};
use crate::solver::cases::{generate, ExpectedOutcome};
use crate::solver::{case_spec, CaseSpec};

/// Outcome class of a run; doubles as the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveryStatus {
    /// A realizable, nonempty model.
    ModelFound,
    /// `ṅ = 0`.
    NullModel,
    /// The selected model pairs some birth without its death.
    NoRealizableModel,
}

impl DiscoveryStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            DiscoveryStatus::ModelFound => 0,
            DiscoveryStatus::NullModel => 2,
            DiscoveryStatus::NoRealizableModel => 3,
        }
    }

    fn of(model: &PBEModel) -> Self {
        if model.is_null() {
            DiscoveryStatus::NullModel
        } else if !model.is_realizable() {
            DiscoveryStatus::NoRealizableModel
        } else {
            DiscoveryStatus::ModelFound
        }
    }
}

/// Exit status for input and configuration errors.
pub const INPUT_ERROR_EXIT: i32 = 4;

/// Data ready for regression.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// The field the library is evaluated on (after noise and smoothing).
    pub field: DensityField,
    pub target: DerivativeVector,
    pub mask: RowMask,
}

/// Loads the input field and, when known, the case it came from.
pub fn load_input(config: &RunConfig) -> Result<(DensityField, Option<CaseSpec>)> {
    config.input.validate()?;
    if let Some(id) = &config.input.case {
        let spec = case_spec(id)?;
        let field = generate(&spec, config.input.generation)?;
        return Ok((field, Some(spec)));
    }
    let path = config.input.csv.as_ref().expect("validated input");
    let field = load_density(path)?;
    let spec = match load_sidecar(path)? {
        Some(sc) => match sc.metadata.get("case").and_then(|v| v.as_str()) {
            Some(id) => Some(case_spec(id)?),
            None => None,
        },
        None => None,
    };
    Ok((field, spec))
}

/// Noise, smoothing, differentiation and row subsampling, in that order.
pub fn preprocess(field: &DensityField, pre: &Preprocessing) -> Result<PreparedData> {
    pre.validate()?;
    let mut work = field.clone();
    if let Some(n) = &pre.noise {
        if n.level > 0.0 {
            work = add_white_noise_with(&work, n.level, n.seed, n.mode)?;
        }
    }
    if let Some(s) = &pre.smoothing {
        work = smooth_savgol(&work, s.window, s.polyorder)?;
    }
    let target = estimate_time_derivative(&work, pre.derivative)?;
    let mask = match &pre.subsample {
        Some(s) => subsample_rows(target.len(), s.fraction, s.seed)?,
        None => RowMask::full(target.len()),
    };
    if let Some(s) = &pre.subsample {
        if s.fraction < 1.0 {
            let provenance = Provenance::Subsampled {
                fraction: s.fraction,
                seed: s.seed,
                parent: Box::new(work.provenance().clone()),
            };
            work = DensityField::new(work.xgrid().clone(), work.tgrid().clone(), work.values().to_vec(), provenance)?;
        }
    }
    Ok(PreparedData {
        field: work,
        target,
        mask,
    })
}

/// Result of sweeping and selecting on prepared data.
#[derive(Debug, Clone)]
pub struct Identification {
    /// `None` when the data carries no dynamics.
    pub pool: Option<SolutionPool>,
    pub selected: Option<usize>,
    /// Formulated straight from the selected solution.
    pub raw: PBEModel,
    /// After resolving dependent aggregation-birth terms.
    pub model: PBEModel,
    pub resolution: Resolution,
    pub status: DiscoveryStatus,
    pub columns: usize,
}

/// Builds the master library once and sweeps every combination.
pub fn build_pool(data: &PreparedData, catalog: &BasisCatalog, plan: &CombinationPlan) -> Result<Option<SolutionPool>> {
    plan.validate()?;
    let norm: f64 = data.mask.indices().iter().map(|&r| data.target.entries()[r].powi(2)).sum();
    if norm == 0.0 {
        return Ok(None);
    }
    let master = Library::from_field(&data.field, &data.target, catalog, plan.union(), &data.mask).stage("library")?;
    Ok(Some(sweep_library(&master, plan).stage("sweep")?))
}

/// Selects from a pool (rescoring it in place) and formulates the model.
pub fn select_model(pool: &mut SolutionPool, weights: &SelectWeights) -> Result<(usize, PBEModel, PBEModel, Resolution)> {
    let best = select_optimal(pool, weights).stage("select")?;
    let entry = &pool.entries[best];
    let raw = formulate_pbe(&entry.solution, pool.symbols(entry)).stage("formulate")?;
    let (model, resolution) = resolve_dependent_terms(&raw);
    Ok((best, raw, model, resolution))
}

/// Sweep, select, formulate and resolve.
pub fn identify(
    data: &PreparedData,
    catalog: &BasisCatalog,
    plan: &CombinationPlan,
    weights: &SelectWeights,
) -> Result<Identification> {
    let columns = catalog.master_descriptors(plan.union()).len();
    let Some(mut pool) = build_pool(data, catalog, plan)? else {
        let mut model = PBEModel::null();
        model.notes.push("time derivative vanishes; no dynamics to identify".into());
        return Ok(Identification {
            pool: None,
            selected: None,
            raw: model.clone(),
            model,
            resolution: Resolution::default(),
            status: DiscoveryStatus::NullModel,
            columns,
        });
    };
    let (best, raw, model, resolution) = select_model(&mut pool, weights)?;
    Ok(Identification {
        status: DiscoveryStatus::of(&model),
        pool: Some(pool),
        selected: Some(best),
        raw,
        model,
        resolution,
        columns,
    })
}

/// The three terms of the selection cost for the chosen solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub residual: f64,
    pub relative_residual: f64,
    pub terms: usize,
    pub penalty: u32,
    pub weighted_residual: f64,
    pub weighted_terms: f64,
    pub weighted_penalty: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn of(pool: &SolutionPool, index: usize, w: &SelectWeights) -> Self {
        let s = &pool.entries[index].solution;
        let penalty = s.penalty.unwrap_or(0);
        let fit = match w.convention {
            crate::selector::ResidualConvention::Raw => s.residual,
            crate::selector::ResidualConvention::Normalized => s.relative_residual,
        };
        Self {
            residual: s.residual,
            relative_residual: s.relative_residual,
            terms: s.terms(),
            penalty,
            weighted_residual: w.residual * fit,
            weighted_terms: w.terms * s.terms() as f64,
            weighted_penalty: w.realizability * w.unit_penalty * penalty as f64,
            total: s.cost.unwrap_or(f64::NAN),
        }
    }
}

/// Curation outcome of one combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationLedger {
    pub combination: String,
    pub uncurated: usize,
    pub retained: usize,
    /// `B_agg(y) OR 0.5·B_agg(x)` for every retained column with alternates.
    pub equivalences: Vec<String>,
    pub null_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedModel {
    pub text: String,
    pub precise: String,
    pub folded: String,
    /// Before dependent-term resolution.
    pub unresolved_text: String,
    pub combination: Option<String>,
    pub lambdas: Vec<f64>,
    pub model: PBEModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub case: String,
    pub text: String,
    pub expected: ExpectedOutcome,
    pub error: CoefficientError,
    /// Whether the result is what the case is documented to produce.
    pub as_expected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub source: String,
    pub nx: usize,
    pub nt: usize,
    pub rows: usize,
    pub rows_used: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub columns: usize,
    pub combinations: usize,
    pub lambdas: usize,
    pub pool_size: usize,
}

/// Everything a run produced, with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub version: String,
    pub config: RunConfig,
    pub input: InputSummary,
    pub status: DiscoveryStatus,
    pub exit_code: i32,
    pub model: SelectedModel,
    pub resolution: Resolution,
    pub stoichiometry: Option<Stoichiometry>,
    pub cost: Option<CostBreakdown>,
    pub curation: Vec<CombinationLedger>,
    pub pool: Vec<PoolRecord>,
    pub reference: Option<ReferenceComparison>,
    pub stats: RunStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Wall-clock timings, kept apart from the report so reports stay byte-identical.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub load_seconds: f64,
    pub preprocess_seconds: f64,
    pub identify_seconds: f64,
    pub total_seconds: f64,
}

/// Whether a comparison is the documented outcome for its case.
pub fn outcome_as_expected(expected: &ExpectedOutcome, error: &CoefficientError) -> bool {
    match expected {
        ExpectedOutcome::Match | ExpectedOutcome::MatchLargeError => error.matched,
        ExpectedOutcome::Missing { term } => error.extra.is_empty() && error.missing == [term.clone()],
    }
}

/// Compares a model against a case's true PBE.
pub fn compare_with_case(model: &PBEModel, spec: &CaseSpec) -> Result<ReferenceComparison> {
    let reference = spec.reference_model()?;
    let error = coefficient_error(model, &reference);
    Ok(ReferenceComparison {
        case: spec.id.clone(),
        text: reference.render(),
        expected: spec.expected.clone(),
        as_expected: outcome_as_expected(&spec.expected, &error),
        error,
    })
}

fn curation_ledger(pool: &SolutionPool) -> Vec<CombinationLedger> {
    pool.combinations
        .iter()
        .map(|c| CombinationLedger {
            combination: c.combination.tag(),
            uncurated: c.uncurated.len(),
            retained: c.columns.len(),
            equivalences: c
                .symbols
                .entries
                .iter()
                .filter(|e| !e.equivalences.is_empty())
                .map(|e| e.describe())
                .collect(),
            null_columns: c.symbols.null_columns.iter().map(|d| d.name()).collect(),
        })
        .collect()
}

/// Runs discovery on already-loaded data.
pub fn discover_field(
    config: &RunConfig,
    field: &DensityField,
    spec: Option<&CaseSpec>,
) -> Result<(DiscoveryReport, Timing)> {
    let start = Instant::now();
    let config = config.resolved()?;
    let weights = config.effective_weights()?;
    let catalog = config.load_catalog().stage("catalog")?;
    let plan = config.sweep.plan();
    let data = preprocess(field, &config.preprocess).stage("preprocess")?;
    let t_pre = start.elapsed().as_secs_f64();
    let id = identify(&data, &catalog, &plan, &weights)?;
    let t_id = start.elapsed().as_secs_f64() - t_pre;

    let mut notes = id.model.notes.clone();
    let stoichiometry = match deduce_breakage_stoichiometry(&id.model) {
        Ok(st) => st,
        Err(Error::ZeroBreakageRate) => {
            notes.push("breakage birth without a breakage rate; stoichiometry not deduced".into());
            None
        }
        Err(e) => return Err(e).stage("deduce"),
    };
    let reference = match spec {
        Some(s) => Some(compare_with_case(&id.model, s).stage("compare")?),
        None => None,
    };
    let (cost, pool_records, curation, lambdas, combination) = match (&id.pool, id.selected) {
        (Some(pool), Some(best)) => (
            Some(CostBreakdown::of(pool, best, &weights)),
            pool.audit(),
            curation_ledger(pool),
            pool.entries[best].lambdas.clone(),
            Some(pool.combinations[pool.entries[best].combination].combination.tag()),
        ),
        _ => (None, Vec::new(), Vec::new(), Vec::new(), None),
    };
    let report = DiscoveryReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        input: InputSummary {
            source: config.input.label(),
            nx: field.nx(),
            nt: field.nt(),
            rows: data.mask.total(),
            rows_used: data.mask.len(),
            provenance: data.field.provenance().clone(),
        },
        status: id.status,
        exit_code: id.status.exit_code(),
        model: SelectedModel {
            text: id.model.render(),
            precise: id.model.render_precise(),
            folded: id.model.render_folded(),
            unresolved_text: id.raw.render(),
            combination,
            lambdas,
            model: id.model.clone(),
        },
        resolution: id.resolution,
        stoichiometry,
        cost,
        stats: RunStats {
            columns: id.columns,
            combinations: plan.combinations.len(),
            lambdas: plan.lambdas.len(),
            pool_size: pool_records.len(),
        },
        curation,
        pool: pool_records,
        reference,
        config,
        notes,
    };
    let total = start.elapsed().as_secs_f64();
    Ok((
        report,
        Timing {
            load_seconds: 0.0,
            preprocess_seconds: t_pre,
            identify_seconds: t_id,
            total_seconds: total,
        },
    ))
}

/// Loads the input named by `config` and runs discovery on it.
pub fn run_discovery(config: &RunConfig) -> Result<DiscoveryReport> {
    run_discovery_timed(config).map(|(r, _)| r)
}

pub fn run_discovery_timed(config: &RunConfig) -> Result<(DiscoveryReport, Timing)> {
    config.validate().stage("config")?;
    let start = Instant::now();
    let (field, spec) = load_input(config).stage("load")?;
    let load = start.elapsed().as_secs_f64();
    let (report, mut timing) = discover_field(config, &field, spec.as_ref())?;
    timing.load_seconds = load;
    timing.total_seconds += load;
    Ok((report, timing))
}

impl DiscoveryReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// A short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!("{}\n", self.model.text);
        s.push_str(&format!("status: {:?} (exit {})\n", self.status, self.exit_code));
        if let Some(c) = &self.model.combination {
            s.push_str(&format!("combination: {c}\n"));
        }
        if let Some(c) = &self.cost {
            s.push_str(&format!(
                "cost: {:.6e} = {:.6e} (residual) + {} (terms) + {} (penalty)\n",
                c.total, c.weighted_residual, c.weighted_terms, c.weighted_penalty
            ));
        }
        for (from, to) in &self.resolution.rewrites {
            s.push_str(&format!("resolved: {from} -> {to}\n"));
        }
        if let Some(st) = &self.stoichiometry {
            s.push_str(&format!("stoichiometry: {}\n", st.describe()));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        if let Some(r) = &self.reference {
            s.push_str(&format!("reference: {}\n", r.text));
            match r.error.average_percent {
                Some(e) => s.push_str(&format!("matched: {}, average error {:.2}%\n", r.error.matched, e)),
                None => s.push_str(&format!("matched: {}\n", r.error.matched)),
            }
            for m in &r.error.missing {
                s.push_str(&format!("missing: {m}\n"));
            }
            for m in &r.error.extra {
                s.push_str(&format!("extra: {m}\n"));
            }
        }
        s
    }

    /// Writes `report.json`, `model.txt` and `timing.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, timing: Option<&Timing>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("report.json", self.to_json()?)?;
        write("model.txt", self.summary())?;
        if let Some(t) = timing {
            write("timing.json", serde_json::to_string_pretty(t)?)?;
        }
        Ok(())
    }
}
