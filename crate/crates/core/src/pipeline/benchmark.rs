//! The benchmark harness: every catalog case through the discovery pipeline,
//! with optional weight-band and regularizer-ablation scans and noisy
//! repetitions.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Preprocessing, SweepConfig};
use super::discover::{build_pool, outcome_as_expected, preprocess, select_model};
use super::study::derive_seed;
use crate::error::Result;
use crate::library::BasisCatalog;
use crate::model::{coefficient_error, CoefficientError, PBEModel};
use crate::selector::{ResidualConvention, SelectWeights, SolutionPool};
use crate::solver::cases::{generate, ExpectedOutcome};
use crate::solver::{case_ids, case_spec, CaseSpec, GenerationMode};

/// Multipliers applied to each nominal weight in the band scan.
pub const BAND_MULTIPLIERS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

/// Residual weights tried with `λ₃ = 0`, `λ₂ = 1`.
pub fn ablation_residual_weights() -> Vec<f64> {
    (-6..=6).map(|k| 10f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkOptions {
    /// Case ids; all sixteen when empty.
    #[serde(default)]
    pub cases: Vec<String>,
    #[serde(default)]
    pub generation: GenerationMode,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Relative noise level for noisy runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rescore each pool over the weight band around the case weights.
    #[serde(default)]
    pub band: bool,
    /// Rescore each pool with the realizability weight set to zero.
    #[serde(default)]
    pub ablation: bool,
}

fn one() -> usize {
    1
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            cases: Vec::new(),
            generation: GenerationMode::Auto,
            sweep: SweepConfig::default(),
            noise: None,
            repetitions: 1,
            seed: 0,
            band: false,
            ablation: false,
        }
    }
}

impl BenchmarkOptions {
    pub fn for_cases(cases: &[&str]) -> Self {
        Self {
            cases: cases.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn case_list(&self) -> Vec<String> {
        if self.cases.is_empty() {
            case_ids().into_iter().map(String::from).collect()
        } else {
            self.cases.clone()
        }
    }

    fn preprocessing(&self, case_index: usize, repetition: usize) -> Preprocessing {
        match self.noise {
            Some(level) if level > 0.0 => {
                Preprocessing::noisy(level, derive_seed(self.seed, case_index as u64, repetition as u64))
            }
            _ => Preprocessing::clean(),
        }
    }
}

/// Outcome under one set of weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedOutcome {
    pub weights: SelectWeights,
    pub model: String,
    pub matched: bool,
    pub as_expected: bool,
    pub average_error_percent: Option<f64>,
}

/// Scan of the weight band around the case weights, both residual conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandScan {
    pub tried: usize,
    /// Weight sets whose outcome is the documented one.
    pub successes: usize,
    /// The success nearest the nominal weights, if any.
    pub best: Option<WeightedOutcome>,
}

/// Outcomes with the realizability weight at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub without_penalty: Vec<WeightedOutcome>,
    /// Any weight set without the penalty gave the true term set.
    pub identified_without_penalty: bool,
    /// The nominal weights, or one in the band, give the true term set.
    pub identified_with_penalty: bool,
}

/// Aggregates over noisy repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionStats {
    pub noise_level: f64,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_error_percent: Option<f64>,
    pub std_error_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub case: String,
    pub system: String,
    pub reference: String,
    pub identified: String,
    pub combination: Option<String>,
    pub matched: bool,
    pub average_error_percent: Option<f64>,
    /// Published clean error and the pass bound of twice that.
    pub published_error_percent: Option<f64>,
    pub error_bound_percent: Option<f64>,
    pub within_bound: Option<bool>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    pub expected: ExpectedOutcome,
    pub as_expected: bool,
    pub weights: SelectWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<RepetitionStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandScan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Ablation>,
    pub seconds: f64,
    /// Set when the case could not be run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl BenchmarkRow {
    /// Documented outcome at the case weights or, failing that, in the band.
    pub fn as_expected_in_band(&self) -> bool {
        self.as_expected || self.band.as_ref().is_some_and(|b| b.successes > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub cases: usize,
    pub matched: usize,
    pub as_expected: usize,
    pub as_expected_in_band: usize,
    pub within_bound: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub version: String,
    pub options: BenchmarkOptions,
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
}

fn evaluate(pool: &mut SolutionPool, weights: &SelectWeights, spec: &CaseSpec) -> Result<(PBEModel, CoefficientError, Option<String>)> {
    let (best, _, model, _) = select_model(pool, weights)?;
    let entry = &pool.entries[best];
    let combination = pool.combinations[entry.combination].combination.tag();
    let err = coefficient_error(&model, &spec.reference_model()?);
    Ok((model, err, Some(combination)))
}

fn outcome(pool: &mut SolutionPool, weights: SelectWeights, spec: &CaseSpec) -> Result<WeightedOutcome> {
    let (model, err, _) = evaluate(pool, &weights, spec)?;
    Ok(WeightedOutcome {
        weights,
        model: model.render(),
        matched: err.matched,
        as_expected: outcome_as_expected(&spec.expected, &err),
        average_error_percent: err.average_percent,
    })
}

/// Weight sets of the band, nearest to nominal first.
pub fn band_weights(nominal: &SelectWeights) -> Vec<SelectWeights> {
    let mut grid = Vec::new();
    for convention in [ResidualConvention::Raw, ResidualConvention::Normalized] {
        for &a in &BAND_MULTIPLIERS {
            for &b in &BAND_MULTIPLIERS {
                for &c in &BAND_MULTIPLIERS {
                    let distance = a.ln().abs() + b.ln().abs() + c.ln().abs();
                    let w = SelectWeights {
                        residual: nominal.residual * a,
                        terms: nominal.terms * b,
                        realizability: nominal.realizability * c,
                        unit_penalty: nominal.unit_penalty,
                        convention,
                    };
                    grid.push((convention != nominal.convention, distance, w));
                }
            }
        }
    }
    grid.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    grid.into_iter().map(|g| g.2).collect()
}

fn band_scan(pool: &mut SolutionPool, spec: &CaseSpec) -> Result<BandScan> {
    let weights = band_weights(&spec.weights);
    let mut successes = 0;
    let mut best = None;
    for w in &weights {
        let o = outcome(pool, *w, spec)?;
        if o.as_expected {
            successes += 1;
            best.get_or_insert(o);
        }
    }
    Ok(BandScan {
        tried: weights.len(),
        successes,
        best,
    })
}

fn ablation(pool: &mut SolutionPool, spec: &CaseSpec, with_penalty: bool) -> Result<Ablation> {
    let mut without_penalty = Vec::new();
    for convention in [ResidualConvention::Raw, ResidualConvention::Normalized] {
        for r in ablation_residual_weights() {
            let w = SelectWeights::new(r, 1.0, 0.0).with_convention(convention);
            without_penalty.push(outcome(pool, w, spec)?);
        }
    }
    Ok(Ablation {
        identified_without_penalty: without_penalty.iter().any(|o| o.matched),
        identified_with_penalty: with_penalty,
        without_penalty,
    })
}

fn failure_row(spec: Option<&CaseSpec>, id: &str, e: &crate::Error, seconds: f64) -> BenchmarkRow {
    BenchmarkRow {
        case: id.to_string(),
        system: spec.map(|s| s.name.clone()).unwrap_or_default(),
        reference: spec
            .and_then(|s| s.reference_model().ok())
            .map(|m| m.render())
            .unwrap_or_default(),
        identified: String::new(),
        combination: None,
        matched: false,
        average_error_percent: None,
        published_error_percent: spec.and_then(|s| s.clean_error_percent),
        error_bound_percent: spec.and_then(|s| s.clean_error_percent).map(|p| 2.0 * p),
        within_bound: None,
        missing: Vec::new(),
        extra: Vec::new(),
        expected: spec.map(|s| s.expected.clone()).unwrap_or(ExpectedOutcome::Match),
        as_expected: false,
        weights: spec.map(|s| s.weights).unwrap_or_default(),
        repetitions: None,
        band: None,
        ablation: None,
        seconds,
        failure: Some(e.to_string()),
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let s = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    (Some(m), Some(s))
}

fn run_case_inner(spec: &CaseSpec, index: usize, options: &BenchmarkOptions, start: Instant) -> Result<BenchmarkRow> {
    let field = generate(spec, options.generation)?;
    let catalog = BasisCatalog::default();
    let plan = options.sweep.plan();
    let reference = spec.reference_model()?;

    let mut first = None;
    let mut errors = Vec::new();
    let runs = if options.noise.is_some_and(|l| l > 0.0) {
        options.repetitions.max(1)
    } else {
        1
    };
    for rep in 0..runs {
        let data = preprocess(&field, &options.preprocessing(index, rep))?;
        let pool = build_pool(&data, &catalog, &plan)?;
        let (model, err, combination, pool) = match pool {
            Some(mut pool) => {
                let (model, err, combination) = evaluate(&mut pool, &spec.weights, spec)?;
                (model, err, combination, Some(pool))
            }
            None => {
                let model = PBEModel::null();
                let err = coefficient_error(&model, &reference);
                (model, err, None, None)
            }
        };
        if err.matched {
            errors.push(err.average_percent.unwrap_or(0.0));
        }
        if first.is_none() {
            first = Some((model, err, combination, pool));
        }
    }
    let (model, err, combination, pool) = first.expect("at least one run");
    let as_expected = outcome_as_expected(&spec.expected, &err);
    let (band, abl) = match pool {
        Some(mut pool) => {
            let band = if options.band || options.ablation {
                Some(band_scan(&mut pool, spec)?)
            } else {
                None
            };
            let abl = if options.ablation {
                let with = err.matched || band.as_ref().is_some_and(|b| b.best.as_ref().is_some_and(|o| o.matched));
                Some(ablation(&mut pool, spec, with)?)
            } else {
                None
            };
            (band.filter(|_| options.band), abl)
        }
        None => (None, None),
    };
    let repetitions = options.noise.filter(|&l| l > 0.0).map(|level| {
        let (mean, std) = mean_std(&errors);
        RepetitionStats {
            noise_level: level,
            runs,
            successes: errors.len(),
            success_rate: errors.len() as f64 / runs as f64,
            mean_error_percent: mean,
            std_error_percent: std,
        }
    });
    let bound = spec.clean_error_percent.map(|p| 2.0 * p);
    Ok(BenchmarkRow {
        case: spec.id.clone(),
        system: spec.name.clone(),
        reference: reference.render(),
        identified: model.render(),
        combination,
        matched: err.matched,
        average_error_percent: err.average_percent,
        published_error_percent: spec.clean_error_percent,
        error_bound_percent: bound,
        within_bound: match (err.matched, err.average_percent, bound) {
            (true, Some(e), Some(b)) => Some(e <= b),
            _ => None,
        },
        missing: err.missing,
        extra: err.extra,
        expected: spec.expected.clone(),
        as_expected,
        weights: spec.weights,
        repetitions,
        band,
        ablation: abl,
        seconds: start.elapsed().as_secs_f64(),
        failure: None,
    })
}

/// Runs one case; errors become a failure row.
pub fn run_case(id: &str, index: usize, options: &BenchmarkOptions) -> BenchmarkRow {
    let start = Instant::now();
    let spec = match case_spec(id) {
        Ok(s) => s,
        Err(e) => return failure_row(None, id, &e, 0.0),
    };
    run_case_inner(&spec, index, options, start)
        .unwrap_or_else(|e| failure_row(Some(&spec), id, &e, start.elapsed().as_secs_f64()))
}

/// Runs the selected cases in parallel; rows keep the requested order.
pub fn run_benchmark(options: &BenchmarkOptions) -> BenchmarkTable {
    let cases = options.case_list();
    let rows: Vec<BenchmarkRow> = cases
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let index = case_ids().iter().position(|c| *c == id.to_ascii_lowercase()).unwrap_or(i);
            run_case(id, index, options)
        })
        .collect();
    let summary = BenchmarkSummary {
        cases: rows.len(),
        matched: rows.iter().filter(|r| r.matched).count(),
        as_expected: rows.iter().filter(|r| r.as_expected).count(),
        as_expected_in_band: rows.iter().filter(|r| r.as_expected_in_band()).count(),
        within_bound: rows.iter().filter(|r| r.within_bound == Some(true)).count(),
        failures: rows.iter().filter(|r| r.failure.is_some()).count(),
    };
    BenchmarkTable {
        version: env!("CARGO_PKG_VERSION").to_string(),
        options: options.clone(),
        rows,
        summary,
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{v:.digits$}")).unwrap_or_else(|| "—".into())
}

impl BenchmarkTable {
    pub fn row(&self, case: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.case == case)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| case | system | identified | matched | error % | published % | bound % | expected | band |\n\
             |---|---|---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let identified = r.failure.as_ref().map(|f| format!("error: {f}")).unwrap_or_else(|| r.identified.clone());
            let band = match &r.band {
                Some(b) => match &b.best {
                    Some(o) => format!(
                        "{}/{} (λ = {:.3}, {:.3}, {:.3}, {:?})",
                        b.successes, b.tried, o.weights.residual, o.weights.terms, o.weights.realizability, o.weights.convention
                    ),
                    None => format!("0/{}", b.tried),
                },
                None => "—".into(),
            };
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                r.case,
                r.system,
                identified,
                if r.matched { "yes" } else { "no" },
                opt(r.average_error_percent, 2),
                opt(r.published_error_percent, 2),
                opt(r.error_bound_percent, 2),
                if r.as_expected { "yes" } else { "no" },
                band
            ));
        }
        let m = &self.summary;
        s.push_str(&format!(
            "\n{} cases: {} matched, {} as documented ({} within the weight band), {} within the error bound, {} failed\n",
            m.cases, m.matched, m.as_expected, m.as_expected_in_band, m.within_bound, m.failures
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_starts_at_nominal() {
        let nominal = SelectWeights::new(2.0, 1.0, 1.0);
        let band = band_weights(&nominal);
        assert_eq!(band.len(), 250);
        assert_eq!(band[0], nominal);
        assert!(band[..125].iter().all(|w| w.convention == ResidualConvention::Raw));
    }

    #[test]
    fn single_case_gives_one_row() {
        let t = run_benchmark(&BenchmarkOptions::for_cases(&["f"]));
        assert_eq!(t.rows.len(), 1);
        let r = &t.rows[0];
        assert!(r.matched && r.as_expected, "{r:?}");
        assert_eq!(r.identified, "ṅ = −G(1)");
        assert_eq!(t.summary.matched, 1);
        assert!(t.to_markdown().contains("| f |"));
    }

    #[test]
    fn unknown_case_is_a_failure_row() {
        let t = run_benchmark(&BenchmarkOptions::for_cases(&["zz"]));
        assert_eq!(t.summary.failures, 1);
        assert!(t.rows[0].failure.as_ref().unwrap().contains("zz"));
    }
}
