//! Success rate of identification across noise levels and data fractions.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Preprocessing, SweepConfig};
use super::discover::{identify, preprocess};
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::library::BasisCatalog;
use crate::model::coefficient_error;
use crate::selector::SelectWeights;
use crate::solver::cases::generate;
use crate::solver::{case_spec, CaseSpec, GenerationMode};

/// Seed for sample `sample` of cell `cell`, reproducible from the master seed alone.
pub fn derive_seed(master: u64, cell: u64, sample: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(cell);
    rng.set_word_pos(2 * sample as u128);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub case: String,
    /// Relative noise levels; `0.01` is 1 %.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub generation: GenerationMode,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Defaults to the case weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<SelectWeights>,
}

fn default_levels() -> Vec<f64> {
    vec![0.0, 0.0025, 0.005, 0.0075, 0.01]
}

fn default_fractions() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}

fn default_samples() -> usize {
    100
}

impl StudyConfig {
    pub fn new(case: impl Into<String>) -> Self {
        Self {
            case: case.into(),
            levels: default_levels(),
            fractions: default_fractions(),
            samples: default_samples(),
            master_seed: 0,
            generation: GenerationMode::Auto,
            sweep: SweepConfig::default(),
            weights: None,
        }
    }

    /// A single cell.
    pub fn cell(case: impl Into<String>, level: f64, fraction: f64, samples: usize) -> Self {
        Self {
            levels: vec![level],
            fractions: vec![fraction],
            samples,
            ..Self::new(case)
        }
    }

    pub fn validate(&self) -> Result<()> {
        case_spec(&self.case)?;
        if self.samples == 0 {
            return Err(Error::Config("study needs at least one sample per cell".into()));
        }
        if self.levels.is_empty() || self.fractions.is_empty() {
            return Err(Error::Config("study needs at least one noise level and one fraction".into()));
        }
        for &l in &self.levels {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("noise level must be finite and >= 0, got {l}")));
            }
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("data fraction must lie in (0, 1], got {f}")));
            }
        }
        self.sweep.plan().validate()
    }

    /// Preprocessing of one sample.
    pub fn preprocessing(&self, level: f64, fraction: f64, seed: u64) -> Preprocessing {
        Preprocessing::noisy(level, seed).with_subsample(fraction, derive_seed(seed, 0, 1))
    }
}

/// Result of one (noise level, fraction) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub noise_level: f64,
    pub fraction: f64,
    pub samples: usize,
    /// Exact term-set matches.
    pub successes: usize,
    pub success_rate: f64,
    /// Mean and sample standard deviation of the average coefficient error
    /// over successes; absent when nothing succeeded.
    pub mean_error_percent: Option<f64>,
    pub std_error_percent: Option<f64>,
    /// Runs that ended in an error rather than a model.
    pub errors: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub version: String,
    pub config: StudyConfig,
    pub weights: SelectWeights,
    pub cells: Vec<StudyCell>,
}

impl StudyResult {
    pub fn cell(&self, level: f64, fraction: f64) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.noise_level == level && c.fraction == fraction)
    }

    /// Success rates with one row per noise level and one column per fraction.
    pub fn success_matrix(&self) -> Vec<Vec<f64>> {
        let nf = self.config.fractions.len();
        self.cells.chunks(nf).map(|row| row.iter().map(|c| c.success_rate).collect()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Outcome of one sample: `Some(error)` on success, `None` on a structural miss.
type SampleOutcome = Result<Option<f64>>;

fn run_sample(
    field: &DensityField,
    spec: &CaseSpec,
    pre: &Preprocessing,
    catalog: &BasisCatalog,
    config: &StudyConfig,
    weights: &SelectWeights,
) -> SampleOutcome {
    let data = preprocess(field, pre)?;
    let id = identify(&data, catalog, &config.sweep.plan(), weights)?;
    let err = coefficient_error(&id.model, &spec.reference_model()?);
    Ok(err.matched.then(|| err.average_percent.unwrap_or(0.0)))
}

fn summarize(level: f64, fraction: f64, seeds: Vec<u64>, outcomes: &[SampleOutcome]) -> StudyCell {
    let errs: Vec<f64> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied().flatten()).collect();
    let errors = outcomes.iter().filter(|o| o.is_err()).count();
    let n = errs.len();
    let mean = (n > 0).then(|| errs.iter().sum::<f64>() / n as f64);
    let std = mean.map(|m| {
        if n < 2 {
            0.0
        } else {
            (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        }
    });
    StudyCell {
        noise_level: level,
        fraction,
        samples: outcomes.len(),
        successes: n,
        success_rate: n as f64 / outcomes.len() as f64,
        mean_error_percent: mean,
        std_error_percent: std,
        errors,
        seeds,
    }
}

/// Runs every cell on the case's data. Cells are laid out level-major.
pub fn run_noise_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let spec = case_spec(&config.case)?;
    let field = generate(&spec, config.generation)?;
    run_noise_study_on(config, &spec, &field)
}

/// As [`run_noise_study`] on an already generated field.
pub fn run_noise_study_on(config: &StudyConfig, spec: &CaseSpec, field: &DensityField) -> Result<StudyResult> {
    config.validate()?;
    let weights = config.weights.unwrap_or(spec.weights);
    let catalog = BasisCatalog::default();
    let cells: Vec<(f64, f64)> = config
        .levels
        .iter()
        .flat_map(|&l| config.fractions.iter().map(move |&f| (l, f)))
        .collect();
    let jobs: Vec<(usize, usize, u64)> = (0..cells.len())
        .flat_map(|c| {
            (0..config.samples).map(move |s| (c, s, derive_seed(config.master_seed, c as u64, s as u64)))
        })
        .collect();
    let outcomes: Vec<SampleOutcome> = jobs
        .par_iter()
        .map(|&(c, _, seed)| {
            let (level, fraction) = cells[c];
            run_sample(field, spec, &config.preprocessing(level, fraction, seed), &catalog, config, &weights)
        })
        .collect();
    let cells = cells
        .iter()
        .enumerate()
        .map(|(c, &(level, fraction))| {
            let range = c * config.samples..(c + 1) * config.samples;
            let seeds = jobs[range.clone()].iter().map(|j| j.2).collect();
            summarize(level, fraction, seeds, &outcomes[range])
        })
        .collect();
    Ok(StudyResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        weights,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_seed(7, 3, 11), derive_seed(7, 3, 11));
        let mut all: Vec<u64> = (0..4).flat_map(|c| (0..50).map(move |s| derive_seed(7, c, s))).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 200);
        assert_ne!(derive_seed(7, 0, 0), derive_seed(8, 0, 0));
    }

    #[test]
    fn zero_successes_leave_statistics_absent() {
        let cell = summarize(0.01, 1.0, vec![1, 2], &[Ok(None), Err(Error::EmptyPool)]);
        assert_eq!(cell.successes, 0);
        assert_eq!(cell.errors, 1);
        assert!(cell.mean_error_percent.is_none() && cell.std_error_percent.is_none());
        let cell = summarize(0.0, 1.0, vec![1, 2, 3], &[Ok(Some(1.0)), Ok(Some(3.0)), Ok(None)]);
        assert_eq!(cell.mean_error_percent, Some(2.0));
        assert!((cell.std_error_percent.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((cell.success_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn clean_full_cell_succeeds_on_constant_growth() {
        let config = StudyConfig::cell("f", 0.0, 1.0, 3);
        let r = run_noise_study(&config).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].successes, 3);
        assert_eq!(r.success_matrix(), vec![vec![1.0]]);
    }
}
