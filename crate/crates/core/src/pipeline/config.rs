//! Run configuration, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DerivativeScheme, NoiseMode};
use crate::library::{BasisCatalog, Combination, RANK_TOLERANCE};
use crate::selector::{lambda_grid, CombinationPlan, SelectWeights};
use crate::solver::{case_spec, GenerationMode};

/// Where the density data comes from. Exactly one of `case` and `csv` is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSource {
    /// Benchmark case id, `a` to `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    /// Density CSV; a sidecar naming a case supplies the reference model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub generation: GenerationMode,
}

impl InputSource {
    pub fn case(id: impl Into<String>) -> Self {
        Self {
            case: Some(id.into()),
            ..Default::default()
        }
    }

    pub fn csv(path: impl Into<PathBuf>) -> Self {
        Self {
            csv: Some(path.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.case, &self.csv) {
            (Some(id), None) => case_spec(id).map(|_| ()),
            (None, Some(_)) => Ok(()),
            (Some(_), Some(_)) => Err(Error::Config("input: give either `case` or `csv`, not both".into())),
            (None, None) => Err(Error::Config("input: one of `case` or `csv` is required".into())),
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match (&self.case, &self.csv) {
            (Some(id), _) => format!("case:{id}"),
            (_, Some(p)) => format!("csv:{}", p.display()),
            _ => "none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative level; `0.01` is 1 %.
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: NoiseMode,
}

/// Savitzky–Golay smoothing along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub window: usize,
    pub polyorder: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { window: 11, polyorder: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocessing {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
    #[serde(default)]
    pub derivative: DerivativeScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<SubsampleConfig>,
}

impl Preprocessing {
    /// Finite differences on the raw data.
    pub fn clean() -> Self {
        Self::default()
    }

    /// Noise at `level`, then smoothing along `x` and polynomial-fit time
    /// derivatives. A zero level gives the clean recipe.
    pub fn noisy(level: f64, seed: u64) -> Self {
        if level == 0.0 {
            return Self::clean();
        }
        Self {
            noise: Some(NoiseConfig {
                level,
                seed,
                mode: NoiseMode::GlobalStd,
            }),
            smoothing: Some(SmoothingConfig::default()),
            derivative: DerivativeScheme::Polyfit { degree: 3, halfwidth: 5 },
            subsample: None,
        }
    }

    pub fn with_subsample(mut self, fraction: f64, seed: u64) -> Self {
        self.subsample = (fraction < 1.0).then_some(SubsampleConfig { fraction, seed });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = &self.noise {
            if !(n.level >= 0.0 && n.level.is_finite()) {
                return Err(Error::Config(format!("noise level must be finite and >= 0, got {}", n.level)));
            }
        }
        if let Some(s) = &self.smoothing {
            if s.window % 2 == 0 || s.window <= s.polyorder {
                return Err(Error::Config(format!(
                    "smoothing window must be odd and exceed the order, got {} / {}",
                    s.window, s.polyorder
                )));
            }
        }
        if let Some(s) = &self.subsample {
            if !(s.fraction > 0.0 && s.fraction <= 1.0) {
                return Err(Error::Config(format!("subsample fraction must lie in (0, 1], got {}", s.fraction)));
            }
        }
        Ok(())
    }
}

/// Either an explicit list or a log-spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    List(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Range {
            min: 1e-3,
            max: 10.0,
            count: 60,
        }
    }
}

impl LambdaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LambdaSpec::List(v) => v.clone(),
            LambdaSpec::Range { min, max, count } => lambda_grid(*min, *max, *count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Defaults to all seven.
    #[serde(default = "Combination::all_seven")]
    pub combinations: Vec<Combination>,
    #[serde(default)]
    pub lambda: LambdaSpec,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
}

fn default_iterations() -> usize {
    20
}

fn default_rank_tolerance() -> f64 {
    RANK_TOLERANCE
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            combinations: Combination::all_seven(),
            lambda: LambdaSpec::default(),
            max_iterations: default_iterations(),
            rank_tolerance: default_rank_tolerance(),
        }
    }
}

impl SweepConfig {
    pub fn plan(&self) -> CombinationPlan {
        CombinationPlan {
            combinations: self.combinations.clone(),
            lambdas: self.lambda.values(),
            max_iterations: self.max_iterations,
            rank_tolerance: self.rank_tolerance,
        }
    }
}

/// Everything a discovery run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSource,
    #[serde(default)]
    pub preprocess: Preprocessing,
    /// JSON or TOML basis catalog; the 41-column default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Defaults to the case's weights, or unit weights for CSV input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<SelectWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: InputSource) -> Self {
        Self {
            input,
            preprocess: Preprocessing::default(),
            catalog: None,
            sweep: SweepConfig::default(),
            weights: None,
            output: None,
        }
    }

    /// Clean-data discovery on a benchmark case with its own weights.
    pub fn for_case(id: &str) -> Self {
        Self::new(InputSource::case(id))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        self.preprocess.validate()?;
        self.sweep.plan().validate()?;
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }

    /// Weights after falling back to the case defaults.
    pub fn effective_weights(&self) -> Result<SelectWeights> {
        if let Some(w) = self.weights {
            return Ok(w);
        }
        match &self.input.case {
            Some(id) => Ok(case_spec(id)?.weights),
            None => Ok(SelectWeights::default()),
        }
    }

    /// Copy with every default made explicit, as embedded in reports.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        c.weights = Some(self.effective_weights()?);
        Ok(c)
    }

    pub fn load_catalog(&self) -> Result<BasisCatalog> {
        let Some(path) = &self.catalog else {
            return Ok(BasisCatalog::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let catalog: BasisCatalog = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text)?
        };
        catalog.validate()?;
        Ok(catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_case_config() {
        let c = RunConfig::from_toml_str("[input]\ncase = \"b\"\n").unwrap();
        assert_eq!(c.sweep.plan().lambdas.len(), 60);
        assert_eq!(c.sweep.combinations.len(), 7);
        assert_eq!(c.effective_weights().unwrap(), SelectWeights::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
[input]
case = "f"

[preprocess.noise]
level = 0.005
seed = 7

[preprocess.smoothing]
window = 11
polyorder = 3

[preprocess.derivative]
method = "polyfit"
degree = 3
halfwidth = 5

[preprocess.subsample]
fraction = 0.4
seed = 9

[sweep]
combinations = ["G", "agg", "G+bkg+agg"]
lambda = [0.01, 0.1]

[weights]
residual = 0.01
terms = 1.0
realizability = 1.0
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.sweep.plan().lambdas, vec![0.01, 0.1]);
        assert_eq!(c.effective_weights().unwrap().residual, 0.01);
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn exactly_one_input() {
        assert!(RunConfig::from_toml_str("[input]\n").is_err());
        assert!(RunConfig::from_toml_str("[input]\ncase = \"a\"\ncsv = \"d.csv\"\n").is_err());
        assert!(RunConfig::from_toml_str("[input]\ncase = \"z\"\n").is_err());
        assert!(RunConfig::from_toml_str("[input]\ncase = \"a\"\n[bogus]\n").is_err());
    }
}
