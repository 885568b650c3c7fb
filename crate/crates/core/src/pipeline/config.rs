use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::FilterPolicy;
use crate::gmm::FitConfig;
use crate::model_selection::{CGrid, Criterion, CriterionConfig};
use crate::viz::{PlotFormat, ProjectionConfig};

/// Candidate range and criterion for frame-count estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriterionSettings {
    pub criterion: Criterion,
    pub c: f64,
    pub n_c_min: usize,
    pub n_c_max: usize,
}

impl Default for CriterionSettings {
    fn default() -> Self {
        let d = CriterionConfig::default();
        Self {
            criterion: d.criterion,
            c: d.c,
            n_c_min: d.n_c_min,
            n_c_max: d.n_c_max,
        }
    }
}

/// Bucket limits of the confusion matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfusionSettings {
    pub row_max: usize,
    pub col_max: usize,
}

impl Default for ConfusionSettings {
    fn default() -> Self {
        Self { row_max: 4, col_max: 4 }
    }
}

/// Everything one command invocation needs. Loaded from a TOML file and
/// then overridden by command-line flags.
///
/// The global `seed` drives every seeded step: the filter sampler uses it
/// directly, and each verb's mixture fits and projection use
/// [`crate::seed::for_verb`]`(seed, lemma)`. Seeds inside the nested
/// sections are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub formats: Vec<PlotFormat>,
    /// Verb to project; all verbs when unset.
    pub verb: Option<String>,
    pub filter: FilterPolicy,
    pub fit: FitConfig,
    pub criterion: CriterionSettings,
    pub projection: ProjectionConfig,
    pub tune: CGrid,
    pub confusion: ConfusionSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            jobs: None,
            formats: vec![PlotFormat::Csv],
            verb: None,
            filter: FilterPolicy::default(),
            fit: FitConfig::default(),
            criterion: CriterionSettings::default(),
            projection: ProjectionConfig::default(),
            tune: CGrid::default(),
            confusion: ConfusionSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy {
            seed: self.seed,
            ..self.filter.clone()
        }
    }

    /// Fit template carrying the global seed; per-verb seeds derive from it.
    pub fn fit_template(&self) -> FitConfig {
        self.fit.with_seed(self.seed)
    }

    pub fn criterion_config(&self) -> CriterionConfig {
        CriterionConfig {
            criterion: self.criterion.criterion,
            c: self.criterion.c,
            n_c_min: self.criterion.n_c_min,
            n_c_max: self.criterion.n_c_max,
            fit: self.fit_template(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.input.is_empty() {
            return Err(PipelineError::Config("no input file given".into()));
        }
        for path in &self.input {
            if !path.exists() {
                return Err(PipelineError::MissingInput(path.clone()));
            }
        }
        if self.jobs == Some(0) {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        self.filter_policy().validate()?;
        self.fit.validate()?;
        self.criterion_config().validate()?;
        Ok(())
    }
}
