//! Frame-count estimation with BIC and the adjusted BIC, and calibration of
//! the adjusted-BIC penalty constant on a development set.
//!
//! Both criteria are `−2 ln L + c · k · ln n_s` (`c = 1` for BIC). Because the
//! constant only scales the penalty, each verb is fitted once per candidate
//! component count and every criterion/constant is evaluated on that cached
//! [`LikelihoodTrace`].

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VerbDataset;
use crate::gmm::{self, FitConfig, GmmError};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("penalty constant must be positive (got {0})")]
    NonPositiveConstant(f64),
    #[error("invalid criterion configuration: {0}")]
    InvalidConfig(String),
    #[error("development set is empty")]
    EmptyDevSet,
    #[error("verb {verb:?}: {source}")]
    Fit {
        verb: String,
        #[source]
        source: GmmError,
    },
    #[error(transparent)]
    Gmm(#[from] GmmError),
}

pub type Result<T> = std::result::Result<T, SelectionError>;

/// `−2 ln L + k ln n_s`.
pub fn bic(log_likelihood: f64, k: usize, n_samples: usize) -> Result<f64> {
    if n_samples < 1 {
        return Err(SelectionError::NoSamples);
    }
    Ok(-2.0 * log_likelihood + k as f64 * (n_samples as f64).ln())
}

/// `−2 ln L + c · k ln n_s`.
pub fn a_bic(log_likelihood: f64, k: usize, n_samples: usize, c: f64) -> Result<f64> {
    if n_samples < 1 {
        return Err(SelectionError::NoSamples);
    }
    if c.is_nan() || c <= 0.0 {
        return Err(SelectionError::NonPositiveConstant(c));
    }
    Ok(-2.0 * log_likelihood + c * (k as f64 * (n_samples as f64).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "bic")]
    Bic,
    #[default]
    #[serde(rename = "a-bic", alias = "a_bic")]
    ABic,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Bic => "bic",
            Criterion::ABic => "a-bic",
        })
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bic" => Ok(Criterion::Bic),
            "a-bic" | "a_bic" => Ok(Criterion::ABic),
            other => Err(format!("unknown criterion {other:?} (expected bic or a-bic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriterionConfig {
    pub criterion: Criterion,
    /// Penalty constant, used only by the adjusted BIC.
    pub c: f64,
    pub n_c_min: usize,
    pub n_c_max: usize,
    /// Template for the per-candidate fits; `n_components` is overwritten.
    pub fit: FitConfig,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::ABic,
            c: 1.0,
            n_c_min: 1,
            n_c_max: 10,
            fit: FitConfig::default(),
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c_min < 1 || self.n_c_min > self.n_c_max {
            return Err(SelectionError::InvalidConfig(format!(
                "candidate range [{}, {}] is empty or starts below 1",
                self.n_c_min, self.n_c_max
            )));
        }
        if self.c.is_nan() || self.c < 1.0 {
            return Err(SelectionError::InvalidConfig(format!(
                "penalty constant must be at least 1 (got {})",
                self.c
            )));
        }
        Ok(())
    }

    /// Effective penalty constant (1 for plain BIC).
    pub fn constant(&self) -> f64 {
        match self.criterion {
            Criterion::Bic => 1.0,
            Criterion::ABic => self.c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodPoint {
    pub n_c: usize,
    pub log_likelihood: f64,
    pub k: usize,
}

/// Best-restart log-likelihood for every candidate component count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodTrace {
    pub n_samples: usize,
    pub dimension: usize,
    pub points: Vec<LikelihoodPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n_c: usize,
    pub log_likelihood: f64,
    pub criterion_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub trace: Vec<TraceEntry>,
    pub selected_n_c: usize,
}

/// Fit every candidate in `[n_c_min, min(n_c_max, n_s)]`.
pub fn likelihood_trace(
    x: ArrayView2<f64>,
    n_c_min: usize,
    n_c_max: usize,
    fit: &FitConfig,
) -> Result<LikelihoodTrace> {
    let (n_samples, dimension) = x.dim();
    if n_samples == 0 {
        return Err(SelectionError::NoSamples);
    }
    if n_c_min < 1 || n_c_min > n_c_max {
        return Err(SelectionError::InvalidConfig(format!(
            "candidate range [{n_c_min}, {n_c_max}] is empty"
        )));
    }
    let upper = n_c_max.min(n_samples);
    if n_c_min > upper {
        return Err(SelectionError::InvalidConfig(format!(
            "n_c_min {n_c_min} exceeds the {n_samples} available samples"
        )));
    }
    let mut points = Vec::with_capacity(upper - n_c_min + 1);
    for n_c in n_c_min..=upper {
        let result = gmm::fit(x, &fit.with_components(n_c))?;
        points.push(LikelihoodPoint {
            n_c,
            log_likelihood: result.log_likelihood,
            k: gmm::param_count(n_c, dimension),
        });
    }
    Ok(LikelihoodTrace {
        n_samples,
        dimension,
        points,
    })
}

impl LikelihoodTrace {
    /// Criterion values for penalty constant `c`; selects the minimum,
    /// ties toward fewer components.
    pub fn evaluate(&self, c: f64) -> Result<EstimationResult> {
        let mut trace = Vec::with_capacity(self.points.len());
        let mut selected: Option<(usize, f64)> = None;
        for p in &self.points {
            let value = a_bic(p.log_likelihood, p.k, self.n_samples, c)?;
            trace.push(TraceEntry {
                n_c: p.n_c,
                log_likelihood: p.log_likelihood,
                criterion_value: value,
            });
            if selected.is_none_or(|(_, best)| value < best) {
                selected = Some((p.n_c, value));
            }
        }
        let (selected_n_c, _) = selected.ok_or(SelectionError::NoSamples)?;
        Ok(EstimationResult {
            trace,
            selected_n_c,
        })
    }

    pub fn evaluate_bic(&self) -> Result<EstimationResult> {
        let mut result = self.evaluate(1.0)?;
        for (entry, p) in result.trace.iter_mut().zip(&self.points) {
            entry.criterion_value = bic(p.log_likelihood, p.k, self.n_samples)?;
        }
        Ok(result)
    }

    pub fn evaluate_config(&self, config: &CriterionConfig) -> Result<EstimationResult> {
        match config.criterion {
            Criterion::Bic => self.evaluate_bic(),
            Criterion::ABic => self.evaluate(config.c),
        }
    }
}

/// Estimate the number of frames of one verb's vectors.
pub fn estimate_frame_count(x: ArrayView2<f64>, config: &CriterionConfig) -> Result<EstimationResult> {
    config.validate()?;
    likelihood_trace(x, config.n_c_min, config.n_c_max, &config.fit)?.evaluate_config(config)
}

/// Arithmetic grid of penalty constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CGrid {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

impl Default for CGrid {
    fn default() -> Self {
        Self {
            start: 1.0,
            step: 0.1,
            end: 10.0,
        }
    }
}

impl CGrid {
    /// Grid values, each computed as `start + i·step` and rounded to 1e-9 so
    /// decimal steps print cleanly.
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.step.is_nan() || self.step <= 0.0 || self.start.is_nan() || self.start <= 0.0 || self.end.is_nan() || self.end < self.start {
            return Err(SelectionError::InvalidConfig(format!(
                "bad grid start={} step={} end={}",
                self.start, self.step, self.end
            )));
        }
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub c: f64,
    pub total_gold: usize,
    pub total_estimated: usize,
    pub gap: usize,
}

/// Cached likelihood trace for one development verb.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerbTrace {
    pub verb: String,
    pub gold_frames: usize,
    pub trace: LikelihoodTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub c: f64,
    pub gap: usize,
    pub grid: Vec<GridPoint>,
    pub verbs: Vec<VerbTrace>,
}

/// Per-verb likelihood traces for a dataset, in lemma order. Each verb is
/// fitted with seed `seed::for_verb(config.fit.seed, lemma)`.
pub fn dataset_traces(dataset: &VerbDataset, config: &CriterionConfig) -> Result<Vec<VerbTrace>> {
    config.validate()?;
    let lemmas: Vec<&str> = dataset.lemmas().collect();
    lemmas
        .par_iter()
        .map(|&verb| {
            let x = dataset.matrix(verb).expect("verb present");
            let fit = config.fit.with_seed(seed::for_verb(config.fit.seed, verb));
            let trace = likelihood_trace(x.view(), config.n_c_min, config.n_c_max, &fit).map_err(
                |e| match e {
                    SelectionError::Gmm(source) => SelectionError::Fit {
                        verb: verb.to_string(),
                        source,
                    },
                    other => other,
                },
            )?;
            Ok(VerbTrace {
                verb: verb.to_string(),
                gold_frames: dataset.n_frames(verb),
                trace,
            })
        })
        .collect()
}

/// Pick the grid constant whose summed selections come closest to the summed
/// gold frame counts; ties toward the smaller constant.
pub fn tune_c_from_traces(verbs: Vec<VerbTrace>, grid: &CGrid) -> Result<TuneResult> {
    if verbs.is_empty() {
        return Err(SelectionError::EmptyDevSet);
    }
    let total_gold: usize = verbs.iter().map(|v| v.gold_frames).sum();
    let mut points = Vec::new();
    for c in grid.values()? {
        let mut total_estimated = 0;
        for v in &verbs {
            total_estimated += v.trace.evaluate(c)?.selected_n_c;
        }
        points.push(GridPoint {
            c,
            total_gold,
            total_estimated,
            gap: total_gold.abs_diff(total_estimated),
        });
    }
    let best = points
        .iter()
        .enumerate()
        .min_by_key(|(i, p)| (p.gap, *i))
        .map(|(_, p)| p.clone())
        .expect("grid is non-empty");
    Ok(TuneResult {
        c: best.c,
        gap: best.gap,
        grid: points,
        verbs,
    })
}

/// Calibrate the adjusted-BIC constant on a development set.
pub fn tune_c(dev: &VerbDataset, grid: &CGrid, config: &CriterionConfig) -> Result<TuneResult> {
    if dev.is_empty() {
        return Err(SelectionError::EmptyDevSet);
    }
    tune_c_from_traces(dataset_traces(dev, config)?, grid)
}
