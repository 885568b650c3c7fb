//! Spherical Gaussian mixture models fitted by EM with seeded restarts.
//!
//! Each component `j` has a weight `w_j`, a mean `μ_j ∈ R^d` and a single
//! variance `σ_j²` shared by all coordinates, so the density is
//! `Σ_j w_j · N(x; μ_j, σ_j² I)`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Responsibility mass below which a component is considered empty and re-seeded.
const EMPTY_COMPONENT_MASS: f64 = 1e-10;
/// Smallest weight a re-seeded component starts with.
const RESEED_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("no samples")]
    EmptyData,
    #[error("{n_samples} samples cannot support {n_components} components")]
    TooFewSamples {
        n_samples: usize,
        n_components: usize,
    },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("data has {found} columns, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, GmmError>;

/// Number of free parameters of a spherical mixture: `d·n_c` means,
/// `n_c` variances and `n_c − 1` weights.
pub fn param_count(n_components: usize, dimension: usize) -> usize {
    (dimension + 2) * n_components - 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGmm {
    weights: Vec<f64>,
    means: Array2<f64>,
    variances: Vec<f64>,
}

impl SphericalGmm {
    pub fn new(weights: Vec<f64>, means: Array2<f64>, variances: Vec<f64>) -> Result<Self> {
        let n_c = weights.len();
        if n_c == 0 || means.nrows() != n_c || variances.len() != n_c {
            return Err(GmmError::InvalidModel(format!(
                "{} weights, {} means, {} variances",
                n_c,
                means.nrows(),
                variances.len()
            )));
        }
        if means.ncols() == 0 {
            return Err(GmmError::InvalidModel("zero-dimensional means".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(GmmError::InvalidModel("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidModel(format!("weights sum to {total}")));
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(GmmError::InvalidModel("variances must be positive".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(GmmError::InvalidModel("non-finite mean".into()));
        }
        Ok(Self {
            weights,
            means: means.as_standard_layout().into_owned(),
            variances,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    fn mean(&self, j: usize) -> &[f64] {
        let d = self.dimension();
        &self.means.as_slice().expect("standard layout")[j * d..(j + 1) * d]
    }

    /// `ln w_j + ln N(x; μ_j, σ_j² I)` for every component.
    fn weighted_log_densities(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dimension() as f64;
        for (j, slot) in out.iter_mut().enumerate() {
            let var = self.variances[j];
            let sq = squared_distance(x, self.mean(j));
            *slot = self.weights[j].ln() - 0.5 * d * (2.0 * PI * var).ln() - 0.5 * sq / var;
        }
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.dimension() {
            return Err(GmmError::DimensionMismatch {
                expected: self.dimension(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Total data log-likelihood `Σ_i ln Σ_j w_j N(x_i; μ_j, σ_j² I)`.
    pub fn log_likelihood(&self, x: ArrayView2<f64>) -> Result<f64> {
        self.check(&x)?;
        let mut buf = vec![0.0; self.n_components()];
        let mut total = 0.0;
        for row in x.rows() {
            let row = row.to_vec();
            self.weighted_log_densities(&row, &mut buf);
            total += log_sum_exp(&buf);
        }
        Ok(total)
    }

    /// Posterior component probabilities, one row per sample.
    pub fn responsibilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        let n_c = self.n_components();
        let mut out = Array2::zeros((x.nrows(), n_c));
        let mut buf = vec![0.0; n_c];
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            self.weighted_log_densities(&row, &mut buf);
            let norm = log_sum_exp(&buf);
            for j in 0..n_c {
                out[[i, j]] = (buf[j] - norm).exp();
            }
        }
        Ok(out)
    }

    /// Hard labels: argmax of each responsibility row, ties to the lower index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let resp = self.responsibilities(x)?;
        Ok(resp.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Index of the first maximum.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    KmeansPlusPlus,
    RandomPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub n_components: usize,
    pub n_restarts: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the change of the mean per-sample log-likelihood.
    pub convergence_tol: f64,
    pub variance_floor: f64,
    pub seed: u64,
    pub init: Init,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_components: 1,
            n_restarts: 5,
            max_iterations: 200,
            convergence_tol: 1e-4,
            variance_floor: 1e-6,
            seed: 0,
            init: Init::KmeansPlusPlus,
        }
    }
}

impl FitConfig {
    pub fn with_components(&self, n_components: usize) -> Self {
        Self {
            n_components,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(GmmError::InvalidConfig("n_components must be positive".into()));
        }
        if self.n_restarts == 0 {
            return Err(GmmError::InvalidConfig("n_restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(GmmError::InvalidConfig("max_iterations must be positive".into()));
        }
        if !positive(self.convergence_tol) || !positive(self.variance_floor) {
            return Err(GmmError::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartSummary {
    pub seed: u64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total log-likelihood after initialization and after every M-step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: SphericalGmm,
    pub assignments: Vec<usize>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning restart in `restarts`.
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

/// Row-major copy of the data with validation.
struct Data {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl Data {
    fn new(x: ArrayView2<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(GmmError::EmptyData);
        }
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(GmmError::NonFinite { row: i });
            }
        }
        let values = x.as_standard_layout().iter().copied().collect();
        Ok(Self { values, n, d })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// Mean squared deviation from the sample mean, averaged over coordinates.
    fn pooled_variance(&self) -> f64 {
        let mut mean = vec![0.0; self.d];
        for i in 0..self.n {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        let ss: f64 = (0..self.n).map(|i| squared_distance(self.row(i), &mean)).sum();
        ss / (self.n * self.d) as f64
    }
}

/// Working parameters of one EM run, means stored row-major.
struct Params {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    d: usize,
}

impl Params {
    fn into_model(self) -> SphericalGmm {
        let n_c = self.weights.len();
        SphericalGmm {
            weights: self.weights,
            means: Array2::from_shape_vec((n_c, self.d), self.means).expect("shape"),
            variances: self.variances,
        }
    }

    /// E-step: fills `resp` (n × n_c) and `point_ll`, returns the total log-likelihood.
    fn e_step(&self, data: &Data, resp: &mut [f64], point_ll: &mut [f64]) -> f64 {
        let n_c = self.weights.len();
        let d = data.d as f64;
        let consts: Vec<f64> = (0..n_c)
            .map(|j| self.weights[j].ln() - 0.5 * d * (2.0 * PI * self.variances[j]).ln())
            .collect();
        let mut total = 0.0;
        for i in 0..data.n {
            let x = data.row(i);
            let row = &mut resp[i * n_c..(i + 1) * n_c];
            for j in 0..n_c {
                let mean = &self.means[j * data.d..(j + 1) * data.d];
                row[j] = consts[j] - 0.5 * squared_distance(x, mean) / self.variances[j];
            }
            let norm = log_sum_exp(row);
            row.iter_mut().for_each(|r| *r = (*r - norm).exp());
            point_ll[i] = norm;
            total += norm;
        }
        total
    }

    /// M-step with variance flooring; components whose responsibility mass
    /// vanished are moved onto the worst-explained points.
    fn m_step(&mut self, data: &Data, resp: &[f64], point_ll: &[f64], floor: f64) {
        let n_c = self.weights.len();
        let d = data.d;
        let mut mass = vec![0.0; n_c];
        let mut sums = vec![0.0; n_c * d];
        for i in 0..data.n {
            let x = data.row(i);
            for j in 0..n_c {
                let r = resp[i * n_c + j];
                mass[j] += r;
                for (s, v) in sums[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *s += r * v;
                }
            }
        }
        let mut empty = Vec::new();
        for j in 0..n_c {
            if mass[j] < EMPTY_COMPONENT_MASS {
                empty.push(j);
                continue;
            }
            for k in 0..d {
                self.means[j * d + k] = sums[j * d + k] / mass[j];
            }
        }
        let mut sq = vec![0.0; n_c];
        for i in 0..data.n {
            let x = data.row(i);
            for j in 0..n_c {
                let r = resp[i * n_c + j];
                if r > 0.0 {
                    sq[j] += r * squared_distance(x, &self.means[j * d..(j + 1) * d]);
                }
            }
        }
        for j in 0..n_c {
            if mass[j] >= EMPTY_COMPONENT_MASS {
                self.variances[j] = (sq[j] / (mass[j] * d as f64)).max(floor);
            }
            self.weights[j] = mass[j] / data.n as f64;
        }

        if !empty.is_empty() {
            let live: Vec<f64> = (0..n_c)
                .filter(|j| !empty.contains(j))
                .map(|j| self.variances[j])
                .collect();
            let variance = if live.is_empty() {
                data.pooled_variance().max(floor)
            } else {
                live.iter().sum::<f64>() / live.len() as f64
            };
            let mut order: Vec<usize> = (0..data.n).collect();
            order.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
            for (slot, &j) in empty.iter().enumerate() {
                let point = order[slot % data.n];
                self.means[j * d..(j + 1) * d].copy_from_slice(data.row(point));
                self.variances[j] = variance;
                self.weights[j] = self.weights[j].max(RESEED_WEIGHT);
            }
            let total: f64 = self.weights.iter().sum();
            self.weights.iter_mut().for_each(|w| *w /= total);
        }
    }
}

fn initialize(data: &Data, config: &FitConfig, rng: &mut seed::Rng) -> Params {
    let n_c = config.n_components;
    let centers: Vec<usize> = match config.init {
        Init::RandomPoints => rand::seq::index::sample(rng, data.n, n_c).into_vec(),
        Init::KmeansPlusPlus => {
            let mut centers = vec![rng.random_range(0..data.n)];
            let mut d2: Vec<f64> = (0..data.n)
                .map(|i| squared_distance(data.row(i), data.row(centers[0])))
                .collect();
            while centers.len() < n_c {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let target = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = None;
                    for (i, &w) in d2.iter().enumerate() {
                        acc += w;
                        if w > 0.0 && acc > target {
                            pick = Some(i);
                            break;
                        }
                    }
                    // Rounding can leave `acc` just short of `target`.
                    pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive mass"))
                } else {
                    let free: Vec<usize> = (0..data.n).filter(|i| !centers.contains(i)).collect();
                    free[rng.random_range(0..free.len())]
                };
                centers.push(next);
                for (i, slot) in d2.iter_mut().enumerate() {
                    *slot = slot.min(squared_distance(data.row(i), data.row(next)));
                }
            }
            centers
        }
    };
    let variance = data.pooled_variance().max(config.variance_floor);
    Params {
        weights: vec![1.0 / n_c as f64; n_c],
        means: centers.iter().flat_map(|&c| data.row(c).iter().copied()).collect(),
        variances: vec![variance; n_c],
        d: data.d,
    }
}

struct Run {
    params: Params,
    resp: Vec<f64>,
    summary: RestartSummary,
}

fn run_em(data: &Data, config: &FitConfig, run_seed: u64) -> Run {
    let mut rng = seed::rng(run_seed);
    let mut params = initialize(data, config, &mut rng);
    let n_c = config.n_components;
    let mut resp = vec![0.0; data.n * n_c];
    let mut point_ll = vec![0.0; data.n];
    let mut ll = params.e_step(data, &mut resp, &mut point_ll);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        params.m_step(data, &resp, &point_ll, config.variance_floor);
        let next = params.e_step(data, &mut resp, &mut point_ll);
        history.push(next);
        iterations += 1;
        let change = (next - ll).abs() / data.n as f64;
        ll = next;
        if change < config.convergence_tol {
            converged = true;
            break;
        }
    }
    Run {
        params,
        resp,
        summary: RestartSummary {
            seed: run_seed,
            log_likelihood: ll,
            iterations,
            converged,
            history,
        },
    }
}

/// Fit a spherical mixture with `config.n_restarts` EM runs seeded
/// `config.seed + r` and keep the highest-likelihood run (earliest on ties).
pub fn fit(x: ArrayView2<f64>, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let data = Data::new(x)?;
    if data.n < config.n_components {
        return Err(GmmError::TooFewSamples {
            n_samples: data.n,
            n_components: config.n_components,
        });
    }
    let runs: Vec<Run> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| run_em(&data, config, config.seed.wrapping_add(r as u64)))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.summary.log_likelihood > runs[best].summary.log_likelihood {
            best = i;
        }
    }
    let restarts: Vec<RestartSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let winner = runs.into_iter().nth(best).expect("at least one restart");
    let n_c = config.n_components;
    let assignments = winner
        .resp
        .chunks(n_c)
        .map(|row| argmax(row.iter().copied()))
        .collect();
    Ok(FitResult {
        model: winner.params.into_model(),
        assignments,
        log_likelihood: winner.summary.log_likelihood,
        iterations: winner.summary.iterations,
        converged: winner.summary.converged,
        best_restart: best,
        restarts,
    })
}
