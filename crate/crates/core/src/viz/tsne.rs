//! Exact t-SNE.

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::VizError;
use crate::seed;

/// Smallest squared input distance; keeps duplicate points well defined.
const MIN_SQ_DISTANCE: f64 = 1e-12;
const MIN_PROBABILITY: f64 = 1e-12;
const ENTROPY_TOL: f64 = 1e-5;
const BISECTION_STEPS: usize = 100;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Target perplexity; lowered to `(n_s − 1) / 3` for small inputs.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

impl ProjectionConfig {
    fn validate(&self) -> Result<(), VizError> {
        let positive = [
            ("perplexity", self.perplexity),
            ("learning_rate", self.learning_rate),
            ("early_exaggeration", self.early_exaggeration),
            ("initial_momentum", self.initial_momentum),
            ("final_momentum", self.final_momentum),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(VizError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.iterations == 0 {
            return Err(VizError::InvalidConfig("iterations must be positive".into()));
        }
        Ok(())
    }

    /// Perplexity actually used for `n_samples` points.
    pub fn effective_perplexity(&self, n_samples: usize) -> Result<f64, VizError> {
        let limit = n_samples.saturating_sub(1) as f64 / 3.0;
        let p = self.perplexity.min(limit);
        if n_samples < 4 || p < 1.0 {
            return Err(VizError::InfeasiblePerplexity {
                n_samples,
                perplexity: p,
            });
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Array2<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub perplexity: f64,
}

fn squared_distances(x: ArrayView2<f64>) -> Vec<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let d = d.max(MIN_SQ_DISTANCE);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Conditional distribution `p(·|i)` with precision `beta`; returns its entropy.
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // Shift by the nearest neighbour distance for stability.
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-(d - min) * beta).exp() };
        sum += *o;
    }
    let mut weighted = 0.0;
    for (&d, o) in dist.iter().zip(out.iter_mut()) {
        *o /= sum;
        weighted += *o * (d - min);
    }
    sum.ln() + beta * weighted
}

/// Symmetric joint affinities `P` with each conditional row calibrated to
/// `perplexity` by bisection on the Gaussian precision.
pub fn joint_probabilities(x: ArrayView2<f64>, perplexity: f64) -> Array2<f64> {
    let n = x.nrows();
    let dist = squared_distances(x);
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let row_dist = &dist[i * n..(i + 1) * n];
        let row = &mut cond[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        for _ in 0..BISECTION_STEPS {
            let entropy = conditional_row(row_dist, i, beta, row);
            let diff = entropy - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        conditional_row(row_dist, i, beta, row);
    }
    let scale = 2.0 * n as f64;
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            ((cond[i * n + j] + cond[j * n + i]) / scale).max(MIN_PROBABILITY)
        }
    })
}

/// Student-t affinities of the embedding: unnormalised kernel and its sum.
fn low_dim_kernel(y: &[f64], n: usize, kernel: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        kernel[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let k = 1.0 / (1.0 + dx * dx + dy * dy);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
            sum += 2.0 * k;
        }
    }
    sum
}

fn kl_divergence(p: &Array2<f64>, y: &[f64]) -> f64 {
    let n = p.nrows();
    let mut kernel = vec![0.0; n * n];
    let sum = low_dim_kernel(y, n, &mut kernel);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[[i, j]];
                let qij = (kernel[i * n + j] / sum).max(MIN_PROBABILITY);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}

/// Project rows of `x` to two dimensions.
pub fn project_2d(x: ArrayView2<f64>, config: &ProjectionConfig) -> Result<Projection, VizError> {
    config.validate()?;
    let n = x.nrows();
    if let Some((row, _)) = x
        .rows()
        .into_iter()
        .enumerate()
        .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
    {
        return Err(VizError::NonFinite { row });
    }
    let perplexity = config.effective_perplexity(n)?;
    let p = joint_probabilities(x, perplexity);

    let mut rng = seed::rng(config.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let initial_kl = kl_divergence(&p, &y);

    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0_f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut kernel = vec![0.0; n * n];
    for iter in 0..config.iterations {
        let early = iter < config.exaggeration_iterations;
        let exaggeration = if early { config.early_exaggeration } else { 1.0 };
        let momentum = if early {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let sum = low_dim_kernel(&y, n, &mut kernel);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = kernel[i * n + j];
                let q = (k / sum).max(MIN_PROBABILITY);
                let coeff = 4.0 * (exaggeration * p[[i, j]] - q) * k;
                grad[2 * i] += coeff * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += coeff * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        for t in 0..2 * n {
            gains[t] = if (grad[t] > 0.0) != (update[t] > 0.0) {
                gains[t] + 0.2
            } else {
                (gains[t] * 0.8).max(MIN_GAIN)
            };
            update[t] = momentum * update[t] - config.learning_rate * gains[t] * grad[t];
            y[t] += update[t];
        }
        for axis in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + axis]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + axis] -= mean);
        }
    }
    let final_kl = kl_divergence(&p, &y);
    let coords = Array2::from_shape_vec((n, 2), y).expect("shape");
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(VizError::Diverged);
    }
    Ok(Projection {
        coords,
        initial_kl,
        final_kl,
        perplexity,
    })
}
