//! Scores for estimated frame counts against gold counts.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{gold} gold counts but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("counts must be at least 1 (found {0})")]
    ZeroCount(usize),
    #[error("need at least {needed} verbs, got {found}")]
    TooFew { needed: usize, found: usize },
    #[error("correlation is undefined for a constant vector")]
    UndefinedCorrelation,
    #[error("bucket limits must be at least 1")]
    InvalidBuckets,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Gold and predicted frame counts aligned by verb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountPairs {
    gold: Vec<usize>,
    predicted: Vec<usize>,
}

impl CountPairs {
    pub fn new(gold: Vec<usize>, predicted: Vec<usize>) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                gold: gold.len(),
                predicted: predicted.len(),
            });
        }
        if let Some(&zero) = gold.iter().chain(&predicted).find(|&&c| c == 0) {
            return Err(MetricsError::ZeroCount(zero));
        }
        Ok(Self { gold, predicted })
    }

    pub fn gold(&self) -> &[usize] {
        &self.gold
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            return Err(MetricsError::TooFew {
                needed,
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(MetricsError::UndefinedCorrelation);
    }
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(pairs: &CountPairs) -> Result<f64> {
    pairs.require(2)?;
    let to_f64 = |v: &[usize]| v.iter().map(|&c| c as f64).collect::<Vec<_>>();
    let gold = average_ranks(&to_f64(&pairs.gold));
    let predicted = average_ranks(&to_f64(&pairs.predicted));
    pearson(&gold, &predicted)
}

/// Fraction of verbs whose predicted count equals the gold count.
pub fn accuracy(pairs: &CountPairs) -> Result<f64> {
    pairs.require(1)?;
    let hits = pairs
        .gold
        .iter()
        .zip(&pairs.predicted)
        .filter(|(g, p)| g == p)
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

pub fn rmse(pairs: &CountPairs) -> Result<f64> {
    pairs.require(1)?;
    let sum: f64 = pairs
        .gold
        .iter()
        .zip(&pairs.predicted)
        .map(|(&g, &p)| {
            let e = p as f64 - g as f64;
            e * e
        })
        .sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Gold (rows) × predicted (columns) verb counts over bucketed values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub row_buckets: Vec<String>,
    pub col_buckets: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

fn buckets(max: usize) -> Vec<String> {
    (1..=max)
        .map(|b| b.to_string())
        .chain(std::iter::once(format!("{}+", max + 1)))
        .collect()
}

/// Buckets `1..=max` are exact; everything above lands in the open `max+1`
/// bucket, so `row_max = 4` yields rows `1, 2, 3, 4, 5+`.
pub fn confusion(pairs: &CountPairs, row_max: usize, col_max: usize) -> Result<ConfusionMatrix> {
    if row_max == 0 || col_max == 0 {
        return Err(MetricsError::InvalidBuckets);
    }
    let mut counts = vec![vec![0; col_max + 1]; row_max + 1];
    for (&g, &p) in pairs.gold.iter().zip(&pairs.predicted) {
        counts[g.min(row_max + 1) - 1][p.min(col_max + 1) - 1] += 1;
    }
    Ok(ConfusionMatrix {
        row_buckets: buckets(row_max),
        col_buckets: buckets(col_max),
        counts,
    })
}
