//! Cluster/frame agreement for one verb: contingency tables, the
//! match-maximizing one-to-one mapping, match rate, and the macro and
//! per-group averages used to report them.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("{pred} predictions for {gold} gold labels")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("no instances")]
    Empty,
    #[error("no per-verb scores to average")]
    NoScores,
    #[error("verb {0:?} has no group label")]
    MissingGroup(String),
    #[error("invalid contingency table: {0}")]
    InvalidTable(String),
}

pub type Result<T> = std::result::Result<T, MappingError>;

/// Cluster × frame co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    cluster_ids: Vec<usize>,
    frame_labels: Vec<String>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(
        counts: Vec<Vec<u64>>,
        cluster_ids: Vec<usize>,
        frame_labels: Vec<String>,
    ) -> Result<Self> {
        if counts.len() != cluster_ids.len() {
            return Err(MappingError::InvalidTable(format!(
                "{} rows for {} cluster ids",
                counts.len(),
                cluster_ids.len()
            )));
        }
        if counts.iter().any(|row| row.len() != frame_labels.len()) {
            return Err(MappingError::InvalidTable("ragged rows".into()));
        }
        let mut ids = cluster_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        let mut labels = frame_labels.clone();
        labels.sort();
        labels.dedup();
        if ids.len() != cluster_ids.len() || labels.len() != frame_labels.len() {
            return Err(MappingError::InvalidTable("duplicate row or column label".into()));
        }
        let total = counts.iter().flatten().sum();
        if total == 0 {
            return Err(MappingError::InvalidTable("table is empty".into()));
        }
        Ok(Self {
            counts,
            cluster_ids,
            frame_labels,
            total,
        })
    }

    /// Table with generic labels, mainly for tests and oracles.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n_f = counts.first().map_or(0, Vec::len);
        let ids = (0..counts.len()).collect();
        let labels = (0..n_f).map(|f| format!("F{f}")).collect();
        Self::new(counts, ids, labels)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn cluster_ids(&self) -> &[usize] {
        &self.cluster_ids
    }

    pub fn frame_labels(&self) -> &[String] {
        &self.frame_labels
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn n_frames(&self) -> usize {
        self.frame_labels.len()
    }

    pub fn max_cell(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Count co-occurrences. Rows are the distinct cluster ids in ascending
/// order, columns the distinct frame labels in lexicographic order.
pub fn contingency<S: AsRef<str>>(pred: &[usize], gold: &[S]) -> Result<ContingencyTable> {
    if pred.len() != gold.len() {
        return Err(MappingError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(MappingError::Empty);
    }
    let mut cluster_ids = pred.to_vec();
    cluster_ids.sort_unstable();
    cluster_ids.dedup();
    let mut frame_labels: Vec<String> = gold.iter().map(|g| g.as_ref().to_string()).collect();
    frame_labels.sort();
    frame_labels.dedup();
    let mut counts = vec![vec![0u64; frame_labels.len()]; cluster_ids.len()];
    for (p, g) in pred.iter().zip(gold) {
        let row = cluster_ids.binary_search(p).expect("present");
        let col = frame_labels
            .binary_search_by(|f| f.as_str().cmp(g.as_ref()))
            .expect("present");
        counts[row][col] += 1;
    }
    ContingencyTable::new(counts, cluster_ids, frame_labels)
}

/// One-to-one pairing of table rows (clusters) and columns (frames).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mapping {
    /// `(cluster index, frame index)` pairs in ascending cluster order.
    pub pairs: Vec<(usize, usize)>,
    pub matched: u64,
}

/// Maximum-weight assignment for `rows.len() <= cols.len()` via shortest
/// augmenting paths with potentials. Returns the column chosen for each row.
fn assign_rows(weights: &[Vec<u64>], rows: &[usize], cols: &[usize]) -> Vec<usize> {
    let n = rows.len();
    let m = cols.len();
    debug_assert!(n <= m);
    let max = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimise (max - w) so every cost is non-negative.
    let cost = |i: usize, j: usize| max - weights[rows[i]][cols[j]] as i64;
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; index 0 is the virtual source.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut chosen = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            chosen[owner[j] - 1] = j - 1;
        }
    }
    chosen
}

/// Best total weight of a full matching of the smaller side of `rows × cols`.
fn best_value(weights: &[Vec<u64>], rows: &[usize], cols: &[usize]) -> u64 {
    if rows.is_empty() || cols.is_empty() {
        return 0;
    }
    if rows.len() <= cols.len() {
        let chosen = assign_rows(weights, rows, cols);
        rows.iter()
            .zip(chosen)
            .map(|(&r, j)| weights[r][cols[j]])
            .sum()
    } else {
        let transposed: Vec<Vec<u64>> = (0..weights[0].len())
            .map(|c| weights.iter().map(|row| row[c]).collect())
            .collect();
        best_value(&transposed, cols, rows)
    }
}

/// Match-maximizing one-to-one mapping of clusters to frames with
/// `min(n_c, n_f)` pairs. Among optimal mappings the lexicographically
/// smallest pair list is returned.
pub fn optimal_mapping(table: &ContingencyTable) -> Mapping {
    let w = &table.counts;
    let n_c = table.n_clusters();
    let n_f = table.n_frames();
    let all_rows: Vec<usize> = (0..n_c).collect();
    let all_cols: Vec<usize> = (0..n_f).collect();
    let optimum = best_value(w, &all_rows, &all_cols);
    let need = n_c.min(n_f);

    let mut pairs = Vec::with_capacity(need);
    let mut matched = 0;
    let mut free_cols = all_cols;
    for r in 0..n_c {
        if pairs.len() == need {
            break;
        }
        let later_rows: Vec<usize> = (r + 1..n_c).collect();
        let mut choice = None;
        for (pos, &f) in free_cols.iter().enumerate() {
            let mut rest = free_cols.clone();
            rest.remove(pos);
            let still_needed = need - pairs.len() - 1;
            if later_rows.len().min(rest.len()) < still_needed {
                continue;
            }
            if matched + w[r][f] + best_value(w, &later_rows, &rest) == optimum {
                choice = Some(pos);
                break;
            }
        }
        if let Some(pos) = choice {
            let f = free_cols.remove(pos);
            matched += w[r][f];
            pairs.push((r, f));
        }
    }
    debug_assert_eq!(matched, optimum);
    Mapping { pairs, matched }
}

/// Fraction of instances whose cluster maps to their gold frame.
pub fn match_rate(table: &ContingencyTable, mapping: &Mapping) -> f64 {
    mapping.matched as f64 / table.total as f64
}

/// Match rate of putting every instance in one cluster: the majority-frame fraction.
pub fn all_in_one_rate<S: AsRef<str>>(gold: &[S]) -> Result<f64> {
    if gold.is_empty() {
        return Err(MappingError::Empty);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for g in gold {
        *counts.entry(g.as_ref()).or_insert(0) += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(max as f64 / gold.len() as f64)
}

/// Unweighted mean over verbs.
pub fn macro_average(per_verb: &BTreeMap<String, f64>) -> Result<f64> {
    if per_verb.is_empty() {
        return Err(MappingError::NoScores);
    }
    Ok(per_verb.values().sum::<f64>() / per_verb.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStat {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupDiff {
    pub first: String,
    pub second: String,
    /// `mean(first) − mean(second)`.
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedAverages {
    pub groups: BTreeMap<String, GroupStat>,
    /// One entry per unordered pair of groups, first label < second label.
    pub diffs: Vec<GroupDiff>,
}

/// Per-group unweighted means and member counts plus pairwise differences.
pub fn grouped_average(
    per_verb: &BTreeMap<String, f64>,
    groups: &BTreeMap<String, String>,
) -> Result<GroupedAverages> {
    if per_verb.is_empty() {
        return Err(MappingError::NoScores);
    }
    let mut members: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (verb, &score) in per_verb {
        let group = groups
            .get(verb)
            .ok_or_else(|| MappingError::MissingGroup(verb.clone()))?;
        members.entry(group.as_str()).or_default().push(score);
    }
    let groups: BTreeMap<String, GroupStat> = members
        .into_iter()
        .map(|(g, scores)| {
            let stat = GroupStat {
                mean: scores.iter().sum::<f64>() / scores.len() as f64,
                count: scores.len(),
            };
            (g.to_string(), stat)
        })
        .collect();
    let labels: Vec<&String> = groups.keys().collect();
    let mut diffs = Vec::new();
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            diffs.push(GroupDiff {
                first: (*a).clone(),
                second: (*b).clone(),
                diff: groups[*a].mean - groups[*b].mean,
            });
        }
    }
    Ok(GroupedAverages { groups, diffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over injective assignments of the smaller side.
    fn brute_force(counts: &[Vec<u64>]) -> u64 {
        fn go(counts: &[Vec<u64>], row: usize, used: &mut Vec<bool>, need: usize) -> Option<u64> {
            if need == 0 {
                return Some(0);
            }
            if row == counts.len() {
                return None;
            }
            let mut best = None;
            let remaining_rows = counts.len() - row - 1;
            if remaining_rows >= need {
                best = go(counts, row + 1, used, need);
            }
            for f in 0..used.len() {
                if !used[f] {
                    used[f] = true;
                    if let Some(v) = go(counts, row + 1, used, need - 1) {
                        let total = v + counts[row][f];
                        best = Some(best.map_or(total, |b: u64| b.max(total)));
                    }
                    used[f] = false;
                }
            }
            best
        }
        let n_f = counts[0].len();
        go(counts, 0, &mut vec![false; n_f], counts.len().min(n_f)).unwrap()
    }

    #[test]
    fn contingency_examples() {
        let t = contingency(&[0, 0, 1], &["A", "A", "B"]).unwrap();
        assert_eq!(t.counts(), &[vec![2, 0], vec![0, 1]]);
        assert_eq!(t.frame_labels(), &["A".to_string(), "B".to_string()]);
        let t = contingency(&[0], &["A"]).unwrap();
        assert_eq!(t.counts(), &[vec![1]]);
        assert_eq!(
            contingency(&[0, 1], &["A"]).unwrap_err(),
            MappingError::LengthMismatch { pred: 2, gold: 1 }
        );
        assert_eq!(contingency::<&str>(&[], &[]).unwrap_err(), MappingError::Empty);
    }

    #[test]
    fn contingency_orders_frames_lexicographically() {
        let t = contingency(&[5, 2, 5], &["b", "a", "c"]).unwrap();
        assert_eq!(t.cluster_ids(), &[2, 5]);
        assert_eq!(t.counts(), &[vec![1, 0, 0], vec![0, 1, 1]]);
    }

    #[test]
    fn mapping_examples() {
        let t = ContingencyTable::from_counts(vec![vec![10, 0], vec![0, 5]]).unwrap();
        let m = optimal_mapping(&t);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.matched, 15);
        assert_eq!(match_rate(&t, &m), 1.0);

        let t = ContingencyTable::from_counts(vec![vec![3, 4], vec![5, 1]]).unwrap();
        let m = optimal_mapping(&t);
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(m.matched, 9);
        assert!((match_rate(&t, &m) - 9.0 / 13.0).abs() < 1e-15);

        let t = ContingencyTable::from_counts(vec![vec![2, 7, 7, 1]]).unwrap();
        let m = optimal_mapping(&t);
        assert_eq!(m.pairs, vec![(0, 1)]);
    }

    #[test]
    fn ties_pick_smallest_pair_list() {
        let t = ContingencyTable::from_counts(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(optimal_mapping(&t).pairs, vec![(0, 0), (1, 1)]);
        // More clusters than frames: cluster 0 is left out only if it must be.
        let t = ContingencyTable::from_counts(vec![vec![0], vec![4], vec![4]]).unwrap();
        assert_eq!(optimal_mapping(&t).pairs, vec![(1, 0)]);
        let t = ContingencyTable::from_counts(vec![vec![4], vec![4], vec![0]]).unwrap();
        assert_eq!(optimal_mapping(&t).pairs, vec![(0, 0)]);
    }

    #[test]
    fn all_in_one_examples() {
        let mut gold = vec!["Supporting"; 30];
        gold.extend(vec!["Evidence"; 20]);
        assert_eq!(all_in_one_rate(&gold).unwrap(), 0.6);
        assert_eq!(all_in_one_rate(&["A", "A"]).unwrap(), 1.0);
        let uniform: Vec<String> = (0..80).map(|i| format!("F{}", i % 4)).collect();
        assert_eq!(all_in_one_rate(&uniform).unwrap(), 0.25);
        assert_eq!(all_in_one_rate::<&str>(&[]).unwrap_err(), MappingError::Empty);
    }

    #[test]
    fn averages() {
        let scores: BTreeMap<String, f64> =
            [("v1".to_string(), 1.0), ("v2".to_string(), 0.5)].into_iter().collect();
        assert_eq!(macro_average(&scores).unwrap(), 0.75);
        assert_eq!(macro_average(&BTreeMap::new()).unwrap_err(), MappingError::NoScores);

        let scores: BTreeMap<String, f64> =
            [("v1".to_string(), 0.8), ("v2".to_string(), 0.6)].into_iter().collect();
        let groups: BTreeMap<String, String> =
            [("v1".to_string(), "g1".to_string()), ("v2".to_string(), "g2".to_string())]
                .into_iter()
                .collect();
        let g = grouped_average(&scores, &groups).unwrap();
        assert_eq!(g.groups["g1"], GroupStat { mean: 0.8, count: 1 });
        assert_eq!(g.groups["g2"], GroupStat { mean: 0.6, count: 1 });
        assert_eq!(g.diffs.len(), 1);
        assert!((g.diffs[0].diff - 0.2).abs() < 1e-15);

        let mut partial = groups.clone();
        partial.remove("v2");
        assert_eq!(
            grouped_average(&scores, &partial).unwrap_err(),
            MappingError::MissingGroup("v2".into())
        );
    }

    #[test]
    fn grouped_counts_for_two_frame_split() {
        let mut scores = BTreeMap::new();
        let mut groups = BTreeMap::new();
        for v in 0..96 {
            let verb = format!("v{v:02}");
            scores.insert(verb.clone(), 0.5 + (v % 7) as f64 / 20.0);
            let g = if v < 62 { "without_relation" } else { "with_relation" };
            groups.insert(verb, g.to_string());
        }
        let g = grouped_average(&scores, &groups).unwrap();
        assert_eq!(g.groups["without_relation"].count, 62);
        assert_eq!(g.groups["with_relation"].count, 34);
        let single: BTreeMap<String, String> =
            scores.keys().map(|v| (v.clone(), "all".to_string())).collect();
        let g = grouped_average(&scores, &single).unwrap();
        assert!((g.groups["all"].mean - macro_average(&scores).unwrap()).abs() < 1e-12);
    }

    fn table_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
            prop::collection::vec(prop::collection::vec(0u64..15, c), r)
                .prop_filter("non-empty", |t| t.iter().flatten().any(|&x| x > 0))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(counts in table_strategy()) {
            let t = ContingencyTable::from_counts(counts.clone()).unwrap();
            let m = optimal_mapping(&t);
            prop_assert_eq!(m.matched, brute_force(&counts));
            prop_assert_eq!(m.pairs.len(), t.n_clusters().min(t.n_frames()));
            prop_assert!(m.matched >= t.max_cell());
            let rate = match_rate(&t, &m);
            prop_assert!(rate > 0.0 && rate <= 1.0);
        }

        #[test]
        fn rate_is_invariant_under_relabeling(counts in table_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = crate::seed::rng(seed);
            let mut rows = counts.clone();
            rows.shuffle(&mut rng);
            let mut perm: Vec<usize> = (0..counts[0].len()).collect();
            perm.shuffle(&mut rng);
            let permuted: Vec<Vec<u64>> =
                rows.iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
            let a = ContingencyTable::from_counts(counts).unwrap();
            let b = ContingencyTable::from_counts(permuted).unwrap();
            prop_assert_eq!(
                match_rate(&a, &optimal_mapping(&a)),
                match_rate(&b, &optimal_mapping(&b))
            );
        }
    }
}
