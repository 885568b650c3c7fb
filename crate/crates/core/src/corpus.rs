//! Labeled embedding datasets: loading, validation, target-verb filtering,
//! verb-level splits and mono-frame augmentation.
//!
//! Input files hold one JSON object per line:
//!
//! ```text
//! {"verb":"support","frame":"Evidence","instance_id":"s1","vector":[0.1,0.2],"text":"...","group":"g1"}
//! ```
//!
//! `text` and `group` are optional. A `.gz` suffix selects gzip decoding.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Group assigned to records without a `group` field.
pub const UNGROUPED: &str = "ungrouped";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: vector has length {found}, expected {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: vector contains a non-finite value")]
    NonFinite { line: usize },
    #[error("line {line}: vector is empty")]
    EmptyVector { line: usize },
    #[error("line {line}: duplicate instance_id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("input contains no records")]
    EmptyFile,
    #[error("datasets have different dimensions ({left} vs {right})")]
    IncompatibleDimensions { left: usize, right: usize },
    #[error("requested {requested} test verbs but the dataset has only {available}")]
    TooFewVerbs { requested: usize, available: usize },
    #[error("mono-frame pool has {available} eligible verbs, {needed} needed")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("invalid filter policy: {0}")]
    InvalidPolicy(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One verb occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub verb: String,
    pub frame: String,
    pub instance_id: String,
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default = "default_group")]
    pub group: String,
}

fn default_group() -> String {
    UNGROUPED.to_string()
}

/// Instances grouped by verb lemma, all sharing one vector dimension.
///
/// Verbs iterate in lexicographic order. Within a verb, instances keep the
/// order in which they were inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbDataset {
    dimension: usize,
    verbs: BTreeMap<String, Vec<Instance>>,
}

impl VerbDataset {
    /// An empty dataset. `dimension` may be zero only while the dataset is empty.
    pub fn empty(dimension: usize) -> Self {
        Self {
            dimension,
            verbs: BTreeMap::new(),
        }
    }

    /// Build a dataset from instances, enforcing the record invariants.
    /// Errors carry 1-based positions in `instances`.
    pub fn from_instances<I>(instances: I) -> Result<Self>
    where
        I: IntoIterator<Item = Instance>,
    {
        let mut builder = Builder::default();
        for (i, inst) in instances.into_iter().enumerate() {
            builder.push(i + 1, inst)?;
        }
        builder.finish()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.verbs.is_empty()
    }

    pub fn n_verbs(&self) -> usize {
        self.verbs.len()
    }

    pub fn n_instances(&self) -> usize {
        self.verbs.values().map(Vec::len).sum()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.verbs.keys().map(String::as_str)
    }

    pub fn verbs(&self) -> impl Iterator<Item = (&str, &[Instance])> {
        self.verbs.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn instances(&self, verb: &str) -> Option<&[Instance]> {
        self.verbs.get(verb).map(Vec::as_slice)
    }

    /// Instance count per frame label for one verb.
    pub fn frame_counts(&self, verb: &str) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for inst in self.verbs.get(verb).into_iter().flatten() {
            *counts.entry(inst.frame.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Number of distinct frames of `verb` (0 for unknown verbs).
    pub fn n_frames(&self, verb: &str) -> usize {
        self.frame_counts(verb).len()
    }

    /// `n_s × d` matrix of the verb's vectors, rows in instance order.
    pub fn matrix(&self, verb: &str) -> Option<Array2<f64>> {
        let instances = self.verbs.get(verb)?;
        let flat: Vec<f64> = instances
            .iter()
            .flat_map(|inst| inst.vector.iter().copied())
            .collect();
        Array2::from_shape_vec((instances.len(), self.dimension), flat).ok()
    }

    /// Gold frame labels of the verb, aligned with [`VerbDataset::matrix`] rows.
    pub fn frame_labels(&self, verb: &str) -> Option<Vec<&str>> {
        self.verbs
            .get(verb)
            .map(|v| v.iter().map(|inst| inst.frame.as_str()).collect())
    }

    /// All instances in verb order, then insertion order.
    pub fn iter_instances(&self) -> impl Iterator<Item = &Instance> {
        self.verbs.values().flatten()
    }

    /// Sub-dataset with only the named verbs (unknown names are ignored).
    pub fn select<'a, I>(&self, lemmas: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out = Self::empty(self.dimension);
        for lemma in lemmas {
            if let Some(instances) = self.verbs.get(lemma) {
                out.verbs.insert(lemma.to_string(), instances.clone());
            }
        }
        out
    }

    /// Write the dataset in the line-oriented input format (gzip when the
    /// path ends in `.gz`).
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut writer: Box<dyn Write> = if is_gzip(path) {
            Box::new(BufWriter::new(GzEncoder::new(file, Compression::default())))
        } else {
            Box::new(BufWriter::new(file))
        };
        for inst in self.iter_instances() {
            let line = serde_json::to_string(inst).expect("instance serializes");
            writeln!(writer, "{line}").map_err(io_err)?;
        }
        writer.flush().map_err(io_err)
    }
}

#[derive(Default)]
struct Builder {
    dimension: Option<usize>,
    ids: HashSet<String>,
    verbs: BTreeMap<String, Vec<Instance>>,
}

impl Builder {
    fn push(&mut self, line: usize, inst: Instance) -> Result<()> {
        if inst.vector.is_empty() {
            return Err(CorpusError::EmptyVector { line });
        }
        let expected = *self.dimension.get_or_insert(inst.vector.len());
        if inst.vector.len() != expected {
            return Err(CorpusError::DimensionMismatch {
                line,
                expected,
                found: inst.vector.len(),
            });
        }
        if inst.vector.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite { line });
        }
        if !self.ids.insert(inst.instance_id.clone()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: inst.instance_id,
            });
        }
        self.verbs.entry(inst.verb.clone()).or_default().push(inst);
        Ok(())
    }

    fn finish(self) -> Result<VerbDataset> {
        match self.dimension {
            None => Err(CorpusError::EmptyFile),
            Some(dimension) => Ok(VerbDataset {
                dimension,
                verbs: self.verbs,
            }),
        }
    }
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "gz")
}

/// Supported on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Jsonl,
}

/// Load an embedding file. Blank lines are skipped; every other line must
/// be a complete record.
pub fn load_dataset(path: &Path, format: Format) -> Result<VerbDataset> {
    let Format::Jsonl = format;
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader: Box<dyn Read> = if is_gzip(path) {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    read_jsonl(BufReader::new(reader)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse records from any buffered reader.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<VerbDataset> {
    let mut builder = Builder::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        builder.push(line_no, inst)?;
    }
    builder.finish()
}

/// Target-verb construction rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    pub min_instances_per_frame: usize,
    pub min_frames_per_verb: usize,
    pub max_frames_per_verb: usize,
    pub cap_instances_per_frame: usize,
    pub seed: u64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_instances_per_frame: 20,
            min_frames_per_verb: 2,
            max_frames_per_verb: 10,
            cap_instances_per_frame: 100,
            seed: 0,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("min_instances_per_frame", self.min_instances_per_frame),
            ("min_frames_per_verb", self.min_frames_per_verb),
            ("max_frames_per_verb", self.max_frames_per_verb),
            ("cap_instances_per_frame", self.cap_instances_per_frame),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(CorpusError::InvalidPolicy(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Frames of one verb that survive the frequency threshold and the top-N
/// cut, each down-sampled to the cap. Returned in frame-label order.
fn surviving_frames<'a>(
    verb: &str,
    instances: &'a [Instance],
    policy: &FilterPolicy,
) -> Vec<(&'a str, Vec<usize>)> {
    let mut by_frame: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_frame.entry(inst.frame.as_str()).or_default().push(i);
    }
    let mut frames: Vec<(&str, Vec<usize>)> = by_frame
        .into_iter()
        .filter(|(_, members)| members.len() >= policy.min_instances_per_frame)
        .collect();
    // Largest first; equal counts in label order.
    frames.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));
    frames.truncate(policy.max_frames_per_verb);
    frames.sort_by(|a, b| a.0.cmp(b.0));

    let verb_seed = seed::derive(policy.seed, verb);
    for (frame, members) in &mut frames {
        if members.len() > policy.cap_instances_per_frame {
            // Sample over instance ids, not positions, so the kept set does
            // not depend on record order.
            members.sort_by(|&a, &b| instances[a].instance_id.cmp(&instances[b].instance_id));
            let mut rng = seed::rng(seed::derive(verb_seed, frame));
            let picked = index::sample(&mut rng, members.len(), policy.cap_instances_per_frame);
            let mut kept: Vec<usize> = picked.into_iter().map(|p| members[p]).collect();
            kept.sort_unstable();
            *members = kept;
        }
    }
    frames
}

fn gather(instances: &[Instance], frames: &[(&str, Vec<usize>)]) -> Vec<Instance> {
    let mut keep: Vec<usize> = frames.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| instances[i].clone()).collect()
}

/// Apply the target-verb rules: frame threshold, top-N frames, per-frame cap,
/// then the minimum frame count per verb. Surviving instances keep their
/// input order.
pub fn filter_targets(dataset: &VerbDataset, policy: &FilterPolicy) -> Result<VerbDataset> {
    policy.validate()?;
    let mut out = VerbDataset::empty(dataset.dimension);
    for (verb, instances) in &dataset.verbs {
        let frames = surviving_frames(verb, instances, policy);
        if frames.len() < policy.min_frames_per_verb {
            continue;
        }
        out.verbs.insert(verb.clone(), gather(instances, &frames));
    }
    Ok(out)
}

/// Seeded verb-level partition into `(dev, test)` with exactly `n_test`
/// test verbs.
pub fn split_dev_test(
    dataset: &VerbDataset,
    n_test: usize,
    seed: u64,
) -> Result<(VerbDataset, VerbDataset)> {
    let available = dataset.n_verbs();
    if n_test > available {
        return Err(CorpusError::TooFewVerbs {
            requested: n_test,
            available,
        });
    }
    let mut lemmas: Vec<&str> = dataset.lemmas().collect();
    lemmas.shuffle(&mut seed::rng(seed));
    let (test, dev) = lemmas.split_at(n_test);
    Ok((
        dataset.select(dev.iter().copied()),
        dataset.select(test.iter().copied()),
    ))
}

/// Add as many mono-frame verbs from `pool` as `multi` has verbs.
///
/// A pool verb is eligible when it is not already in `multi` and exactly one
/// of its frames reaches `policy.min_instances_per_frame`; only that frame is
/// kept, capped at `policy.cap_instances_per_frame`.
pub fn augment_monoframe(
    multi: &VerbDataset,
    pool: &VerbDataset,
    policy: &FilterPolicy,
    seed: u64,
) -> Result<VerbDataset> {
    policy.validate()?;
    let needed = multi.n_verbs();
    if needed == 0 {
        return Ok(multi.clone());
    }
    if !pool.is_empty() && pool.dimension != multi.dimension {
        return Err(CorpusError::IncompatibleDimensions {
            left: multi.dimension,
            right: pool.dimension,
        });
    }
    let single = FilterPolicy {
        min_frames_per_verb: 1,
        max_frames_per_verb: usize::MAX,
        ..policy.clone()
    };
    let mut eligible: Vec<(&str, Vec<Instance>)> = Vec::new();
    for (verb, instances) in &pool.verbs {
        if multi.verbs.contains_key(verb) {
            continue;
        }
        let frames = surviving_frames(verb, instances, &single);
        if frames.len() == 1 {
            eligible.push((verb, gather(instances, &frames)));
        }
    }
    if eligible.len() < needed {
        return Err(CorpusError::PoolTooSmall {
            needed,
            available: eligible.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let picked = index::sample(&mut rng, eligible.len(), needed);
    let mut out = multi.clone();
    for p in picked {
        let (verb, instances) = &eligible[p];
        out.verbs.insert((*verb).to_string(), instances.clone());
    }
    Ok(out)
}
