//! The end-to-end commands behind the CLI. Each command reads its inputs,
//! processes verbs independently (in parallel, results in lemma order),
//! and writes a line-oriented JSON report (`<name>.jsonl`) plus an aligned
//! text report (`<name>.txt`) into the output directory.

mod config;
mod table;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use config::{ConfusionSettings, CriterionSettings, RunConfig};
use table::{fixed3, TextTable};

use crate::corpus::{self, CorpusError, Format, VerbDataset};
use crate::gmm::{self, GmmError};
use crate::mapping::{self, MappingError};
use crate::metrics::{self, ConfusionMatrix, CountPairs, MetricsError};
use crate::model_selection::{self, Criterion, SelectionError, TuneResult};
use crate::seed;
use crate::viz::{self, VizError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("input file {0} does not exist")]
    MissingInput(PathBuf),
    #[error("configuration: {0}")]
    Config(String),
    #[error("verb {0:?} is not in the input")]
    UnknownVerb(String),
    #[error("verb {verb:?} mixes group labels {first:?} and {second:?}")]
    InconsistentGroup {
        verb: String,
        first: String,
        second: String,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error(transparent)]
    Dataset(#[from] CorpusError),
    #[error("verb {verb:?}: {source}")]
    Fit {
        verb: String,
        #[source]
        source: GmmError,
    },
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Viz(#[from] VizError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Load and merge the configured input files. With `allow_empty`, inputs
/// without records yield an empty dataset instead of an error.
pub fn load_inputs(paths: &[PathBuf], allow_empty: bool) -> Result<VerbDataset> {
    let mut loaded = Vec::new();
    for path in paths {
        match corpus::load_dataset(path, Format::Jsonl) {
            Ok(ds) => loaded.push(ds),
            Err(CorpusError::EmptyFile) if allow_empty => {}
            Err(source) => {
                return Err(PipelineError::Corpus {
                    path: path.clone(),
                    source,
                })
            }
        }
    }
    match loaded.len() {
        0 if allow_empty => Ok(VerbDataset::empty(0)),
        0 => Err(CorpusError::EmptyFile.into()),
        1 => Ok(loaded.pop().expect("one dataset")),
        _ => {
            let all: Vec<_> = loaded
                .iter()
                .flat_map(|ds| ds.iter_instances().cloned())
                .collect();
            Ok(VerbDataset::from_instances(all)?)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("report records serialize"));
        out.push('\n');
    }
    out
}

/// Paths of the two report files for a command.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub jsonl: PathBuf,
    pub text: PathBuf,
}

fn write_reports<T: Serialize>(
    cfg: &RunConfig,
    name: &str,
    records: &[T],
    text: &str,
) -> Result<ReportFiles> {
    prepare_output(&cfg.output_dir)?;
    let files = ReportFiles {
        jsonl: cfg.output_dir.join(format!("{name}.jsonl")),
        text: cfg.output_dir.join(format!("{name}.txt")),
    };
    write_file(&files.jsonl, &jsonl(records))?;
    write_file(&files.text, text)?;
    Ok(files)
}

fn verb_group(ds: &VerbDataset, verb: &str) -> Result<String> {
    let instances = ds.instances(verb).unwrap_or_default();
    let first = instances.first().map_or(corpus::UNGROUPED, |i| i.group.as_str());
    if let Some(other) = instances.iter().find(|i| i.group != first) {
        return Err(PipelineError::InconsistentGroup {
            verb: verb.to_string(),
            first: first.to_string(),
            second: other.group.clone(),
        });
    }
    Ok(first.to_string())
}

fn fit_verb(cfg: &RunConfig, ds: &VerbDataset, verb: &str, n_c: usize) -> Result<gmm::FitResult> {
    let x = ds.matrix(verb).ok_or_else(|| PipelineError::UnknownVerb(verb.to_string()))?;
    let fit = cfg
        .fit
        .with_components(n_c)
        .with_seed(seed::for_verb(cfg.seed, verb));
    gmm::fit(x.view(), &fit).map_err(|source| PipelineError::Fit {
        verb: verb.to_string(),
        source,
    })
}

fn opt3(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), fixed3)
}

// ---------------------------------------------------------------- filter

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSummary {
    pub n_verbs: usize,
    pub n_frames: usize,
    pub n_instances: usize,
    pub mean_frames_per_verb: Option<f64>,
    pub mean_instances_per_frame: Option<f64>,
}

impl FilterSummary {
    pub fn of(ds: &VerbDataset) -> Self {
        let n_frames: usize = ds.lemmas().map(|v| ds.n_frames(v)).sum();
        let n_instances = ds.n_instances();
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Self {
            n_verbs: ds.n_verbs(),
            n_frames,
            n_instances,
            mean_frames_per_verb: ratio(n_frames, ds.n_verbs()),
            mean_instances_per_frame: ratio(n_instances, n_frames),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub summary: FilterSummary,
    pub dataset: VerbDataset,
    pub filtered_path: PathBuf,
    pub reports: ReportFiles,
}

/// Apply the target-verb rules and write `filtered.jsonl` plus a summary.
pub fn run_filter(cfg: &RunConfig) -> Result<FilterOutcome> {
    cfg.validate()?;
    let input = load_inputs(&cfg.input, true)?;
    let dataset = corpus::filter_targets(&input, &cfg.filter_policy())?;
    let summary = FilterSummary::of(&dataset);
    prepare_output(&cfg.output_dir)?;
    let filtered_path = cfg.output_dir.join("filtered.jsonl");
    dataset.write_jsonl(&filtered_path)?;

    let mut table = TextTable::new(["statistic", "value"]);
    table.row(["target verbs".to_string(), summary.n_verbs.to_string()]);
    table.row(["frames".to_string(), summary.n_frames.to_string()]);
    table.row(["instances".to_string(), summary.n_instances.to_string()]);
    table.row(["mean frames per verb".to_string(), opt3(summary.mean_frames_per_verb)]);
    table.row([
        "mean instances per frame".to_string(),
        opt3(summary.mean_instances_per_frame),
    ]);
    let reports = write_reports(cfg, "filter_summary", &[&summary], &table.render())?;
    Ok(FilterOutcome {
        summary,
        dataset,
        filtered_path,
        reports,
    })
}

// ---------------------------------------------------------------- eval-distinction

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerbDistinction {
    pub verb: String,
    pub group: String,
    pub n_instances: usize,
    pub n_frames: usize,
    pub match_rate: f64,
    pub all_in_one: f64,
    pub log_likelihood: f64,
    pub mapping: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub n_verbs: usize,
    pub match_rate: f64,
    pub all_in_one: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupDiffRow {
    pub first: String,
    pub second: String,
    pub match_rate_diff: f64,
    pub all_in_one_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinctionReport {
    pub seed: u64,
    pub verbs: Vec<VerbDistinction>,
    pub macro_match_rate: f64,
    pub macro_all_in_one: f64,
    pub groups: Vec<GroupRow>,
    pub group_diffs: Vec<GroupDiffRow>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum DistinctionRecord<'a> {
    Run { seed: u64, n_verbs: usize },
    Verb(&'a VerbDistinction),
    Summary {
        macro_match_rate: f64,
        macro_all_in_one: f64,
    },
    Group(&'a GroupRow),
    GroupDiff(&'a GroupDiffRow),
}

fn distinction_for_verb(cfg: &RunConfig, ds: &VerbDataset, verb: &str) -> Result<VerbDistinction> {
    let gold = ds.frame_labels(verb).expect("verb present");
    let n_frames = ds.n_frames(verb);
    let result = fit_verb(cfg, ds, verb, n_frames)?;
    let table = mapping::contingency(&result.assignments, &gold)?;
    let best = mapping::optimal_mapping(&table);
    let pairs = best
        .pairs
        .iter()
        .map(|&(c, f)| (table.cluster_ids()[c], table.frame_labels()[f].clone()))
        .collect();
    Ok(VerbDistinction {
        verb: verb.to_string(),
        group: verb_group(ds, verb)?,
        n_instances: gold.len(),
        n_frames,
        match_rate: mapping::match_rate(&table, &best),
        all_in_one: mapping::all_in_one_rate(&gold)?,
        log_likelihood: result.log_likelihood,
        mapping: pairs,
    })
}

/// Cluster each verb with as many components as it has gold frames and
/// score the clustering against the frames.
pub fn evaluate_distinction(cfg: &RunConfig, ds: &VerbDataset) -> Result<DistinctionReport> {
    let lemmas: Vec<&str> = ds.lemmas().collect();
    let verbs: Vec<VerbDistinction> = lemmas
        .par_iter()
        .map(|verb| distinction_for_verb(cfg, ds, verb))
        .collect::<Result<_>>()?;
    let rates: BTreeMap<String, f64> = verbs.iter().map(|v| (v.verb.clone(), v.match_rate)).collect();
    let baselines: BTreeMap<String, f64> =
        verbs.iter().map(|v| (v.verb.clone(), v.all_in_one)).collect();
    let macro_match_rate = mapping::macro_average(&rates)?;
    let macro_all_in_one = mapping::macro_average(&baselines)?;

    let (mut groups, mut group_diffs) = (Vec::new(), Vec::new());
    if verbs.iter().any(|v| v.group != corpus::UNGROUPED) {
        let labels: BTreeMap<String, String> =
            verbs.iter().map(|v| (v.verb.clone(), v.group.clone())).collect();
        let by_rate = mapping::grouped_average(&rates, &labels)?;
        let by_base = mapping::grouped_average(&baselines, &labels)?;
        for (g, stat) in &by_rate.groups {
            groups.push(GroupRow {
                group: g.clone(),
                n_verbs: stat.count,
                match_rate: stat.mean,
                all_in_one: by_base.groups[g].mean,
            });
        }
        for (a, b) in by_rate.diffs.iter().zip(&by_base.diffs) {
            group_diffs.push(GroupDiffRow {
                first: a.first.clone(),
                second: a.second.clone(),
                match_rate_diff: a.diff,
                all_in_one_diff: b.diff,
            });
        }
    }
    Ok(DistinctionReport {
        seed: cfg.seed,
        verbs,
        macro_match_rate,
        macro_all_in_one,
        groups,
        group_diffs,
    })
}

impl DistinctionReport {
    fn records(&self) -> Vec<DistinctionRecord<'_>> {
        let mut out = vec![DistinctionRecord::Run {
            seed: self.seed,
            n_verbs: self.verbs.len(),
        }];
        out.extend(self.verbs.iter().map(DistinctionRecord::Verb));
        out.push(DistinctionRecord::Summary {
            macro_match_rate: self.macro_match_rate,
            macro_all_in_one: self.macro_all_in_one,
        });
        out.extend(self.groups.iter().map(DistinctionRecord::Group));
        out.extend(self.group_diffs.iter().map(DistinctionRecord::GroupDiff));
        out
    }

    pub fn render_text(&self) -> String {
        let mut t = TextTable::new(["verb", "group", "instances", "frames", "match rate", "all-in-one"]);
        for v in &self.verbs {
            t.row([
                v.verb.clone(),
                v.group.clone(),
                v.n_instances.to_string(),
                v.n_frames.to_string(),
                fixed3(v.match_rate),
                fixed3(v.all_in_one),
            ]);
        }
        let mut out = t.render();
        out.push('\n');
        let mut s = TextTable::new(["macro average", "match rate", "all-in-one"]);
        s.row([
            format!("{} verbs", self.verbs.len()),
            fixed3(self.macro_match_rate),
            fixed3(self.macro_all_in_one),
        ]);
        out.push_str(&s.render());
        if !self.groups.is_empty() {
            out.push('\n');
            let mut g = TextTable::new(["group", "verbs", "match rate", "all-in-one"]);
            for row in &self.groups {
                g.row([
                    row.group.clone(),
                    row.n_verbs.to_string(),
                    fixed3(row.match_rate),
                    fixed3(row.all_in_one),
                ]);
            }
            for d in &self.group_diffs {
                g.row([
                    format!("diff {} - {}", d.first, d.second),
                    String::new(),
                    fixed3(d.match_rate_diff),
                    fixed3(d.all_in_one_diff),
                ]);
            }
            out.push_str(&g.render());
        }
        out
    }
}

pub fn run_eval_distinction(cfg: &RunConfig) -> Result<(DistinctionReport, ReportFiles)> {
    cfg.validate()?;
    let ds = load_inputs(&cfg.input, false)?;
    let report = evaluate_distinction(cfg, &ds)?;
    let files = write_reports(cfg, "eval_distinction", &report.records(), &report.render_text())?;
    Ok((report, files))
}

// ---------------------------------------------------------------- estimate-k

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub n_c: usize,
    pub k: usize,
    pub log_likelihood: f64,
    pub bic: f64,
    pub a_bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerbEstimate {
    pub verb: String,
    pub n_instances: usize,
    pub gold_frames: usize,
    pub bic: usize,
    pub a_bic: usize,
    /// Selection under the configured criterion.
    pub selected: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionScores {
    pub criterion: Criterion,
    pub c: f64,
    /// `None` when either count vector is constant.
    pub spearman: Option<f64>,
    pub accuracy: f64,
    pub rmse: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub seed: u64,
    pub criterion: Criterion,
    pub c: f64,
    pub verbs: Vec<VerbEstimate>,
    pub scores: Vec<CriterionScores>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum EstimationRecord<'a> {
    Run {
        seed: u64,
        criterion: Criterion,
        c: f64,
        n_verbs: usize,
    },
    Verb(&'a VerbEstimate),
    Scores {
        criterion: Criterion,
        c: f64,
        spearman: Option<f64>,
        accuracy: f64,
        rmse: f64,
    },
    Confusion {
        criterion: Criterion,
        #[serde(flatten)]
        matrix: &'a ConfusionMatrix,
    },
}

fn score(
    criterion: Criterion,
    c: f64,
    gold: &[usize],
    predicted: &[usize],
    buckets: &ConfusionSettings,
) -> Result<CriterionScores> {
    let pairs = CountPairs::new(gold.to_vec(), predicted.to_vec())?;
    let spearman = match metrics::spearman_rho(&pairs) {
        Ok(rho) => Some(rho),
        Err(MetricsError::UndefinedCorrelation | MetricsError::TooFew { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(CriterionScores {
        criterion,
        c,
        spearman,
        accuracy: metrics::accuracy(&pairs)?,
        rmse: metrics::rmse(&pairs)?,
        confusion: metrics::confusion(&pairs, buckets.row_max, buckets.col_max)?,
    })
}

/// Estimate every verb's frame count under BIC and the adjusted BIC with
/// the configured constant, and score both against the gold counts.
pub fn estimate_counts(cfg: &RunConfig, ds: &VerbDataset) -> Result<EstimationReport> {
    let criterion = cfg.criterion_config();
    criterion.validate()?;
    let c = criterion.c;
    let traces = model_selection::dataset_traces(ds, &criterion)?;
    let mut verbs = Vec::with_capacity(traces.len());
    for vt in traces {
        let bic = vt.trace.evaluate_bic()?;
        let abic = vt.trace.evaluate(c)?;
        let trace = bic
            .trace
            .iter()
            .zip(&abic.trace)
            .zip(&vt.trace.points)
            .map(|((b, a), p)| TraceRow {
                n_c: p.n_c,
                k: p.k,
                log_likelihood: p.log_likelihood,
                bic: b.criterion_value,
                a_bic: a.criterion_value,
            })
            .collect();
        let selected = match criterion.criterion {
            Criterion::Bic => bic.selected_n_c,
            Criterion::ABic => abic.selected_n_c,
        };
        verbs.push(VerbEstimate {
            n_instances: vt.trace.n_samples,
            verb: vt.verb,
            gold_frames: vt.gold_frames,
            bic: bic.selected_n_c,
            a_bic: abic.selected_n_c,
            selected,
            trace,
        });
    }
    let gold: Vec<usize> = verbs.iter().map(|v| v.gold_frames).collect();
    let by_bic: Vec<usize> = verbs.iter().map(|v| v.bic).collect();
    let by_abic: Vec<usize> = verbs.iter().map(|v| v.a_bic).collect();
    let scores = vec![
        score(Criterion::Bic, 1.0, &gold, &by_bic, &cfg.confusion)?,
        score(Criterion::ABic, c, &gold, &by_abic, &cfg.confusion)?,
    ];
    Ok(EstimationReport {
        seed: cfg.seed,
        criterion: criterion.criterion,
        c,
        verbs,
        scores,
    })
}

impl EstimationReport {
    fn records(&self) -> Vec<EstimationRecord<'_>> {
        let mut out = vec![EstimationRecord::Run {
            seed: self.seed,
            criterion: self.criterion,
            c: self.c,
            n_verbs: self.verbs.len(),
        }];
        out.extend(self.verbs.iter().map(EstimationRecord::Verb));
        for s in &self.scores {
            out.push(EstimationRecord::Scores {
                criterion: s.criterion,
                c: s.c,
                spearman: s.spearman,
                accuracy: s.accuracy,
                rmse: s.rmse,
            });
        }
        for s in &self.scores {
            out.push(EstimationRecord::Confusion {
                criterion: s.criterion,
                matrix: &s.confusion,
            });
        }
        out
    }

    pub fn scores_for(&self, criterion: Criterion) -> Option<&CriterionScores> {
        self.scores.iter().find(|s| s.criterion == criterion)
    }

    pub fn render_text(&self) -> String {
        let mut t = TextTable::new(["verb", "instances", "gold", "bic", "a-bic"]);
        for v in &self.verbs {
            t.row([
                v.verb.clone(),
                v.n_instances.to_string(),
                v.gold_frames.to_string(),
                v.bic.to_string(),
                v.a_bic.to_string(),
            ]);
        }
        let mut out = t.render();
        out.push('\n');
        let mut s = TextTable::new(["criterion", "c", "rho", "accuracy", "rmse"]);
        for sc in &self.scores {
            s.row([
                sc.criterion.to_string(),
                format!("{:.1}", sc.c),
                opt3(sc.spearman),
                fixed3(sc.accuracy),
                fixed3(sc.rmse),
            ]);
        }
        out.push_str(&s.render());
        for sc in &self.scores {
            out.push_str(&format!(
                "\nconfusion ({}): rows = gold frames, columns = estimated clusters\n",
                sc.criterion
            ));
            let mut m = TextTable::new(
                std::iter::once(String::new()).chain(sc.confusion.col_buckets.iter().cloned()),
            );
            for (label, row) in sc.confusion.row_buckets.iter().zip(&sc.confusion.counts) {
                m.row(std::iter::once(label.clone()).chain(row.iter().map(|c| c.to_string())));
            }
            out.push_str(&m.render());
        }
        out
    }
}

pub fn run_estimate_k(cfg: &RunConfig) -> Result<(EstimationReport, ReportFiles)> {
    cfg.validate()?;
    let ds = load_inputs(&cfg.input, false)?;
    let report = estimate_counts(cfg, &ds)?;
    let files = write_reports(cfg, "estimate_k", &report.records(), &report.render_text())?;
    Ok((report, files))
}

// ---------------------------------------------------------------- tune-c

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TuneRecord<'a> {
    Grid(&'a model_selection::GridPoint),
    Selected {
        seed: u64,
        c: f64,
        gap: usize,
        n_verbs: usize,
    },
}

/// Calibrate the adjusted-BIC constant on the input (development) verbs.
pub fn tune_constant(cfg: &RunConfig, dev: &VerbDataset) -> Result<TuneResult> {
    let mut criterion = cfg.criterion_config();
    criterion.criterion = Criterion::ABic;
    Ok(model_selection::tune_c(dev, &cfg.tune, &criterion)?)
}

pub fn render_tune_text(result: &TuneResult) -> String {
    let mut t = TextTable::new(["c", "gold total", "estimated total", "gap"]);
    for p in &result.grid {
        t.row([
            format!("{:.1}", p.c),
            p.total_gold.to_string(),
            p.total_estimated.to_string(),
            p.gap.to_string(),
        ]);
    }
    format!(
        "selected c = {:.1} (gap {}) over {} verbs\n\n{}",
        result.c,
        result.gap,
        result.verbs.len(),
        t.render()
    )
}

pub fn run_tune_c(cfg: &RunConfig) -> Result<(TuneResult, ReportFiles)> {
    cfg.validate()?;
    let dev = load_inputs(&cfg.input, false)?;
    let result = tune_constant(cfg, &dev)?;
    let mut records: Vec<TuneRecord> = result.grid.iter().map(TuneRecord::Grid).collect();
    records.push(TuneRecord::Selected {
        seed: cfg.seed,
        c: result.c,
        gap: result.gap,
        n_verbs: result.verbs.len(),
    });
    let files = write_reports(cfg, "tune_c", &records, &render_tune_text(&result))?;
    Ok((result, files))
}

// ---------------------------------------------------------------- project

/// Project the configured verb (or every verb) and write `<verb>.<ext>` per
/// requested format. Points are annotated with the cluster assigned by a
/// mixture with as many components as the verb has frames.
pub fn run_project(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_inputs(&cfg.input, false)?;
    let lemmas: Vec<&str> = match &cfg.verb {
        Some(v) if ds.instances(v).is_some() => vec![v.as_str()],
        Some(v) => return Err(PipelineError::UnknownVerb(v.clone())),
        None => ds.lemmas().collect(),
    };
    if cfg.formats.is_empty() {
        return Err(PipelineError::Config("no output format requested".into()));
    }
    prepare_output(&cfg.output_dir)?;
    let written: Vec<Vec<PathBuf>> = lemmas
        .par_iter()
        .map(|&verb| {
            let x = ds.matrix(verb).expect("verb present");
            let gold: Vec<String> = ds
                .frame_labels(verb)
                .expect("verb present")
                .into_iter()
                .map(str::to_string)
                .collect();
            let projection_cfg = viz::ProjectionConfig {
                seed: seed::for_verb(cfg.seed, verb),
                ..cfg.projection.clone()
            };
            let projection = viz::project_2d(x.view(), &projection_cfg)?;
            let clusters = fit_verb(cfg, &ds, verb, ds.n_frames(verb))?.assignments;
            let mut paths = Vec::new();
            for &format in &cfg.formats {
                let path = cfg.output_dir.join(format!("{verb}.{}", format.extension()));
                viz::emit_scatter(&projection, &gold, Some(&clusters), &path, format)?;
                paths.push(path);
            }
            Ok(paths)
        })
        .collect::<Result<_>>()?;
    Ok(written.into_iter().flatten().collect())
}
