use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use verbframes::model_selection::Criterion;
use verbframes::pipeline::{self, RunConfig};
use verbframes::viz::PlotFormat;

#[derive(Parser)]
#[command(name = "verbframes", version, about = "Verb frame induction from contextual embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Keep target verbs and their surviving frames; write filtered.jsonl.
    Filter,
    /// Cluster each verb into as many clusters as gold frames and score the mapping.
    EvalDistinction,
    /// Estimate each verb's frame count with BIC and a-BIC.
    EstimateK,
    /// Calibrate the a-BIC constant on development verbs.
    TuneC,
    /// Write 2-D projections of verb embeddings.
    Project,
}

#[derive(Args)]
struct Common {
    /// Embedding file (JSONL, optionally .gz); repeatable.
    #[arg(long, global = true)]
    input: Vec<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Criterion for the `selected` column of estimate-k (bic or a-bic).
    #[arg(long, global = true)]
    criterion: Option<Criterion>,
    /// a-BIC constant.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Largest candidate component count.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Projection output format (csv or svg); repeatable.
    #[arg(long, global = true)]
    format: Vec<PlotFormat>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Verb to project.
    #[arg(long, global = true)]
    verb: Option<String>,
}

impl Common {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        if !self.input.is_empty() {
            cfg.input = self.input;
        }
        if let Some(dir) = self.output_dir {
            cfg.output_dir = dir;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(criterion) = self.criterion {
            cfg.criterion.criterion = criterion;
        }
        if let Some(c) = self.c {
            cfg.criterion.c = c;
        }
        if let Some(n) = self.n_max {
            cfg.criterion.n_c_max = n;
        }
        if !self.format.is_empty() {
            cfg.formats = self.format;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if self.verb.is_some() {
            cfg.verb = self.verb;
        }
        Ok(cfg)
    }
}

fn execute(command: Command, cfg: &RunConfig) -> anyhow::Result<()> {
    match command {
        Command::Filter => {
            let out = pipeline::run_filter(cfg)?;
            println!(
                "{} target verbs, {} instances -> {}",
                out.summary.n_verbs,
                out.summary.n_instances,
                out.filtered_path.display()
            );
        }
        Command::EvalDistinction => {
            let (report, files) = pipeline::run_eval_distinction(cfg)?;
            println!(
                "macro match rate {:.3} (all-in-one {:.3}) over {} verbs -> {}",
                report.macro_match_rate,
                report.macro_all_in_one,
                report.verbs.len(),
                files.text.display()
            );
        }
        Command::EstimateK => {
            let (report, files) = pipeline::run_estimate_k(cfg)?;
            println!("{} verbs -> {}", report.verbs.len(), files.text.display());
        }
        Command::TuneC => {
            let (result, files) = pipeline::run_tune_c(cfg)?;
            println!("c = {:.1} (gap {}) -> {}", result.c, result.gap, files.text.display());
        }
        Command::Project => {
            let paths = pipeline::run_project(cfg)?;
            println!("{} files written to {}", paths.len(), cfg.output_dir.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.common.into_config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cfg.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| anyhow::anyhow!("starting worker threads: {e}"))?;
    pool.install(|| execute(cli.command, &cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
