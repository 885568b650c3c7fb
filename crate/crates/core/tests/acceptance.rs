//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits nonzero when any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use verbframes::corpus::{self, VerbDataset};
use verbframes::gmm::{self, param_count, FitConfig, SphericalGmm};
use verbframes::mapping::{self, ContingencyTable};
use verbframes::metrics::{self, CountPairs};
use verbframes::model_selection::{self, a_bic, bic, CGrid, Criterion};
use verbframes::pipeline::{self, RunConfig};
use verbframes::seed;
use verbframes::synthetic::{self, SyntheticSpec};
use verbframes::viz::{self, ProjectionConfig};

/// Seed shared by the synthetic generators and pipeline runs below.
const SEED: u64 = 2020;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn baseline_fixture() -> Outcome {
    let mut gold = vec!["Supporting"; 30];
    gold.extend(vec!["Evidence"; 20]);
    let start = Instant::now();
    let rate = mapping::all_in_one_rate(&gold).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(rate == 0.6, || format!("rate {rate}"))?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("rate {rate} in {elapsed:?}"))
}

fn read_count_fixture() -> Result<CountPairs, String> {
    let mut reader = csv::Reader::from_path(fixture("framenet_abic_counts.csv")).map_err(|e| e.to_string())?;
    let (mut gold, mut predicted) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        gold.push(row[0].parse::<usize>().map_err(|e| e.to_string())?);
        predicted.push(row[1].parse::<usize>().map_err(|e| e.to_string())?);
    }
    CountPairs::new(gold, predicted).map_err(|e| e.to_string())
}

fn accuracy_fixture() -> Outcome {
    let pairs = read_count_fixture()?;
    ensure(pairs.len() == 240, || format!("{} rows", pairs.len()))?;
    let start = Instant::now();
    let acc = metrics::accuracy(&pairs).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure((acc - 0.5167).abs() <= 0.0005, || format!("accuracy {acc}"))?;
    let cm = metrics::confusion(&pairs, 4, 4).map_err(|e| e.to_string())?;
    let sums = cm.row_sums();
    ensure(sums[..4] == [120, 96, 20, 4], || format!("row sums {sums:?}"))?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("accuracy {acc:.4} in {elapsed:?}"))
}

fn param_count_formula() -> Outcome {
    let mut checked = 0;
    for n_c in 1..=10 {
        for d in [1, 2, 768, 1024] {
            let means = n_c * d;
            let variances = n_c;
            let weights = n_c - 1;
            let expected = means + variances + weights;
            ensure(param_count(n_c, d) == expected, || {
                format!("n_c={n_c} d={d}: {} != {expected}", param_count(n_c, d))
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} cases"))
}

fn a_bic_identity() -> Outcome {
    let mut rng = seed::rng(SEED);
    for t in 0..10_000 {
        let ll = -rng.random_range(0.0..1e6);
        let k = rng.random_range(0..5000);
        let n = rng.random_range(1..100_000);
        let b = bic(ll, k, n).map_err(|e| e.to_string())?;
        let a = a_bic(ll, k, n, 1.0).map_err(|e| e.to_string())?;
        ensure(a.to_bits() == b.to_bits(), || format!("triple {t}: {a} vs {b}"))?;
    }
    Ok("10000 triples bit-identical".into())
}

/// Best total over injective maps from the smaller side to the larger.
fn brute_force_matched(counts: &[Vec<u64>]) -> u64 {
    fn go(counts: &[Vec<u64>], row: usize, used: &mut Vec<bool>, transposed: bool) -> u64 {
        let rows = if transposed { counts[0].len() } else { counts.len() };
        if row == rows {
            return 0;
        }
        let cols = used.len();
        let mut best = 0;
        for col in 0..cols {
            if !used[col] {
                used[col] = true;
                let cell = if transposed { counts[col][row] } else { counts[row][col] };
                best = best.max(cell + go(counts, row + 1, used, transposed));
                used[col] = false;
            }
        }
        best
    }
    let (r, c) = (counts.len(), counts[0].len());
    if r <= c {
        go(counts, 0, &mut vec![false; c], false)
    } else {
        go(counts, 0, &mut vec![false; r], true)
    }
}

fn mapping_oracle() -> Outcome {
    let mut rng = seed::rng(seed::derive(SEED, "mapping"));
    let start = Instant::now();
    for t in 0..1000 {
        let n_c = rng.random_range(1..=6);
        let n_f = rng.random_range(1..=6);
        let counts: Vec<Vec<u64>> = (0..n_c)
            .map(|_| (0..n_f).map(|_| rng.random_range(0..20)).collect())
            .collect();
        if counts.iter().flatten().all(|&c| c == 0) {
            continue;
        }
        let table = ContingencyTable::from_counts(counts.clone()).map_err(|e| e.to_string())?;
        let got = mapping::optimal_mapping(&table).matched;
        let want = brute_force_matched(&counts);
        ensure(got == want, || format!("table {t} {counts:?}: {got} vs {want}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("1000 tables in {elapsed:?}"))
}

fn random_model(rng: &mut seed::Rng, n_c: usize, d: usize) -> SphericalGmm {
    let raw: Vec<f64> = (0..n_c).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = Array2::from_shape_fn((n_c, d), |_| rng.random_range(-2.0..2.0));
    let variances = (0..n_c).map(|_| rng.random_range(0.5..3.0)).collect();
    SphericalGmm::new(weights, means, variances).expect("valid model")
}

fn naive_log_likelihood(model: &SphericalGmm, x: &Array2<f64>) -> f64 {
    let d = x.ncols() as f64;
    let mut total = 0.0;
    for row in x.rows() {
        let mut density = 0.0;
        for j in 0..model.n_components() {
            let var = model.variances()[j];
            let sq: f64 = row
                .iter()
                .zip(model.means().row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let norm = (2.0 * std::f64::consts::PI * var).powf(-d / 2.0);
            density += model.weights()[j] * norm * (-sq / (2.0 * var)).exp();
        }
        total += density.ln();
    }
    total
}

fn likelihood_oracle() -> Outcome {
    let mut rng = seed::rng(seed::derive(SEED, "likelihood"));
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(1..=50);
        let n_c = rng.random_range(1..=4);
        let model = random_model(&mut rng, n_c, d);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let got = model.log_likelihood(x.view()).map_err(|e| e.to_string())?;
        let want = naive_log_likelihood(&model, &x);
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("pair {t}: {got} vs {want}"))?;
    }
    Ok(format!("100 pairs, worst relative error {worst:.1e}"))
}

fn em_properties() -> Outcome {
    let mut rng = seed::rng(seed::derive(SEED, "em"));
    let start = Instant::now();
    let mut runs = 0;
    for t in 0..200 {
        let d = rng.random_range(1..=16);
        let n_c = rng.random_range(1..=5);
        let n = rng.random_range(n_c.max(10)..=120);
        let true_components = rng.random_range(1..=5);
        let truth = random_model(&mut rng, true_components, d);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x = Array2::from_shape_fn((n, d), |(i, k)| {
            let j = i % truth.n_components();
            truth.means()[[j, k]] + truth.variances()[j].sqrt() * noise.sample(&mut rng)
        });
        let config = FitConfig::default().with_components(n_c).with_seed(t);
        let result = gmm::fit(x.view(), &config).map_err(|e| format!("fit {t}: {e}"))?;
        for (r, restart) in result.restarts.iter().enumerate() {
            for (i, w) in restart.history.windows(2).enumerate() {
                ensure(w[1] >= w[0] - 1e-8, || {
                    format!("fit {t} restart {r} iteration {i}: {} -> {}", w[0], w[1])
                })?;
            }
            runs += 1;
        }
        let max = result
            .restarts
            .iter()
            .map(|r| r.log_likelihood)
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(result.log_likelihood == max, || format!("fit {t}: returned {} < max {max}", result.log_likelihood))?;
        ensure(result.restarts[result.best_restart].log_likelihood == max, || format!("fit {t}: wrong index"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("200 fits ({runs} EM runs) in {elapsed:?}"))
}

fn write_input(ds: &VerbDataset, dir: &Path, name: &str) -> Result<PathBuf, String> {
    let path = dir.join(name);
    ds.write_jsonl(&path).map_err(|e| e.to_string())?;
    Ok(path)
}

fn run_config(input: PathBuf, output_dir: PathBuf) -> RunConfig {
    RunConfig {
        input: vec![input],
        output_dir,
        seed: SEED,
        ..RunConfig::default()
    }
}

fn distinction_spec(separation: f64) -> SyntheticSpec {
    SyntheticSpec {
        n_verbs: 20,
        min_frames: 2,
        max_frames: 4,
        min_per_frame: 20,
        max_per_frame: 100,
        dimension: 16,
        separation,
        seed: SEED,
        ..SyntheticSpec::default()
    }
}

fn synthetic_distinction() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (label, separation) in [("6σ", 6.0), ("0σ", 0.0)] {
        let ds = synthetic::generate(&distinction_spec(separation));
        let input = write_input(&ds, dir.path(), &format!("sep{separation}.jsonl"))?;
        let cfg = run_config(input, dir.path().join(format!("out{separation}")));
        let (report, _) = pipeline::run_eval_distinction(&cfg).map_err(|e| e.to_string())?;
        let (rate, base) = (report.macro_match_rate, report.macro_all_in_one);
        lines.push(format!("{label}: match {rate:.4} baseline {base:.4}"));
        if separation > 0.0 && rate < 0.95 {
            failures.push(format!("6σ macro match rate {rate:.4} < 0.95"));
        }
        if separation == 0.0 && (rate - base).abs() > 0.05 {
            failures.push(format!("0σ gap {:.4} exceeds 0.05", rate - base));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(60) {
        failures.push(format!("took {elapsed:?}"));
    }
    let detail = format!("{}; {elapsed:?}", lines.join(", "));
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} ({detail})", failures.join("; ")))
    }
}

fn synthetic_estimation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let ds = synthetic::generate(&SyntheticSpec {
        n_verbs: 60,
        ..distinction_spec(6.0)
    });
    let (dev, test) = corpus::split_dev_test(&ds, 40, SEED).map_err(|e| e.to_string())?;
    ensure(dev.n_verbs() == 20 && test.n_verbs() == 40, || "bad split".into())?;

    let dev_cfg = run_config(write_input(&dev, dir.path(), "dev.jsonl")?, dir.path().join("tune"));
    let (tuned, _) = pipeline::run_tune_c(&dev_cfg).map_err(|e| e.to_string())?;

    let mut test_cfg = run_config(write_input(&test, dir.path(), "test.jsonl")?, dir.path().join("test"));
    test_cfg.criterion.criterion = Criterion::ABic;
    test_cfg.criterion.c = tuned.c;
    let (report, _) = pipeline::run_estimate_k(&test_cfg).map_err(|e| e.to_string())?;
    let scores = report.scores_for(Criterion::ABic).ok_or("no a-bic scores")?;

    let grid = CGrid::default().values().map_err(|e| e.to_string())?;
    let test_traces =
        model_selection::dataset_traces(&test, &test_cfg.criterion_config()).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for vt in tuned.verbs.iter().chain(&test_traces) {
        let mut previous = usize::MAX;
        for &c in &grid {
            let n = vt.trace.evaluate(c).map_err(|e| e.to_string())?.selected_n_c;
            ensure(n <= previous, || format!("{}: selection rises to {n} at c={c}", vt.verb))?;
            previous = n;
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "c={:.1}, accuracy {:.3}, rmse {:.3}, {checked} traces monotone, {elapsed:?}",
        tuned.c, scores.accuracy, scores.rmse
    );
    ensure(scores.accuracy >= 0.8, || format!("accuracy below 0.8 ({detail})"))?;
    ensure(scores.rmse <= 0.6, || format!("rmse above 0.6 ({detail})"))?;
    within(elapsed, Duration::from_secs(120))?;
    Ok(detail)
}

fn pairs(gold: &[usize], predicted: &[usize]) -> CountPairs {
    CountPairs::new(gold.to_vec(), predicted.to_vec()).expect("valid pairs")
}

/// Rank by counting smaller and equal values.
fn rank_oracle(values: &[usize]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&u| u < v).count() as f64;
            let equal = values.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

fn metric_units() -> Outcome {
    let err = |e: metrics::MetricsError| e.to_string();
    let up = metrics::spearman_rho(&pairs(&[1, 2, 3], &[1, 2, 3])).map_err(err)?;
    let down = metrics::spearman_rho(&pairs(&[1, 2, 3], &[3, 2, 1])).map_err(err)?;
    ensure(up == 1.0 && down == -1.0, || format!("rho {up}, {down}"))?;
    let rmse = metrics::rmse(&pairs(&[1, 3], &[2, 2])).map_err(err)?;
    ensure(rmse == 1.0, || format!("rmse {rmse}"))?;
    let (g, p) = ([1, 2, 2, 3], [1, 3, 2, 4]);
    let tied = metrics::spearman_rho(&pairs(&g, &p)).map_err(err)?;
    let oracle = pearson_oracle(&rank_oracle(&g), &rank_oracle(&p));
    ensure((tied - oracle).abs() <= 1e-12, || format!("tied {tied} vs {oracle}"))?;
    Ok(format!("rho ±1, rmse 1, tied {tied:.6}"))
}

fn projection() -> Outcome {
    let mut rng = seed::rng(seed::derive(SEED, "blobs"));
    let noise = Normal::new(0.0, 1.0).unwrap();
    let n = 100;
    let labels: Vec<usize> = (0..n).map(|i| i / 50).collect();
    let x = Array2::from_shape_fn((n, 16), |(i, k)| {
        noise.sample(&mut rng) + if labels[i] == 1 && k < 4 { 8.0 } else { 0.0 }
    });
    let config = ProjectionConfig {
        seed: SEED,
        ..ProjectionConfig::default()
    };
    let a = viz::project_2d(x.view(), &config).map_err(|e| e.to_string())?;
    let b = viz::project_2d(x.view(), &config).map_err(|e| e.to_string())?;
    let bits = |p: &viz::Projection| p.coords.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&a) == bits(&b), || "coordinates differ between runs".into())?;
    ensure(a.coords.dim() == (n, 2), || format!("shape {:?}", a.coords.dim()))?;
    ensure(a.final_kl.is_finite() && a.final_kl < a.initial_kl, || {
        format!("kl {} -> {}", a.initial_kl, a.final_kl)
    })?;
    let centroid = |label: usize| {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == label).collect();
        let m = rows.len() as f64;
        (
            rows.iter().map(|&i| a.coords[[i, 0]]).sum::<f64>() / m,
            rows.iter().map(|&i| a.coords[[i, 1]]).sum::<f64>() / m,
        )
    };
    let centroids = [centroid(0), centroid(1)];
    let correct = (0..n)
        .filter(|&i| {
            let dist = |c: (f64, f64)| (a.coords[[i, 0]] - c.0).powi(2) + (a.coords[[i, 1]] - c.1).powi(2);
            let nearest = if dist(centroids[1]) < dist(centroids[0]) { 1 } else { 0 };
            nearest == labels[i]
        })
        .count();
    let separability = correct as f64 / n as f64;
    ensure(separability >= 0.95, || format!("separability {separability}"))?;
    Ok(format!(
        "kl {:.3} -> {:.3}, separability {separability:.2}",
        a.initial_kl, a.final_kl
    ))
}

fn run_all_commands(cfg: &RunConfig, jobs: usize) -> Result<Vec<(String, Vec<u8>)>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let mut files = Vec::new();
        let filter = pipeline::run_filter(cfg).map_err(|e| e.to_string())?;
        files.push(filter.filtered_path);
        files.push(filter.reports.jsonl);
        files.push(pipeline::run_eval_distinction(cfg).map_err(|e| e.to_string())?.1.jsonl);
        files.push(pipeline::run_estimate_k(cfg).map_err(|e| e.to_string())?.1.jsonl);
        files.push(pipeline::run_tune_c(cfg).map_err(|e| e.to_string())?.1.jsonl);
        files
            .into_iter()
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                fs::read(&p).map(|bytes| (name, bytes)).map_err(|e| e.to_string())
            })
            .collect()
    })
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = synthetic::generate(&SyntheticSpec {
        n_verbs: 8,
        max_per_frame: 40,
        ..distinction_spec(4.0)
    });
    let input = write_input(&ds, dir.path(), "in.jsonl")?;
    let first = run_all_commands(&run_config(input.clone(), dir.path().join("one")), 1)?;
    let second = run_all_commands(&run_config(input, dir.path().join("two")), 3)?;
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} reports byte-identical (1 vs 3 threads)", first.len()))
}

fn main() {
    let criteria: [Check; 12] = [
        ("fixture: all-in-one baseline", baseline_fixture),
        ("fixture: accuracy", accuracy_fixture),
        ("formula: param_count", param_count_formula),
        ("identity: a_bic(c=1) == bic", a_bic_identity),
        ("oracle: optimal mapping", mapping_oracle),
        ("oracle: log-likelihood", likelihood_oracle),
        ("property: EM monotone, best restart", em_properties),
        ("end-to-end: synthetic distinction", synthetic_distinction),
        ("end-to-end: synthetic estimation", synthetic_estimation),
        ("metrics units", metric_units),
        ("t-SNE projection", projection),
        ("determinism: reports byte-identical", pipeline_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{elapsed:.2?}]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason} [{elapsed:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
