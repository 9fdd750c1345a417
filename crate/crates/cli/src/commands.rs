use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use scacsp_core::eval;
use scacsp_core::pipeline::Band;
use scacsp_core::preprocess;
use scacsp_core::subspace;
use scacsp_core::synth;
use scacsp_core::{
    CovarianceSet, Method, NsrMode, PipelineConfig, PipelineModel, RegGrid, RestMode, SubspaceSelector, SynthSpec,
    TrialSet,
};

use crate::error::{CliError, CliResult, Context};
use crate::io::{self, Session};
use crate::report::{self, num, sibling};

#[derive(Debug, Parser)]
#[command(name = "scacsp", version, about = "CSP-family spatial filtering and classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a pipeline on the train session and save the model.
    Train(TrainArgs),
    /// Evaluate a saved model on a session.
    Eval(EvalArgs),
    /// Time training and testing of several methods.
    Bench(BenchArgs),
    /// Generate a synthetic dataset from a spec file.
    Synth(SynthArgs),
    /// Accuracy over every filter-subspace x component-subspace pair.
    Grid(GridArgs),
}

/// Pipeline options; each overrides the matching `--config` field.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    /// JSON pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Filters per tail (per direction for multi-class scaCSP).
    #[arg(long)]
    pub m: Option<usize>,
    /// `lo:hi:order` in Hz, or `none`.
    #[arg(long)]
    pub band: Option<String>,
    /// `start:end` seconds from trial onset.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long = "cv-folds")]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "rank-tol")]
    pub rank_tol: Option<f64>,
    /// `class-mean` or `trial-pool`.
    #[arg(long = "ovr-rest")]
    pub ovr_rest: Option<String>,
    /// Use variances instead of log-variances as features.
    #[arg(long = "raw-features")]
    pub raw_features: bool,
    /// `cnsr` or `bnsr`.
    #[arg(long)]
    pub nsr: Option<NsrMode>,
    /// Extra-filter subspaces, e.g. `Sw_range+Sb_null`.
    #[arg(long)]
    pub extra: Option<SubspaceSelector>,
    #[arg(long = "extra-count")]
    pub extra_count: Option<usize>,
    /// Comma-separated alpha grid.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Comma-separated beta grid.
    #[arg(long)]
    pub betas: Option<String>,
}

fn parse_pair(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--{what}: cannot parse '{s}'")))
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--{what}: cannot parse '{s}'")))
}

pub fn parse_band(s: &str) -> CliResult<Option<Band>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let v = parse_pair(s, "band")?;
    match v.as_slice() {
        [lo, hi, order] if order.fract() == 0.0 && *order >= 1.0 => Ok(Some(Band {
            low_hz: *lo,
            high_hz: *hi,
            order: *order as usize,
        })),
        _ => Err(CliError::Usage(format!("--band expects lo:hi:order, got '{s}'"))),
    }
}

impl PipelineFlags {
    /// Base configuration from `--config` or `method`, then flag overrides.
    pub fn resolve(&self, method: Option<Method>) -> CliResult<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => io::read_json::<PipelineConfig>(p).map_err(|e| CliError::Usage(e.to_string()))?,
            None => PipelineConfig::new(
                self.method
                    .or(method)
                    .ok_or_else(|| CliError::Usage("either --config or --method is required".into()))?,
            ),
        };
        if let Some(m) = self.method.or(method) {
            c.method = m;
        }
        if let Some(m) = self.m {
            c.m = m;
        }
        if let Some(b) = &self.band {
            c.band = parse_band(b)?;
        }
        if let Some(w) = &self.window {
            match parse_pair(w, "window")?.as_slice() {
                [a, b] => c.window = Some((*a, *b)),
                _ => return Err(CliError::Usage(format!("--window expects start:end, got '{w}'"))),
            }
        }
        if let Some(f) = self.cv_folds {
            c.cv.folds = f;
        }
        if let Some(s) = self.seed {
            c.cv.seed = s;
        }
        if let Some(t) = self.rank_tol {
            c.rank_tol = t;
        }
        if let Some(r) = &self.ovr_rest {
            c.ovr_rest = match r.as_str() {
                "class-mean" => RestMode::ClassMean,
                "trial-pool" => RestMode::TrialPool,
                _ => return Err(CliError::Usage(format!("--ovr-rest expects class-mean or trial-pool, got '{r}'"))),
            };
        }
        if self.raw_features {
            c.log_features = false;
        }
        if let Some(n) = self.nsr {
            c.nsr_mode = Some(n);
        }
        if let Some(e) = &self.extra {
            c.extra_subspaces = Some(e.clone());
        }
        if let Some(n) = self.extra_count {
            c.extra_count = Some(n);
        }
        if self.alphas.is_some() || self.betas.is_some() {
            let base = c.grid();
            let alphas = self.alphas.as_deref().map(|s| parse_list(s, "alphas")).transpose()?.unwrap_or(base.alphas);
            let betas = self.betas.as_deref().map(|s| parse_list(s, "betas")).transpose()?.unwrap_or(base.betas);
            c.reg_grid = Some(RegGrid::new(alphas, betas).context("--alphas/--betas")?);
        }
        c.validate().context("configuration")?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON path; CV reports are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV; summary and confusion matrix go next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test")]
    pub session: Session,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated methods, combined with any `--config` file.
    #[arg(long, default_value = "csp-ovr,csp-pw,scacsp")]
    pub methods: String,
    /// Extra configuration files, each benchmarked as one row.
    #[arg(long = "bench-config")]
    pub bench_configs: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON synthetic spec.
    #[arg(long)]
    pub spec: PathBuf,
    /// Manifest path; trial files are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Trials per class tagged `test` (overrides the spec file).
    #[arg(long = "test-per-class")]
    pub test_per_class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Test-accuracy CSV; training accuracies go next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long)]
    pub band: Option<String>,
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long = "rank-tol")]
    pub rank_tol: Option<f64>,
}

/// Band-pass, window and covariance estimation as configured.
pub fn prepare(config: &PipelineConfig, trials: &TrialSet) -> CliResult<(TrialSet, CovarianceSet)> {
    let pre = config.preprocess(trials).context("preprocessing")?;
    let cov = preprocess::covariances(&pre, config.tol()).context("covariance estimation")?;
    Ok((pre, cov))
}

/// Model file: the trained pipeline plus the label names it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub label_map: BTreeMap<String, usize>,
    pub channel_names: Vec<String>,
    pub model: PipelineModel,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let config = args.pipeline.resolve(None)?;
    let loaded = io::ingest(&args.data, &[Session::Train])?;
    let (_, cov) = prepare(&config, &loaded.trials)?;
    let ctx = format!("training {}", config.method);
    let (model, report) = PipelineModel::train(&config, &cov).context(ctx)?;
    let file = ModelFile {
        label_map: loaded.manifest.label_map.clone(),
        channel_names: loaded.manifest.channel_names.clone(),
        model,
    };
    io::write_json(&args.out, &file)?;
    report::write_cv(&sibling(&args.out, "cv"), &report)?;
    report::write_cv_summary(&sibling(&args.out, "cv_summary"), &report)?;
    println!(
        "method={} trials={} alpha={} beta={} cv_accuracy={}",
        config.method,
        cov.len(),
        num(report.best.alpha),
        num(report.best.beta),
        num(report.best_accuracy)
    );
    Ok(())
}

pub fn load_model(path: &Path) -> CliResult<ModelFile> {
    io::read_json(path)
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<f64> {
    let file = load_model(&args.model)?;
    let model = &file.model;
    let loaded = io::ingest(&args.data, &[args.session])?;
    if loaded.trials.n_channels() != model.n_channels {
        return Err(CliError::Data(format!(
            "{}: data has {} channels but the model expects {}",
            args.data.display(),
            loaded.trials.n_channels(),
            model.n_channels
        )));
    }
    if loaded.manifest.label_map != file.label_map {
        return Err(CliError::Data(format!(
            "{}: label_map differs from the model's",
            args.data.display()
        )));
    }
    let (_, cov) = prepare(&model.config, &loaded.trials)?;
    let preds = model.predict_all(&cov.per_trial).context("prediction")?;
    let acc = eval::accuracy(&preds, &cov.labels).context("accuracy")?;
    let name = |id: usize| loaded.manifest.label_of(id).unwrap_or("?").to_string();
    let rows: Vec<Vec<String>> = loaded
        .entries
        .iter()
        .zip(preds.iter().zip(&cov.labels))
        .enumerate()
        .map(|(i, (e, (&p, &t)))| {
            vec![i.to_string(), e.file.display().to_string(), name(t), name(p), (p == t).to_string()]
        })
        .collect();
    report::write_csv(&args.out, &["trial", "file", "label", "predicted", "correct"], &rows)?;
    report::write_csv(
        &sibling(&args.out, "summary"),
        &["method", "session", "trials", "accuracy"],
        &[vec![
            model.config.method.to_string(),
            format!("{:?}", args.session).to_lowercase(),
            preds.len().to_string(),
            num(acc),
        ]],
    )?;
    if model.class_count > 2 {
        let cm = eval::confusion_matrix(&preds, &cov.labels, model.class_count);
        let labels: Vec<String> = (1..=model.class_count).map(name).collect();
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(labels.iter().cloned());
        let rows: Vec<Vec<String>> = cm
            .iter()
            .enumerate()
            .map(|(i, r)| std::iter::once(labels[i].clone()).chain(r.iter().map(|c| c.to_string())).collect())
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        report::write_csv(&sibling(&args.out, "confusion"), &header, &rows)?;
    }
    println!("method={} trials={} accuracy={}", model.config.method, preds.len(), num(acc));
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    /// Median over repetitions.
    pub train_s: f64,
    pub test_s: f64,
    pub accuracy: f64,
    pub train_std: f64,
    pub test_std: f64,
    pub reps: usize,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Times one fit (at the first grid point, no cross-validation) and the
/// prediction of every test trial, per configuration. Filtering, windowing
/// and training covariance estimation happen before the clock starts.
pub fn bench(configs: &[PipelineConfig], train: &TrialSet, test: &TrialSet, reps: usize) -> CliResult<Vec<BenchRow>> {
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let (_, cov) = prepare(config, train)?;
        let test_pre = config.preprocess(test).context("preprocessing")?;
        let mut train_t = Vec::with_capacity(reps);
        let mut test_t = Vec::with_capacity(reps);
        let mut accuracy = 0.0;
        for _ in 0..reps {
            let t0 = Instant::now();
            let model = PipelineModel::fit_default(config, &cov).context(format!("training {}", config.method))?;
            train_t.push(t0.elapsed().as_secs_f64());
            let t1 = Instant::now();
            let preds = test_pre
                .trials
                .iter()
                .map(|x| model.predict_trial(x))
                .collect::<scacsp_core::Result<Vec<_>>>()
                .context("prediction")?;
            test_t.push(t1.elapsed().as_secs_f64());
            accuracy = eval::accuracy(&preds, &test_pre.labels).context("accuracy")?;
        }
        info!("{}: train {:?} test {:?}", config.method, train_t, test_t);
        rows.push(BenchRow {
            method: config.method.to_string(),
            train_s: median(&train_t),
            test_s: median(&test_t),
            accuracy,
            train_std: std_dev(&train_t),
            test_std: std_dev(&test_t),
            reps,
        });
    }
    Ok(rows)
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    let mut configs = Vec::new();
    for p in &args.bench_configs {
        let mut flags = args.pipeline.clone();
        flags.config = Some(p.clone());
        configs.push(flags.resolve(None)?);
    }
    for m in args.methods.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let method: Method = m.parse().map_err(|e: scacsp_core::Error| CliError::Usage(e.to_string()))?;
        configs.push(args.pipeline.resolve(Some(method))?);
    }
    if configs.is_empty() {
        return Err(CliError::Usage("nothing to benchmark".into()));
    }
    let train = io::ingest(&args.data, &[Session::Train])?;
    let test = io::ingest(&args.data, &[Session::Test])?;
    let rows = bench(&configs, &train.trials, &test.trials, args.reps)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                num(r.train_s),
                num(r.test_s),
                num(r.accuracy),
                num(r.train_std),
                num(r.test_std),
                r.reps.to_string(),
            ]
        })
        .collect();
    report::write_csv(
        &args.out,
        &["method", "train_s", "test_s", "accuracy", "train_std", "test_std", "reps"],
        &table,
    )?;
    for r in &rows {
        println!("{:<20} train_s={:.6} test_s={:.6} accuracy={:.4}", r.method, r.train_s, r.test_s, r.accuracy);
    }
    Ok(rows)
}

/// Synthetic spec file: the generator spec plus how many trials per class to
/// tag as the test session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthFile {
    #[serde(flatten)]
    pub spec: SynthSpec,
    #[serde(default)]
    pub test_trials_per_class: usize,
    #[serde(default)]
    pub name: Option<String>,
}

/// Generates `train + test` trials per class; the first `train` repetitions
/// of every class are the train session.
pub fn synth_dataset(file: &SynthFile) -> CliResult<(TrialSet, Vec<Session>)> {
    let mut spec = file.spec.clone();
    let train = spec.trials_per_class;
    spec.trials_per_class += file.test_trials_per_class;
    let trials = synth::generate(&spec).context("synthetic generation")?;
    let k = spec.class_count();
    let sessions = (0..trials.len())
        .map(|i| if i / k < train { Session::Train } else { Session::Test })
        .collect();
    Ok((trials, sessions))
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<io::DatasetManifest> {
    let mut file: SynthFile = io::read_json(&args.spec).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(t) = args.test_per_class {
        file.test_trials_per_class = t;
    }
    let (trials, sessions) = synth_dataset(&file)?;
    let name = file.name.clone().unwrap_or_else(|| format!("synthetic-seed{}", file.spec.seed));
    let manifest = io::write_dataset(&args.out, &name, &trials, &sessions)?;
    println!(
        "wrote {} trials ({} classes) to {}",
        manifest.trials.len(),
        manifest.class_count(),
        args.out.display()
    );
    Ok(manifest)
}

pub fn cmd_grid(args: &GridArgs) -> CliResult<subspace::EmpiricalGrid> {
    let flags = PipelineFlags {
        m: Some(args.m),
        band: args.band.clone(),
        window: args.window.clone(),
        rank_tol: args.rank_tol,
        ..Default::default()
    };
    let config = flags.resolve(Some(Method::Scacsp))?;
    let train = io::ingest(&args.data, &[Session::Train])?;
    let test = io::ingest(&args.data, &[Session::Test])?;
    let (_, train_cov) = prepare(&config, &train.trials)?;
    let (_, test_cov) = prepare(&config, &test.trials)?;
    let grid = subspace::empirical_grid(&train_cov, &test_cov.per_trial, &test_cov.labels, config.m)
        .context("subspace grid")?;
    report::write_grid(&args.out, &grid, true)?;
    report::write_grid(&sibling(&args.out, "train"), &grid, false)?;
    println!("filters per source: {}", grid.filters_per_source);
    Ok(grid)
}

/// Caps the global thread pool from `SCACSP_THREADS`.
pub fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("SCACSP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("SCACSP_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Bench(a) => cmd_bench(a).map(|_| ()),
        Command::Synth(a) => cmd_synth(a).map(|_| ()),
        Command::Grid(a) => cmd_grid(a).map(|_| ()),
    }
}
