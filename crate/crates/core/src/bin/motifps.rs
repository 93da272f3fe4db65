use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use motifps::data::{class_index, read_labels_csv, DatasetPaths, SurvivalOutcome};
use motifps::partition::{FitConfig, MotifFit};
use motifps::pipeline::{
    curve_rows, curve_summaries, load_covariates_dir, load_dataset_dir, predict_new_subjects,
    read_json, run_estimate_mps, run_fit_motifs, run_km, run_weights, survival_svg,
    write_curves_csv, write_json, write_text, KmOptions, OmpsTable, RefitBootstrap, WeightsTable,
};
use motifps::regression::{LambdaChoice, OmpsModel, Penalty};
use motifps::simulation::{run_experiment, SimConfig};
use motifps::survival::VarianceForm;
use motifps::weighting::Method;
use motifps::Error;

#[derive(Parser)]
#[command(name = "motifps", version, about = "Motif-based multiple propensity scores and balance-weighted survival")]
struct Cli {
    /// JSON config file with `"schema": 1`; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "MOTIFPS_SEED")]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit motif submatrices and write the fit file.
    FitMotifs(FitArgs),
    /// Regress study-group membership on motif predictors.
    EstimateMps(EstimateArgs),
    /// Balancing weights and diagnostics from o-MPS predictions.
    Weights(WeightsArgs),
    /// Balance-weighted Kaplan–Meier curves with bootstrap bands.
    Km(KmArgs),
    /// Simulation study comparing motif and full-covariate predictors.
    Simulate(SimArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Directory with continuous.csv, factor*.csv and labels.csv.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ingest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write hyperparameter traces and co-assignment matrices here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    cond_burn_in: Option<usize>,
    #[arg(long)]
    cond_samples: Option<usize>,
    #[arg(long)]
    row_mass: Option<f64>,
    #[arg(long)]
    col_mass: Option<f64>,
    #[arg(long)]
    r2_min: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Labels file of the training subjects.
    #[arg(long, conflicts_with = "data")]
    labels: Option<PathBuf>,
    /// Dataset directory holding labels.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    penalty: Option<Penalty>,
    /// Fixed penalty level; cross-validation is used otherwise.
    #[arg(long, conflicts_with = "cv")]
    lambda: Option<f64>,
    /// Number of cross-validation folds.
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long)]
    n_lambda: Option<usize>,
    #[arg(long)]
    min_ratio: Option<f64>,
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Covariate directory of new subjects.
    #[arg(long)]
    predict: Option<PathBuf>,
    #[arg(long, requires = "predict")]
    predict_out: Option<PathBuf>,
    #[arg(long)]
    ingest: Option<PathBuf>,
    /// Restrict new subjects to existing cliques.
    #[arg(long)]
    no_new_cliques: bool,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Methods to compute, comma separated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Target group prevalences for FLEXOR, comma separated.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    /// Dataset directory for the balance table.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    ingest: Option<PathBuf>,
    /// Groups compared in the balance table.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    asb_groups: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct KmArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Labels file with time and event columns.
    #[arg(long, conflicts_with = "data")]
    labels: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Weight columns to use, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Refit the o-MPS regression in every replicate.
    #[arg(long, requires_all = ["fit", "model"])]
    bootstrap_full: bool,
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long)]
    variance: Option<VarianceForm>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p1: Option<usize>,
    #[arg(long)]
    p2: Option<usize>,
    #[arg(long)]
    svd_rank: Option<usize>,
    #[arg(long)]
    studies: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    cond_burn_in: Option<usize>,
    #[arg(long)]
    cond_samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    regressors: Vec<Penalty>,
    /// Noise sd of the planted continuous block.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Corruption rate of the planted factor block.
    #[arg(long)]
    corruption: Option<f64>,
    /// Output directory for report.csv, report.txt and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    schema: Option<u32>,
    seed: Option<u64>,
    threads: Option<usize>,
    fit: Option<FitConfig>,
    #[serde(default)]
    estimate: EstimateFile,
    #[serde(default)]
    weights: WeightsFile,
    #[serde(default)]
    km: KmFile,
    simulation: Option<SimConfig>,
    replicates: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateFile {
    penalty: Option<Penalty>,
    lambda: Option<f64>,
    cv: Option<usize>,
    n_lambda: Option<usize>,
    min_ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    methods: Option<Vec<Method>>,
    theta: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KmFile {
    bootstrap: Option<usize>,
    variance: Option<VarianceForm>,
    theta: Option<Vec<f64>>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Numerical(_) => Failure::Runtime(e.to_string()),
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn require_exists(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file or directory", path.display())))
    }
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    require_exists(path)?;
    let cfg: FileConfig = read_json(path)?;
    match cfg.schema {
        Some(1) => Ok(cfg),
        Some(v) => Err(usage(format!("{}: unsupported schema {v}", path.display()))),
        None => Err(usage(format!("{}: missing \"schema\" field", path.display()))),
    }
}

fn theta_arg(flag: &[f64], file: Option<&Vec<f64>>) -> Option<Vec<f64>> {
    if flag.is_empty() {
        file.cloned()
    } else {
        Some(flag.to_vec())
    }
}

fn check_theta(theta: &Option<Vec<f64>>, n_groups: usize) -> CliResult<()> {
    if let Some(t) = theta {
        let s: f64 = t.iter().sum();
        if t.len() != n_groups || t.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-6 {
            return Err(usage(format!(
                "theta must be {n_groups} nonnegative values summing to 1, got {t:?}"
            )));
        }
    }
    Ok(())
}

fn labels_path(labels: &Option<PathBuf>, data: &Option<PathBuf>) -> CliResult<PathBuf> {
    let p = match (labels, data) {
        (Some(l), _) => l.clone(),
        (None, Some(d)) => DatasetPaths::in_dir(d).labels,
        (None, None) => return Err(usage("either --labels or --data is required")),
    };
    require_exists(&p)?;
    Ok(p)
}

fn cmd_fit_motifs(a: &FitArgs, cfg: &FileConfig, seed: u64) -> CliResult<()> {
    require_exists(&a.data)?;
    let mut fc = cfg.fit.clone().unwrap_or_default();
    if let Some(v) = a.burn_in {
        fc.mcmc.burn_in = v;
    }
    if let Some(v) = a.samples {
        fc.mcmc.samples = v;
    }
    if let Some(v) = a.thin {
        fc.mcmc.thin = v;
        fc.conditional.thin = v;
    }
    if let Some(v) = a.cond_burn_in {
        fc.conditional.burn_in = v;
    }
    if let Some(v) = a.cond_samples {
        fc.conditional.samples = v;
    }
    if let Some(v) = a.row_mass {
        fc.row_mass = v;
    }
    if let Some(v) = a.col_mass {
        fc.col_mass = v;
    }
    if let Some(v) = a.r2_min {
        fc.r2_min = v;
    }
    fc.mcmc.seed = seed;
    fc.validate()?;
    let ds = load_dataset_dir(&a.data, a.ingest.as_deref())?;
    let (_, summary) = run_fit_motifs(&ds, &fc, &a.out, a.trace_dir.as_deref())
        .map_err(|e| match e {
            Error::InvalidArgument(_) | Error::ConstantColumn(_) | Error::Dimension(_) => Failure::from(e),
            other => Failure::Runtime(other.to_string()),
        })?;
    for (k, b) in summary.iter().enumerate() {
        println!(
            "block {}: {} cliques x {} clusters{}",
            k + 1,
            b.n_cliques,
            b.n_clusters,
            b.n_levels.map_or(String::new(), |a| format!(" ({a} levels)"))
        );
    }
    Ok(())
}

fn cmd_estimate_mps(a: &EstimateArgs, cfg: &FileConfig, seed: u64) -> CliResult<()> {
    require_exists(&a.fit)?;
    let labels = read_labels_csv(&labels_path(&a.labels, &a.data)?)?;
    let fit: MotifFit = read_json(&a.fit)?;
    let ef = &cfg.estimate;
    let penalty = a.penalty.or(ef.penalty).unwrap_or(Penalty::GroupLasso);
    let lambda = match (a.lambda, a.cv) {
        (Some(l), _) => LambdaChoice::Fixed(l),
        (None, Some(f)) => cv_choice(f, a, ef, seed),
        (None, None) => match ef.lambda {
            Some(l) => LambdaChoice::Fixed(l),
            None => cv_choice(ef.cv.unwrap_or(5), a, ef, seed),
        },
    };
    let lambda = if penalty == Penalty::None {
        LambdaChoice::Fixed(0.0)
    } else {
        lambda
    };
    let n_studies = labels.study.iter().copied().max().unwrap_or(1);
    let n_groups = labels.group.iter().copied().max().unwrap_or(1);
    let classes: Vec<usize> = labels
        .study
        .iter()
        .zip(&labels.group)
        .map(|(&s, &z)| class_index(s, z, n_groups))
        .collect();
    let (model, pred) = run_estimate_mps(&fit, &classes, n_studies * n_groups, penalty, lambda)?;
    write_json(&a.model, &model)?;
    OmpsTable {
        study: labels.study.iter().map(|&s| Some(s)).collect(),
        group: labels.group.iter().map(|&z| Some(z)).collect(),
        n_studies,
        n_groups,
        omps: pred,
    }
    .write_csv(&a.out)?;
    println!(
        "{} penalty, lambda {:.6e}, {} predictors, converged: {}",
        model.penalty,
        model.lambda,
        model.n_predictors(),
        model.converged
    );
    if let Some(dir) = &a.predict {
        require_exists(dir)?;
        let (test, has_labels) = load_covariates_dir(dir, a.ingest.as_deref())?;
        let p = predict_new_subjects(&fit, &model, &test, !a.no_new_cliques)?;
        let out = a
            .predict_out
            .clone()
            .unwrap_or_else(|| a.out.with_file_name("test_predictions.csv"));
        let lab = |v: &Vec<usize>| -> Vec<Option<usize>> {
            v.iter().map(|&x| has_labels.then_some(x)).collect()
        };
        OmpsTable {
            study: lab(&test.study),
            group: lab(&test.group),
            n_studies,
            n_groups,
            omps: p,
        }
        .write_csv(&out)?;
        println!("predicted {} new subjects into {}", test.n_subjects(), out.display());
    }
    Ok(())
}

fn cv_choice(folds: usize, a: &EstimateArgs, ef: &EstimateFile, seed: u64) -> LambdaChoice {
    LambdaChoice::Cv {
        folds,
        n_lambda: a.n_lambda.or(ef.n_lambda).unwrap_or(20),
        min_ratio: a.min_ratio.or(ef.min_ratio).unwrap_or(1e-3),
        seed,
    }
}

fn cmd_weights(a: &WeightsArgs, cfg: &FileConfig) -> CliResult<()> {
    require_exists(&a.predictions)?;
    let table = OmpsTable::read_csv(&a.predictions)?;
    let methods = if a.method.is_empty() {
        cfg.weights
            .methods
            .clone()
            .unwrap_or_else(|| vec![Method::Ic, Method::Igo, Method::Flexor])
    } else {
        a.method.clone()
    };
    let theta = theta_arg(&a.theta, cfg.weights.theta.as_ref());
    check_theta(&theta, table.n_groups)?;
    if a.asb_groups.len() != 2 {
        return Err(usage("--asb-groups takes two group labels"));
    }
    let covariates = match &a.data {
        Some(d) => {
            require_exists(d)?;
            Some(load_dataset_dir(d, a.ingest.as_deref())?)
        }
        None => None,
    };
    let (w, report) = run_weights(
        &table,
        &methods,
        theta.as_deref(),
        covariates.as_ref(),
        (a.asb_groups[0], a.asb_groups[1]),
    )?;
    w.write_csv(&a.out)?;
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    for m in &report.methods {
        println!(
            "{}: ESS {:.1}% ({:.1} subjects){}",
            m.method,
            m.ess_percent,
            m.ess_subjects,
            m.gamma
                .as_ref()
                .map_or(String::new(), |g| format!(", study weights {g:.3?}"))
        );
    }
    Ok(())
}

fn cmd_km(a: &KmArgs, cfg: &FileConfig, seed: u64) -> CliResult<()> {
    require_exists(&a.weights)?;
    let mut table = WeightsTable::read_csv(&a.weights)?;
    if !a.method.is_empty() {
        for m in &a.method {
            if table.column(*m).is_none() {
                return Err(usage(format!("{} has no '{m}' column", a.weights.display())));
            }
        }
        table.weights.retain(|(m, _)| a.method.contains(m));
    }
    let labels = read_labels_csv(&labels_path(&a.labels, &a.data)?)?;
    let survival: SurvivalOutcome = labels
        .survival
        .ok_or_else(|| usage("labels file lacks 'time' and 'event' columns"))?;
    let theta = theta_arg(&a.theta, cfg.km.theta.as_ref());
    check_theta(&theta, table.memberships.n_groups)?;
    let refit = if a.bootstrap_full {
        let fit = a.fit.as_ref().expect("clap requires --fit");
        let model = a.model.as_ref().expect("clap requires --model");
        require_exists(fit)?;
        require_exists(model)?;
        let model: OmpsModel = read_json(model)?;
        Some(RefitBootstrap {
            fit: read_json(fit)?,
            model,
        })
    } else {
        None
    };
    let opts = KmOptions {
        bootstrap: a.bootstrap.or(cfg.km.bootstrap).unwrap_or(0),
        seed,
        variance: a.variance.or(cfg.km.variance).unwrap_or_default(),
        theta,
        refit,
    };
    let curves = run_km(&table, &survival, &opts)?;
    write_curves_csv(&a.out, &curve_rows(&curves))?;
    let summaries = curve_summaries(&curves)?;
    if let Some(p) = &a.summary {
        write_json(p, &summaries)?;
    }
    if let Some(p) = &a.svg {
        write_text(p, &survival_svg(&curves))?;
    }
    for s in &summaries {
        let show = |v: Option<f64>| v.map_or("not reached".to_string(), |t| format!("{t}"));
        println!(
            "{} group {}: median {}, 10th percentile {}",
            s.method,
            s.group,
            show(s.median),
            show(s.percentile_10)
        );
    }
    Ok(())
}

fn cmd_simulate(a: &SimArgs, cfg: &FileConfig, seed: u64) -> CliResult<()> {
    let mut sc = cfg.simulation.clone().unwrap_or_default();
    if let Some(v) = a.mu {
        sc.mu = v;
    }
    if let Some(v) = a.n {
        sc.n_subjects = v;
    }
    if let Some(v) = a.p1 {
        sc.p1 = v;
    }
    if let Some(v) = a.p2 {
        sc.p2 = v;
    }
    if let Some(v) = a.svd_rank {
        sc.svd_rank = v;
    }
    if let Some(v) = a.studies {
        sc.n_studies = v;
    }
    if let Some(v) = a.groups {
        sc.n_groups = v;
    }
    if let Some(v) = a.burn_in {
        sc.fit.mcmc.burn_in = v;
    }
    if let Some(v) = a.samples {
        sc.fit.mcmc.samples = v;
    }
    if let Some(v) = a.cond_burn_in {
        sc.fit.conditional.burn_in = v;
    }
    if let Some(v) = a.cond_samples {
        sc.fit.conditional.samples = v;
    }
    if !a.regressors.is_empty() {
        sc.regressors = a.regressors.clone();
    }
    if let Some(v) = a.noise_sd {
        sc.planted.noise_sd = v;
    }
    if let Some(v) = a.corruption {
        sc.planted.corruption = v;
    }
    sc.seed = seed;
    sc.validate()?;
    let replicates = a.replicates.or(cfg.replicates).unwrap_or(20);
    if replicates == 0 {
        return Err(usage("--replicates must be positive"));
    }
    let report = run_experiment(&sc, replicates)?;
    let table = report.to_table();
    write_text(&a.out.join("report.csv"), &report.to_csv()?)?;
    write_text(&a.out.join("report.txt"), &table)?;
    write_json(&a.out.join("report.json"), &report)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let threads = cli.threads.or(cfg.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    match &cli.command {
        Command::FitMotifs(a) => cmd_fit_motifs(a, &cfg, seed),
        Command::EstimateMps(a) => cmd_estimate_mps(a, &cfg, seed),
        Command::Weights(a) => cmd_weights(a, &cfg),
        Command::Km(a) => cmd_km(a, &cfg, seed),
        Command::Simulate(a) => cmd_simulate(a, &cfg, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
