//! Command-line front end: dataset generation, training, prediction,
//! clustering, benchmark runs, and model inspection.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oda_core::annealing::{OdaConfig, OdaModel};
use oda_core::baselines::{
    batch_da_fit, kmeans_fit, svq_fit, BaselineKind, BaselineModel, Seeding,
};
use oda_core::data::{self, Dataset, LabelColumn, Stream};
use oda_core::divergence::{Divergence, DivergenceKind};
use oda_core::error::OdaError;
use oda_core::harness::{run_experiment, ExperimentConfig};
use oda_core::metrics;

#[derive(Parser)]
#[command(
    name = "oda",
    version,
    about = "Online annealing for prototype-based clustering and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    Gen(GenArgs),
    /// Train a classifier on a labeled CSV dataset.
    Train(TrainArgs),
    /// Predict labels for a CSV dataset with a trained model.
    Predict(PredictArgs),
    /// Cluster a CSV dataset with one of the algorithms.
    Cluster(ClusterArgs),
    /// Run a cross-validated benchmark experiment from a config file.
    Bench(BenchArgs),
    /// Pretty-print a saved model file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// circles | moons | blobs
    kind: String,
    #[arg(long, default_value_t = 1500)]
    n: usize,
    /// Noise level for circles/moons.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Blob spread.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Flags mirroring the model configuration fields; unset values fall back
/// to the domain-scaled defaults.
#[derive(Args, Clone)]
struct ParamArgs {
    /// euclidean | i-divergence
    #[arg(long, default_value = "euclidean")]
    divergence: String,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps_c: Option<f64>,
    #[arg(long)]
    eps_n: Option<f64>,
    #[arg(long)]
    eps_r: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    step_a: Option<f64>,
    #[arg(long)]
    step_b: Option<f64>,
    #[arg(long)]
    max_obs_per_level: Option<usize>,
    #[arg(long)]
    check_every: Option<usize>,
    #[arg(long)]
    cross_class_split: bool,
    /// Domain scale; estimated from the data when omitted.
    #[arg(long)]
    delta_s: Option<f64>,
    /// Seed for perturbation directions and streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shift features to strict positivity (required for i-divergence on
    /// data with nonpositive values).
    #[arg(long)]
    positive_shift: bool,
    /// Min-max scale each feature to [0, 1].
    #[arg(long)]
    min_max_scale: bool,
}

impl ParamArgs {
    fn build_config(&self, d: usize, delta_s: f64, train_len: usize) -> Result<OdaConfig, OdaError> {
        let kind = DivergenceKind::parse(&self.divergence)?;
        let div = Divergence { kind, dimension: d };
        let mut cfg = OdaConfig::defaults(div, self.delta_s.unwrap_or(delta_s));
        cfg.max_obs_per_level = 10 * train_len.max(1);
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(
            k_max,
            t_max,
            t_min,
            gamma,
            eps_c,
            eps_n,
            eps_r,
            delta,
            step_a,
            step_b,
            max_obs_per_level,
            check_every
        );
        cfg.cross_class_split = self.cross_class_split;
        cfg.rng_seed = self.seed;
        for warning in cfg.validate()? {
            eprintln!("warning: {warning}");
        }
        Ok(cfg)
    }

    fn load(&self, path: &Path, label_column: Option<&str>) -> Result<Dataset, OdaError> {
        let lc = label_column.map(LabelColumn::parse).transpose()?;
        let (mut ds, report) = data::load_csv(path, lc, false)?;
        if report.rejected_rows > 0 {
            eprintln!(
                "note: rejected {} row(s) with missing values",
                report.rejected_rows
            );
        }
        if self.min_max_scale {
            ds = ds.min_max_scaled();
        }
        if self.positive_shift {
            ds = ds.positive_shift();
        }
        Ok(ds)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// 0-based column index or `last`.
    #[arg(long, default_value = "last")]
    label_column: String,
    #[arg(long)]
    out: PathBuf,
    /// Write a line-delimited JSON training report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Place initial codevectors outside the data bounding box by this
    /// multiple of the largest box edge (robustness experiments).
    #[arg(long)]
    seed_outside: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Label column of the input, if it has one (enables accuracy output).
    #[arg(long)]
    label_column: Option<String>,
    /// Write predictions as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    data: PathBuf,
    /// Drop this label column before clustering, if the file has one.
    #[arg(long)]
    label_column: Option<String>,
    /// oda | svq | kmeans | batch-da
    #[arg(long, default_value = "oda")]
    algo: String,
    /// Codebook size for svq / kmeans.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config JSON; the ODA_BENCH_CONFIG environment variable
    /// overrides this path.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Print every codevector instead of the first ten.
    #[arg(long)]
    full: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &OdaError) -> u8 {
    match err {
        OdaError::InvalidConfig { .. }
        | OdaError::UnknownLabel(_)
        | OdaError::DuplicateClassSeed(_)
        | OdaError::MixedSeedLabels
        | OdaError::EmptySeeds => 2,
        OdaError::FileNotFound(_)
        | OdaError::ParseError { .. }
        | OdaError::EmptyDataset
        | OdaError::TooFewSamples { .. }
        | OdaError::DimensionMismatch { .. }
        | OdaError::DomainViolation(_) => 3,
        _ => 4,
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), OdaError> {
    let ds = match args.kind.as_str() {
        "circles" => data::gen_circles(args.n, args.noise, args.seed)?,
        "moons" => data::gen_moons(args.n, args.noise, args.seed)?,
        "blobs" => data::gen_blobs(args.n, &data::gaussians_preset(), args.spread, args.seed)?,
        other => {
            return Err(OdaError::InvalidConfig {
                field: "kind".into(),
                message: format!("unknown generator `{other}` (circles|moons|blobs)"),
            })
        }
    };
    data::write_csv(&ds, &args.out)?;
    println!(
        "wrote {} samples ({} features, {} classes) to {}",
        ds.len(),
        ds.d,
        ds.class_set.len(),
        args.out.display()
    );
    Ok(())
}

fn outside_seeds(ds: &Dataset, margin: f64) -> Vec<(Vec<f64>, Option<usize>)> {
    let span = ds.delta_s();
    let classes: Vec<Option<usize>> = if ds.class_set.is_empty() {
        vec![None]
    } else {
        ds.class_set.iter().map(|&c| Some(c)).collect()
    };
    classes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mu: Vec<f64> = ds
                .bounding_box
                .iter()
                .map(|(_, hi)| hi + margin * span * (1.0 + 0.25 * i as f64))
                .collect();
            (mu, c)
        })
        .collect()
}

fn write_report(report: &oda_core::report::RunReport, path: &Path) -> Result<(), OdaError> {
    let file = std::fs::File::create(path)?;
    report.write_jsonl(std::io::BufWriter::new(file))?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), OdaError> {
    let ds = args.params.load(&args.data, Some(&args.label_column))?;
    if ds.labels.is_none() {
        return Err(OdaError::InvalidConfig {
            field: "label_column".into(),
            message: "training requires a labeled dataset".into(),
        });
    }
    let cfg = args.params.build_config(ds.d, ds.delta_s(), ds.len())?;
    let seeds = match args.seed_outside {
        Some(margin) => outside_seeds(&ds, margin),
        None => OdaModel::seeds_from_dataset(&ds),
    };
    let mut model = OdaModel::init(cfg, &seeds)?;
    let mut stream = Stream::new(&ds, args.params.seed);
    let eval = args.report.as_ref().map(|_| &ds);
    let report = model.fit(&mut stream, eval)?;
    model.save(&args.out)?;
    if let Some(path) = &args.report {
        write_report(&report, path)?;
    }
    let acc = metrics::accuracy(&model, &ds)?;
    println!(
        "trained: K = {}, T = {:.6}, levels = {}, samples = {}, training accuracy = {:.4}",
        model.k(),
        model.temperature(),
        model.levels_done(),
        model.total_observations(),
        acc
    );
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), OdaError> {
    let model = OdaModel::load(&args.model)?;
    let lc = args
        .label_column
        .as_deref()
        .map(LabelColumn::parse)
        .transpose()?;
    let (ds, _) = data::load_csv(&args.data, lc, false)?;
    let mut predictions = Vec::with_capacity(ds.len());
    for p in &ds.points {
        predictions.push(model.predict(p)?);
    }
    if let Some(out) = &args.out {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
        writeln!(w, "format_version,row,prediction")?;
        for (i, p) in predictions.iter().enumerate() {
            writeln!(w, "1,{i},{p}")?;
        }
    }
    match &ds.labels {
        Some(labels) => {
            let hits = predictions
                .iter()
                .zip(labels)
                .filter(|(p, l)| p == l)
                .count();
            println!(
                "predicted {} rows, accuracy {:.4}",
                ds.len(),
                hits as f64 / ds.len() as f64
            );
        }
        None => println!("predicted {} rows", ds.len()),
    }
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<(), OdaError> {
    let ds = args
        .params
        .load(&args.data, args.label_column.as_deref())?
        .unlabeled();
    let cfg = args.params.build_config(ds.d, ds.delta_s(), ds.len())?;
    match args.algo.as_str() {
        "oda" => {
            let mut model = OdaModel::init(cfg, &[(ds.points[0].clone(), None)])?;
            let mut stream = Stream::new(&ds, args.params.seed);
            let eval = args.report.as_ref().map(|_| &ds);
            let report = model.fit(&mut stream, eval)?;
            if let Some(path) = &args.report {
                write_report(&report, path)?;
            }
            model.save(&args.out)?;
            let dist = metrics::avg_distortion(&model, &ds)?;
            println!(
                "clustered: K = {}, avg distortion = {:.6}, samples = {}",
                model.k(),
                dist,
                model.total_observations()
            );
        }
        "svq" => {
            let k = args.k.ok_or_else(|| OdaError::InvalidConfig {
                field: "k".into(),
                message: "svq needs --k (or run batch-da/oda first to estimate it)".into(),
            })?;
            let codebook: Vec<Vec<f64>> = (0..k).map(|i| ds.points[i % ds.len()].clone()).collect();
            let mut model = BaselineModel::new(BaselineKind::Svq, cfg.divergence, codebook)?;
            let mut stream = Stream::new(&ds, args.params.seed);
            svq_fit(&mut model, &mut stream, cfg.max_obs_per_level)?;
            save_baseline(&model, &args.out)?;
            println!(
                "clustered: K = {}, avg distortion = {:.6}",
                model.k(),
                metrics::avg_distortion(&model, &ds)?
            );
        }
        "kmeans" => {
            let k = args.k.ok_or_else(|| OdaError::InvalidConfig {
                field: "k".into(),
                message: "kmeans needs --k (or run batch-da/oda first to estimate it)".into(),
            })?;
            let out = kmeans_fit(
                &ds,
                k,
                cfg.divergence,
                Seeding::FarthestFirst {
                    rng_seed: args.params.seed,
                },
                200,
            )?;
            save_baseline(&out.model, &args.out)?;
            println!(
                "clustered: K = {}, avg distortion = {:.6}, iterations = {}",
                out.model.k(),
                out.distortion,
                out.iterations
            );
        }
        "batch-da" => {
            let out = batch_da_fit(&ds, &cfg)?;
            save_baseline(&out.model, &args.out)?;
            println!(
                "clustered: K = {}, avg distortion = {:.6}, presentations = {}",
                out.model.k(),
                metrics::avg_distortion(&out.model, &ds)?,
                out.total_presentations
            );
        }
        other => {
            return Err(OdaError::InvalidConfig {
                field: "algo".into(),
                message: format!("unknown algorithm `{other}` (oda|svq|kmeans|batch-da)"),
            })
        }
    }
    Ok(())
}

fn save_baseline(model: &BaselineModel, path: &Path) -> Result<(), OdaError> {
    #[derive(serde::Serialize)]
    struct BaselineFile<'a> {
        format_version: u32,
        #[serde(flatten)]
        model: &'a BaselineModel,
    }
    let text = serde_json::to_string_pretty(&BaselineFile {
        format_version: 1,
        model,
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), OdaError> {
    let path = std::env::var("ODA_BENCH_CONFIG")
        .map(PathBuf::from)
        .unwrap_or(args.config);
    let text = std::fs::read_to_string(&path)
        .map_err(|_| OdaError::FileNotFound(path.display().to_string()))?;
    let exp: ExperimentConfig = serde_json::from_str(&text).map_err(|e| OdaError::InvalidConfig {
        field: "config".into(),
        message: e.to_string(),
    })?;
    let outcome = run_experiment(&exp, Some(&args.out_dir))?;
    let agg = &outcome.aggregate;
    println!("experiment `{}` ({} folds):", agg.name, agg.folds);
    if let Some(acc) = &agg.metrics.accuracy {
        println!("  accuracy   {:.4} +/- {:.4}", acc.mean, acc.std);
    }
    if let Some(f1) = &agg.metrics.f1_macro {
        println!("  macro-F1   {:.4} +/- {:.4}", f1.mean, f1.std);
    }
    if let Some(d) = &agg.metrics.distortion {
        println!("  distortion {:.6} +/- {:.6}", d.mean, d.std);
    }
    println!(
        "  final K    {:.1} +/- {:.1}",
        agg.metrics.final_k.mean, agg.metrics.final_k.std
    );
    if let Some(r) = &agg.reference {
        println!(
            "  reference ({}): oda {:.1}, svm {:.1}, nn {:.1}, rf {:.1}",
            r.metric, r.oda, r.svm, r.nn, r.rf
        );
    }
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), OdaError> {
    let model = OdaModel::load(&args.model)?;
    println!("model: {}", args.model.display());
    println!(
        "  divergence      {} (d = {})",
        model.config.divergence.kind.name(),
        model.config.divergence.dimension
    );
    println!(
        "  temperature     {:.6} (t_max {:.4}, t_min {:.6}, gamma {})",
        model.temperature(),
        model.config.t_max,
        model.config.t_min,
        model.config.gamma
    );
    println!(
        "  mode            {}",
        if model.is_classifier() {
            "classification"
        } else {
            "clustering"
        }
    );
    if model.is_classifier() {
        println!("  classes         {:?}", model.classes);
        println!("  class counts    {:?}", model.class_counts);
    }
    println!(
        "  codebook        {} codevectors, {} levels completed, {} samples seen",
        model.k(),
        model.levels_done(),
        model.total_observations()
    );
    let show = if args.full { model.k() } else { model.k().min(10) };
    for (i, cv) in model.codebook.iter().take(show).enumerate() {
        let mu: Vec<String> = cv.mu.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "    [{i:3}] rho {:.5}  class {:?}  mu [{}]",
            cv.rho,
            cv.class_label,
            mu.join(", ")
        );
    }
    if show < model.k() {
        println!("    ... {} more (use --full)", model.k() - show);
    }
    Ok(())
}
