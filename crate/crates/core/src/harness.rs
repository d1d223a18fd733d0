//! Experiment harness: cross-validated training runs, aggregate statistics,
//! and plot-ready trace files.
//!
//! Folds run in parallel; each fold owns its model and RNG streams, with
//! seeds derived deterministically from the master seed and fold index, so
//! a master seed pins the entire experiment byte-for-byte (wall-clock
//! timings excepted — they live in a separate section of the output).

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealing::{derive_seed, OdaConfig, OdaModel};
use crate::baselines::{
    batch_da_fit, kmeans_fit, label_by_majority, svq_fit, BaselineKind, BaselineModel, Seeding,
};
use crate::data::{self, Dataset, LabelColumn, Stream};
use crate::divergence::{Divergence, DivergenceKind};
use crate::error::{OdaError, Result};
use crate::metrics;
use crate::report::RunReport;

pub const EXPERIMENT_FORMAT_VERSION: u32 = 1;
pub const TRACE_FORMAT_VERSION: u32 = 1;

fn invalid(field: &str, message: String) -> OdaError {
    OdaError::InvalidConfig {
        field: field.into(),
        message,
    }
}

/// Which learner an experiment exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Oda,
    Svq,
    Kmeans,
    BatchDa,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "oda" => Ok(Algorithm::Oda),
            "svq" => Ok(Algorithm::Svq),
            "kmeans" => Ok(Algorithm::Kmeans),
            "batch-da" => Ok(Algorithm::BatchDa),
            other => Err(invalid(
                "algorithm",
                format!("unknown algorithm `{other}` (expected oda|svq|kmeans|batch-da)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Oda => "oda",
            Algorithm::Svq => "svq",
            Algorithm::Kmeans => "kmeans",
            Algorithm::BatchDa => "batch-da",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    Classify,
    Cluster,
}

/// Where the data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    Circles {
        n: usize,
        noise: f64,
        seed: u64,
    },
    Moons {
        n: usize,
        noise: f64,
        seed: u64,
    },
    /// The bundled four-cluster / three-class Gaussian layout.
    Blobs {
        n: usize,
        spread: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        /// 0-based column index or "last".
        label_column: Option<String>,
        /// Seeded uniform row subsample taken after loading.
        subsample: Option<usize>,
    },
}

/// How initial codevectors are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeedPlacement {
    /// First occurrence of each class (classification) or the first
    /// training point (clustering).
    FromData,
    /// Deliberately outside the data bounding box: above the per-coordinate
    /// maximum by `margin` times the largest box edge, staggered per seed.
    OutsideBox { margin: f64 },
}

/// Optional absolute overrides applied on top of the scaled defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamOverrides {
    pub k_max: Option<usize>,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub gamma: Option<f64>,
    pub eps_c: Option<f64>,
    pub eps_n: Option<f64>,
    pub eps_r: Option<f64>,
    pub delta: Option<f64>,
    pub step_a: Option<f64>,
    pub step_b: Option<f64>,
    pub max_obs_per_level: Option<usize>,
    pub check_every: Option<usize>,
    pub cross_class_split: Option<bool>,
    /// Override the domain scale instead of estimating it from training data.
    pub delta_s: Option<f64>,
    /// Codebook size for svq / kmeans; estimated by an online annealing run
    /// when absent.
    pub k: Option<usize>,
}

impl ParamOverrides {
    fn apply(&self, mut cfg: OdaConfig) -> OdaConfig {
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
            check_every,
            cross_class_split
        );
        cfg
    }
}

/// A full experiment description; serializable so runs can be replayed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub name: String,
    pub dataset: DatasetSpec,
    pub algorithm: Algorithm,
    pub mode: TaskMode,
    /// "euclidean" | "i-divergence".
    pub divergence: String,
    #[serde(default)]
    pub positive_shift: bool,
    #[serde(default)]
    pub min_max_scale: bool,
    pub folds: usize,
    pub master_seed: u64,
    #[serde(default = "default_seed_placement")]
    pub seed_placement: SeedPlacement,
    #[serde(default)]
    pub params: ParamOverrides,
}

fn default_format_version() -> u32 {
    EXPERIMENT_FORMAT_VERSION
}

fn default_seed_placement() -> SeedPlacement {
    SeedPlacement::FromData
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != EXPERIMENT_FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("unsupported version {}", self.format_version),
            ));
        }
        if self.folds < 2 {
            return Err(invalid("folds", "need at least 2 folds".into()));
        }
        DivergenceKind::parse(&self.divergence)?;
        match &self.dataset {
            DatasetSpec::Circles { n, noise, .. } | DatasetSpec::Moons { n, noise, .. } => {
                if *n < self.folds {
                    return Err(invalid("dataset.n", "fewer samples than folds".into()));
                }
                if *noise < 0.0 {
                    return Err(invalid("dataset.noise", "noise must be nonnegative".into()));
                }
            }
            DatasetSpec::Blobs { n, spread, .. } => {
                if *n < self.folds {
                    return Err(invalid("dataset.n", "fewer samples than folds".into()));
                }
                if *spread < 0.0 {
                    return Err(invalid("dataset.spread", "spread must be nonnegative".into()));
                }
            }
            DatasetSpec::Csv { label_column, .. } => {
                if let Some(lc) = label_column {
                    LabelColumn::parse(lc)?;
                }
            }
        }
        Ok(())
    }

    /// Materialize the dataset, applying scaling / shifting / subsampling.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let mut ds = match &self.dataset {
            DatasetSpec::Circles { n, noise, seed } => data::gen_circles(*n, *noise, *seed)?,
            DatasetSpec::Moons { n, noise, seed } => data::gen_moons(*n, *noise, *seed)?,
            DatasetSpec::Blobs { n, spread, seed } => {
                data::gen_blobs(*n, &data::gaussians_preset(), *spread, *seed)?
            }
            DatasetSpec::Csv {
                path,
                label_column,
                subsample,
            } => {
                let lc = label_column
                    .as_deref()
                    .map(LabelColumn::parse)
                    .transpose()?;
                let (mut ds, _) = data::load_csv(path, lc, false)?;
                if let Some(m) = subsample {
                    ds = ds.subsample(*m, derive_seed(self.master_seed, 0x5AB5))?;
                }
                ds
            }
        };
        if self.min_max_scale {
            ds = ds.min_max_scaled();
        }
        if self.positive_shift {
            ds = ds.positive_shift();
        }
        if matches!(self.mode, TaskMode::Cluster) {
            ds = ds.unlabeled();
        } else if ds.labels.is_none() {
            return Err(invalid(
                "mode",
                "classify mode requires a labeled dataset".into(),
            ));
        }
        Ok(ds)
    }
}

/// Per-fold outcome; `report` is present for the annealing learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub rng_seed: u64,
    pub final_k: usize,
    pub distortion: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1_macro: Option<f64>,
    pub samples_seen: u64,
    pub wall_ms: f64,
    pub report: Option<RunReport>,
}

/// Mean and unbiased sample standard deviation over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub per_fold: Vec<f64>,
}

impl Stat {
    fn from(values: Vec<f64>) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            std,
            per_fold: values,
        }
    }
}

/// Published cross-validation scores for the external comparators on the
/// bundled benchmark dataset families. Reference constants only; none of
/// these algorithms are implemented here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScores {
    pub oda: f64,
    pub svm: f64,
    pub nn: f64,
    pub rf: f64,
    pub metric: String,
}

pub fn reference_scores(key: &str) -> Option<ReferenceScores> {
    match key {
        "gaussians" => Some(ReferenceScores {
            oda: 98.9,
            svm: 79.5,
            nn: 98.6,
            rf: 98.7,
            metric: "accuracy".into(),
        }),
        "wbcd" => Some(ReferenceScores {
            oda: 90.7,
            svm: 85.6,
            nn: 92.7,
            rf: 94.6,
            metric: "accuracy".into(),
        }),
        "pima" => Some(ReferenceScores {
            oda: 70.5,
            svm: 62.9,
            nn: 76.3,
            rf: 74.4,
            metric: "accuracy".into(),
        }),
        "credit" => Some(ReferenceScores {
            oda: 95.6,
            svm: 69.1,
            nn: 58.9,
            rf: 62.8,
            metric: "f1".into(),
        }),
        _ => None,
    }
}

/// Deterministic portion of the aggregate (byte-identical across reruns of
/// the same config and master seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub accuracy: Option<Stat>,
    pub f1_macro: Option<Stat>,
    pub distortion: Option<Stat>,
    pub final_k: Stat,
    pub samples_seen: Stat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub format_version: u32,
    pub name: String,
    pub algorithm: Algorithm,
    pub master_seed: u64,
    pub folds: usize,
    /// "sample (n-1)": std is the unbiased estimator.
    pub std_estimator: String,
    pub config: ExperimentConfig,
    pub metrics: AggregateMetrics,
    pub reference: Option<ReferenceScores>,
    /// Machine-dependent; excluded from determinism guarantees.
    pub timing: Timing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_wall_ms: f64,
    pub per_fold_wall_ms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub folds: Vec<FoldOutcome>,
    pub aggregate: Aggregate,
}

/// Build the per-fold model configuration: scaled defaults from the training
/// split, then explicit overrides, with the per-level cap defaulting to ten
/// passes over the training split.
fn fold_config(
    exp: &ExperimentConfig,
    div: Divergence,
    train: &Dataset,
    model_seed: u64,
) -> OdaConfig {
    let delta_s = exp.params.delta_s.unwrap_or_else(|| train.delta_s());
    let mut cfg = OdaConfig::defaults(div, delta_s);
    cfg.max_obs_per_level = 10 * train.len();
    cfg = exp.params.apply(cfg);
    cfg.rng_seed = model_seed;
    cfg
}

fn placement_seeds(
    exp: &ExperimentConfig,
    train: &Dataset,
) -> Vec<(Vec<f64>, Option<usize>)> {
    match exp.seed_placement {
        SeedPlacement::FromData => OdaModel::seeds_from_dataset(train),
        SeedPlacement::OutsideBox { margin } => {
            let span = train.delta_s();
            let classes: Vec<Option<usize>> = if train.class_set.is_empty() {
                vec![None]
            } else {
                train.class_set.iter().map(|&c| Some(c)).collect()
            };
            classes
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let mu: Vec<f64> = train
                        .bounding_box
                        .iter()
                        .map(|(_, hi)| hi + margin * span * (1.0 + 0.25 * i as f64))
                        .collect();
                    (mu, c)
                })
                .collect()
        }
    }
}

fn run_fold(
    exp: &ExperimentConfig,
    ds: &Dataset,
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<FoldOutcome> {
    let start = std::time::Instant::now();
    let model_seed = derive_seed(exp.master_seed, 2 * fold as u64);
    let stream_seed = derive_seed(exp.master_seed, 2 * fold as u64 + 1);
    let train = ds.select(train_idx)?;
    let test = ds.select(test_idx)?;
    let kind = DivergenceKind::parse(&exp.divergence)?;
    let div = Divergence {
        kind,
        dimension: ds.d,
    };
    let cfg = fold_config(exp, div, &train, model_seed);

    let outcome = match exp.algorithm {
        Algorithm::Oda => {
            let seeds = placement_seeds(exp, &train);
            let mut model = OdaModel::init(cfg, &seeds)?;
            let mut stream = Stream::over_indices(ds, train_idx, stream_seed);
            let report = model.fit(&mut stream, Some(&test))?;
            let distortion = Some(metrics::avg_distortion(&model, &test)?);
            let (accuracy, f1) = if model.is_classifier() {
                (
                    Some(metrics::accuracy(&model, &test)?),
                    Some(metrics::f1_macro(&model, &test)?),
                )
            } else {
                (None, None)
            };
            FoldOutcome {
                fold,
                rng_seed: model_seed,
                final_k: model.k(),
                distortion,
                accuracy,
                f1_macro: f1,
                samples_seen: model.total_observations(),
                wall_ms: 0.0,
                report: Some(report),
            }
        }
        Algorithm::BatchDa => {
            let out = batch_da_fit(&train.unlabeled(), &cfg)?;
            let distortion = Some(metrics::avg_distortion(&out.model, &test)?);
            let (accuracy, f1) = classify_baseline(exp, &out.model, &train, &test)?;
            FoldOutcome {
                fold,
                rng_seed: model_seed,
                final_k: out.model.k(),
                distortion,
                accuracy,
                f1_macro: f1,
                samples_seen: out.total_presentations,
                wall_ms: 0.0,
                report: None,
            }
        }
        Algorithm::Kmeans | Algorithm::Svq => {
            let k = match exp.params.k {
                Some(k) => k,
                None => estimate_k(&cfg, ds, train_idx, stream_seed)?,
            };
            match exp.algorithm {
                Algorithm::Kmeans => {
                    let out = kmeans_fit(
                        &train.unlabeled(),
                        k,
                        div,
                        Seeding::FarthestFirst {
                            rng_seed: model_seed,
                        },
                        200,
                    )?;
                    let distortion = Some(metrics::avg_distortion(&out.model, &test)?);
                    let (accuracy, f1) = classify_baseline(exp, &out.model, &train, &test)?;
                    FoldOutcome {
                        fold,
                        rng_seed: model_seed,
                        final_k: out.model.k(),
                        distortion,
                        accuracy,
                        f1_macro: f1,
                        samples_seen: (out.iterations * train.len()) as u64,
                        wall_ms: 0.0,
                        report: None,
                    }
                }
                _ => {
                    let seeds = placement_seeds(exp, &train);
                    let codebook: Vec<Vec<f64>> = if seeds.len() >= k {
                        seeds.into_iter().take(k).map(|(mu, _)| mu).collect()
                    } else {
                        // Fill the codebook from training points after the
                        // placed seeds.
                        let mut cb: Vec<Vec<f64>> =
                            seeds.into_iter().map(|(mu, _)| mu).collect();
                        let mut i = 0;
                        while cb.len() < k {
                            cb.push(train.points[i % train.len()].clone());
                            i += 1;
                        }
                        cb
                    };
                    let mut model = BaselineModel::new(BaselineKind::Svq, div, codebook)?;
                    let steps = cfg.max_obs_per_level.max(10 * train.len());
                    let mut stream = Stream::over_indices(ds, train_idx, stream_seed);
                    svq_fit(&mut model, &mut stream, steps)?;
                    let distortion = Some(metrics::avg_distortion(&model, &test)?);
                    let (accuracy, f1) = classify_baseline(exp, &model, &train, &test)?;
                    FoldOutcome {
                        fold,
                        rng_seed: model_seed,
                        final_k: model.k(),
                        distortion,
                        accuracy,
                        f1_macro: f1,
                        samples_seen: steps as u64,
                        wall_ms: 0.0,
                        report: None,
                    }
                }
            }
        }
    };
    let mut outcome = outcome;
    outcome.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(outcome)
}

/// Majority-vote labeling of a baseline codebook, evaluated on the test fold.
fn classify_baseline(
    exp: &ExperimentConfig,
    model: &BaselineModel,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Option<f64>, Option<f64>)> {
    if !matches!(exp.mode, TaskMode::Classify) {
        return Ok((None, None));
    }
    let labeled = label_by_majority(model.clone(), train)?;
    Ok((
        Some(metrics::accuracy(&labeled, test)?),
        Some(metrics::f1_macro(&labeled, test)?),
    ))
}

/// Codebook size for svq / kmeans, taken from a completed online annealing
/// run on the same training split.
fn estimate_k(
    cfg: &OdaConfig,
    ds: &Dataset,
    train_idx: &[usize],
    stream_seed: u64,
) -> Result<usize> {
    let train = ds.select(train_idx)?.unlabeled();
    let seeds = vec![(train.points[0].clone(), None)];
    let mut model = OdaModel::init(cfg.clone(), &seeds)?;
    let unlabeled_full = ds.unlabeled();
    let mut stream = Stream::over_indices(&unlabeled_full, train_idx, stream_seed);
    model.fit(&mut stream, None)?;
    Ok(model.k())
}

/// Run all folds (in parallel), aggregate, and optionally write artifacts.
pub fn run_experiment(exp: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    exp.validate()?;
    let start = std::time::Instant::now();
    let ds = exp.load_dataset()?;
    let folds = data::kfold(&ds, exp.folds, derive_seed(exp.master_seed, 0xF01D))?;
    let results: Vec<Result<FoldOutcome>> = folds
        .par_iter()
        .enumerate()
        .map(|(i, (train, test))| run_fold(exp, &ds, i, train, test))
        .collect();
    let mut fold_outcomes = Vec::with_capacity(results.len());
    for r in results {
        fold_outcomes.push(r?);
    }

    let collect = |f: &dyn Fn(&FoldOutcome) -> Option<f64>| -> Option<Stat> {
        let vals: Vec<f64> = fold_outcomes.iter().filter_map(f).collect();
        (vals.len() == fold_outcomes.len()).then(|| Stat::from(vals))
    };
    let metrics = AggregateMetrics {
        accuracy: collect(&|f| f.accuracy),
        f1_macro: collect(&|f| f.f1_macro),
        distortion: collect(&|f| f.distortion),
        final_k: Stat::from(fold_outcomes.iter().map(|f| f.final_k as f64).collect()),
        samples_seen: Stat::from(
            fold_outcomes
                .iter()
                .map(|f| f.samples_seen as f64)
                .collect(),
        ),
    };
    let aggregate = Aggregate {
        format_version: EXPERIMENT_FORMAT_VERSION,
        name: exp.name.clone(),
        algorithm: exp.algorithm,
        master_seed: exp.master_seed,
        folds: exp.folds,
        std_estimator: "sample (n-1)".into(),
        config: exp.clone(),
        metrics,
        reference: reference_scores(&exp.name),
        timing: Timing {
            total_wall_ms: start.elapsed().as_secs_f64() * 1e3,
            per_fold_wall_ms: fold_outcomes.iter().map(|f| f.wall_ms).collect(),
        },
    };
    let outcome = ExperimentOutcome {
        folds: fold_outcomes,
        aggregate,
    };
    if let Some(dir) = out_dir {
        write_artifacts(&outcome, dir)?;
    }
    Ok(outcome)
}

/// Write one JSONL report per fold, a combined CSV trace, and the aggregate.
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    for fold in &outcome.folds {
        if let Some(report) = &fold.report {
            let path = dir.join(format!("fold_{}.report.jsonl", fold.fold));
            let file = std::fs::File::create(path)?;
            report.write_jsonl(std::io::BufWriter::new(file))?;
        }
    }
    let trace_path = dir.join("trace.csv");
    let mut trace = std::io::BufWriter::new(std::fs::File::create(trace_path)?);
    writeln!(
        trace,
        "format_version,fold,level,temperature,k_effective,samples_seen_cumulative,avg_distortion,accuracy,f1_macro,wall_time_ms,forced_advance"
    )?;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for fold in &outcome.folds {
        if let Some(report) = &fold.report {
            for (li, l) in report.levels.iter().enumerate() {
                writeln!(
                    trace,
                    "{TRACE_FORMAT_VERSION},{},{},{},{},{},{},{},{},{},{}",
                    fold.fold,
                    li,
                    l.temperature,
                    l.k_effective,
                    l.samples_seen_cumulative,
                    fmt_opt(l.avg_distortion),
                    fmt_opt(l.accuracy),
                    fmt_opt(l.f1_macro),
                    l.wall_time_ms,
                    l.forced_advance
                )?;
            }
        }
    }
    let aggregate_path = dir.join("aggregate.json");
    std::fs::write(
        aggregate_path,
        serde_json::to_string_pretty(&outcome.aggregate)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs_experiment(name: &str, algorithm: Algorithm, mode: TaskMode) -> ExperimentConfig {
        ExperimentConfig {
            format_version: EXPERIMENT_FORMAT_VERSION,
            name: name.into(),
            dataset: DatasetSpec::Blobs {
                n: 300,
                spread: 1.0,
                seed: 4,
            },
            algorithm,
            mode,
            divergence: "euclidean".into(),
            positive_shift: false,
            min_max_scale: false,
            folds: 3,
            master_seed: 7,
            seed_placement: SeedPlacement::FromData,
            params: ParamOverrides {
                k_max: Some(20),
                ..Default::default()
            },
        }
    }

    #[test]
    fn stat_uses_unbiased_std() {
        let s = Stat::from(vec![1.0, 2.0, 3.0]);
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn experiment_runs_and_aggregates() {
        let exp = blobs_experiment("gaussians", Algorithm::Oda, TaskMode::Classify);
        let out = run_experiment(&exp, None).unwrap();
        assert_eq!(out.folds.len(), 3);
        let acc = out.aggregate.metrics.accuracy.as_ref().unwrap();
        assert_eq!(acc.per_fold.len(), 3);
        assert!(acc.mean > 0.5, "accuracy mean {}", acc.mean);
        assert!(out.aggregate.reference.is_some());
    }

    #[test]
    fn baselines_take_k_from_a_completed_online_run() {
        let mut exp = blobs_experiment("gaussians", Algorithm::Kmeans, TaskMode::Cluster);
        exp.params.k_max = Some(8);
        assert!(exp.params.k.is_none());
        let out = run_experiment(&exp, None).unwrap();
        assert!(out.aggregate.metrics.final_k.mean >= 2.0);
        assert!(out.aggregate.metrics.distortion.is_some());
    }

    #[test]
    fn config_validation_names_fields() {
        let mut exp = blobs_experiment("x", Algorithm::Oda, TaskMode::Classify);
        exp.folds = 1;
        match exp.validate() {
            Err(OdaError::InvalidConfig { field, .. }) => assert_eq!(field, "folds"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }
}
