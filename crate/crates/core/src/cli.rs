//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{parse_config, RunConfig, TrainMode};
use crate::cuttlefish::{cf_optimize, functions};
use crate::dataset::{self, Dataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pipeline::{self, TrainedModel};

#[derive(Debug, Parser)]
#[command(name = "cobrnn", version, about = "Cuttlefish-optimized bidirectional RNN scene classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (`key=value`); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled texture dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        classes: Option<String>,
        #[arg(long = "per-class")]
        per_class: Option<String>,
        #[arg(long)]
        height: Option<String>,
        #[arg(long)]
        width: Option<String>,
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit row-wise PCA on a dataset and write the model.
    Pca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize a benchmark function with the cuttlefish optimizer.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        dim: Option<String>,
        #[arg(long)]
        budget: Option<String>,
        #[arg(long = "pop-size")]
        pop_size: Option<String>,
        /// Convergence curve CSV.
        #[arg(long, default_value = "convergence.csv")]
        curve: PathBuf,
        /// Best point JSON.
        #[arg(long, default_value = "best.json")]
        best: PathBuf,
    },
    /// Train a model; hyperparameters are searched unless `train.mode = fixed`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        /// Validation data; otherwise `split.val_ratio` of the training data.
        #[arg(long)]
        val: Option<PathBuf>,
        /// Test data to score the final model on.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Search log and optional test metrics.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a trained model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(common: &Common, flags: &[(&str, &Option<String>)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_config(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = &common.seed {
        cfg.set("seed", s)?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn file_sha(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn input_record(path: &Path) -> Result<serde_json::Value> {
    Ok(json!({ "path": path.display().to_string(), "sha256": file_sha(path)? }))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn manifest_comments(manifest: &str) -> Vec<String> {
    manifest.lines().map(|l| format!("manifest: {l}")).collect()
}

fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let ds = dataset::generate_synthetic(
        cfg.data_classes,
        cfg.data_per_class,
        cfg.data_height,
        cfg.data_width,
        cfg.data_noise,
        cfg.seed,
    )?;
    dataset::save_scenes_with_comments(&ds, &manifest_comments(&cfg.manifest()), out)?;
    Ok(format!(
        "generated {} samples ({} classes, {}x{}) -> {}",
        ds.len(),
        ds.n_classes,
        ds.height,
        ds.width,
        out.display()
    ))
}

fn cmd_pca(cfg: &RunConfig, input: &Path, out: &Path) -> Result<String> {
    let ds = dataset::load_scenes(input)?;
    let patches = pipeline::preprocess_dataset(&ds, &cfg.preprocess())?;
    let model = pipeline::fit_row_pca(&patches, cfg.pca_k)?;
    let retained: f64 = model.explained_ratio.iter().sum();
    write_json(
        out,
        &json!({
            "manifest": cfg.manifest(),
            "config_sha": cfg.config_sha(),
            "input": input_record(input)?,
            "preprocess": cfg.preprocess(),
            "pca": model,
        }),
    )?;
    Ok(format!(
        "pca k={} of {} retains {:.6} of the variance -> {}",
        cfg.pca_k,
        ds.width,
        retained,
        out.display()
    ))
}

fn cmd_optimize(cfg: &RunConfig, curve_path: &Path, best_path: &Path) -> Result<String> {
    let (f, lo, hi) = functions::by_name(&cfg.optimize_function)
        .ok_or_else(|| Error::usage(format!("unknown function {:?}", cfg.optimize_function)))?;
    let co = cfg.cuttlefish(vec![lo; cfg.optimize_dim], vec![hi; cfg.optimize_dim]);
    let result = cf_optimize(&co, &f)?;
    let mut csv = String::new();
    for line in manifest_comments(&cfg.manifest()) {
        csv.push_str(&format!("# {line}\n"));
    }
    csv.push_str("iter,best_fitness\n");
    for (i, v) in result.curve.iter().enumerate() {
        csv.push_str(&format!("{i},{v:e}\n"));
    }
    write_atomic(curve_path, csv.as_bytes())?;
    write_json(
        best_path,
        &json!({
            "manifest": cfg.manifest(),
            "config_sha": cfg.config_sha(),
            "function": cfg.optimize_function,
            "best_point": result.best_point,
            "best_fitness": result.best_fitness,
            "evals_used": result.evals_used,
            "iterations": result.iterations(),
        }),
    )?;
    Ok(format!(
        "{} d={}: best {:e} after {} evaluations -> {}, {}",
        cfg.optimize_function,
        cfg.optimize_dim,
        result.best_fitness,
        result.evals_used,
        curve_path.display(),
        best_path.display()
    ))
}

struct TrainPaths<'a> {
    train: &'a Path,
    val: Option<&'a Path>,
    test: Option<&'a Path>,
    out: &'a Path,
    report: Option<&'a Path>,
}

fn cmd_train(cfg: &RunConfig, paths: TrainPaths<'_>) -> Result<String> {
    let full = dataset::load_scenes(paths.train)?;
    let (train, val) = match paths.val {
        Some(p) => (full, dataset::load_scenes(p)?),
        None => dataset::split(&full, &cfg.val_split_spec())?,
    };
    let test = paths.test.map(dataset::load_scenes).transpose()?;
    let manifest = cfg.manifest();
    let inner = cfg.inner();

    let (model, search) = match cfg.train_mode {
        TrainMode::Co => {
            let (m, log) = pipeline::train_co_brnn(&train, &val, &cfg.search(), &inner, &manifest)?;
            (m, Some(log))
        }
        TrainMode::Fixed => {
            let all = train.concat(&val)?;
            (pipeline::train_fixed(&all, &cfg.fixed_hyper(), &inner, cfg.seed, &manifest)?, None)
        }
    };
    let metrics = test.as_ref().map(|t| pipeline::evaluate_model(&model, t)).transpose()?;
    let mut text = model.to_json()?;
    text.push('\n');
    write_atomic(paths.out, text.as_bytes())?;

    if let Some(rp) = paths.report {
        let mut inputs = vec![input_record(paths.train)?];
        for p in [paths.val, paths.test].into_iter().flatten() {
            inputs.push(input_record(p)?);
        }
        write_json(
            rp,
            &json!({
                "manifest": manifest,
                "config_sha": cfg.config_sha(),
                "inputs": inputs,
                "search": search,
                "test": metrics,
            }),
        )?;
    }
    let h = &model.brnn.config;
    let mut summary = format!(
        "trained hidden={} k={} lr={:.4e} l2={:.4e} ({} search evaluations) -> {}",
        h.hidden_dim,
        h.input_dim,
        h.learning_rate,
        h.l2,
        model.provenance.evals,
        paths.out.display()
    );
    if let Some(m) = &metrics {
        summary.push_str(&format!("; test accuracy {:.4}", m.accuracy));
    }
    Ok(summary)
}

fn cmd_evaluate(model_path: &Path, data: &Path, out: &Path) -> Result<String> {
    let model = TrainedModel::from_json(&std::fs::read_to_string(model_path)?)?;
    let test: Dataset = dataset::load_scenes(data)?;
    let report = pipeline::evaluate_model(&model, &test)?;
    write_json(
        out,
        &json!({
            "manifest": model.provenance.manifest,
            "config_sha": model.provenance.config_sha,
            "inputs": [input_record(model_path)?, input_record(data)?],
            "metrics": report,
        }),
    )?;
    Ok(format!(
        "accuracy {:.4}, f-score {:.4} on {} samples -> {}",
        report.accuracy,
        report.f_score,
        report.samples,
        out.display()
    ))
}

/// Execute a parsed command, returning the one-line summary.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate {
            common,
            classes,
            per_class,
            height,
            width,
            noise,
            out,
        } => {
            let cfg = resolve(
                &common,
                &[
                    ("data.classes", &classes),
                    ("data.per_class", &per_class),
                    ("data.height", &height),
                    ("data.width", &width),
                    ("data.noise", &noise),
                ],
            )?;
            cmd_generate(&cfg, &out)
        }
        Command::Pca { common, input, k, out } => {
            let cfg = resolve(&common, &[("pca.k", &k)])?;
            cmd_pca(&cfg, &input, &out)
        }
        Command::Optimize {
            common,
            function,
            dim,
            budget,
            pop_size,
            curve,
            best,
        } => {
            let cfg = resolve(
                &common,
                &[
                    ("optimize.function", &function),
                    ("optimize.dim", &dim),
                    ("co.budget", &budget),
                    ("co.pop_size", &pop_size),
                ],
            )?;
            cmd_optimize(&cfg, &curve, &best)
        }
        Command::Train {
            common,
            train,
            val,
            test,
            mode,
            out,
            report,
        } => {
            let cfg = resolve(&common, &[("train.mode", &mode)])?;
            cmd_train(
                &cfg,
                TrainPaths {
                    train: &train,
                    val: val.as_deref(),
                    test: test.as_deref(),
                    out: &out,
                    report: report.as_deref(),
                },
            )
        }
        Command::Evaluate { model, data, out } => cmd_evaluate(&model, &data, &out),
    }
}

/// Parse `argv`, run, print the summary or error, and return the exit code.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
