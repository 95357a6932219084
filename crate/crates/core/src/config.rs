//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment line. Keys are dotted
//! (`co.pop_size`, `brnn.hidden_dim`). Anything unset takes its default,
//! and [`RunConfig::manifest`] echoes the fully resolved set.

use std::str::FromStr;

use crate::cuttlefish::{CuttlefishConfig, DEFAULT_GROUP_FRACTIONS};
use crate::dataset::SplitSpec;
use crate::error::{Error, Result};
use crate::pipeline::{sha256_hex, Hyper, InnerConfig, SearchConfig};
use crate::preprocess::{NormMode, PreprocessConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Cuttlefish search over hyperparameters, then a final fit.
    Co,
    /// Single fit at the `brnn.*` hyperparameters.
    Fixed,
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "co" => Ok(TrainMode::Co),
            "fixed" => Ok(TrainMode::Fixed),
            other => Err(Error::usage(format!("unknown train mode {other:?} (expected co or fixed)"))),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMode::Co => "co",
            TrainMode::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,

    pub data_classes: usize,
    pub data_per_class: usize,
    pub data_height: usize,
    pub data_width: usize,
    pub data_noise: f64,

    pub split_train_ratio: f64,
    pub split_stratified: bool,
    /// Share of the training file held out for validation when no
    /// validation file is given.
    pub split_val_ratio: f64,

    pub preprocess_mode: NormMode,
    pub preprocess_denoise_window: usize,

    pub pca_k: usize,

    pub co_pop_size: usize,
    pub co_budget: usize,
    pub co_groups: [f64; 4],
    pub co_q1: f64,
    pub co_q2: f64,
    pub co_u1: f64,
    pub co_u2: f64,

    pub search_pop_size: usize,
    pub search_budget: usize,
    pub search_epochs: usize,

    pub train_mode: TrainMode,

    pub brnn_hidden_dim: usize,
    pub brnn_learning_rate: f64,
    pub brnn_l2: f64,
    pub brnn_epochs: usize,
    pub brnn_batch: usize,
    pub brnn_grad_clip: f64,
    pub brnn_init_scale: f64,

    pub optimize_function: String,
    pub optimize_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let inner = InnerConfig::default();
        let search = SearchConfig::default();
        RunConfig {
            seed: 0,
            data_classes: 4,
            data_per_class: 50,
            data_height: 16,
            data_width: 16,
            data_noise: 0.1,
            split_train_ratio: 0.5,
            split_stratified: true,
            split_val_ratio: 0.3,
            preprocess_mode: inner.preprocess.mode,
            preprocess_denoise_window: inner.preprocess.denoise_window,
            pca_k: 8,
            co_pop_size: 40,
            co_budget: 50_000,
            co_groups: DEFAULT_GROUP_FRACTIONS,
            co_q1: search.q1,
            co_q2: search.q2,
            co_u1: search.u1,
            co_u2: search.u2,
            search_pop_size: search.pop_size,
            search_budget: search.budget,
            search_epochs: inner.search_epochs,
            train_mode: TrainMode::Co,
            brnn_hidden_dim: 16,
            brnn_learning_rate: 0.1,
            brnn_l2: 1e-4,
            brnn_epochs: inner.final_epochs,
            brnn_batch: inner.batch,
            brnn_grad_clip: inner.grad_clip,
            brnn_init_scale: inner.init_scale,
            optimize_function: "sphere".to_string(),
            optimize_dim: 10,
        }
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "seed",
    "data.classes",
    "data.per_class",
    "data.height",
    "data.width",
    "data.noise",
    "split.train_ratio",
    "split.stratified",
    "split.val_ratio",
    "preprocess.mode",
    "preprocess.denoise_window",
    "pca.k",
    "co.pop_size",
    "co.budget",
    "co.g1",
    "co.g2",
    "co.g3",
    "co.g4",
    "co.q1",
    "co.q2",
    "co.u1",
    "co.u2",
    "search.pop_size",
    "search.budget",
    "search.epochs",
    "train.mode",
    "brnn.hidden_dim",
    "brnn.learning_rate",
    "brnn.l2",
    "brnn.epochs",
    "brnn.batch",
    "brnn.grad_clip",
    "brnn.init_scale",
    "optimize.function",
    "optimize.dim",
];

fn parse_count(key: &str, v: &str, min: usize) -> Result<usize> {
    let n: i128 = v
        .parse()
        .map_err(|_| Error::usage(format!("{key}: expected an integer, got {v:?}")))?;
    if n < min as i128 || n > usize::MAX as i128 {
        return Err(Error::usage(format!("{key} must be >= {min}, got {n}")));
    }
    Ok(n as usize)
}

fn parse_real(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::usage(format!("{key}: expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(Error::usage(format!("{key} must be finite")));
    }
    Ok(x)
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x = parse_real(key, v)?;
    if x <= 0.0 {
        return Err(Error::usage(format!("{key} must be > 0, got {x}")));
    }
    Ok(x)
}

fn parse_nonneg(key: &str, v: &str) -> Result<f64> {
    let x = parse_real(key, v)?;
    if x < 0.0 {
        return Err(Error::usage(format!("{key} must be >= 0, got {x}")));
    }
    Ok(x)
}

fn parse_ratio(key: &str, v: &str) -> Result<f64> {
    let x = parse_real(key, v)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::usage(format!("{key} must lie strictly between 0 and 1, got {x}")));
    }
    Ok(x)
}

impl RunConfig {
    /// Set one key from its textual value, checking the key's invariant.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::usage(format!("seed: expected an unsigned 64-bit integer, got {v:?}")))?
            }
            "data.classes" => self.data_classes = parse_count(key, v, 2)?,
            "data.per_class" => self.data_per_class = parse_count(key, v, 1)?,
            "data.height" => self.data_height = parse_count(key, v, 1)?,
            "data.width" => self.data_width = parse_count(key, v, 1)?,
            "data.noise" => self.data_noise = parse_nonneg(key, v)?,
            "split.train_ratio" => self.split_train_ratio = parse_ratio(key, v)?,
            "split.stratified" => {
                self.split_stratified = v
                    .parse()
                    .map_err(|_| Error::usage(format!("{key}: expected true or false, got {v:?}")))?
            }
            "split.val_ratio" => self.split_val_ratio = parse_ratio(key, v)?,
            "preprocess.mode" => self.preprocess_mode = v.parse()?,
            "preprocess.denoise_window" => {
                let w = parse_count(key, v, 1)?;
                if w % 2 == 0 {
                    return Err(Error::usage(format!("{key} must be odd, got {w}")));
                }
                self.preprocess_denoise_window = w;
            }
            "pca.k" => self.pca_k = parse_count(key, v, 1)?,
            "co.pop_size" => self.co_pop_size = parse_count(key, v, 1)?,
            "co.budget" => self.co_budget = parse_count(key, v, 1)?,
            "co.g1" => self.co_groups[0] = parse_nonneg(key, v)?,
            "co.g2" => self.co_groups[1] = parse_nonneg(key, v)?,
            "co.g3" => self.co_groups[2] = parse_nonneg(key, v)?,
            "co.g4" => self.co_groups[3] = parse_nonneg(key, v)?,
            "co.q1" => self.co_q1 = parse_real(key, v)?,
            "co.q2" => self.co_q2 = parse_real(key, v)?,
            "co.u1" => self.co_u1 = parse_real(key, v)?,
            "co.u2" => self.co_u2 = parse_real(key, v)?,
            "search.pop_size" => self.search_pop_size = parse_count(key, v, 1)?,
            "search.budget" => self.search_budget = parse_count(key, v, 1)?,
            "search.epochs" => self.search_epochs = parse_count(key, v, 1)?,
            "train.mode" => self.train_mode = v.parse()?,
            "brnn.hidden_dim" => self.brnn_hidden_dim = parse_count(key, v, 1)?,
            "brnn.learning_rate" => self.brnn_learning_rate = parse_positive(key, v)?,
            "brnn.l2" => self.brnn_l2 = parse_nonneg(key, v)?,
            "brnn.epochs" => self.brnn_epochs = parse_count(key, v, 1)?,
            "brnn.batch" => self.brnn_batch = parse_count(key, v, 1)?,
            "brnn.grad_clip" => self.brnn_grad_clip = parse_positive(key, v)?,
            "brnn.init_scale" => self.brnn_init_scale = parse_positive(key, v)?,
            "optimize.function" => {
                if crate::cuttlefish::functions::by_name(v).is_none() {
                    return Err(Error::usage(format!(
                        "{key}: unknown function {v:?} (expected sphere, rosenbrock or rastrigin)"
                    )));
                }
                self.optimize_function = v.to_string();
            }
            "optimize.dim" => self.optimize_dim = parse_count(key, v, 1)?,
            other => return Err(Error::usage(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Canonical text of one key's value.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "data.classes" => self.data_classes.to_string(),
            "data.per_class" => self.data_per_class.to_string(),
            "data.height" => self.data_height.to_string(),
            "data.width" => self.data_width.to_string(),
            "data.noise" => self.data_noise.to_string(),
            "split.train_ratio" => self.split_train_ratio.to_string(),
            "split.stratified" => self.split_stratified.to_string(),
            "split.val_ratio" => self.split_val_ratio.to_string(),
            "preprocess.mode" => self.preprocess_mode.to_string(),
            "preprocess.denoise_window" => self.preprocess_denoise_window.to_string(),
            "pca.k" => self.pca_k.to_string(),
            "co.pop_size" => self.co_pop_size.to_string(),
            "co.budget" => self.co_budget.to_string(),
            "co.g1" => self.co_groups[0].to_string(),
            "co.g2" => self.co_groups[1].to_string(),
            "co.g3" => self.co_groups[2].to_string(),
            "co.g4" => self.co_groups[3].to_string(),
            "co.q1" => self.co_q1.to_string(),
            "co.q2" => self.co_q2.to_string(),
            "co.u1" => self.co_u1.to_string(),
            "co.u2" => self.co_u2.to_string(),
            "search.pop_size" => self.search_pop_size.to_string(),
            "search.budget" => self.search_budget.to_string(),
            "search.epochs" => self.search_epochs.to_string(),
            "train.mode" => self.train_mode.to_string(),
            "brnn.hidden_dim" => self.brnn_hidden_dim.to_string(),
            "brnn.learning_rate" => self.brnn_learning_rate.to_string(),
            "brnn.l2" => self.brnn_l2.to_string(),
            "brnn.epochs" => self.brnn_epochs.to_string(),
            "brnn.batch" => self.brnn_batch.to_string(),
            "brnn.grad_clip" => self.brnn_grad_clip.to_string(),
            "brnn.init_scale" => self.brnn_init_scale.to_string(),
            "optimize.function" => self.optimize_function.clone(),
            "optimize.dim" => self.optimize_dim.to_string(),
            _ => return None,
        })
    }

    /// Cross-key invariants.
    pub fn validate(&self) -> Result<()> {
        let g = &self.co_groups;
        if (g.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::usage(format!(
                "co.g1..co.g4 must sum to 1, got {}",
                g.iter().sum::<f64>()
            )));
        }
        if self.co_budget < self.co_pop_size {
            return Err(Error::usage("co.budget must be >= co.pop_size"));
        }
        if self.search_budget < self.search_pop_size {
            return Err(Error::usage("search.budget must be >= search.pop_size"));
        }
        Ok(())
    }

    /// Resolved configuration, one `key = value` per line in [`KEYS`] order.
    pub fn manifest(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn config_sha(&self) -> String {
        sha256_hex(&self.manifest())
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            mode: self.preprocess_mode,
            denoise_window: self.preprocess_denoise_window,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_ratio: self.split_train_ratio,
            stratified: self.split_stratified,
            seed: derive_seed(self.seed, "split"),
        }
    }

    pub fn val_split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_ratio: 1.0 - self.split_val_ratio,
            stratified: self.split_stratified,
            seed: derive_seed(self.seed, "validation"),
        }
    }

    pub fn inner(&self) -> InnerConfig {
        InnerConfig {
            preprocess: self.preprocess(),
            search_epochs: self.search_epochs,
            final_epochs: self.brnn_epochs,
            batch: self.brnn_batch,
            grad_clip: self.brnn_grad_clip,
            init_scale: self.brnn_init_scale,
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            pop_size: self.search_pop_size,
            budget: self.search_budget,
            group_fractions: self.co_groups,
            q1: self.co_q1,
            q2: self.co_q2,
            u1: self.co_u1,
            u2: self.co_u2,
            seed: self.seed,
        }
    }

    pub fn fixed_hyper(&self) -> Hyper {
        Hyper {
            learning_rate: self.brnn_learning_rate,
            hidden_dim: self.brnn_hidden_dim,
            pca_k: self.pca_k,
            l2: self.brnn_l2,
        }
    }

    /// Optimizer settings for the `optimize` subcommand.
    pub fn cuttlefish(&self, lower: Vec<f64>, upper: Vec<f64>) -> CuttlefishConfig {
        CuttlefishConfig {
            lower,
            upper,
            pop_size: self.co_pop_size,
            group_fractions: self.co_groups,
            q1: self.co_q1,
            q2: self.co_q2,
            u1: self.co_u1,
            u2: self.co_u2,
            budget: self.co_budget,
            seed: self.seed,
        }
    }
}

/// Parse config text over the defaults. Errors name the offending line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |e: Error| match e {
            Error::Usage(m) => Error::usage(format!("line {}: {m}", i + 1)),
            other => other,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::usage(format!("line {}: duplicate key {key:?}", i + 1)));
        }
        cfg.set(key, value.trim()).map_err(at)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
