//! End-to-end composition: preprocessing, row-wise PCA, and the
//! bidirectional recurrent classifier, with the cuttlefish optimizer
//! searching training hyperparameters in an outer loop.
//!
//! The search vector has four genes:
//!
//! | gene | meaning                     | box            |
//! |------|-----------------------------|----------------|
//! | 0    | log10 learning rate         | [-3, -0.5]     |
//! | 1    | hidden units (rounded)      | [2, 64]        |
//! | 2    | PCA components (rounded)    | [2, W]         |
//! | 3    | log10 L2 weight decay       | [-6, -1]       |
//!
//! Choosing the PCA component count is the feature-selection stage.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::brnn::{self, BrnnConfig, BrnnParams, Example};
use crate::cuttlefish::{cf_optimize, CuttlefishConfig, Objective, OptimizeResult};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{evaluate_predictions, MetricsReport};
use crate::par;
use crate::pca::{self, PcaModel};
use crate::preprocess::PreprocessConfig;
use crate::rng::{derive_seed, Rng};

/// Fitness assigned when inner training fails numerically.
pub const FAILURE_SENTINEL: f64 = 1e9;

pub const MODEL_FORMAT: &str = "co-brnn v1";

/// Largest network the direct-weight mode will flatten into a search vector.
pub const DIRECT_MAX_PARAMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub pca_k: usize,
    pub l2: f64,
}

impl Hyper {
    /// Stable identity used for caching and seed derivation.
    fn key(&self) -> (u64, usize, usize, u64) {
        (self.learning_rate.to_bits(), self.hidden_dim, self.pca_k, self.l2.to_bits())
    }

    fn label(&self) -> String {
        let (lr, m, k, l2) = self.key();
        format!("hyper/{lr:016x}/{m}/{k}/{l2:016x}")
    }
}

/// Search box `(lower, upper)` for patches of the given width.
pub fn hyper_bounds(width: usize) -> (Vec<f64>, Vec<f64>) {
    (
        vec![-3.0, 2.0, 2.0, -6.0],
        vec![-0.5, 64.0, width as f64, -1.0],
    )
}

/// Map genes to concrete hyperparameters. Integer genes round half away
/// from zero and are clamped into range.
pub fn decode_hyper(genes: &[f64], width: usize) -> Hyper {
    assert_eq!(genes.len(), 4, "hyper vector has four genes");
    let round_clamp = |g: f64, lo: usize, hi: usize| {
        let r = g.round();
        if r.is_nan() || r < lo as f64 {
            lo
        } else if r > hi as f64 {
            hi
        } else {
            r as usize
        }
    };
    Hyper {
        learning_rate: 10f64.powf(genes[0]),
        hidden_dim: round_clamp(genes[1], 2, 64),
        pca_k: round_clamp(genes[2], 2, width.max(2)),
        l2: 10f64.powf(genes[3]),
    }
}

/// Training settings shared by every candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub preprocess: PreprocessConfig,
    /// Epochs per candidate during the search.
    pub search_epochs: usize,
    /// Epochs for the final retraining at the selected hyperparameters.
    pub final_epochs: usize,
    pub batch: usize,
    pub grad_clip: f64,
    pub init_scale: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            preprocess: PreprocessConfig::default(),
            search_epochs: 15,
            final_epochs: 40,
            batch: 8,
            grad_clip: 5.0,
            init_scale: 1.0,
        }
    }
}

impl InnerConfig {
    pub fn brnn_config(&self, hyper: &Hyper, n_classes: usize, seq_len: usize, epochs: usize, seed: u64) -> BrnnConfig {
        BrnnConfig {
            input_dim: hyper.pca_k,
            hidden_dim: hyper.hidden_dim,
            n_classes,
            seq_len,
            learning_rate: hyper.learning_rate,
            l2: hyper.l2,
            epochs,
            batch: self.batch,
            grad_clip: self.grad_clip,
            init_scale: self.init_scale,
            seed,
        }
    }
}

/// Outer-loop optimizer settings; bounds come from [`hyper_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub pop_size: usize,
    pub budget: usize,
    pub group_fractions: [f64; 4],
    pub q1: f64,
    pub q2: f64,
    pub u1: f64,
    pub u2: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let base = CuttlefishConfig::new(vec![0.0], vec![1.0]);
        SearchConfig {
            pop_size: 12,
            budget: 60,
            group_fractions: base.group_fractions,
            q1: base.q1,
            q2: base.q2,
            u1: base.u1,
            u2: base.u2,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn cuttlefish(&self, lower: Vec<f64>, upper: Vec<f64>) -> CuttlefishConfig {
        CuttlefishConfig {
            lower,
            upper,
            pop_size: self.pop_size,
            group_fractions: self.group_fractions,
            q1: self.q1,
            q2: self.q2,
            u1: self.u1,
            u2: self.u2,
            budget: self.budget,
            seed: derive_seed(self.seed, "co"),
        }
    }
}

/// Preprocess every patch of `ds`.
pub fn preprocess_dataset(ds: &Dataset, cfg: &PreprocessConfig) -> Result<Vec<Matrix>> {
    cfg.validate()?;
    par::map(&ds.samples, |s| cfg.apply(&s.to_matrix())).into_iter().collect()
}

/// Fit row-wise PCA over preprocessed patches.
pub fn fit_row_pca(patches: &[Matrix], k: usize) -> Result<PcaModel> {
    pca::pca_fit(&pca::stack_rows(patches), k)
}

/// Turn preprocessed patches into labeled PCA score sequences.
pub fn to_examples(model: &PcaModel, patches: &[Matrix], ds: &Dataset) -> Result<Vec<Example>> {
    par::map(patches, |p| pca::pca_transform(model, p))
        .into_iter()
        .zip(&ds.samples)
        .map(|(seq, s)| seq.map(|m| (m, s.label)))
        .collect()
}

/// Fitness evaluation for hyperparameter vectors, with a cache keyed by the
/// decoded hyperparameters.
pub struct HyperObjective<'a> {
    train: &'a Dataset,
    val: &'a Dataset,
    train_patches: Vec<Matrix>,
    val_patches: Vec<Matrix>,
    inner: InnerConfig,
    run_seed: u64,
    cache: Mutex<HashMap<(u64, usize, usize, u64), f64>>,
}

impl<'a> HyperObjective<'a> {
    pub fn new(train: &'a Dataset, val: &'a Dataset, inner: InnerConfig, run_seed: u64) -> Result<Self> {
        if val.is_empty() || train.is_empty() {
            return Err(Error::usage("hyperparameter search needs non-empty train and validation sets"));
        }
        if !train.same_geometry(val) {
            return Err(Error::usage("train and validation sets differ in geometry or class count"));
        }
        Ok(HyperObjective {
            train,
            val,
            train_patches: preprocess_dataset(train, &inner.preprocess)?,
            val_patches: preprocess_dataset(val, &inner.preprocess)?,
            inner,
            run_seed,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn width(&self) -> usize {
        self.train.width
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    fn train_and_score(&self, hyper: &Hyper) -> Result<f64> {
        let model = fit_row_pca(&self.train_patches, hyper.pca_k)?;
        let train = to_examples(&model, &self.train_patches, self.train)?;
        let val = to_examples(&model, &self.val_patches, self.val)?;
        let seed = derive_seed(self.run_seed, &hyper.label());
        let cfg = self.inner.brnn_config(
            hyper,
            self.train.n_classes,
            self.train.height,
            self.inner.search_epochs,
            seed,
        );
        let (params, _) = brnn::train(&cfg, &train)?;
        brnn::mean_loss(&params, &val)
    }

    /// Validation cross-entropy after inner training; [`FAILURE_SENTINEL`]
    /// if training fails.
    pub fn fitness(&self, genes: &[f64]) -> f64 {
        let hyper = decode_hyper(genes, self.width());
        if let Some(&v) = self.cache.lock().expect("cache poisoned").get(&hyper.key()) {
            return v;
        }
        let value = match self.train_and_score(&hyper) {
            Ok(v) if v.is_finite() => v,
            _ => FAILURE_SENTINEL,
        };
        self.cache.lock().expect("cache poisoned").insert(hyper.key(), value);
        value
    }
}

impl Objective for HyperObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.fitness(x)
    }
}

/// One-shot form of [`HyperObjective::fitness`].
pub fn fitness_of_hyper(genes: &[f64], train: &Dataset, val: &Dataset, inner: &InnerConfig, run_seed: u64) -> Result<f64> {
    Ok(HyperObjective::new(train, val, inner.clone(), run_seed)?.fitness(genes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrnnSection {
    pub config: BrnnConfig,
    pub params: BrnnParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of the resolved configuration manifest.
    pub config_sha: String,
    /// Objective evaluations spent by the outer search.
    pub evals: usize,
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub preprocess: PreprocessConfig,
    pub pca: PcaModel,
    pub brnn: BrnnSection,
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub provenance: Provenance,
}

impl TrainedModel {
    /// Dimensional consistency between the stages.
    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::usage(format!("unsupported model format {:?}", self.format)));
        }
        let p = &self.brnn.params;
        let ok = self.pca.n_components() == self.brnn.config.input_dim
            && p.input_dim() == self.brnn.config.input_dim
            && p.hidden_dim() == self.brnn.config.hidden_dim
            && p.n_classes() == self.classes
            && self.brnn.config.n_classes == self.classes
            && self.brnn.config.seq_len == self.height
            && self.pca.input_dim() == self.width
            && p.forward.w_rec.shape() == (p.hidden_dim(), p.hidden_dim())
            && p.backward.w_in.shape() == p.forward.w_in.shape()
            && p.w_out.shape() == (self.classes, 2 * p.hidden_dim());
        if !ok {
            return Err(Error::usage("model stages have inconsistent dimensions"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Predicted class and distribution for one patch.
    pub fn predict(&self, sample: &crate::dataset::Sample) -> Result<(usize, Vec<f64>)> {
        let patch = self.preprocess.apply(&sample.to_matrix())?;
        let seq = pca::pca_transform(&self.pca, &patch)?;
        brnn::brnn_predict(&self.brnn.params, &seq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    pub curve: Vec<f64>,
    pub evals_used: usize,
    pub best_genes: Vec<f64>,
    pub best_hyper: Hyper,
    pub best_fitness: f64,
    /// Best fitness in the initial (random) population.
    pub initial_best_fitness: f64,
    pub distinct_candidates: usize,
}

/// Train a final model at fixed hyperparameters on `data`.
pub fn train_at(data: &Dataset, hyper: &Hyper, inner: &InnerConfig, seed: u64) -> Result<(PcaModel, BrnnSection)> {
    let patches = preprocess_dataset(data, &inner.preprocess)?;
    let pca = fit_row_pca(&patches, hyper.pca_k)?;
    let examples = to_examples(&pca, &patches, data)?;
    let cfg = inner.brnn_config(hyper, data.n_classes, data.height, inner.final_epochs, seed);
    let (params, _) = brnn::train(&cfg, &examples)?;
    Ok((pca, BrnnSection { config: cfg, params }))
}

fn assemble(
    data: &Dataset,
    inner: &InnerConfig,
    pca: PcaModel,
    brnn: BrnnSection,
    provenance: Provenance,
) -> Result<TrainedModel> {
    let model = TrainedModel {
        format: MODEL_FORMAT.to_string(),
        preprocess: inner.preprocess,
        pca,
        brnn,
        classes: data.n_classes,
        height: data.height,
        width: data.width,
        provenance,
    };
    model.validate()?;
    Ok(model)
}

pub fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Search hyperparameters with the cuttlefish optimizer, then retrain once
/// at the best point on `train ∪ val`.
pub fn train_co_brnn(
    train: &Dataset,
    val: &Dataset,
    search: &SearchConfig,
    inner: &InnerConfig,
    manifest: &str,
) -> Result<(TrainedModel, SearchLog)> {
    let objective = HyperObjective::new(train, val, inner.clone(), search.seed)?;
    let (lower, upper) = hyper_bounds(train.width);
    let co = search.cuttlefish(lower, upper);
    let result = cf_optimize(&co, &objective)?;
    let best_hyper = decode_hyper(&result.best_point, train.width);

    let all = train.concat(val)?;
    let (pca, brnn) = train_at(&all, &best_hyper, inner, derive_seed(search.seed, "final"))?;
    let model = assemble(
        &all,
        inner,
        pca,
        brnn,
        Provenance {
            seed: search.seed,
            config_sha: sha256_hex(manifest),
            evals: result.evals_used,
            manifest: manifest.to_string(),
        },
    )?;
    let log = SearchLog {
        initial_best_fitness: result.curve[0],
        curve: result.curve,
        evals_used: result.evals_used,
        best_genes: result.best_point,
        best_hyper,
        best_fitness: result.best_fitness,
        distinct_candidates: objective.cache_len(),
    };
    Ok((model, log))
}

/// Train at fixed hyperparameters without any search.
pub fn train_fixed(data: &Dataset, hyper: &Hyper, inner: &InnerConfig, seed: u64, manifest: &str) -> Result<TrainedModel> {
    let (pca, brnn) = train_at(data, hyper, inner, derive_seed(seed, "final"))?;
    assemble(
        data,
        inner,
        pca,
        brnn,
        Provenance {
            seed,
            config_sha: sha256_hex(manifest),
            evals: 0,
            manifest: manifest.to_string(),
        },
    )
}

pub fn evaluate_model(model: &TrainedModel, test: &Dataset) -> Result<MetricsReport> {
    model.validate()?;
    if test.height != model.height || test.width != model.width || test.n_classes != model.classes {
        return Err(Error::usage(format!(
            "test data is {}x{} with {} classes, model expects {}x{} with {}",
            test.height, test.width, test.n_classes, model.height, model.width, model.classes
        )));
    }
    if test.is_empty() {
        return Err(Error::usage("test set is empty"));
    }
    let preds: Vec<(usize, Vec<f64>)> = par::map(&test.samples, |s| model.predict(s))
        .into_iter()
        .collect::<Result<_>>()?;
    let truth = test.labels();
    let classes: Vec<usize> = preds.iter().map(|(c, _)| *c).collect();
    let probs: Vec<Vec<f64>> = preds.into_iter().map(|(_, p)| p).collect();
    evaluate_predictions(&truth, &classes, Some(&probs), model.classes)
}

/// Settings for optimizing network weights directly with the cuttlefish
/// optimizer (tiny networks only).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectConfig {
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub search: SearchConfig,
    pub weight_bound: f64,
}

impl DirectConfig {
    pub fn new(hidden_dim: usize, n_classes: usize) -> Self {
        DirectConfig {
            hidden_dim,
            n_classes,
            search: SearchConfig {
                pop_size: 40,
                budget: 20_000,
                ..SearchConfig::default()
            },
            weight_bound: 3.0,
        }
    }
}

/// Minimize mean training cross-entropy over the flattened parameter vector.
pub fn train_direct_weights(cfg: &DirectConfig, train: &[Example]) -> Result<(BrnnParams, OptimizeResult)> {
    let first = train.first().ok_or_else(|| Error::usage("direct-weight training needs data"))?;
    let k = first.0.cols();
    let template = BrnnParams::zeros(k, cfg.hidden_dim, cfg.n_classes);
    let n = template.param_count();
    if n > DIRECT_MAX_PARAMS {
        return Err(Error::usage(format!(
            "direct-weight mode supports at most {DIRECT_MAX_PARAMS} parameters, network has {n}"
        )));
    }
    if let Some((_, y)) = train.iter().find(|(_, y)| *y >= cfg.n_classes) {
        return Err(Error::usage(format!("label {y} outside [0, {})", cfg.n_classes)));
    }
    let objective = |flat: &[f64]| {
        let mut p = template.clone();
        p.assign_flat(flat);
        let mut sum = 0.0;
        for (x, y) in train {
            match brnn::brnn_forward(&p, x).and_then(|t| brnn::cross_entropy(&t.probs, *y)) {
                Ok(l) => sum += l,
                Err(_) => return FAILURE_SENTINEL,
            }
        }
        sum / train.len() as f64
    };
    let co = cfg.search.cuttlefish(vec![-cfg.weight_bound; n], vec![cfg.weight_bound; n]);
    let result = cf_optimize(&co, &objective)?;
    let mut params = template;
    params.assign_flat(&result.best_point);
    Ok((params, result))
}

/// Two-step scalar sequences labeled 1 when the first value exceeds the
/// second. Pairs closer than 0.1 are redrawn.
pub fn ordering_task(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = Rng::stream(seed, "ordering");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = rng.next_f64();
        let b = rng.next_f64();
        if (a - b).abs() < 0.1 {
            continue;
        }
        out.push((Matrix::from_rows(&[vec![a], vec![b]]), usize::from(a > b)));
    }
    out
}

/// Fraction of `data` classified correctly by `params`.
pub fn accuracy_on(params: &BrnnParams, data: &[Example]) -> Result<f64> {
    let mut hits = 0usize;
    for (x, y) in data {
        if brnn::brnn_predict(params, x)?.0 == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}
