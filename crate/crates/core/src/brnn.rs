//! Bidirectional tanh recurrent classifier with exact backpropagation
//! through time.
//!
//! Each direction runs `g_s = tanh(W_in·w_s + W_rec·g_{s∓1} + b)` with a zero
//! boundary state; the backward direction walks the sequence from the end.
//! Per-step states `[g→_s ; g←_s]` are mean-pooled over time and mapped to
//! class logits by a single affine layer, followed by a softmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::par;
use crate::rng::Rng;

/// Floor applied to the true-class probability before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrnnConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub seq_len: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
    pub grad_clip: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl BrnnConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, n_classes: usize, seq_len: usize) -> Self {
        BrnnConfig {
            input_dim,
            hidden_dim,
            n_classes,
            seq_len,
            learning_rate: 0.05,
            l2: 1e-4,
            epochs: 30,
            batch: 8,
            grad_clip: 5.0,
            init_scale: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_classes == 0 || self.seq_len == 0 {
            return Err(Error::usage("brnn dimensions must all be >= 1"));
        }
        if self.batch == 0 {
            return Err(Error::usage("brnn.batch must be >= 1"));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::usage(format!("brnn.{name} must be > 0, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("grad_clip", self.grad_clip)?;
        positive("init_scale", self.init_scale)?;
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::usage(format!("brnn.l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

/// Weights of one recurrent direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionParams {
    /// `m × k` input weights.
    pub w_in: Matrix,
    /// `m × m` recurrent weights.
    pub w_rec: Matrix,
    pub bias: Vec<f64>,
}

impl DirectionParams {
    fn zeros(k: usize, m: usize) -> Self {
        DirectionParams {
            w_in: Matrix::zeros(m, k),
            w_rec: Matrix::zeros(m, m),
            bias: vec![0.0; m],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrnnParams {
    pub forward: DirectionParams,
    pub backward: DirectionParams,
    /// `C × 2m` output projection.
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl BrnnParams {
    pub fn zeros(k: usize, m: usize, c: usize) -> Self {
        BrnnParams {
            forward: DirectionParams::zeros(k, m),
            backward: DirectionParams::zeros(k, m),
            w_out: Matrix::zeros(c, 2 * m),
            b_out: vec![0.0; c],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.w_in.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.w_in.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.b_out.len()
    }

    pub fn param_count(&self) -> usize {
        let (k, m, c) = (self.input_dim(), self.hidden_dim(), self.n_classes());
        Self::count_for(k, m, c)
    }

    pub fn count_for(k: usize, m: usize, c: usize) -> usize {
        2 * (m * k + m * m + m) + c * 2 * m + c
    }

    /// Slices in canonical order; `weight` marks tensors subject to L2.
    fn parts(&self) -> [(&[f64], bool); 8] {
        [
            (self.forward.w_in.as_slice(), true),
            (self.forward.w_rec.as_slice(), true),
            (&self.forward.bias, false),
            (self.backward.w_in.as_slice(), true),
            (self.backward.w_rec.as_slice(), true),
            (&self.backward.bias, false),
            (self.w_out.as_slice(), true),
            (&self.b_out, false),
        ]
    }

    fn parts_mut(&mut self) -> [(&mut [f64], bool); 8] {
        [
            (self.forward.w_in.as_mut_slice(), true),
            (self.forward.w_rec.as_mut_slice(), true),
            (&mut self.forward.bias, false),
            (self.backward.w_in.as_mut_slice(), true),
            (self.backward.w_rec.as_mut_slice(), true),
            (&mut self.backward.bias, false),
            (self.w_out.as_mut_slice(), true),
            (&mut self.b_out, false),
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.parts().iter().flat_map(|(s, _)| s.iter().copied()).collect()
    }

    /// Overwrite every parameter from a flat vector in [`flatten`](Self::flatten) order.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length mismatch");
        let mut off = 0;
        for (s, _) in self.parts_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|(s, _)| s.iter().all(|v| v.is_finite()))
    }

    /// Sum of squares over weight tensors (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.parts()
            .iter()
            .filter(|(_, w)| *w)
            .map(|(s, _)| s.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.parts()
            .iter()
            .map(|(s, _)| s.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &BrnnParams) {
        for ((dst, _), (src, _)) in self.parts_mut().into_iter().zip(other.parts()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (s, _) in self.parts_mut() {
            s.iter_mut().for_each(|v| *v *= alpha);
        }
    }

    /// `self += lambda · W` on weight tensors only.
    fn add_weight_decay(&mut self, lambda: f64, params: &BrnnParams) {
        for ((dst, is_weight), (src, _)) in self.parts_mut().into_iter().zip(params.parts()) {
            if is_weight {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += lambda * s;
                }
            }
        }
    }
}

pub fn brnn_init(cfg: &BrnnConfig) -> Result<BrnnParams> {
    cfg.validate()?;
    let (k, m, c) = (cfg.input_dim, cfg.hidden_dim, cfg.n_classes);
    let mut rng = Rng::stream(cfg.seed, "brnn-init");
    let mut p = BrnnParams::zeros(k, m, c);
    let mut fill = |mat: &mut Matrix, fan_in: usize| {
        let a = cfg.init_scale / (fan_in as f64).sqrt();
        for v in mat.as_mut_slice() {
            *v = rng.uniform(-a, a);
        }
    };
    fill(&mut p.forward.w_in, k);
    fill(&mut p.forward.w_rec, m);
    fill(&mut p.backward.w_in, k);
    fill(&mut p.backward.w_rec, m);
    fill(&mut p.w_out, 2 * m);
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `T × k` input sequence.
    pub inputs: Matrix,
    /// `g→_s` for s = 1..T.
    pub forward_hidden: Vec<Vec<f64>>,
    /// `g←_s` for s = 1..T, indexed by time (not by processing order).
    pub backward_hidden: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn recur_step(dir: &DirectionParams, x: &[f64], prev: &[f64]) -> Vec<f64> {
    let m = dir.bias.len();
    (0..m)
        .map(|i| (dot(dir.w_in.row(i), x) + dot(dir.w_rec.row(i), prev) + dir.bias[i]).tanh())
        .collect()
}

/// Run one direction over `order` (time indices), returning states indexed by time.
fn run_direction(dir: &DirectionParams, inputs: &Matrix, order: impl Iterator<Item = usize>) -> Vec<Vec<f64>> {
    let m = dir.bias.len();
    let mut states = vec![Vec::new(); inputs.rows()];
    let mut prev = vec![0.0; m];
    for s in order {
        let g = recur_step(dir, inputs.row(s), &prev);
        prev.clone_from(&g);
        states[s] = g;
    }
    states
}

pub fn brnn_forward(params: &BrnnParams, inputs: &Matrix) -> Result<ForwardTrace> {
    let t = inputs.rows();
    if t == 0 {
        return Err(Error::usage("sequence must have at least one step"));
    }
    if inputs.cols() != params.input_dim() {
        return Err(Error::usage(format!(
            "input width {} does not match network input_dim {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    if !inputs.is_finite() {
        return Err(Error::numeric("input sequence contains non-finite values"));
    }
    let m = params.hidden_dim();
    let forward_hidden = run_direction(&params.forward, inputs, 0..t);
    let backward_hidden = run_direction(&params.backward, inputs, (0..t).rev());

    let mut pooled = vec![0.0; 2 * m];
    for s in 0..t {
        for i in 0..m {
            pooled[i] += forward_hidden[s][i];
            pooled[m + i] += backward_hidden[s][i];
        }
    }
    pooled.iter_mut().for_each(|v| *v /= t as f64);

    let logits: Vec<f64> = params
        .w_out
        .matvec(&pooled)
        .into_iter()
        .zip(&params.b_out)
        .map(|(z, b)| z + b)
        .collect();
    let probs = softmax(&logits);
    if !probs.iter().all(|p| p.is_finite()) {
        return Err(Error::numeric("non-finite class probabilities"));
    }
    Ok(ForwardTrace {
        inputs: inputs.clone(),
        forward_hidden,
        backward_hidden,
        pooled,
        logits,
        probs,
    })
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::usage(format!("label {label} outside [0, {})", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Regularized loss `CE + (λ/2)·‖W‖²` for a single sample.
pub fn sample_loss(params: &BrnnParams, inputs: &Matrix, label: usize, l2: f64) -> Result<f64> {
    let trace = brnn_forward(params, inputs)?;
    Ok(cross_entropy(&trace.probs, label)? + 0.5 * l2 * params.weight_norm_sq())
}

/// Gradient of the cross-entropy alone, for one traced sample.
fn ce_gradient(params: &BrnnParams, trace: &ForwardTrace, label: usize) -> BrnnParams {
    let (k, m, c) = (params.input_dim(), params.hidden_dim(), params.n_classes());
    let t = trace.inputs.rows();
    let mut grad = BrnnParams::zeros(k, m, c);

    let mut dlogits = trace.probs.clone();
    dlogits[label] -= 1.0;
    grad.w_out.add_outer(&dlogits, &trace.pooled);
    grad.b_out.copy_from_slice(&dlogits);

    let mut dpooled = vec![0.0; 2 * m];
    params.w_out.tr_matvec_add(&dlogits, &mut dpooled);
    let inv_t = 1.0 / t as f64;
    let (dpool_f, dpool_b) = dpooled.split_at(m);

    // Forward direction: state s feeds s + 1, so walk time backwards.
    let zero = vec![0.0; m];
    let mut carry = vec![0.0; m];
    for s in (0..t).rev() {
        let g = &trace.forward_hidden[s];
        let prev = if s > 0 { &trace.forward_hidden[s - 1] } else { &zero };
        let da: Vec<f64> = (0..m)
            .map(|i| (dpool_f[i] * inv_t + carry[i]) * (1.0 - g[i] * g[i]))
            .collect();
        grad.forward.w_in.add_outer(&da, trace.inputs.row(s));
        grad.forward.w_rec.add_outer(&da, prev);
        for (b, d) in grad.forward.bias.iter_mut().zip(&da) {
            *b += d;
        }
        carry.iter_mut().for_each(|v| *v = 0.0);
        params.forward.w_rec.tr_matvec_add(&da, &mut carry);
    }

    // Backward direction: state s feeds s - 1, so walk time forwards.
    carry.iter_mut().for_each(|v| *v = 0.0);
    for s in 0..t {
        let g = &trace.backward_hidden[s];
        let next = if s + 1 < t { &trace.backward_hidden[s + 1] } else { &zero };
        let da: Vec<f64> = (0..m)
            .map(|i| (dpool_b[i] * inv_t + carry[i]) * (1.0 - g[i] * g[i]))
            .collect();
        grad.backward.w_in.add_outer(&da, trace.inputs.row(s));
        grad.backward.w_rec.add_outer(&da, next);
        for (b, d) in grad.backward.bias.iter_mut().zip(&da) {
            *b += d;
        }
        carry.iter_mut().for_each(|v| *v = 0.0);
        params.backward.w_rec.tr_matvec_add(&da, &mut carry);
    }
    grad
}

/// Exact gradient of `CE + (λ/2)·‖W‖²` with respect to every parameter.
pub fn brnn_backward(params: &BrnnParams, trace: &ForwardTrace, label: usize, l2: f64) -> Result<BrnnParams> {
    if label >= params.n_classes() {
        return Err(Error::usage(format!(
            "label {label} outside [0, {})",
            params.n_classes()
        )));
    }
    let mut grad = ce_gradient(params, trace, label);
    if l2 > 0.0 {
        grad.add_weight_decay(l2, params);
    }
    Ok(grad)
}

/// A labeled input sequence.
pub type Example = (Matrix, usize);

/// Mean cross-entropy over `data` (no regularization term).
pub fn mean_loss(params: &BrnnParams, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::usage("cannot evaluate loss on empty data"));
    }
    let losses = par::map(data, |(x, y)| {
        brnn_forward(params, x).and_then(|tr| cross_entropy(&tr.probs, *y))
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / data.len() as f64)
}

/// One pass of mini-batch SGD over `data`. Returns the mean per-sample
/// cross-entropy observed while the epoch ran.
pub fn sgd_epoch(params: &mut BrnnParams, data: &[Example], cfg: &BrnnConfig, rng: &mut Rng) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::usage("cannot train on empty data"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);

    let mut total_loss = 0.0;
    for (bi, batch) in order.chunks(cfg.batch).enumerate() {
        let current: &BrnnParams = params;
        let results = par::map(batch, |&i| {
            let (x, y) = &data[i];
            let trace = brnn_forward(current, x)?;
            let loss = cross_entropy(&trace.probs, *y)?;
            Ok::<_, Error>((loss, ce_gradient(current, &trace, *y)))
        });

        let mut grad = BrnnParams::zeros(params.input_dim(), params.hidden_dim(), params.n_classes());
        let mut batch_loss = 0.0;
        for r in results {
            let (loss, g) = r?;
            batch_loss += loss;
            grad.axpy(1.0, &g);
        }
        if !batch_loss.is_finite() {
            return Err(Error::numeric(format!("non-finite loss in batch {bi}")));
        }
        total_loss += batch_loss;
        grad.scale(1.0 / batch.len() as f64);
        if cfg.l2 > 0.0 {
            grad.add_weight_decay(cfg.l2, params);
        }
        let norm = grad.norm();
        if !norm.is_finite() {
            return Err(Error::numeric(format!("non-finite gradient in batch {bi}")));
        }
        if norm > cfg.grad_clip {
            grad.scale(cfg.grad_clip / norm);
        }
        params.axpy(-cfg.learning_rate, &grad);
        if !params.is_finite() {
            return Err(Error::numeric(format!("parameters diverged in batch {bi}")));
        }
    }
    Ok(total_loss / data.len() as f64)
}

/// Initialize from `cfg` and run `cfg.epochs` epochs. Returns the trained
/// parameters and the per-epoch mean training loss.
pub fn train(cfg: &BrnnConfig, data: &[Example]) -> Result<(BrnnParams, Vec<f64>)> {
    let mut params = brnn_init(cfg)?;
    let mut rng = Rng::stream(cfg.seed, "sgd");
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        losses.push(sgd_epoch(&mut params, data, cfg, &mut rng)?);
    }
    Ok((params, losses))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn brnn_predict(params: &BrnnParams, inputs: &Matrix) -> Result<(usize, Vec<f64>)> {
    let trace = brnn_forward(params, inputs)?;
    Ok((argmax(&trace.probs), trace.probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_params(rng: &mut Rng, k: usize, m: usize, c: usize, scale: f64) -> BrnnParams {
        let mut p = BrnnParams::zeros(k, m, c);
        let flat: Vec<f64> = (0..p.param_count()).map(|_| rng.uniform(-scale, scale)).collect();
        p.assign_flat(&flat);
        p
    }

    fn random_seq(rng: &mut Rng, t: usize, k: usize) -> Matrix {
        Matrix::from_fn(t, k, |_, _| rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let p = BrnnParams::zeros(3, 4, 5);
        let x = Matrix::from_fn(6, 3, |r, c| (r + c) as f64 * 0.1);
        let tr = brnn_forward(&p, &x).unwrap();
        assert!(tr.forward_hidden.iter().chain(&tr.backward_hidden).flatten().all(|&v| v == 0.0));
        assert!(tr.logits.iter().all(|&v| v == 0.0));
        assert!(tr.probs.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert_eq!(brnn_predict(&p, &x).unwrap().0, 0);
    }

    #[test]
    fn scalar_recurrence_value() {
        let mut p = BrnnParams::zeros(1, 1, 2);
        p.forward.w_in.set(0, 0, 0.5);
        p.forward.w_rec.set(0, 0, 0.3);
        let tr = brnn_forward(&p, &Matrix::from_rows(&[vec![1.0]])).unwrap();
        // tanh(0.5) to 15 digits.
        assert!((tr.forward_hidden[0][0] - 0.462_117_157_260_010).abs() < 1e-14);
    }

    #[test]
    fn backward_states_are_reversed_forward_run() {
        let mut rng = Rng::new(12);
        let p = random_params(&mut rng, 3, 4, 2, 0.8);
        let x = random_seq(&mut rng, 5, 3);
        let tr = brnn_forward(&p, &x).unwrap();
        let rev = Matrix::from_fn(5, 3, |r, c| x.get(4 - r, c));
        let mut swapped = p.clone();
        swapped.forward = p.backward.clone();
        let tr_rev = brnn_forward(&swapped, &rev).unwrap();
        for s in 0..5 {
            assert_eq!(tr.backward_hidden[s], tr_rev.forward_hidden[4 - s]);
        }
    }

    #[test]
    fn reversal_symmetry_of_logits() {
        let mut rng = Rng::new(13);
        let (m, c) = (3, 4);
        let p = random_params(&mut rng, 2, m, c, 0.9);
        let x = random_seq(&mut rng, 6, 2);
        let rev = Matrix::from_fn(6, 2, |r, col| x.get(5 - r, col));
        let mut q = p.clone();
        q.forward = p.backward.clone();
        q.backward = p.forward.clone();
        q.w_out = Matrix::from_fn(c, 2 * m, |r, col| p.w_out.get(r, (col + m) % (2 * m)));
        let a = brnn_forward(&p, &x).unwrap();
        let b = brnn_forward(&q, &rev).unwrap();
        for i in 0..m {
            assert!((a.pooled[i] - b.pooled[m + i]).abs() < 1e-15);
            assert!((a.pooled[m + i] - b.pooled[i]).abs() < 1e-15);
        }
        for (la, lb) in a.logits.iter().zip(&b.logits) {
            assert!((la - lb).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy(&[0.25; 4], 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert!((cross_entropy(&[0.7, 0.2, 0.1], 1).unwrap() - 1.609_437_912_434_100_3).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 0.0], 1).unwrap() - (-PROB_FLOOR.ln())).abs() < 1e-12);
        assert!(matches!(cross_entropy(&[0.5, 0.5], 2), Err(Error::Usage(_))));
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1000.0, -1000.0, 999.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = softmax(&[3.0, 1.0, 2.0]);
        let shifted = softmax(&[3.0 + 500.0, 1.0 + 500.0, 2.0 + 500.0]);
        for (a, b) in q.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct_prediction_has_zero_logit_gradient() {
        let mut p = BrnnParams::zeros(1, 1, 3);
        p.b_out = vec![-40.0, 40.0, -40.0];
        let x = Matrix::from_rows(&[vec![0.3]]);
        let tr = brnn_forward(&p, &x).unwrap();
        let g = brnn_backward(&p, &tr, 1, 0.0).unwrap();
        assert!(g.b_out.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_params_output_bias_gradient() {
        let p = BrnnParams::zeros(2, 3, 4);
        let x = Matrix::from_fn(3, 2, |r, c| r as f64 - c as f64);
        let tr = brnn_forward(&p, &x).unwrap();
        let g = brnn_backward(&p, &tr, 2, 0.0).unwrap();
        assert_eq!(g.b_out, vec![0.25, 0.25, -0.75, 0.25]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = Rng::new(77);
        for case in 0..20 {
            let (k, m, c, t) = (1 + case % 3, 1 + case % 4, 2 + case % 2, 1 + case % 5);
            let p = random_params(&mut rng, k, m, c, 0.7);
            let x = random_seq(&mut rng, t, k);
            let label = case % c;
            let l2 = if case % 2 == 0 { 0.0 } else { 0.05 };
            let tr = brnn_forward(&p, &x).unwrap();
            let g = brnn_backward(&p, &tr, label, l2).unwrap().flatten();
            let base = p.flatten();
            let h = 1e-5;
            for i in 0..base.len() {
                let mut q = p.clone();
                let mut v = base.clone();
                v[i] += h;
                q.assign_flat(&v);
                let up = sample_loss(&q, &x, label, l2).unwrap();
                v[i] -= 2.0 * h;
                q.assign_flat(&v);
                let down = sample_loss(&q, &x, label, l2).unwrap();
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-7);
                assert!(rel < 1e-4, "case {case} param {i}: fd {fd} vs bptt {}", g[i]);
            }
        }
    }

    #[test]
    fn init_is_seeded_and_scaled() {
        let mut cfg = BrnnConfig::new(3, 5, 2, 4);
        cfg.seed = 9;
        let a = brnn_init(&cfg).unwrap();
        assert_eq!(a, brnn_init(&cfg).unwrap());
        assert!(a.forward.bias.iter().chain(&a.b_out).all(|&b| b == 0.0));
        let bound = 1.0 / 3f64.sqrt();
        assert!(a.forward.w_in.as_slice().iter().all(|v| v.abs() <= bound));
        cfg.init_scale = 0.0;
        assert!(matches!(brnn_init(&cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn init_weight_mean_near_zero() {
        let mut cfg = BrnnConfig::new(100, 160, 4, 1);
        cfg.seed = 5;
        let p = brnn_init(&cfg).unwrap();
        let w = p.forward.w_rec.as_slice();
        assert!(w.len() >= 25_600);
        let a = 1.0 / 160f64.sqrt();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = a / (3.0 * n).sqrt();
        assert!(mean.abs() < 3.0 * sd, "mean {mean} sd {sd}");
    }

    fn toy_data() -> Vec<Example> {
        vec![
            (Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.2]]), 0),
            (Matrix::from_rows(&[vec![0.0, 1.0], vec![0.1, 0.9]]), 1),
            (Matrix::from_rows(&[vec![0.9, 0.1], vec![0.7, 0.0]]), 0),
        ]
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut cfg = BrnnConfig::new(2, 3, 2, 2);
        let data = toy_data();
        let mut p = brnn_init(&cfg).unwrap();
        let before = p.clone();
        cfg.learning_rate = 0.0;
        let loss = sgd_epoch(&mut p, &data, &cfg, &mut Rng::new(1)).unwrap();
        assert_eq!(p, before);
        assert!((loss - mean_loss(&p, &data).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn memorizes_single_sample() {
        let mut cfg = BrnnConfig::new(2, 4, 3, 3);
        cfg.learning_rate = 0.5;
        cfg.l2 = 0.0;
        cfg.epochs = 200;
        cfg.batch = 1;
        let data = vec![(Matrix::from_rows(&[vec![0.2, -0.4], vec![0.9, 0.1], vec![-0.3, 0.5]]), 2)];
        let (p, losses) = train(&cfg, &data).unwrap();
        assert!(*losses.last().unwrap() < 0.01, "{:?}", losses.last());
        assert!(mean_loss(&p, &data).unwrap() < 0.01);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let mut cfg = BrnnConfig::new(2, 3, 2, 2);
        cfg.epochs = 5;
        cfg.batch = 2;
        let data = toy_data();
        assert_eq!(train(&cfg, &data).unwrap(), train(&cfg, &data).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = BrnnConfig::new(2, 3, 2, 2);
        cfg.learning_rate = f64::MAX;
        cfg.grad_clip = f64::MAX;
        let data = toy_data();
        let mut p = brnn_init(&cfg).unwrap();
        let mut rng = Rng::new(0);
        let mut err = None;
        for _ in 0..5 {
            if let Err(e) = sgd_epoch(&mut p, &data, &cfg, &mut rng) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::Numeric(_))), "{err:?}");
    }

    #[test]
    fn argmax_ties_and_recount() {
        assert_eq!(argmax(&[0.3, 0.3, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
        let mut rng = Rng::new(21);
        for _ in 0..200 {
            let v: Vec<f64> = (0..5).map(|_| rng.next_f64()).collect();
            let a = argmax(&v);
            assert!(v.iter().all(|&x| x <= v[a]));
            assert!(v[..a].iter().all(|&x| x < v[a]));
        }
    }

    #[test]
    fn width_mismatch_and_empty_sequence() {
        let p = BrnnParams::zeros(3, 2, 2);
        assert!(matches!(brnn_forward(&p, &Matrix::zeros(2, 4)), Err(Error::Usage(_))));
        assert!(matches!(brnn_forward(&p, &Matrix::zeros(0, 3)), Err(Error::Usage(_))));
        let mut bad = Matrix::zeros(2, 3);
        bad.set(1, 1, f64::NAN);
        assert!(matches!(brnn_forward(&p, &bad), Err(Error::Numeric(_))));
    }

    #[test]
    fn flatten_round_trip_and_count() {
        let mut rng = Rng::new(4);
        let p = random_params(&mut rng, 3, 2, 4, 1.0);
        assert_eq!(p.param_count(), 2 * (6 + 4 + 2) + 16 + 4);
        let mut q = BrnnParams::zeros(3, 2, 4);
        q.assign_flat(&p.flatten());
        assert_eq!(p, q);
    }
}
