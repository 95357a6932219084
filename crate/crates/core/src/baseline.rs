//! Multinomial logistic regression on raw pixels. A reference floor for the
//! recurrent model, not part of the method itself.

use crate::brnn::{argmax, softmax};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRegression {
    /// `C × (D + 1)`, last column is the bias.
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

fn features(pixels: &[f32]) -> Vec<f64> {
    let mut x: Vec<f64> = pixels.iter().map(|&p| f64::from(p)).collect();
    x.push(1.0);
    x
}

impl SoftmaxRegression {
    /// Full-batch gradient descent from zero weights.
    pub fn fit(train: &Dataset, cfg: &BaselineConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::usage("baseline needs training data"));
        }
        let d = train.height * train.width + 1;
        let c = train.n_classes;
        let xs: Vec<Vec<f64>> = train.samples.iter().map(|s| features(&s.pixels)).collect();
        let mut w = vec![vec![0.0; d]; c];
        let n = xs.len() as f64;
        for _ in 0..cfg.epochs {
            let mut grad = vec![vec![0.0; d]; c];
            for (x, s) in xs.iter().zip(&train.samples) {
                let logits: Vec<f64> = w.iter().map(|row| crate::linalg::dot(row, x)).collect();
                let mut p = softmax(&logits);
                p[s.label] -= 1.0;
                for (g, pk) in grad.iter_mut().zip(&p) {
                    for (gj, xj) in g.iter_mut().zip(x) {
                        *gj += pk * xj;
                    }
                }
            }
            for (row, g) in w.iter_mut().zip(&grad) {
                for (j, (wj, gj)) in row.iter_mut().zip(g).enumerate() {
                    let decay = if j + 1 < d { cfg.l2 * *wj } else { 0.0 };
                    *wj -= cfg.learning_rate * (gj / n + decay);
                }
            }
        }
        Ok(SoftmaxRegression { weights: w })
    }

    pub fn predict(&self, pixels: &[f32]) -> usize {
        let x = features(pixels);
        let logits: Vec<f64> = self.weights.iter().map(|row| crate::linalg::dot(row, &x)).collect();
        argmax(&logits)
    }

    pub fn accuracy(&self, test: &Dataset) -> f64 {
        let hits = test
            .samples
            .iter()
            .filter(|s| self.predict(&s.pixels) == s.label)
            .count();
        hits as f64 / test.len() as f64
    }
}
