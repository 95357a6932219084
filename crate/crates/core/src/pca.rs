//! Principal component analysis by cyclic Jacobi eigendecomposition of the
//! sample covariance.
//!
//! The pipeline applies PCA row-wise: every image row is one observation of
//! width `D = W`, and a patch becomes a sequence of `H` score vectors of
//! width `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Relative off-diagonal Frobenius norm at which a Jacobi sweep loop stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × D`, rows are orthonormal principal directions.
    pub components: Matrix,
    /// Covariance eigenvalues of the retained components, descending.
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Eigen-decomposition of a symmetric matrix. Returns `(eigenvalues,
/// eigenvectors)` with eigenvectors as the *columns* of the matrix, in the
/// solver's native (unsorted) order.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi_eigen needs a square matrix");
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius_sq().sqrt();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a.get(p, q) * a.get(p, q);
                }
            }
        }
        if off.sqrt() <= JACOBI_TOLERANCE * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), v)
}

/// Flip `vec` so its largest-magnitude entry (first on ties) is non-negative.
pub fn canonical_sign(vec: &mut [f64]) {
    let mut best = 0;
    for (i, x) in vec.iter().enumerate() {
        if x.abs() > vec[best].abs() {
            best = i;
        }
    }
    if vec.get(best).is_some_and(|&x| x < 0.0) {
        for x in vec.iter_mut() {
            *x = -*x;
        }
    }
}

pub fn column_means(rows: &Matrix) -> Vec<f64> {
    let (n, d) = rows.shape();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, x) in mean.iter_mut().zip(rows.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

/// Sample covariance with divisor `N − 1`.
pub fn covariance(rows: &Matrix, mean: &[f64]) -> Matrix {
    let (n, d) = rows.shape();
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for r in 0..n {
        for ((c, x), m) in centered.iter_mut().zip(rows.row(r)).zip(mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                let v = cov.get(i, j) + ci * centered[j];
                cov.set(i, j, v);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    cov
}

pub fn pca_fit(rows: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = rows.shape();
    if n < 2 {
        return Err(Error::usage(format!("pca needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::usage(format!(
            "pca k={k} outside [1, min(N-1, D)] = [1, {}]",
            (n - 1).min(d)
        )));
    }
    if !rows.is_finite() {
        return Err(Error::numeric("pca input contains non-finite values"));
    }

    let mean = column_means(rows);
    let cov = covariance(rows, &mean);
    let (raw_values, vectors) = jacobi_eigen(&cov);

    // Covariance is PSD; tiny negative eigenvalues are rounding noise.
    let values: Vec<f64> = raw_values.iter().map(|&v| v.max(0.0)).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let total: f64 = values.iter().sum();
    let mut components = Matrix::zeros(k, d);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut explained_ratio = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let mut dir: Vec<f64> = (0..d).map(|i| vectors.get(i, idx)).collect();
        canonical_sign(&mut dir);
        components.row_mut(row).copy_from_slice(&dir);
        eigenvalues.push(values[idx]);
        explained_ratio.push(if total > 0.0 { values[idx] / total } else { 0.0 });
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        explained_ratio,
    })
}

pub fn pca_transform(model: &PcaModel, rows: &Matrix) -> Result<Matrix> {
    if rows.cols() != model.input_dim() {
        return Err(Error::usage(format!(
            "pca transform: row width {} does not match model width {}",
            rows.cols(),
            model.input_dim()
        )));
    }
    let k = model.n_components();
    let mut out = Matrix::zeros(rows.rows(), k);
    let mut centered = vec![0.0; model.input_dim()];
    for r in 0..rows.rows() {
        for ((c, x), m) in centered.iter_mut().zip(rows.row(r)).zip(&model.mean) {
            *c = x - m;
        }
        for j in 0..k {
            out.set(r, j, crate::linalg::dot(&centered, model.components.row(j)));
        }
    }
    Ok(out)
}

pub fn pca_inverse(model: &PcaModel, scores: &Matrix) -> Result<Matrix> {
    if scores.cols() != model.n_components() {
        return Err(Error::usage(format!(
            "pca inverse: score width {} does not match k = {}",
            scores.cols(),
            model.n_components()
        )));
    }
    let mut out = scores.matmul(&model.components);
    for r in 0..out.rows() {
        for (x, m) in out.row_mut(r).iter_mut().zip(&model.mean) {
            *x += m;
        }
    }
    Ok(out)
}

/// Stack every row of every patch into one observation matrix.
pub fn stack_rows(patches: &[Matrix]) -> Matrix {
    let width = patches.first().map_or(0, Matrix::cols);
    let mut data = Vec::with_capacity(patches.iter().map(|p| p.rows() * width).sum());
    for p in patches {
        assert_eq!(p.cols(), width, "patches of differing width");
        data.extend_from_slice(p.as_slice());
    }
    Matrix::from_vec(data.len() / width.max(1), width, data)
}
