//! Patch conditioning applied before feature extraction: an optional mean
//! filter followed by per-patch intensity normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    None,
    Minmax,
    Zscore,
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormMode::None),
            "minmax" => Ok(NormMode::Minmax),
            "zscore" => Ok(NormMode::Zscore),
            other => Err(Error::usage(format!(
                "unknown normalization mode {other:?} (expected none, minmax or zscore)"
            ))),
        }
    }
}

impl std::fmt::Display for NormMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormMode::None => "none",
            NormMode::Minmax => "minmax",
            NormMode::Zscore => "zscore",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub mode: NormMode,
    /// Odd mean-filter width; 1 disables filtering.
    pub denoise_window: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            mode: NormMode::Minmax,
            denoise_window: 1,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.denoise_window == 0 || self.denoise_window % 2 == 0 {
            return Err(Error::usage(format!(
                "preprocess.denoise_window must be odd and >= 1, got {}",
                self.denoise_window
            )));
        }
        Ok(())
    }

    /// Denoise, then normalize.
    pub fn apply(&self, patch: &Matrix) -> Result<Matrix> {
        self.validate()?;
        let filtered = denoise(patch, self.denoise_window)?;
        normalize_patch(&filtered, self.mode)
    }
}

fn affine_to_unit(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if span > 0.0 {
        for v in values.iter_mut() {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
    } else {
        values.fill(0.5);
    }
}

pub fn normalize_patch(patch: &Matrix, mode: NormMode) -> Result<Matrix> {
    if !patch.is_finite() {
        return Err(Error::numeric("patch contains non-finite values"));
    }
    let mut out = patch.clone();
    match mode {
        NormMode::None => {}
        NormMode::Minmax => affine_to_unit(out.as_mut_slice()),
        NormMode::Zscore => {
            let v = out.as_mut_slice();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            if std > 0.0 {
                for x in v.iter_mut() {
                    *x = (*x - mean) / std;
                }
            }
            affine_to_unit(v);
        }
    }
    Ok(out)
}

/// Mean filter over a `window × window` neighbourhood with edge coordinates
/// clamped into the patch.
pub fn denoise(patch: &Matrix, window: usize) -> Result<Matrix> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::usage(format!("denoise window must be odd, got {window}")));
    }
    let (h, w) = patch.shape();
    if window > h.min(w) {
        return Err(Error::usage(format!(
            "denoise window {window} exceeds patch size {h}x{w}"
        )));
    }
    if window == 1 {
        return Ok(patch.clone());
    }
    let r = (window / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let norm = (window * window) as f64;
    Ok(Matrix::from_fn(h, w, |y, x| {
        let mut sum = 0.0;
        for dy in -r..=r {
            let yy = clamp(y as isize + dy, h);
            for dx in -r..=r {
                sum += patch.get(yy, clamp(x as isize + dx, w));
            }
        }
        sum / norm
    }))
}
