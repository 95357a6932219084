//! Labeled scene patches: synthetic generation, splitting, and the
//! line-oriented `scenes v1` file format.
//!
//! Pixels are stored as `f32`. Nine significant digits identify an `f32`
//! uniquely, so a save/load cycle reproduces every pixel bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

/// Geometry of a reference benchmark. Recorded for documentation and config
/// validation only; no data is bundled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub samples: usize,
    pub train_ratios: [f64; 2],
}

/// Aerial Image Dataset: 30 scene classes, 600×600 pixels, 10000 images,
/// evaluated with 20% and 50% of each class used for training.
pub const AID: DatasetPreset = DatasetPreset {
    name: "AID",
    classes: 30,
    height: 600,
    width: 600,
    samples: 10_000,
    train_ratios: [0.2, 0.5],
};

/// Names of the synthetic texture families, indexed by class.
pub const TEXTURE_FAMILIES: [&str; 8] = [
    "horizontal-stripes",
    "vertical-stripes",
    "checkerboard",
    "radial-gradient",
    "diagonal-stripes",
    "gaussian-blob",
    "uniform-ramp",
    "salt-noise",
];

const HIGH: f64 = 0.8;
const LOW: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major intensities in [0, 1].
    pub pixels: Vec<f32>,
}

impl Sample {
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.height,
            self.width,
            self.pixels.iter().map(|&p| f64::from(p)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub n_classes: usize,
    pub height: usize,
    pub width: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, n_classes: usize, height: usize, width: usize) -> Result<Self> {
        let ds = Dataset {
            samples,
            n_classes,
            height,
            width,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::usage("dataset classes, height and width must be positive"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.height != self.height || s.width != self.width || s.pixels.len() != self.height * self.width {
                return Err(Error::usage(format!(
                    "sample {i} has dims {}x{}, dataset is {}x{}",
                    s.height, s.width, self.height, self.width
                )));
            }
            if s.label >= self.n_classes {
                return Err(Error::usage(format!(
                    "sample {i} label {} outside [0, {})",
                    s.label, self.n_classes
                )));
            }
            if let Some(p) = s.pixels.iter().find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
                return Err(Error::usage(format!("sample {i} has pixel {p} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn same_geometry(&self, other: &Dataset) -> bool {
        self.n_classes == other.n_classes && self.height == other.height && self.width == other.width
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            n_classes: self.n_classes,
            height: self.height,
            width: self.width,
        }
    }

    /// Concatenation of two datasets with identical geometry.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if !self.same_geometry(other) {
            return Err(Error::usage("cannot concatenate datasets with different geometry"));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(Dataset {
            samples,
            n_classes: self.n_classes,
            height: self.height,
            width: self.width,
        })
    }
}

/// Noise-free texture value for `family` at `(y, x)`. `center` is only used
/// by the Gaussian blob.
fn texture_value(family: usize, y: usize, x: usize, h: usize, w: usize, center: (f64, f64)) -> f64 {
    let (yf, xf) = (y as f64, x as f64);
    match family {
        0 => if y % 2 == 0 { HIGH } else { LOW },
        1 => if x % 2 == 0 { HIGH } else { LOW },
        2 => if (x + y) % 2 == 0 { HIGH } else { LOW },
        3 => {
            let cy = (h as f64 - 1.0) / 2.0;
            let cx = (w as f64 - 1.0) / 2.0;
            let r = ((yf - cy).powi(2) + (xf - cx).powi(2)).sqrt();
            let rmax = (cy * cy + cx * cx).sqrt();
            0.9 - 0.8 * r / rmax
        }
        4 => if ((x + y) / 2) % 2 == 0 { HIGH } else { LOW },
        5 => {
            let sigma = h.min(w) as f64 / 5.0;
            let d2 = (yf - center.0).powi(2) + (xf - center.1).powi(2);
            0.1 + 0.8 * (-d2 / (2.0 * sigma * sigma)).exp()
        }
        6 => 0.1 + 0.8 * xf / (w as f64 - 1.0),
        _ => unreachable!("salt-noise is drawn per pixel"),
    }
}

/// `n_classes × per_class` noisy texture patches, class-major order.
pub fn generate_synthetic(
    n_classes: usize,
    per_class: usize,
    height: usize,
    width: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(2..=TEXTURE_FAMILIES.len()).contains(&n_classes) {
        return Err(Error::usage(format!("classes must be in [2, 8], got {n_classes}")));
    }
    if height < 4 || width < 4 {
        return Err(Error::usage(format!("height and width must be >= 4, got {height}x{width}")));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::usage(format!("noise sigma must be finite and >= 0, got {noise_sigma}")));
    }

    let mut rng = Rng::stream(seed, "synthetic");
    let mut samples = Vec::with_capacity(n_classes * per_class);
    for family in 0..n_classes {
        for _ in 0..per_class {
            let center = if family == 5 {
                (
                    rng.uniform(height as f64 * 0.25, height as f64 * 0.75),
                    rng.uniform(width as f64 * 0.25, width as f64 * 0.75),
                )
            } else {
                (0.0, 0.0)
            };
            let mut pixels = Vec::with_capacity(height * width);
            for y in 0..height {
                for x in 0..width {
                    let base = if family == 7 {
                        if rng.next_f64() < 0.15 { 0.85 } else { 0.15 }
                    } else {
                        texture_value(family, y, x, height, width, center)
                    };
                    let v = if noise_sigma > 0.0 {
                        base + noise_sigma * rng.normal()
                    } else {
                        base
                    };
                    pixels.push(v.clamp(0.0, 1.0) as f32);
                }
            }
            samples.push(Sample {
                label: family,
                height,
                width,
                pixels,
            });
        }
    }
    Ok(Dataset {
        samples,
        n_classes,
        height,
        width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_ratio: f64, seed: u64) -> Self {
        SplitSpec {
            train_ratio,
            stratified: true,
            seed,
        }
    }
}

/// Index sets `(train, test)`, each sorted ascending.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(Error::usage(format!(
            "train ratio must be in (0,1), got {}",
            spec.train_ratio
        )));
    }
    let mut rng = Rng::stream(spec.seed, "split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    if spec.stratified {
        for class in 0..ds.n_classes {
            let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples[i].label == class).collect();
            if idx.is_empty() {
                continue;
            }
            let n_train = (spec.train_ratio * idx.len() as f64).floor() as usize;
            if n_train == 0 {
                return Err(Error::usage(format!(
                    "class {class} has {} samples: ratio {} leaves no training sample",
                    idx.len(),
                    spec.train_ratio
                )));
            }
            rng.shuffle(&mut idx);
            train.extend_from_slice(&idx[..n_train]);
            test.extend_from_slice(&idx[n_train..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..ds.len()).collect();
        rng.shuffle(&mut idx);
        let n_train = (spec.train_ratio * idx.len() as f64).floor() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::usage(format!(
            "split with ratio {} leaves an empty side ({} train, {} test)",
            spec.train_ratio,
            train.len(),
            test.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Fixed nine-significant-digit rendering used by `scenes v1`.
pub fn format_pixel(v: f32) -> String {
    format!("{:.8e}", f64::from(v))
}

/// Render a dataset as `scenes v1` text. `comments` become leading `#` lines.
pub fn write_scenes(ds: &Dataset, comments: &[String]) -> String {
    let mut out = String::with_capacity(16 + ds.len() * ds.height * ds.width * 15);
    out.push_str("scenes v1\n");
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(
        out,
        "samples={} height={} width={} classes={}",
        ds.len(),
        ds.height,
        ds.width,
        ds.n_classes
    );
    for s in &ds.samples {
        let _ = writeln!(out, "label={}", s.label);
        for y in 0..s.height {
            let row = &s.pixels[y * s.width..(y + 1) * s.width];
            for (x, &p) in row.iter().enumerate() {
                if x > 0 {
                    out.push(' ');
                }
                out.push_str(&format_pixel(p));
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_scenes(ds: &Dataset, path: &Path) -> Result<()> {
    save_scenes_with_comments(ds, &[], path)
}

pub fn save_scenes_with_comments(ds: &Dataset, comments: &[String], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, write_scenes(ds, comments).as_bytes())
}

pub fn load_scenes(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_scenes(&text)
}

fn parse_usize(tok: &str, key: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::format(line, format!("{key} expects a non-negative integer, got {tok:?}")))
}

/// Parse `scenes v1` text. Blank lines and lines starting with `#` are skipped.
pub fn parse_scenes(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let eof_line = text.lines().count() + 1;

    match lines.next() {
        Some((_, "scenes v1")) => {}
        Some((n, other)) => return Err(Error::format(n, format!("expected 'scenes v1', got {other:?}"))),
        None => return Err(Error::format(eof_line, "empty file, expected 'scenes v1'")),
    }

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::format(eof_line, "missing dimension header"))?;
    let mut dims = [None; 4];
    const KEYS: [&str; 4] = ["samples", "height", "width", "classes"];
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::format(hline, format!("malformed header token {tok:?}")))?;
        let slot = KEYS
            .iter()
            .position(|&key| key == k)
            .ok_or_else(|| Error::format(hline, format!("unknown header key {k:?}")))?;
        if dims[slot].is_some() {
            return Err(Error::format(hline, format!("duplicate header key {k:?}")));
        }
        dims[slot] = Some(parse_usize(v, k, hline)?);
    }
    let mut vals = [0usize; 4];
    for (i, d) in dims.iter().enumerate() {
        vals[i] = d.ok_or_else(|| Error::format(hline, format!("header missing {}=", KEYS[i])))?;
    }
    let [n_samples, height, width, n_classes] = vals;
    if height == 0 || width == 0 || n_classes == 0 {
        return Err(Error::format(hline, "height, width and classes must be positive"));
    }

    let mut samples = Vec::with_capacity(n_samples);
    for si in 0..n_samples {
        let (ln, l) = lines.next().ok_or_else(|| {
            Error::format(
                eof_line,
                format!("file ends after {si} of {n_samples} samples"),
            )
        })?;
        let label_tok = l
            .strip_prefix("label=")
            .ok_or_else(|| Error::format(ln, format!("expected label=<k>, got {l:?}")))?;
        let label = parse_usize(label_tok, "label", ln)?;
        if label >= n_classes {
            return Err(Error::format(ln, format!("label {label} outside [0, {n_classes})")));
        }
        let mut pixels = Vec::with_capacity(height * width);
        for row in 0..height {
            let (rn, rl) = lines.next().ok_or_else(|| {
                Error::format(
                    eof_line,
                    format!("file ends inside sample {} at row {row} of {height}", si + 1),
                )
            })?;
            let before = pixels.len();
            for tok in rl.split_whitespace() {
                let v: f32 = tok
                    .parse()
                    .map_err(|_| Error::format(rn, format!("invalid pixel value {tok:?}")))?;
                if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                    return Err(Error::format(rn, format!("pixel value {tok} outside range [0,1]")));
                }
                pixels.push(v);
            }
            let got = pixels.len() - before;
            if got != width {
                return Err(Error::format(rn, format!("row has {got} values, expected width {width}")));
            }
        }
        samples.push(Sample {
            label,
            height,
            width,
            pixels,
        });
    }
    if let Some((n, l)) = lines.next() {
        return Err(Error::format(
            n,
            format!("trailing content after {n_samples} samples: {l:?}"),
        ));
    }
    Ok(Dataset {
        samples,
        n_classes,
        height,
        width,
    })
}
