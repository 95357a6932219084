//! Cuttlefish population optimizer for box-constrained minimization.
//!
//! The population is split in index order into four groups, each with its
//! own proposal rule built from a *reflection* term and a *visibility* term:
//!
//! | group | reflection            | visibility                          |
//! |-------|-----------------------|-------------------------------------|
//! | G1    | `Q · cell[i]`         | `U · (best[i] − cell[i])`           |
//! | G2    | `Q · best[i]`         | `U · (best[i] − cell[i])`           |
//! | G3    | `Q · best[i]`         | `V · (best[i] − mean(best))`        |
//! | G4    | fresh uniform sample in the box                             ||
//!
//! `Q = r·(q1 − q2) + q2` and `U = r·(u1 − u2) + u2` are redrawn for every
//! proposal; `V` is drawn like `U`. Proposals are clamped to the box and a
//! cell keeps a proposal only if it is strictly better, so the best-so-far
//! fitness never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;

/// A pure objective to minimize.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub point: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuttlefishConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub pop_size: usize,
    pub group_fractions: [f64; 4],
    pub q1: f64,
    pub q2: f64,
    pub u1: f64,
    pub u2: f64,
    /// Maximum number of objective evaluations, initialization included.
    pub budget: usize,
    pub seed: u64,
}

pub const DEFAULT_GROUP_FRACTIONS: [f64; 4] = [0.5, 0.25, 0.15, 0.1];

impl CuttlefishConfig {
    /// Default parameters over the box `[lower, upper]`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        CuttlefishConfig {
            lower,
            upper,
            pop_size: 40,
            group_fractions: DEFAULT_GROUP_FRACTIONS,
            q1: 1.0,
            q2: -0.5,
            u1: 1.0,
            u2: -0.5,
            budget: 10_000,
            seed: 0,
        }
    }

    /// Same bounds `[lo, hi]` on every one of `dim` coordinates.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::usage(format!(
                "bounds must be non-empty and of equal length (lower {}, upper {})",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::usage(format!(
                    "bound {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        if self.pop_size == 0 {
            return Err(Error::usage("co.pop_size must be >= 1"));
        }
        let f = &self.group_fractions;
        if f.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::usage(format!(
                "group fractions must be >= 0 and sum to 1, got {f:?}"
            )));
        }
        for (name, v) in [("q1", self.q1), ("q2", self.q2), ("u1", self.u1), ("u2", self.u2)] {
            if !v.is_finite() {
                return Err(Error::usage(format!("co.{name} must be finite")));
            }
        }
        if self.budget < self.pop_size {
            return Err(Error::usage(format!(
                "budget {} is smaller than the population {}",
                self.budget, self.pop_size
            )));
        }
        Ok(())
    }

    /// Exclusive end index of each group within the population.
    pub fn group_bounds(&self) -> [usize; 4] {
        let n = self.pop_size as f64;
        let mut cum = 0.0;
        let mut out = [self.pop_size; 4];
        for (g, frac) in self.group_fractions.iter().take(3).enumerate() {
            cum += frac;
            out[g] = ((cum * n).round() as usize).min(self.pop_size);
        }
        for g in 1..4 {
            out[g] = out[g].max(out[g - 1]);
        }
        out
    }

    fn group_of(&self, bounds: &[usize; 4], index: usize) -> usize {
        bounds.iter().position(|&end| index < end).unwrap_or(3)
    }

    pub fn clamp(&self, point: &mut [f64]) {
        for ((x, lo), hi) in point.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuttlefishState {
    pub population: Vec<Cell>,
    pub best: Cell,
    pub av_best: f64,
    pub evals_used: usize,
    pub rng: Rng,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Reflection factor `Q`, drawn uniformly between `q2` and `q1`.
pub fn draw_reflection(rng: &mut Rng, cfg: &CuttlefishConfig) -> f64 {
    rng.next_f64() * (cfg.q1 - cfg.q2) + cfg.q2
}

/// Visibility factor `U` (also used as `V`), drawn uniformly between `u2` and `u1`.
pub fn draw_visibility(rng: &mut Rng, cfg: &CuttlefishConfig) -> f64 {
    rng.next_f64() * (cfg.u1 - cfg.u2) + cfg.u2
}

/// G1: `Q·cell + U·(best − cell)`.
pub fn new_point_g1(cell: &[f64], best: &[f64], q: f64, u: f64) -> Vec<f64> {
    cell.iter().zip(best).map(|(&c, &b)| q * c + u * (b - c)).collect()
}

/// G2: `Q·best + U·(best − cell)`.
pub fn new_point_g2(cell: &[f64], best: &[f64], q: f64, u: f64) -> Vec<f64> {
    cell.iter().zip(best).map(|(&c, &b)| q * b + u * (b - c)).collect()
}

/// G3: `Q·best + V·(best − av_best)`.
pub fn new_point_g3(best: &[f64], av_best: f64, q: f64, v: f64) -> Vec<f64> {
    best.iter().map(|&b| q * b + v * (b - av_best)).collect()
}

/// G4: uniform sample in the box.
pub fn new_point_g4(cfg: &CuttlefishConfig, rng: &mut Rng) -> Vec<f64> {
    cfg.lower
        .iter()
        .zip(&cfg.upper)
        .map(|(&lo, &hi)| rng.uniform(lo, hi).min(hi))
        .collect()
}

fn check_finite(fitness: f64, point: &[f64]) -> Result<f64> {
    if fitness.is_finite() {
        Ok(fitness)
    } else {
        Err(Error::numeric(format!("objective returned {fitness} at point {point:?}")))
    }
}

fn evaluate_all<O: Objective + ?Sized>(obj: &O, points: Vec<Vec<f64>>) -> Result<Vec<Cell>> {
    let fits = par::map(&points, |p| obj.evaluate(p));
    points
        .into_iter()
        .zip(fits)
        .map(|(point, f)| check_finite(f, &point).map(|fitness| Cell { point, fitness }))
        .collect()
}

pub fn cf_init<O: Objective + ?Sized>(cfg: &CuttlefishConfig, obj: &O) -> Result<CuttlefishState> {
    cfg.validate()?;
    let mut rng = Rng::stream(cfg.seed, "cuttlefish");
    let points: Vec<Vec<f64>> = (0..cfg.pop_size).map(|_| new_point_g4(cfg, &mut rng)).collect();
    let population = evaluate_all(obj, points)?;
    let mut best = &population[0];
    for c in &population[1..] {
        if c.fitness < best.fitness {
            best = c;
        }
    }
    let best = best.clone();
    let av_best = mean(&best.point);
    Ok(CuttlefishState {
        evals_used: population.len(),
        population,
        best,
        av_best,
        rng,
    })
}

/// One generation. Returns `false` when the budget was already exhausted and
/// nothing was evaluated. A generation that would overrun the budget only
/// proposes for the leading cells that still fit.
pub fn cf_step<O: Objective + ?Sized>(
    state: &mut CuttlefishState,
    cfg: &CuttlefishConfig,
    obj: &O,
) -> Result<bool> {
    let remaining = cfg.budget.saturating_sub(state.evals_used);
    if remaining == 0 {
        return Ok(false);
    }
    let n = state.population.len().min(remaining);
    let bounds = cfg.group_bounds();
    let best = state.best.point.clone();

    let mut proposals = Vec::with_capacity(n);
    for (i, cell) in state.population.iter().take(n).enumerate() {
        let mut p = match cfg.group_of(&bounds, i) {
            0 => {
                let q = draw_reflection(&mut state.rng, cfg);
                let u = draw_visibility(&mut state.rng, cfg);
                new_point_g1(&cell.point, &best, q, u)
            }
            1 => {
                let q = draw_reflection(&mut state.rng, cfg);
                let u = draw_visibility(&mut state.rng, cfg);
                new_point_g2(&cell.point, &best, q, u)
            }
            2 => {
                let q = draw_reflection(&mut state.rng, cfg);
                let v = draw_visibility(&mut state.rng, cfg);
                new_point_g3(&best, state.av_best, q, v)
            }
            _ => new_point_g4(cfg, &mut state.rng),
        };
        cfg.clamp(&mut p);
        proposals.push(p);
    }

    let evaluated = evaluate_all(obj, proposals)?;
    state.evals_used += evaluated.len();
    for (i, cand) in evaluated.into_iter().enumerate() {
        if cand.fitness < state.best.fitness {
            state.best = cand.clone();
        }
        if cand.fitness < state.population[i].fitness {
            state.population[i] = cand;
        }
    }
    state.av_best = mean(&state.best.point);
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_point: Vec<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness after each generation; entry 0 is the initial
    /// population.
    pub curve: Vec<f64>,
    pub evals_used: usize,
}

impl OptimizeResult {
    pub fn iterations(&self) -> usize {
        self.curve.len()
    }
}

pub fn cf_optimize<O: Objective + ?Sized>(cfg: &CuttlefishConfig, obj: &O) -> Result<OptimizeResult> {
    cf_optimize_with(cfg, obj, |_| {})
}

/// [`cf_optimize`] with a callback observing the state after every generation.
pub fn cf_optimize_with<O, F>(cfg: &CuttlefishConfig, obj: &O, mut observe: F) -> Result<OptimizeResult>
where
    O: Objective + ?Sized,
    F: FnMut(&CuttlefishState),
{
    let mut state = cf_init(cfg, obj)?;
    observe(&state);
    let mut curve = vec![state.best.fitness];
    while cf_step(&mut state, cfg, obj)? {
        observe(&state);
        curve.push(state.best.fitness);
    }
    Ok(OptimizeResult {
        best_point: state.best.point,
        best_fitness: state.best.fitness,
        curve,
        evals_used: state.evals_used,
    })
}

/// Standard benchmark objectives.
pub mod functions {
    pub fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    pub fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    pub fn rastrigin(x: &[f64]) -> f64 {
        10.0 * x.len() as f64
            + x.iter()
                .map(|v| v * v - 10.0 * (std::f64::consts::TAU * v).cos())
                .sum::<f64>()
    }

    /// Look up a benchmark by name together with its conventional box.
    pub fn by_name(name: &str) -> Option<(fn(&[f64]) -> f64, f64, f64)> {
        match name {
            "sphere" => Some((sphere, -5.0, 5.0)),
            "rosenbrock" => Some((rosenbrock, -5.0, 5.0)),
            "rastrigin" => Some((rastrigin, -5.12, 5.12)),
            _ => None,
        }
    }
}
