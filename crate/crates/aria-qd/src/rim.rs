//! Reproducibility Improvement Mechanism: natural-evolution-strategy ascent
//! on a constraint-shaped objective that drives a solution's descriptor
//! distribution into a target cell while maximizing fitness.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::Genotype;
use crate::grid::{CellIndex, Descriptor, Grid};
use crate::task::{Evaluation, Evaluator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityScheme {
    /// Centered ranks in [-0.5, 0.5], zero-sum, averaged over exact ties.
    #[default]
    CenteredRank,
    /// Log-weighted utilities concentrating weight on the best samples.
    LogWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RimConfig {
    /// Gradient steps per improvement call.
    pub n_grad: usize,
    /// Noise vectors per step (mirroring doubles the evaluations).
    pub n_samples: usize,
    /// Standard deviation of the search perturbations.
    pub sigma: f64,
    pub mirror_sampling: bool,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub utility: UtilityScheme,
}

impl Default for RimConfig {
    fn default() -> Self {
        RimConfig {
            n_grad: 100,
            n_samples: 64,
            sigma: 0.005,
            mirror_sampling: true,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            utility: UtilityScheme::CenteredRank,
        }
    }
}

impl RimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_grad < 1 {
            return Err("rim.n_grad must be >= 1".into());
        }
        if self.n_samples < 2 && !self.mirror_sampling {
            return Err("rim.n_samples must be >= 2 without mirror sampling".into());
        }
        if self.n_samples < 1 {
            return Err("rim.n_samples must be >= 1".into());
        }
        if self.sigma <= 0.0 {
            return Err("rim.sigma must be > 0".into());
        }
        Ok(())
    }

    /// Stochastic evaluations consumed by one gradient step.
    pub fn evals_per_step(&self) -> u64 {
        if self.mirror_sampling {
            2 * self.n_samples as u64
        } else {
            self.n_samples as u64
        }
    }

    /// Stochastic evaluations consumed by one full improvement call.
    pub fn evals_per_improve(&self) -> u64 {
        self.n_grad as u64 * self.evals_per_step()
    }
}

/// Which score function ranks the sampled evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Constraint-shaped objective: fitness inside the target cell,
    /// `f_min - distance to centroid` outside.
    Cell,
    /// Sum of normalized fitness and normalized negated centroid distance.
    Linear,
    /// Raw sampled fitness, ignoring the target cell.
    FitnessOnly,
}

/// Running extremes for the linear objective's min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearNormState {
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub dist_min: Option<f64>,
    pub dist_max: Option<f64>,
}

impl LinearNormState {
    pub fn observe(&mut self, fitness: f64, dist: f64) {
        self.f_min = Some(self.f_min.map_or(fitness, |v| v.min(fitness)));
        self.f_max = Some(self.f_max.map_or(fitness, |v| v.max(fitness)));
        self.dist_min = Some(self.dist_min.map_or(dist, |v| v.min(dist)));
        self.dist_max = Some(self.dist_max.map_or(dist, |v| v.max(dist)));
    }
}

fn min_max_scale(v: f64, lo: Option<f64>, hi: Option<f64>) -> f64 {
    match (lo, hi) {
        (Some(lo), Some(hi)) if hi > lo => (v - lo) / (hi - lo),
        // degenerate span: every observed value is identical
        _ => 0.5,
    }
}

/// Mutable state shared across all improvement calls of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RimState {
    /// Running minimum fitness observed over the whole run.
    pub f_min: f64,
    pub linear: LinearNormState,
}

impl Default for RimState {
    fn default() -> Self {
        RimState {
            f_min: f64::INFINITY,
            linear: LinearNormState::default(),
        }
    }
}

impl RimState {
    pub fn observe_fitness(&mut self, f: f64) {
        if f < self.f_min {
            self.f_min = f;
        }
    }
}

/// Constraint-shaped score: the sampled fitness when the sampled descriptor
/// lands in the cell's true box, `f_min` minus the distance to the cell
/// centroid otherwise. Every in-cell score is >= f_min >= every out-of-cell
/// score, so in-cell samples always rank above out-of-cell ones.
pub fn cell_objective(
    fitness: f64,
    descriptor: &Descriptor,
    cell: &CellIndex,
    grid: &Grid,
    f_min: f64,
) -> f64 {
    if grid.cell_contains(cell, descriptor) {
        fitness
    } else {
        f_min - descriptor.dist(&grid.centroid(cell))
    }
}

/// Linear alternative: normalized fitness plus normalized negated distance
/// to the cell centroid, each min-max scaled to [0,1] by running extremes.
pub fn linear_objective(
    fitness: f64,
    descriptor: &Descriptor,
    cell: &CellIndex,
    grid: &Grid,
    norm: &LinearNormState,
) -> f64 {
    let dist = descriptor.dist(&grid.centroid(cell));
    let nf = min_max_scale(fitness, norm.f_min, norm.f_max);
    // negated distance: dist_min maps to 1, dist_max to 0
    let nd = 1.0 - min_max_scale(dist, norm.dist_min, norm.dist_max);
    nf + nd
}

/// Centered-rank transform: ascending ranks (ties averaged), scaled to
/// [-0.5, 0.5] and summing to zero. A single score maps to [0].
pub fn rank_utilities(scores: &[f64]) -> Vec<f64> {
    let ranks = average_ranks(scores);
    let n = scores.len();
    if n == 1 {
        return vec![0.0];
    }
    ranks.iter().map(|r| r / (n - 1) as f64 - 0.5).collect()
}

/// Log-weighted utilities: the k-th best sample gets weight
/// `max(0, ln(n/2 + 1) - ln(k))`, normalized to sum to 1, shifted by -1/n.
/// Exact ties share the average utility of their positions.
pub fn log_utilities(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    if n == 1 {
        return vec![0.0];
    }
    // weight for descending rank k (1 = best)
    let base = (n as f64 / 2.0 + 1.0).ln();
    let weight = |k: usize| (base - ((k + 1) as f64).ln()).max(0.0);
    let total: f64 = (0..n).map(weight).sum();

    // ascending average ranks -> descending position = n - 1 - rank
    let ranks = average_ranks(scores);
    ranks
        .iter()
        .map(|r| {
            let k = (n - 1) as f64 - r;
            // interpolate between the two bracketing integer positions for
            // fractional (tied) ranks
            let lo = k.floor() as usize;
            let hi = k.ceil() as usize;
            let frac = k - lo as f64;
            let w = weight(lo) * (1.0 - frac) + weight(hi) * frac;
            w / total - 1.0 / n as f64
        })
        .collect()
}

/// Ascending ranks in {0..n-1}, with exact ties assigned the average of
/// their positions.
fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Adaptive-moment gradient-ascent state for one improvement call.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One ascent step: returns the parameter increment for gradient `g`.
    pub fn step(&mut self, g: &[f64], cfg: &RimConfig) -> Vec<f64> {
        self.t += 1;
        let b1 = cfg.beta1;
        let b2 = cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        g.iter()
            .enumerate()
            .map(|(i, &gi)| {
                self.m[i] = b1 * self.m[i] + (1.0 - b1) * gi;
                self.v[i] = b2 * self.v[i] + (1.0 - b2) * gi * gi;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon)
            })
            .collect()
    }
}

/// One NES gradient-ascent step on `phi`.
///
/// Draws `n_samples` standard-normal noise vectors, evaluates `phi + sigma*eps`
/// (and `phi - sigma*eps` under mirroring), scores every evaluation with the
/// chosen objective, ranks the pooled scores into utilities, and applies one
/// adaptive-moment ascent step. `phi` is clipped to the task bounds and the
/// running-minimum fitness is updated with every fitness seen.
#[allow(clippy::too_many_arguments)]
pub fn nes_step<R: Rng>(
    phi: &mut Genotype,
    objective: ObjectiveKind,
    target: &CellIndex,
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &RimConfig,
    adam: &mut AdamState,
    state: &mut RimState,
    rng: &mut R,
) {
    let dim = phi.len();
    let mut noises: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        noises.push((0..dim).map(|_| rng.sample(StandardNormal)).collect());
    }

    // signed perturbations: +eps for every noise vector, -eps when mirroring
    let mut signed: Vec<(f64, usize)> = Vec::new();
    for s in 0..cfg.n_samples {
        signed.push((1.0, s));
        if cfg.mirror_sampling {
            signed.push((-1.0, s));
        }
    }

    let mut evals: Vec<Evaluation> = Vec::with_capacity(signed.len());
    for &(sign, s) in &signed {
        let theta: Vec<f64> = phi
            .iter()
            .zip(&noises[s])
            .map(|(p, e)| p + sign * cfg.sigma * e)
            .collect();
        evals.push(evaluator.evaluate(&theta, rng));
    }

    // fold the whole batch into the shared state before scoring, so that
    // f_min <= every in-cell score within this batch
    for e in &evals {
        state.observe_fitness(e.fitness);
        if objective == ObjectiveKind::Linear {
            let dist = e.descriptor.dist(&grid.centroid(target));
            state.linear.observe(e.fitness, dist);
        }
    }

    let scores: Vec<f64> = evals
        .iter()
        .map(|e| match objective {
            ObjectiveKind::Cell => {
                cell_objective(e.fitness, &e.descriptor, target, grid, state.f_min)
            }
            ObjectiveKind::Linear => {
                linear_objective(e.fitness, &e.descriptor, target, grid, &state.linear)
            }
            ObjectiveKind::FitnessOnly => e.fitness,
        })
        .collect();

    let utilities = match cfg.utility {
        UtilityScheme::CenteredRank => rank_utilities(&scores),
        UtilityScheme::LogWeighted => log_utilities(&scores),
    };

    let n_eval = signed.len() as f64;
    let mut grad = vec![0.0; dim];
    for (j, &(sign, s)) in signed.iter().enumerate() {
        let u = utilities[j];
        for (g, e) in grad.iter_mut().zip(&noises[s]) {
            *g += u * sign * e;
        }
    }
    let denom = cfg.sigma * n_eval;
    if denom > 0.0 {
        for g in grad.iter_mut() {
            *g /= denom;
        }
    }

    let delta = adam.step(&grad, cfg);
    for (p, d) in phi.iter_mut().zip(&delta) {
        *p += d;
    }
    evaluator.task.clip(phi);
}

/// Run `n_grad` NES steps from `phi_init` toward `target` under the chosen
/// objective and return the final genotype. Consumes exactly
/// `n_grad * evals_per_step()` stochastic evaluations.
#[allow(clippy::too_many_arguments)]
pub fn improve<R: Rng>(
    phi_init: &Genotype,
    target: &CellIndex,
    objective: ObjectiveKind,
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &RimConfig,
    state: &mut RimState,
    rng: &mut R,
) -> Genotype {
    let mut phi = phi_init.clone();
    let mut adam = AdamState::new(phi.len());
    for _ in 0..cfg.n_grad {
        nes_step(
            &mut phi, objective, target, evaluator, grid, cfg, &mut adam, state, rng,
        );
    }
    phi
}
