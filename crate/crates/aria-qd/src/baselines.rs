//! Archive-producing baselines: MAP-Elites, MAP-Elites with sampling
//! (optionally penalized by descriptor variance), and the multi-objective
//! variant storing per-cell Pareto fronts over (mean fitness, NDV).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, EvaluatedSolution, Genotype, ParetoArchive};
use crate::grid::{Descriptor, Grid};
use crate::task::{Evaluation, Evaluator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variation {
    /// Per-component Gaussian sigma1 plus a line component sigma2 toward a
    /// second random parent.
    IsoLine { sigma1: f64, sigma2: f64 },
    /// Plain per-component Gaussian mutation.
    Gaussian { sigma: f64 },
}

impl Default for Variation {
    fn default() -> Self {
        Variation::IsoLine {
            sigma1: 0.01,
            sigma2: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub batch_size: usize,
    /// Re-evaluations per candidate for the sampling-based variants.
    pub n_resamples: usize,
    pub eval_budget: u64,
    pub variation: Variation,
    pub front_capacity: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            batch_size: 128,
            n_resamples: 32,
            eval_budget: 100_000,
            variation: Variation::default(),
            front_capacity: ParetoArchive::DEFAULT_FRONT_CAPACITY,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size < 1 {
            return Err("baseline.batch_size must be >= 1".into());
        }
        if self.eval_budget < self.batch_size as u64 {
            return Err("baseline.eval_budget must cover the initial batch".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("n_resamples must be >= 2 for sampling-based baselines (got {0})")]
    ResamplesTooFew(usize),
}

/// Apply the configured variation operator and clip to the task bounds.
fn vary<R: Rng>(
    parent: &Genotype,
    other: &Genotype,
    variation: Variation,
    evaluator: &Evaluator,
    rng: &mut R,
) -> Genotype {
    let mut child: Genotype = match variation {
        Variation::IsoLine { sigma1, sigma2 } => {
            let line: f64 = rng.sample::<f64, _>(StandardNormal) * sigma2;
            parent
                .iter()
                .zip(other)
                .map(|(p, o)| p + sigma1 * rng.sample::<f64, _>(StandardNormal) + line * (o - p))
                .collect()
        }
        Variation::Gaussian { sigma } => parent
            .iter()
            .map(|p| p + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    evaluator.task.clip(&mut child);
    child
}

fn single_sample_solution(genotype: Genotype, e: &Evaluation) -> EvaluatedSolution {
    EvaluatedSolution {
        genotype,
        mean_fitness: e.fitness,
        mean_descriptor: e.descriptor,
        ndv: None,
        p_cell: None,
        n_samples: 1,
        placement_key: e.fitness,
    }
}

/// Mean fitness, mean descriptor and NDV from `n` fresh evaluations.
pub fn resampled_solution<R: Rng>(
    genotype: Genotype,
    n: usize,
    evaluator: &mut Evaluator,
    rng: &mut R,
) -> EvaluatedSolution {
    debug_assert!(n >= 2);
    let evals: Vec<Evaluation> = (0..n).map(|_| evaluator.evaluate(&genotype, rng)).collect();
    let mean_fitness = evals.iter().map(|e| e.fitness).sum::<f64>() / n as f64;
    let mean_descriptor = Descriptor::new(
        evals.iter().map(|e| e.descriptor.x).sum::<f64>() / n as f64,
        evals.iter().map(|e| e.descriptor.y).sum::<f64>() / n as f64,
    );
    let ndv = -evals
        .iter()
        .map(|e| e.descriptor.dist(&mean_descriptor).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    EvaluatedSolution {
        genotype,
        mean_fitness,
        mean_descriptor,
        ndv: Some(ndv),
        p_cell: None,
        n_samples: n,
        placement_key: mean_fitness,
    }
}

/// Running min-max tracker for online key normalization.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormTracker {
    min: Option<f64>,
    max: Option<f64>,
}

impl NormTracker {
    pub fn observe(&mut self, v: f64) {
        self.min = Some(self.min.map_or(v, |m| m.min(v)));
        self.max = Some(self.max.map_or(v, |m| m.max(v)));
    }

    pub fn scale(&self, v: f64) -> f64 {
        match (self.min, self.max) {
            (Some(lo), Some(hi)) if hi > lo => (v - lo) / (hi - lo),
            _ => 0.5,
        }
    }
}

/// Uniform-random parent from the archive's occupied cells.
fn select_parent<'a, R: Rng>(
    cells: &[&'a EvaluatedSolution],
    rng: &mut R,
) -> &'a EvaluatedSolution {
    cells.choose(rng).expect("selection from empty archive")
}

/// Vanilla MAP-Elites: one stochastic sample per candidate, placement by the
/// sampled descriptor, elitism on the sampled fitness.
pub fn run_map_elites<R: Rng>(
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Archive {
    let mut archive = Archive::new(grid.clone());
    let start = evaluator.count();
    let budget = cfg.eval_budget;

    // initial population: uniform random genotypes
    let mut used = 0u64;
    for _ in 0..cfg.batch_size {
        if used + 1 > budget {
            break;
        }
        let g = evaluator.task.random_genotype(rng);
        let e = evaluator.evaluate(&g, rng);
        used += 1;
        let sol = single_sample_solution(g, &e);
        archive.try_insert(sol, e.fitness, &e.descriptor);
    }

    while used < budget && !archive.is_empty() {
        let parents: Vec<&EvaluatedSolution> = archive.solutions().collect();
        let batch = (cfg.batch_size as u64).min(budget - used);
        let children: Vec<Genotype> = (0..batch)
            .map(|_| {
                let p1 = select_parent(&parents, rng);
                let p2 = select_parent(&parents, rng);
                vary(&p1.genotype, &p2.genotype, cfg.variation, evaluator, rng)
            })
            .collect();
        for g in children {
            let e = evaluator.evaluate(&g, rng);
            used += 1;
            let sol = single_sample_solution(g, &e);
            archive.try_insert(sol, e.fitness, &e.descriptor);
        }
    }

    debug_assert!(evaluator.count() - start <= budget);
    archive
}

/// MAP-Elites with sampling: every candidate is evaluated `n_resamples`
/// times and placed by its mean descriptor. Without the reproducibility
/// penalty the insertion key is the online-normalized mean fitness; with it,
/// the normalized NDV is added.
pub fn run_me_sampling<R: Rng>(
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &BaselineConfig,
    reproducibility_penalty: bool,
    rng: &mut R,
) -> Result<Archive, BaselineError> {
    if cfg.n_resamples < 2 {
        return Err(BaselineError::ResamplesTooFew(cfg.n_resamples));
    }
    let n_r = cfg.n_resamples as u64;
    let budget = cfg.eval_budget;
    let mut archive = Archive::new(grid.clone());
    let mut fit_norm = NormTracker::default();
    let mut ndv_norm = NormTracker::default();
    let mut used = 0u64;

    let admit = |archive: &mut Archive,
                 sol: EvaluatedSolution,
                 fit_norm: &mut NormTracker,
                 ndv_norm: &mut NormTracker| {
        fit_norm.observe(sol.mean_fitness);
        ndv_norm.observe(sol.ndv_value());
        let key = if reproducibility_penalty {
            fit_norm.scale(sol.mean_fitness) + ndv_norm.scale(sol.ndv_value())
        } else {
            fit_norm.scale(sol.mean_fitness)
        };
        let d = sol.mean_descriptor;
        archive.try_insert(sol, key, &d);
    };

    for _ in 0..cfg.batch_size {
        if used + n_r > budget {
            break;
        }
        let g = evaluator.task.random_genotype(rng);
        let sol = resampled_solution(g, cfg.n_resamples, evaluator, rng);
        used += n_r;
        admit(&mut archive, sol, &mut fit_norm, &mut ndv_norm);
    }

    while used + n_r <= budget && !archive.is_empty() {
        let parents: Vec<&EvaluatedSolution> = archive.solutions().collect();
        let batch = (cfg.batch_size as u64).min((budget - used) / n_r);
        let children: Vec<Genotype> = (0..batch)
            .map(|_| {
                let p1 = select_parent(&parents, rng);
                let p2 = select_parent(&parents, rng);
                vary(&p1.genotype, &p2.genotype, cfg.variation, evaluator, rng)
            })
            .collect();
        for g in children {
            let sol = resampled_solution(g, cfg.n_resamples, evaluator, rng);
            used += n_r;
            admit(&mut archive, sol, &mut fit_norm, &mut ndv_norm);
        }
    }

    Ok(archive)
}

/// Multi-objective variant: per-cell Pareto fronts over (mean fitness, NDV),
/// uniform selection over all stored front members.
pub fn run_mome_r<R: Rng>(
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<ParetoArchive, BaselineError> {
    if cfg.n_resamples < 2 {
        return Err(BaselineError::ResamplesTooFew(cfg.n_resamples));
    }
    let n_r = cfg.n_resamples as u64;
    let budget = cfg.eval_budget;
    let mut archive = ParetoArchive::new(grid.clone(), cfg.front_capacity);
    let mut used = 0u64;

    for _ in 0..cfg.batch_size {
        if used + n_r > budget {
            break;
        }
        let g = evaluator.task.random_genotype(rng);
        let sol = resampled_solution(g, cfg.n_resamples, evaluator, rng);
        used += n_r;
        archive.pareto_insert(sol);
    }

    while used + n_r <= budget && !archive.is_empty() {
        let members: Vec<&EvaluatedSolution> = archive.solutions().collect();
        let batch = (cfg.batch_size as u64).min((budget - used) / n_r);
        let children: Vec<Genotype> = (0..batch)
            .map(|_| {
                let p1 = select_parent(&members, rng);
                let p2 = select_parent(&members, rng);
                vary(&p1.genotype, &p2.genotype, cfg.variation, evaluator, rng)
            })
            .collect();
        for g in children {
            let sol = resampled_solution(g, cfg.n_resamples, evaluator, rng);
            used += n_r;
            archive.pareto_insert(sol);
        }
    }

    Ok(archive)
}

/// Reduce a Pareto archive to one solution per cell: the front member
/// maximizing normalized mean fitness + normalized NDV, normalization taken
/// over all stored solutions. Ties break toward higher mean fitness, then
/// front (insertion) order.
pub fn collapse_mome(archive: &ParetoArchive) -> Archive {
    let mut out = Archive::new(archive.grid.clone());
    let mut fit_norm = NormTracker::default();
    let mut ndv_norm = NormTracker::default();
    for sol in archive.solutions() {
        fit_norm.observe(sol.mean_fitness);
        ndv_norm.observe(sol.ndv_value());
    }

    for (cell, front) in archive.iter() {
        let mut best: Option<(&EvaluatedSolution, f64)> = None;
        for sol in front {
            let score = fit_norm.scale(sol.mean_fitness) + ndv_norm.scale(sol.ndv_value());
            let better = match best {
                None => true,
                Some((b, bs)) => score > bs || (score == bs && sol.mean_fitness > b.mean_fitness),
            };
            if better {
                best = Some((sol, score));
            }
        }
        if let Some((sol, score)) = best {
            let mut sol = sol.clone();
            sol.placement_key = score;
            out.put(*cell, sol);
        }
    }
    out
}
