//! Corrected-archive construction and archive-level scores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, EvaluatedSolution, Genotype};
use crate::grid::{Descriptor, Grid};
use crate::task::{Evaluation, Evaluator};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("analysis sample count must be >= 2 (got {0})")]
    TooFewSamples(usize),
    #[error("degenerate fitness normalization bounds: lo {0} >= hi {1}")]
    DegenerateNorm(f64, f64),
    #[error("archive cell is missing the statistics required for scoring")]
    MissingStats,
}

/// M-sample statistics of one genotype: expected fitness, mean descriptor,
/// negated descriptor variance and cell-membership probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionStats {
    pub mean_fitness: f64,
    pub mean_descriptor: Descriptor,
    pub ndv: f64,
    pub p_cell: f64,
    pub m_samples: usize,
}

/// Estimate `SolutionStats` from `m` fresh evaluations.
///
/// `p_cell` is the fraction of the sampled descriptors inside the true box
/// of the mean descriptor's cell; samples outside the grid box count as
/// misses even though placement would clamp them in.
pub fn resample_stats<R: Rng>(
    evaluator: &mut Evaluator,
    genotype: &Genotype,
    grid: &Grid,
    m: usize,
    rng: &mut R,
) -> Result<SolutionStats, MetricsError> {
    if m < 2 {
        return Err(MetricsError::TooFewSamples(m));
    }
    let evals: Vec<Evaluation> = (0..m).map(|_| evaluator.evaluate(genotype, rng)).collect();
    let mean_fitness = evals.iter().map(|e| e.fitness).sum::<f64>() / m as f64;
    let mean_descriptor = Descriptor::new(
        evals.iter().map(|e| e.descriptor.x).sum::<f64>() / m as f64,
        evals.iter().map(|e| e.descriptor.y).sum::<f64>() / m as f64,
    );
    let ndv = -evals
        .iter()
        .map(|e| e.descriptor.dist(&mean_descriptor).powi(2))
        .sum::<f64>()
        / (m - 1) as f64;
    let cell = grid.cell_of(&mean_descriptor);
    let hits = evals
        .iter()
        .filter(|e| grid.cell_contains(&cell, &e.descriptor))
        .count();
    Ok(SolutionStats {
        mean_fitness,
        mean_descriptor,
        ndv,
        p_cell: hits as f64 / m as f64,
        m_samples: m,
    })
}

/// Re-place every genotype by its mean descriptor over `m` evaluations,
/// keeping the best expected fitness per cell. Cells carry full stats.
pub fn corrected_archive<R: Rng>(
    genotypes: &[Genotype],
    evaluator: &mut Evaluator,
    grid: &Grid,
    m: usize,
    rng: &mut R,
) -> Result<Archive, MetricsError> {
    let mut archive = Archive::new(grid.clone());
    for g in genotypes {
        let stats = resample_stats(evaluator, g, grid, m, rng)?;
        let sol = EvaluatedSolution {
            genotype: g.clone(),
            mean_fitness: stats.mean_fitness,
            mean_descriptor: stats.mean_descriptor,
            ndv: Some(stats.ndv),
            p_cell: Some(stats.p_cell),
            n_samples: m,
            placement_key: stats.mean_fitness,
        };
        archive.try_insert(sol, stats.mean_fitness, &stats.mean_descriptor);
    }
    Ok(archive)
}

/// Archive-level summary over a corrected archive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchiveScores {
    /// Sum of expected fitnesses, min-max normalized into [0,1] per cell.
    pub qd_score: f64,
    /// Sum of normalized NDVs (0 at the configured worst NDV, 1 at zero).
    pub v_score: f64,
    /// Sum of cell-membership probabilities.
    pub p_score: f64,
    pub coverage: usize,
    pub max_fitness: f64,
}

fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Compute QD-, V- and P-Scores. `fitness_norm` anchors fitness
/// normalization; `ndv_lower` (< 0) maps to a V contribution of 0.
pub fn archive_scores(
    archive: &Archive,
    fitness_norm: (f64, f64),
    ndv_lower: f64,
) -> Result<ArchiveScores, MetricsError> {
    let (f_lo, f_hi) = fitness_norm;
    if f_lo >= f_hi {
        return Err(MetricsError::DegenerateNorm(f_lo, f_hi));
    }
    let mut scores = ArchiveScores {
        qd_score: 0.0,
        v_score: 0.0,
        p_score: 0.0,
        coverage: archive.len(),
        max_fitness: f64::NAN,
    };
    for (_, sol) in archive.iter() {
        let ndv = sol.ndv.ok_or(MetricsError::MissingStats)?;
        let p = sol.p_cell.ok_or(MetricsError::MissingStats)?;
        scores.qd_score += clip01((sol.mean_fitness - f_lo) / (f_hi - f_lo));
        scores.v_score += clip01((ndv - ndv_lower) / (0.0 - ndv_lower));
        scores.p_score += p;
        if scores.max_fitness.is_nan() || sol.mean_fitness > scores.max_fitness {
            scores.max_fitness = sol.mean_fitness;
        }
    }
    Ok(scores)
}

/// Fraction of grid cells whose solution exceeds each fitness threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveProfile {
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
}

pub fn archive_profile(
    archive: &Archive,
    fitness_norm: (f64, f64),
    n_thresholds: usize,
) -> ArchiveProfile {
    assert!(n_thresholds >= 2, "profile needs at least 2 thresholds");
    let (f_lo, f_hi) = fitness_norm;
    let n_cells = archive.grid.n_cells() as f64;
    let mut thresholds = Vec::with_capacity(n_thresholds);
    let mut fractions = Vec::with_capacity(n_thresholds);
    for i in 0..n_thresholds {
        let t = f_lo + (f_hi - f_lo) * i as f64 / (n_thresholds - 1) as f64;
        let count = archive.solutions().filter(|s| s.mean_fitness >= t).count();
        thresholds.push(t);
        fractions.push(count as f64 / n_cells);
    }
    ArchiveProfile {
        thresholds,
        fractions,
    }
}
