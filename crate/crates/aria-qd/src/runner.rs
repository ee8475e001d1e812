//! Executes a run config end to end: replicated algorithm runs, corrected
//! evaluation, and the on-disk artifacts (archives, metrics, profiles,
//! manifest).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, Genotype};
use crate::aria::{run_aria, AriaRunInfo, InitSource};
use crate::baselines::{
    collapse_mome, run_map_elites, run_me_sampling, run_mome_r, BaselineConfig,
};
use crate::config::{Algorithm, RunConfig};
use crate::grid::Grid;
use crate::metrics::{archive_profile, archive_scores, corrected_archive, ArchiveScores};
use crate::rim::ObjectiveKind;
use crate::task::{Evaluator, Task};

/// Environment variable naming the directory that relative `output_dir`
/// values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "ARIA_QD_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("algorithm failed: {0}")]
    Algorithm(String),
    #[error("archive/task mismatch: {0}")]
    Mismatch(String),
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| RunError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One metrics row as written to `metrics.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub replication: usize,
    pub seed: u64,
    pub qd_score: f64,
    pub v_score: f64,
    pub p_score: f64,
    pub coverage: usize,
    pub max_fitness: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub seed: u64,
    pub evals_run: u64,
    pub evals_analysis: u64,
    pub budget_truncated: bool,
    pub wall_time_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aria: Option<AriaRunInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_hash: String,
    pub replications: Vec<ReplicationRecord>,
    pub total_evals_run: u64,
}

/// In-memory result of one replication, before any file is written.
pub struct ReplicationResult {
    pub raw_archive: Archive,
    pub corrected: Archive,
    pub scores: ArchiveScores,
    pub evals_run: u64,
    pub evals_analysis: u64,
    pub budget_truncated: bool,
    pub aria: Option<AriaRunInfo>,
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::MapElites => "map_elites",
        Algorithm::MeSa => "me_sa",
        Algorithm::MeSaR => "me_sa_r",
        Algorithm::MomeR => "mome_r",
        Algorithm::AriaMe => "aria_me",
        Algorithm::AriaEs => "aria_es",
        Algorithm::AriaFile => "aria_file",
        Algorithm::LinearRim => "linear_rim",
    }
}

/// Run the configured algorithm once and return the raw archive plus
/// accounting. `seed` drives every stochastic choice of the run.
pub fn run_algorithm(
    cfg: &RunConfig,
    task: &Task,
    grid: &Grid,
    seed: u64,
) -> Result<(Archive, u64, bool, Option<AriaRunInfo>), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluator = Evaluator::new(task.clone());
    let budget = cfg.eval_budget;
    let base = BaselineConfig {
        eval_budget: budget,
        ..cfg.baseline.clone()
    };

    let aria_run = |init: InitSource,
                    objective: ObjectiveKind,
                    evaluator: &mut Evaluator,
                    rng: &mut ChaCha8Rng,
                    budget: u64|
     -> Result<(Archive, AriaRunInfo), RunError> {
        run_aria(
            init,
            objective,
            evaluator,
            grid,
            &cfg.aria,
            Some(budget),
            rng,
        )
        .map_err(|e| RunError::Algorithm(e.to_string()))
    };

    // MAP-Elites initializer shared by the `aria_me` and `linear_rim`
    // variants: spends its budget share, hands its genotypes to phase 1.
    let me_init = |evaluator: &mut Evaluator,
                   rng: &mut ChaCha8Rng|
     -> Result<Vec<Genotype>, RunError> {
        let init_budget = (budget as f64 * cfg.init_budget_fraction) as u64;
        let init_cfg = BaselineConfig {
            eval_budget: init_budget.max(1),
            ..cfg.baseline.clone()
        };
        let archive = run_map_elites(evaluator, grid, &init_cfg, rng);
        let genotypes: Vec<Genotype> = archive.solutions().map(|s| s.genotype.clone()).collect();
        if genotypes.is_empty() {
            return Err(RunError::Algorithm(
                "map-elites initializer produced nothing".into(),
            ));
        }
        Ok(genotypes)
    };

    match cfg.algorithm {
        Algorithm::MapElites => {
            let a = run_map_elites(&mut evaluator, grid, &base, &mut rng);
            Ok((a, evaluator.count(), false, None))
        }
        Algorithm::MeSa => {
            let a = run_me_sampling(&mut evaluator, grid, &base, false, &mut rng)
                .map_err(|e| RunError::Algorithm(e.to_string()))?;
            Ok((a, evaluator.count(), false, None))
        }
        Algorithm::MeSaR => {
            let a = run_me_sampling(&mut evaluator, grid, &base, true, &mut rng)
                .map_err(|e| RunError::Algorithm(e.to_string()))?;
            Ok((a, evaluator.count(), false, None))
        }
        Algorithm::MomeR => {
            let fronts = run_mome_r(&mut evaluator, grid, &base, &mut rng)
                .map_err(|e| RunError::Algorithm(e.to_string()))?;
            Ok((collapse_mome(&fronts), evaluator.count(), false, None))
        }
        Algorithm::AriaEs => {
            let (a, info) = aria_run(
                InitSource::EsInit,
                ObjectiveKind::Cell,
                &mut evaluator,
                &mut rng,
                budget,
            )?;
            let truncated = info.budget_truncated;
            Ok((a, evaluator.count(), truncated, Some(info)))
        }
        Algorithm::AriaMe | Algorithm::LinearRim => {
            let objective = if cfg.algorithm == Algorithm::LinearRim {
                ObjectiveKind::Linear
            } else {
                ObjectiveKind::Cell
            };
            let genotypes = me_init(&mut evaluator, &mut rng)?;
            let remaining = budget.saturating_sub(evaluator.count());
            let (a, info) = aria_run(
                InitSource::Genotypes(genotypes),
                objective,
                &mut evaluator,
                &mut rng,
                remaining,
            )?;
            let truncated = info.budget_truncated;
            Ok((a, evaluator.count(), truncated, Some(info)))
        }
        Algorithm::AriaFile => {
            let path = PathBuf::from(cfg.archive_path.as_deref().expect("validated"));
            let input: Archive = read_json(&path)?;
            if input.grid != *grid {
                return Err(RunError::Mismatch(format!(
                    "input archive grid {}x{} differs from configured {}x{}",
                    input.grid.nx, input.grid.ny, grid.nx, grid.ny
                )));
            }
            let genotypes: Vec<Genotype> = input.solutions().map(|s| s.genotype.clone()).collect();
            if let Some(s) = genotypes.first() {
                if s.len() != task.genotype_dim {
                    return Err(RunError::Mismatch(format!(
                        "archive genotypes have {} components, task expects {}",
                        s.len(),
                        task.genotype_dim
                    )));
                }
            }
            let (a, info) = aria_run(
                InitSource::Genotypes(genotypes),
                ObjectiveKind::Cell,
                &mut evaluator,
                &mut rng,
                budget,
            )?;
            let truncated = info.budget_truncated;
            Ok((a, evaluator.count(), truncated, Some(info)))
        }
    }
}

/// Corrected evaluation of a finished archive: re-place every genotype by
/// its mean statistics over `m` fresh evaluations.
pub fn evaluate_archive(
    archive: &Archive,
    task: &Task,
    m: usize,
    seed: u64,
) -> Result<(Archive, ArchiveScores, u64), RunError> {
    if m < 2 {
        return Err(RunError::InvalidConfig(
            "analysis samples must be >= 2".into(),
        ));
    }
    let genotypes: Vec<Genotype> = archive.solutions().map(|s| s.genotype.clone()).collect();
    if let Some(g) = genotypes.first() {
        if g.len() != task.genotype_dim {
            return Err(RunError::Mismatch(format!(
                "archive genotypes have {} components, task expects {}",
                g.len(),
                task.genotype_dim
            )));
        }
    }
    let mut evaluator = Evaluator::new(task.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corrected = corrected_archive(&genotypes, &mut evaluator, &archive.grid, m, &mut rng)
        .map_err(|e| RunError::Algorithm(e.to_string()))?;
    let scores = archive_scores(
        &corrected,
        task.fitness_norm_bounds(),
        task.ndv_norm_lower(),
    )
    .map_err(|e| RunError::Algorithm(e.to_string()))?;
    Ok((corrected, scores, evaluator.count()))
}

pub fn run_replication(cfg: &RunConfig, rep: usize) -> Result<ReplicationResult, RunError> {
    let task = cfg.task.build();
    let grid = Grid::unit(cfg.grid.nx, cfg.grid.ny);
    let seed = cfg.seed + rep as u64;
    let (raw_archive, evals_run, budget_truncated, aria) = run_algorithm(cfg, &task, &grid, seed)?;
    let analysis_seed = cfg.analysis.seed.unwrap_or(seed);
    let (corrected, scores, evals_analysis) =
        evaluate_archive(&raw_archive, &task, cfg.analysis.m_samples, analysis_seed)?;
    Ok(ReplicationResult {
        raw_archive,
        corrected,
        scores,
        evals_run,
        evals_analysis,
        budget_truncated,
        aria,
    })
}

/// Execute every replication of the config and write all artifacts under
/// `out_dir`. Returns the manifest.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, RunError> {
    cfg.validate().map_err(RunError::InvalidConfig)?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let task = cfg.task.build();
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut records: Vec<ReplicationRecord> = Vec::new();

    for rep in 0..cfg.n_replications {
        let t0 = Instant::now();
        let result = run_replication(cfg, rep)?;
        let seed = cfg.seed + rep as u64;

        write_json(
            &out_dir.join(format!("archive_{rep}.json")),
            &result.raw_archive,
        )?;

        let profile = archive_profile(
            &result.corrected,
            task.fitness_norm_bounds(),
            cfg.analysis.n_thresholds,
        );
        let mut w = csv::Writer::from_path(out_dir.join(format!("profile_{rep}.csv")))?;
        w.write_record(["threshold", "fraction"])?;
        for (t, f) in profile.thresholds.iter().zip(&profile.fractions) {
            w.write_record([t.to_string(), f.to_string()])?;
        }
        w.flush().map_err(|source| RunError::Io {
            path: out_dir.join(format!("profile_{rep}.csv")),
            source,
        })?;

        rows.push(MetricsRow {
            algorithm: algorithm_name(cfg.algorithm).into(),
            replication: rep,
            seed,
            qd_score: result.scores.qd_score,
            v_score: result.scores.v_score,
            p_score: result.scores.p_score,
            coverage: result.scores.coverage,
            max_fitness: result.scores.max_fitness,
            evaluations: result.evals_run,
        });
        records.push(ReplicationRecord {
            seed,
            evals_run: result.evals_run,
            evals_analysis: result.evals_analysis,
            budget_truncated: result.budget_truncated,
            wall_time_ms: t0.elapsed().as_millis() as u64,
            aria: result.aria,
        });
    }

    let mut w = csv::Writer::from_path(out_dir.join("metrics.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| RunError::Io {
        path: out_dir.join("metrics.csv"),
        source,
    })?;

    let manifest = Manifest {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        total_evals_run: records.iter().map(|r| r.evals_run).sum(),
        replications: records,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Load a config file, resolving the output directory against the root.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let cfg: RunConfig = read_json(path)?;
    cfg.validate().map_err(RunError::InvalidConfig)?;
    Ok(cfg)
}

pub fn load_archive(path: &Path) -> Result<Archive, RunError> {
    read_json(path)
}
