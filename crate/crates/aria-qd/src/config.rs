//! Run configuration: one JSON document describing the task, grid,
//! algorithm, budgets and replication plan.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aria::AriaConfig;
use crate::baselines::BaselineConfig;
use crate::task::{Task, TaskName};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub name: TaskName,
    pub sigma_f: f64,
    pub sigma_d: f64,
    /// Genotype dimension for the synthetic point task; ignored by the arm.
    pub genotype_dim: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            name: TaskName::Arm8,
            sigma_f: 0.01,
            sigma_d: 0.01,
            genotype_dim: 8,
        }
    }
}

impl TaskConfig {
    pub fn build(&self) -> Task {
        match self.name {
            TaskName::Arm8 => Task::arm8(self.sigma_f, self.sigma_d),
            TaskName::Point2 => Task::point2(self.genotype_dim, self.sigma_f, self.sigma_d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 16, ny: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    MapElites,
    MeSa,
    MeSaR,
    MomeR,
    /// Both phases, initialized from an internal MAP-Elites run.
    AriaMe,
    /// Both phases, initialized from a single fitness-only improved genotype.
    AriaEs,
    /// Both phases, initialized from genotypes in an archive file.
    AriaFile,
    /// The ablation: improvement driven by the linear mixed objective.
    LinearRim,
}

impl Algorithm {
    pub fn is_aria(self) -> bool {
        matches!(
            self,
            Algorithm::AriaMe | Algorithm::AriaEs | Algorithm::AriaFile | Algorithm::LinearRim
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Re-evaluations per genotype for corrected metrics.
    pub m_samples: usize,
    pub n_thresholds: usize,
    /// Seed for the corrected evaluation; defaults to the replication seed.
    pub seed: Option<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            m_samples: 1024,
            n_thresholds: 64,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub aria: AriaConfig,
    /// Share of the budget given to the MAP-Elites initializer of `aria_me`
    /// (and `linear_rim`); remaining budget goes to the two phases.
    #[serde(default = "default_init_budget_fraction")]
    pub init_budget_fraction: f64,
    /// Input archive for `aria_file`.
    #[serde(default)]
    pub archive_path: Option<String>,
    pub eval_budget: u64,
    #[serde(default = "default_replications")]
    pub n_replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Output directory; relative paths resolve against the output root.
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_init_budget_fraction() -> f64 {
    0.5
}

fn default_replications() -> usize {
    1
}

fn default_output_dir() -> String {
    "run".into()
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.eval_budget == 0 {
            return Err("eval_budget must be > 0".into());
        }
        if self.n_replications == 0 {
            return Err("n_replications must be > 0".into());
        }
        if self.grid.nx == 0 || self.grid.ny == 0 {
            return Err("grid.nx and grid.ny must be > 0".into());
        }
        if self.task.sigma_f < 0.0 || self.task.sigma_d < 0.0 {
            return Err("task.sigma_f and task.sigma_d must be >= 0".into());
        }
        if self.task.name == TaskName::Point2 && self.task.genotype_dim < 2 {
            return Err("task.genotype_dim must be >= 2 for the point task".into());
        }
        if !(0.0..1.0).contains(&self.init_budget_fraction) {
            return Err("init_budget_fraction must be in [0, 1)".into());
        }
        if self.analysis.m_samples < 2 {
            return Err("analysis.m_samples must be >= 2".into());
        }
        if self.analysis.n_thresholds < 2 {
            return Err("analysis.n_thresholds must be >= 2".into());
        }
        if self.algorithm == Algorithm::AriaFile && self.archive_path.is_none() {
            return Err("archive_path is required for algorithm aria_file".into());
        }
        self.baseline.validate()?;
        if self.algorithm.is_aria() {
            self.aria.validate()?;
        }
        Ok(())
    }

    /// Hash over the canonical JSON form; changes iff any field changes.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        format!("{digest:x}")
    }
}
