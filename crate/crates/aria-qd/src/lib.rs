//! Quality-diversity toolkit for noisy tasks: grid archives, MAP-Elites
//! style baselines, NES-based solution improvement, a two-phase archive
//! reproducibility procedure, and corrected-archive metrics.

pub mod archive;
pub mod aria;
pub mod baselines;
pub mod config;
pub mod grid;
pub mod metrics;
pub mod rim;
pub mod runner;
pub mod task;

pub use archive::{Archive, EvaluatedSolution, Genotype, InsertOutcome, ParetoArchive};
pub use aria::{run_aria, AriaConfig, AriaRunInfo, FrontierRule, InitSource};
pub use grid::{CellIndex, Connectivity, Descriptor, Grid};
pub use rim::{improve, nes_step, ObjectiveKind, RimConfig, RimState, UtilityScheme};
pub use task::{Evaluation, Evaluator, Task, TaskName};
