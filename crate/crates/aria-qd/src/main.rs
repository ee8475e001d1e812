use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aria_qd::metrics::archive_profile;
use aria_qd::runner::{self, RunError};
use aria_qd::task::Task;

#[derive(Parser)]
#[command(
    name = "aria-qd",
    about = "Quality-diversity runs and corrected archive evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every replication of a JSON run config.
    Run {
        /// Path to the run config (JSON).
        config: PathBuf,
    },
    /// Corrected evaluation of an existing archive JSON.
    Evaluate {
        /// Path to the archive (JSON).
        archive: PathBuf,
        /// Task the archive was produced on.
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Re-evaluations per genotype.
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fitness noise level.
        #[arg(long, default_value_t = 0.01)]
        sigma_f: f64,
        /// Descriptor noise level.
        #[arg(long, default_value_t = 0.01)]
        sigma_d: f64,
        /// Genotype dimension (point task only).
        #[arg(long, default_value_t = 8)]
        genotype_dim: usize,
        /// Directory for metrics.csv and profile.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Thresholds in the archive profile.
        #[arg(long, default_value_t = 64)]
        n_thresholds: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TaskArg {
    Arm8,
    Point2,
}

fn build_task(arg: TaskArg, sigma_f: f64, sigma_d: f64, dim: usize) -> Task {
    match arg {
        TaskArg::Arm8 => Task::arm8(sigma_f, sigma_d),
        TaskArg::Point2 => Task::point2(dim, sigma_f, sigma_d),
    }
}

fn exit_code(err: &RunError) -> u8 {
    match err {
        RunError::InvalidConfig(_) | RunError::Parse { .. } | RunError::Mismatch(_) => 2,
        _ => 1,
    }
}

fn cmd_run(config_path: &Path) -> Result<(), RunError> {
    let cfg = runner::load_config(config_path)?;
    let out_dir = runner::output_root().join(&cfg.output_dir);
    let manifest = runner::run(&cfg, &out_dir)?;
    println!(
        "wrote {} replication(s) to {} ({} evaluations)",
        manifest.replications.len(),
        out_dir.display(),
        manifest.total_evals_run
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    archive_path: &Path,
    task: Task,
    samples: usize,
    seed: u64,
    out: Option<PathBuf>,
    n_thresholds: usize,
) -> Result<(), RunError> {
    let archive = runner::load_archive(archive_path)?;
    let (corrected, scores, evals) = runner::evaluate_archive(&archive, &task, samples, seed)?;

    let out_dir = out.unwrap_or_else(runner::output_root);
    std::fs::create_dir_all(&out_dir).map_err(|source| RunError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let mut w = csv::Writer::from_path(out_dir.join("metrics.csv"))?;
    w.write_record([
        "qd_score",
        "v_score",
        "p_score",
        "coverage",
        "max_fitness",
        "evaluations",
    ])?;
    w.write_record([
        scores.qd_score.to_string(),
        scores.v_score.to_string(),
        scores.p_score.to_string(),
        scores.coverage.to_string(),
        scores.max_fitness.to_string(),
        evals.to_string(),
    ])?;
    w.flush().map_err(|source| RunError::Io {
        path: out_dir.join("metrics.csv"),
        source,
    })?;

    let profile = archive_profile(&corrected, task.fitness_norm_bounds(), n_thresholds);
    let mut w = csv::Writer::from_path(out_dir.join("profile.csv"))?;
    w.write_record(["threshold", "fraction"])?;
    for (t, f) in profile.thresholds.iter().zip(&profile.fractions) {
        w.write_record([t.to_string(), f.to_string()])?;
    }
    w.flush().map_err(|source| RunError::Io {
        path: out_dir.join("profile.csv"),
        source,
    })?;

    println!(
        "coverage {} | qd {:.4} | v {:.4} | p {:.4}",
        scores.coverage, scores.qd_score, scores.v_score, scores.p_score
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Evaluate {
            archive,
            task,
            samples,
            seed,
            sigma_f,
            sigma_d,
            genotype_dim,
            out,
            n_thresholds,
        } => {
            if matches!(task, TaskArg::Point2) && genotype_dim < 2 {
                eprintln!("error: invalid genotype_dim: must be >= 2 for the point task");
                return ExitCode::from(2);
            }
            cmd_evaluate(
                &archive,
                build_task(task, sigma_f, sigma_d, genotype_dim),
                samples,
                seed,
                out,
                n_thresholds,
            )
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
