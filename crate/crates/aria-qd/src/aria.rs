//! Two-phase archive reproducibility improvement: first improve every input
//! solution toward its own mean-descriptor cell, then grow outward from the
//! explored frontier until every cell holds a genotype.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, EvaluatedSolution, Genotype};
use crate::baselines::resampled_solution;
use crate::grid::{CellIndex, Connectivity, Grid};
use crate::rim::{improve, ObjectiveKind, RimConfig, RimState};
use crate::task::Evaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierRule {
    /// Uniform over all (explored, unexplored) adjacent ordered pairs.
    #[default]
    UniformRandom,
    /// Breadth-first: expand from the earliest-explored cell with an
    /// unexplored neighbor.
    Fifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AriaConfig {
    pub rim: RimConfig,
    /// Re-evaluations used to locate a genotype's mean-descriptor cell and
    /// to record its archive statistics.
    pub n_placement_samples: usize,
    pub frontier_rule: FrontierRule,
    pub connectivity: Connectivity,
}

impl Default for AriaConfig {
    fn default() -> Self {
        AriaConfig {
            rim: RimConfig::default(),
            n_placement_samples: 64,
            frontier_rule: FrontierRule::default(),
            connectivity: Connectivity::Four,
        }
    }
}

impl AriaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_placement_samples < 2 {
            return Err("aria.n_placement_samples must be >= 2".into());
        }
        self.rim.validate()
    }
}

/// Bookkeeping of which cells have been targeted so far.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSets {
    explored: BTreeSet<CellIndex>,
    to_explore: BTreeSet<CellIndex>,
    /// Explored cells in the order they were added, for the FIFO rule.
    explored_order: Vec<CellIndex>,
}

impl CellSets {
    pub fn all_unexplored(grid: &Grid) -> Self {
        CellSets {
            explored: BTreeSet::new(),
            to_explore: grid.all_cells().collect(),
            explored_order: Vec::new(),
        }
    }

    pub fn n_explored(&self) -> usize {
        self.explored.len()
    }

    pub fn n_to_explore(&self) -> usize {
        self.to_explore.len()
    }

    pub fn is_explored(&self, c: &CellIndex) -> bool {
        self.explored.contains(c)
    }

    /// Move a cell from the to-explore set to the explored set.
    pub fn mark_explored(&mut self, c: CellIndex) {
        if self.to_explore.remove(&c) {
            self.explored.insert(c);
            self.explored_order.push(c);
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AriaError {
    #[error("input genotype set is empty")]
    EmptyInput,
    #[error("no frontier pair exists while {0} cells remain unexplored")]
    NoFrontierPair(usize),
}

/// Select an (explored, to-explore) pair of adjacent cells. Returns `None`
/// when nothing is left to explore or no explored cell touches the
/// unexplored region.
pub fn select_frontier_pair<R: Rng>(
    grid: &Grid,
    sets: &CellSets,
    connectivity: Connectivity,
    rule: FrontierRule,
    rng: &mut R,
) -> Option<(CellIndex, CellIndex)> {
    if sets.to_explore.is_empty() {
        return None;
    }
    match rule {
        FrontierRule::UniformRandom => {
            let mut pairs: Vec<(CellIndex, CellIndex)> = Vec::new();
            for &src in &sets.explored {
                for n in grid.neighbors(&src, connectivity) {
                    if sets.to_explore.contains(&n) {
                        pairs.push((src, n));
                    }
                }
            }
            pairs.choose(rng).copied()
        }
        FrontierRule::Fifo => {
            for src in &sets.explored_order {
                for n in grid.neighbors(src, connectivity) {
                    if sets.to_explore.contains(&n) {
                        return Some((*src, n));
                    }
                }
            }
            None
        }
    }
}

/// Evaluation breakdown and flags for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AriaRunInfo {
    pub evals_init: u64,
    pub evals_phase1: u64,
    pub evals_phase2: u64,
    pub cells_after_phase1: usize,
    pub completion_iterations: usize,
    pub budget_truncated: bool,
}

impl AriaRunInfo {
    pub fn total_evals(&self) -> u64 {
        self.evals_init + self.evals_phase1 + self.evals_phase2
    }
}

/// Remaining-budget guard shared by both phases; `None` means unlimited.
struct BudgetGuard {
    limit: Option<u64>,
    start: u64,
}

impl BudgetGuard {
    fn new(limit: Option<u64>, evaluator: &Evaluator) -> Self {
        BudgetGuard {
            limit,
            start: evaluator.count(),
        }
    }

    fn allows(&self, evaluator: &Evaluator, cost: u64) -> bool {
        match self.limit {
            None => true,
            Some(limit) => evaluator.count() - self.start + cost <= limit,
        }
    }
}

/// Improve a genotype toward `target` and re-measure its statistics. The
/// measured mean descriptor is kept alongside so corrected evaluation can
/// re-place the solution honestly.
#[allow(clippy::too_many_arguments)]
fn improve_into_cell<R: Rng>(
    source: &Genotype,
    target: &CellIndex,
    objective: ObjectiveKind,
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &AriaConfig,
    state: &mut RimState,
    rng: &mut R,
) -> EvaluatedSolution {
    let improved = improve(
        source, target, objective, evaluator, grid, &cfg.rim, state, rng,
    );
    let sol = resampled_solution(improved, cfg.n_placement_samples, evaluator, rng);
    state.observe_fitness(sol.mean_fitness);
    sol
}

/// Phase 1: improve each input toward the cell of its own mean descriptor.
/// Inputs whose cells collide are each improved toward the shared cell, and
/// the best expected fitness is kept.
#[allow(clippy::too_many_arguments)]
pub fn reproducibility_phase<R: Rng>(
    inputs: &[Genotype],
    objective: ObjectiveKind,
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &AriaConfig,
    state: &mut RimState,
    budget: Option<u64>,
    rng: &mut R,
) -> Result<(Archive, CellSets, AriaRunInfo), AriaError> {
    if inputs.is_empty() {
        return Err(AriaError::EmptyInput);
    }
    let guard = BudgetGuard::new(budget, evaluator);
    let mut archive = Archive::new(grid.clone());
    let mut sets = CellSets::all_unexplored(grid);
    let mut info = AriaRunInfo::default();
    let place_cost = cfg.n_placement_samples as u64;
    let improve_cost = cfg.rim.evals_per_improve() + place_cost;

    for phi in inputs {
        // locate the target cell from the input's mean descriptor
        let placed = resampled_solution(phi.clone(), cfg.n_placement_samples, evaluator, rng);
        state.observe_fitness(placed.mean_fitness);
        let target = grid.cell_of(&placed.mean_descriptor);

        let sol = if guard.allows(evaluator, improve_cost) {
            improve_into_cell(phi, &target, objective, evaluator, grid, cfg, state, rng)
        } else {
            info.budget_truncated = true;
            placed
        };
        archive.insert_at(target, sol);
        sets.mark_explored(target);
    }

    info.evals_phase1 = evaluator.count() - guard.start;
    info.cells_after_phase1 = sets.n_explored();
    Ok((archive, sets, info))
}

/// Phase 2: repeatedly pick a frontier pair, improve the source cell's
/// genotype toward the empty neighbor, and store the result there
/// unconditionally. Terminates after exactly `n_to_explore` iterations.
#[allow(clippy::too_many_arguments)]
pub fn completion_phase<R: Rng>(
    mut archive: Archive,
    mut sets: CellSets,
    objective: ObjectiveKind,
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &AriaConfig,
    state: &mut RimState,
    budget: Option<u64>,
    info: &mut AriaRunInfo,
    rng: &mut R,
) -> Result<Archive, AriaError> {
    let guard = BudgetGuard::new(budget, evaluator);
    let place_cost = cfg.n_placement_samples as u64;
    let improve_cost = cfg.rim.evals_per_improve() + place_cost;

    while sets.n_to_explore() > 0 {
        let (src, target) =
            select_frontier_pair(grid, &sets, cfg.connectivity, cfg.frontier_rule, rng)
                .ok_or_else(|| AriaError::NoFrontierPair(sets.n_to_explore()))?;
        let source = archive
            .get(&src)
            .expect("explored cell must hold a genotype")
            .genotype
            .clone();

        let sol = if guard.allows(evaluator, improve_cost) {
            improve_into_cell(
                &source, &target, objective, evaluator, grid, cfg, state, rng,
            )
        } else if guard.allows(evaluator, place_cost) {
            info.budget_truncated = true;
            let placed = resampled_solution(source, cfg.n_placement_samples, evaluator, rng);
            state.observe_fitness(placed.mean_fitness);
            placed
        } else {
            // out of budget entirely: copy the source solution as-is
            info.budget_truncated = true;
            archive.get(&src).unwrap().clone()
        };

        archive.put(target, sol);
        sets.mark_explored(target);
        info.completion_iterations += 1;

        debug_assert_eq!(sets.n_explored() + sets.n_to_explore(), grid.n_cells());
    }
    info.evals_phase2 = evaluator.count() - guard.start;
    Ok(archive)
}

/// Where the phase-1 input genotypes come from.
pub enum InitSource {
    /// Genotypes from a previously produced archive.
    Genotypes(Vec<Genotype>),
    /// A single solution first optimized for fitness only.
    EsInit,
}

/// Run both phases and return the completed archive with its accounting.
#[allow(clippy::too_many_arguments)]
pub fn run_aria<R: Rng>(
    init: InitSource,
    objective: ObjectiveKind,
    evaluator: &mut Evaluator,
    grid: &Grid,
    cfg: &AriaConfig,
    budget: Option<u64>,
    rng: &mut R,
) -> Result<(Archive, AriaRunInfo), AriaError> {
    let mut state = RimState::default();
    let start = evaluator.count();

    let inputs = match init {
        InitSource::Genotypes(gs) => {
            if gs.is_empty() {
                return Err(AriaError::EmptyInput);
            }
            gs
        }
        InitSource::EsInit => {
            let seed_genotype = evaluator.task.random_genotype(rng);
            // target cell is ignored by the fitness-only objective
            let dummy = CellIndex::new(0, 0);
            vec![improve(
                &seed_genotype,
                &dummy,
                ObjectiveKind::FitnessOnly,
                evaluator,
                grid,
                &cfg.rim,
                &mut state,
                rng,
            )]
        }
    };
    let evals_init = evaluator.count() - start;

    let remaining = budget.map(|b| b.saturating_sub(evals_init));
    let (archive, sets, mut info) = reproducibility_phase(
        &inputs, objective, evaluator, grid, cfg, &mut state, remaining, rng,
    )?;
    info.evals_init = evals_init;

    let remaining = budget.map(|b| b.saturating_sub(info.evals_init + info.evals_phase1));
    let archive = completion_phase(
        archive, sets, objective, evaluator, grid, cfg, &mut state, remaining, &mut info, rng,
    )?;
    Ok((archive, info))
}
