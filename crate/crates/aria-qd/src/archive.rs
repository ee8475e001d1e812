//! Elitist archive containers keyed by grid cell, plus the Pareto-front
//! variant used for the multi-objective baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::{CellIndex, Descriptor, Grid};

/// JSON cannot key maps by struct, so occupied cells serialize as a list of
/// `[cell, value]` pairs.
mod cell_map_serde {
    use super::CellIndex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<V: Serialize, S: Serializer>(
        map: &BTreeMap<CellIndex, V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let entries: Vec<(&CellIndex, &V)> = map.iter().collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<CellIndex, V>, D::Error> {
        let entries: Vec<(CellIndex, V)> = Vec::deserialize(d)?;
        Ok(entries.into_iter().collect())
    }
}

/// Fixed-length real vector, the unit of search.
pub type Genotype = Vec<f64>;

/// A genotype together with the statistics cached at insertion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    pub genotype: Genotype,
    /// Mean fitness over `n_samples` evaluations (the single sample when
    /// `n_samples == 1`).
    pub mean_fitness: f64,
    /// Mean descriptor over `n_samples` evaluations.
    pub mean_descriptor: Descriptor,
    /// Negated descriptor variance; only defined from two or more samples.
    pub ndv: Option<f64>,
    /// Estimated probability that a fresh descriptor sample lands in the
    /// cell of the mean descriptor; filled in by corrected evaluation.
    #[serde(default)]
    pub p_cell: Option<f64>,
    pub n_samples: usize,
    /// The fitness value that was used as the insertion key.
    pub placement_key: f64,
}

impl EvaluatedSolution {
    /// NDV for dominance comparisons. Panics when the solution was built
    /// from a single sample.
    pub fn ndv_value(&self) -> f64 {
        self.ndv
            .expect("NDV undefined: solution has fewer than 2 samples")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Added,
    Replaced,
    Rejected,
}

impl InsertOutcome {
    pub fn stored(&self) -> bool {
        !matches!(self, InsertOutcome::Rejected)
    }
}

/// Grid archive holding at most one solution per cell.
///
/// Cells are kept in a `BTreeMap` so that iteration (and serialization)
/// order is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub grid: Grid,
    #[serde(with = "cell_map_serde")]
    cells: BTreeMap<CellIndex, EvaluatedSolution>,
}

impl Archive {
    pub fn new(grid: Grid) -> Self {
        Archive {
            grid,
            cells: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, c: &CellIndex) -> Option<&EvaluatedSolution> {
        self.cells.get(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, &EvaluatedSolution)> {
        self.cells.iter()
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = &CellIndex> {
        self.cells.keys()
    }

    pub fn solutions(&self) -> impl Iterator<Item = &EvaluatedSolution> {
        self.cells.values()
    }

    /// Standard elitist insertion: the solution goes to the cell of
    /// `key_descriptor`; it replaces the incumbent iff `key_fitness` is
    /// strictly greater. Ties keep the incumbent.
    pub fn try_insert(
        &mut self,
        mut sol: EvaluatedSolution,
        key_fitness: f64,
        key_descriptor: &Descriptor,
    ) -> InsertOutcome {
        debug_assert!(key_descriptor.is_finite());
        sol.placement_key = key_fitness;
        let cell = self.grid.cell_of(key_descriptor);
        self.insert_at(cell, sol)
    }

    /// Elitist insertion into an explicit cell, bypassing descriptor lookup.
    /// Used when a solution is assigned to a target cell regardless of where
    /// its measured descriptor lands.
    pub fn insert_at(&mut self, cell: CellIndex, sol: EvaluatedSolution) -> InsertOutcome {
        match self.cells.get(&cell) {
            None => {
                self.cells.insert(cell, sol);
                InsertOutcome::Added
            }
            Some(incumbent) if sol.placement_key > incumbent.placement_key => {
                self.cells.insert(cell, sol);
                InsertOutcome::Replaced
            }
            Some(_) => InsertOutcome::Rejected,
        }
    }

    /// Overwrite a cell unconditionally.
    pub fn put(&mut self, cell: CellIndex, sol: EvaluatedSolution) {
        self.cells.insert(cell, sol);
    }
}

/// Archive variant storing a bounded Pareto front per cell, maximizing
/// (mean fitness, NDV). Front order is insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub grid: Grid,
    pub front_capacity: usize,
    #[serde(with = "cell_map_serde")]
    cells: BTreeMap<CellIndex, Vec<EvaluatedSolution>>,
}

/// `a` dominates `b` on (mean fitness, NDV), both maximized.
fn dominates(a: &EvaluatedSolution, b: &EvaluatedSolution) -> bool {
    let (fa, va) = (a.mean_fitness, a.ndv_value());
    let (fb, vb) = (b.mean_fitness, b.ndv_value());
    fa >= fb && va >= vb && (fa > fb || va > vb)
}

impl ParetoArchive {
    pub const DEFAULT_FRONT_CAPACITY: usize = 50;

    pub fn new(grid: Grid, front_capacity: usize) -> Self {
        assert!(front_capacity >= 1);
        ParetoArchive {
            grid,
            front_capacity,
            cells: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn front(&self, c: &CellIndex) -> Option<&[EvaluatedSolution]> {
        self.cells.get(c).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, &Vec<EvaluatedSolution>)> {
        self.cells.iter()
    }

    pub fn solutions(&self) -> impl Iterator<Item = &EvaluatedSolution> {
        self.cells.values().flatten()
    }

    pub fn n_solutions(&self) -> usize {
        self.cells.values().map(|v| v.len()).sum()
    }

    /// Insert into the cell of the solution's mean descriptor. Newly
    /// dominated members are removed; duplicates (equal on both objectives)
    /// are rejected; over-capacity fronts drop the member with the smallest
    /// crowding distance, with objective extremes protected.
    pub fn pareto_insert(&mut self, sol: EvaluatedSolution) -> InsertOutcome {
        let cell = self.grid.cell_of(&sol.mean_descriptor);
        let front = self.cells.entry(cell).or_default();

        let dup = front
            .iter()
            .any(|m| m.mean_fitness == sol.mean_fitness && m.ndv_value() == sol.ndv_value());
        if dup || front.iter().any(|m| dominates(m, &sol)) {
            if front.is_empty() {
                self.cells.remove(&cell);
            }
            return InsertOutcome::Rejected;
        }

        front.retain(|m| !dominates(&sol, m));
        front.push(sol);

        if front.len() > self.front_capacity {
            let evict = least_crowded(front);
            front.remove(evict);
            return InsertOutcome::Replaced;
        }
        InsertOutcome::Added
    }
}

/// Index of the front member with the smallest crowding distance on the
/// (mean fitness, NDV) plane. Objective extremes get infinite distance.
fn least_crowded(front: &[EvaluatedSolution]) -> usize {
    let n = front.len();
    debug_assert!(n >= 2);
    let mut crowd = vec![0.0f64; n];

    for key in [
        (|s: &EvaluatedSolution| s.mean_fitness) as fn(&EvaluatedSolution) -> f64,
        |s: &EvaluatedSolution| s.ndv_value(),
    ] {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(&front[a]).total_cmp(&key(&front[b])));
        let span = key(&front[order[n - 1]]) - key(&front[order[0]]);
        crowd[order[0]] = f64::INFINITY;
        crowd[order[n - 1]] = f64::INFINITY;
        if span > 0.0 {
            for w in 1..n - 1 {
                let lo = key(&front[order[w - 1]]);
                let hi = key(&front[order[w + 1]]);
                crowd[order[w]] += (hi - lo) / span;
            }
        }
    }

    let mut worst = 0;
    for i in 1..n {
        if crowd[i] < crowd[worst] {
            worst = i;
        }
    }
    worst
}
