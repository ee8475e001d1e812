//! Discretization of a bounded 2-D descriptor space into a rectangular grid.

use serde::{Deserialize, Serialize};

/// A point in the 2-D descriptor space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub x: f64,
    pub y: f64,
}

impl Descriptor {
    pub fn new(x: f64, y: f64) -> Self {
        Descriptor { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Descriptor) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Index of one grid cell, `(ix, iy)` in `[0, nx) x [0, ny)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub ix: usize,
    pub iy: usize,
}

impl CellIndex {
    pub fn new(ix: usize, iy: usize) -> Self {
        CellIndex { ix, iy }
    }
}

/// Grid adjacency rule. The 4-connected rule is the default; 8-connectivity
/// additionally counts diagonal cells as neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Uniform rectangular partition of the descriptor box into `nx * ny` cells.
///
/// Cells tile the box exactly: cell `(ix, iy)` covers the half-open box
/// `[low + i*w, low + (i+1)*w)` per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: Descriptor,
    pub upper: Descriptor,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(lower: Descriptor, upper: Descriptor, nx: usize, ny: usize) -> Self {
        assert!(
            upper.x > lower.x && upper.y > lower.y,
            "degenerate grid box"
        );
        assert!(nx > 0 && ny > 0, "grid resolution must be positive");
        Grid {
            lower,
            upper,
            nx,
            ny,
        }
    }

    /// Unit box `[0,1]^2` with the given resolution.
    pub fn unit(nx: usize, ny: usize) -> Self {
        Grid::new(Descriptor::new(0.0, 0.0), Descriptor::new(1.0, 1.0), nx, ny)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_width(&self) -> (f64, f64) {
        (
            (self.upper.x - self.lower.x) / self.nx as f64,
            (self.upper.y - self.lower.y) / self.ny as f64,
        )
    }

    /// Cell containing `d`. Descriptors outside the grid box clamp into the
    /// nearest boundary cell; the upper edge folds into the last cell.
    pub fn cell_of(&self, d: &Descriptor) -> CellIndex {
        CellIndex {
            ix: Self::axis_index(d.x, self.lower.x, self.upper.x, self.nx),
            iy: Self::axis_index(d.y, self.lower.y, self.upper.y, self.ny),
        }
    }

    fn axis_index(v: f64, low: f64, high: f64, n: usize) -> usize {
        let t = ((v - low) / (high - low)).clamp(0.0, 1.0);
        ((t * n as f64) as usize).min(n - 1)
    }

    /// Geometric center of the cell's box.
    pub fn centroid(&self, c: &CellIndex) -> Descriptor {
        assert!(c.ix < self.nx && c.iy < self.ny, "cell index out of range");
        let (wx, wy) = self.cell_width();
        Descriptor {
            x: self.lower.x + (c.ix as f64 + 0.5) * wx,
            y: self.lower.y + (c.iy as f64 + 0.5) * wy,
        }
    }

    /// Lower and upper corners of the cell's box.
    pub fn cell_box(&self, c: &CellIndex) -> (Descriptor, Descriptor) {
        let (wx, wy) = self.cell_width();
        let lo = Descriptor {
            x: self.lower.x + c.ix as f64 * wx,
            y: self.lower.y + c.iy as f64 * wy,
        };
        let hi = Descriptor {
            x: lo.x + wx,
            y: lo.y + wy,
        };
        (lo, hi)
    }

    /// True membership of `d` in the cell's half-open box, without clamping.
    /// A sample outside the grid box belongs to no cell.
    pub fn cell_contains(&self, c: &CellIndex, d: &Descriptor) -> bool {
        let (lo, hi) = self.cell_box(c);
        d.x >= lo.x && d.x < hi.x && d.y >= lo.y && d.y < hi.y
    }

    /// In-grid neighbors of `c` under the given connectivity, no wrap-around.
    pub fn neighbors(&self, c: &CellIndex, conn: Connectivity) -> Vec<CellIndex> {
        assert!(c.ix < self.nx && c.iy < self.ny, "cell index out of range");
        let deltas: &[(i64, i64)] = match conn {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        };
        let mut out = Vec::with_capacity(deltas.len());
        for &(dx, dy) in deltas {
            let ix = c.ix as i64 + dx;
            let iy = c.iy as i64 + dy;
            if ix >= 0 && iy >= 0 && (ix as usize) < self.nx && (iy as usize) < self.ny {
                out.push(CellIndex::new(ix as usize, iy as usize));
            }
        }
        out
    }

    /// All cell indices in row-major order.
    pub fn all_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| CellIndex { ix, iy }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit32() -> Grid {
        Grid::unit(32, 32)
    }

    #[test]
    fn cell_of_lower_corner() {
        assert_eq!(
            unit32().cell_of(&Descriptor::new(0.0, 0.0)),
            CellIndex::new(0, 0)
        );
    }

    #[test]
    fn cell_of_upper_edge_clamps_into_last_cell() {
        assert_eq!(
            unit32().cell_of(&Descriptor::new(1.0, 1.0)),
            CellIndex::new(31, 31)
        );
    }

    #[test]
    fn cell_of_interior() {
        let g = Grid::unit(4, 4);
        assert_eq!(
            g.cell_of(&Descriptor::new(0.30, 0.80)),
            CellIndex::new(1, 3)
        );
    }

    #[test]
    fn cell_of_out_of_bounds_clamps() {
        let g = Grid::unit(4, 4);
        assert_eq!(g.cell_of(&Descriptor::new(-3.0, 2.0)), CellIndex::new(0, 3));
    }

    #[test]
    fn centroid_values() {
        let g = Grid::unit(4, 4);
        let c = g.centroid(&CellIndex::new(0, 0));
        assert_eq!((c.x, c.y), (0.125, 0.125));

        let c = unit32().centroid(&CellIndex::new(0, 0));
        assert_eq!((c.x, c.y), (1.0 / 64.0, 1.0 / 64.0));

        let g = Grid::new(Descriptor::new(-1.0, -1.0), Descriptor::new(1.0, 1.0), 2, 2);
        let c = g.centroid(&CellIndex::new(1, 1));
        assert_eq!((c.x, c.y), (0.5, 0.5));
    }

    #[test]
    #[should_panic]
    fn centroid_out_of_range_panics() {
        Grid::unit(4, 4).centroid(&CellIndex::new(4, 0));
    }

    #[test]
    fn neighbors_counts() {
        let g = Grid::unit(4, 4);
        let corner = g.neighbors(&CellIndex::new(0, 0), Connectivity::Four);
        assert_eq!(corner.len(), 2);
        assert!(corner.contains(&CellIndex::new(1, 0)));
        assert!(corner.contains(&CellIndex::new(0, 1)));

        let interior = g.neighbors(&CellIndex::new(1, 1), Connectivity::Four);
        assert_eq!(interior.len(), 4);
        for c in [
            CellIndex::new(0, 1),
            CellIndex::new(2, 1),
            CellIndex::new(1, 0),
            CellIndex::new(1, 2),
        ] {
            assert!(interior.contains(&c));
        }

        let edge = g.neighbors(&CellIndex::new(3, 1), Connectivity::Four);
        assert_eq!(edge.len(), 3);
        for c in [
            CellIndex::new(2, 1),
            CellIndex::new(3, 0),
            CellIndex::new(3, 2),
        ] {
            assert!(edge.contains(&c));
        }
    }

    #[test]
    fn neighbors_eight_connectivity() {
        let g = Grid::unit(4, 4);
        assert_eq!(
            g.neighbors(&CellIndex::new(0, 0), Connectivity::Eight)
                .len(),
            3
        );
        assert_eq!(
            g.neighbors(&CellIndex::new(1, 1), Connectivity::Eight)
                .len(),
            8
        );
    }

    #[test]
    fn cell_contains_uses_true_box() {
        let g = Grid::unit(4, 4);
        let c = CellIndex::new(3, 3);
        // clamped-in point outside the true box is not a member
        assert!(!g.cell_contains(&c, &Descriptor::new(1.2, 0.9)));
        assert!(g.cell_contains(&c, &Descriptor::new(0.99, 0.99)));
        // upper edge of the grid is outside the half-open top cell
        assert!(!g.cell_contains(&c, &Descriptor::new(1.0, 1.0)));
    }

    proptest! {
        #[test]
        fn centroid_within_half_cell_of_point(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let g = unit32();
            let d = Descriptor::new(x, y);
            let c = g.centroid(&g.cell_of(&d));
            let (wx, wy) = g.cell_width();
            prop_assert!((c.x - d.x).abs() <= wx / 2.0 + 1e-12);
            prop_assert!((c.y - d.y).abs() <= wy / 2.0 + 1e-12);
        }

        #[test]
        fn neighbors_symmetric(ix in 0usize..6, iy in 0usize..5, eight in proptest::bool::ANY) {
            let g = Grid::unit(6, 5);
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let a = CellIndex::new(ix, iy);
            for b in g.neighbors(&a, conn) {
                prop_assert!(g.neighbors(&b, conn).contains(&a));
            }
        }

        #[test]
        fn in_box_point_is_in_its_cell(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let g = Grid::unit(7, 3);
            let d = Descriptor::new(x, y);
            prop_assert!(g.cell_contains(&g.cell_of(&d), &d));
        }
    }
}
