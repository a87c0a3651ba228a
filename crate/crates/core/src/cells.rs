//! Observation cells: the partition of clock space induced by the truth
//! values of a set of `B(X)` atoms.
//!
//! Because every atom is a per-clock band `k1 <= x < k2`, the partition is
//! a grid of axis-aligned boxes, left-closed and right-open along every
//! constrained axis. A cell is identified by one interval index per clock;
//! the grid is never materialized eagerly — callers enumerate only the
//! cells a zone actually meets.

use crate::bounds::{self, Raw, INF};
use crate::dbm::{AtomicConstraint, ClockId, Dbm};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CellError {
    #[error("observation atom is not in B(X) form: {0}")]
    NotBand(String),
}

/// One box of the partition: an interval index per clock.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    intervals: Vec<u8>,
}

impl Cell {
    pub fn intervals(&self) -> &[u8] {
        &self.intervals
    }
}

/// Threshold grid for a fixed atom set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpace {
    n_clocks: usize,
    /// Sorted distinct positive thresholds per clock (index 0 unused).
    thresholds: Vec<Vec<u32>>,
}

impl CellSpace {
    pub fn new(n_clocks: usize, atoms: &[AtomicConstraint]) -> Result<CellSpace, CellError> {
        let mut thresholds = vec![Vec::<u32>::new(); n_clocks + 1];
        for a in atoms {
            match *a {
                AtomicConstraint::Band { clock, lo, hi } => {
                    if lo > 0 {
                        thresholds[clock].push(lo);
                    }
                    if let Some(h) = hi {
                        thresholds[clock].push(h);
                    }
                }
                ref other => return Err(CellError::NotBand(format!("{other:?}"))),
            }
        }
        for t in &mut thresholds {
            t.sort_unstable();
            t.dedup();
        }
        Ok(CellSpace {
            n_clocks,
            thresholds,
        })
    }

    pub fn n_clocks(&self) -> usize {
        self.n_clocks
    }

    /// Number of intervals along one clock axis.
    fn axis_len(&self, clock: ClockId) -> usize {
        self.thresholds[clock].len() + 1
    }

    /// Total number of cells in the grid.
    pub fn cell_count(&self) -> usize {
        (1..=self.n_clocks).map(|c| self.axis_len(c)).product()
    }

    /// Mixed-radix index of a cell within the deterministic enumeration.
    pub fn cell_id(&self, cell: &Cell) -> usize {
        let mut id = 0;
        for c in 1..=self.n_clocks {
            id = id * self.axis_len(c) + cell.intervals[c - 1] as usize;
        }
        id
    }

    /// Value range `[lo, hi)` of one interval; `hi` is `None` at the top.
    fn interval_range(&self, clock: ClockId, idx: u8) -> (u32, Option<u32>) {
        let t = &self.thresholds[clock];
        let lo = if idx == 0 { 0 } else { t[idx as usize - 1] };
        let hi = t.get(idx as usize).copied();
        (lo, hi)
    }

    pub fn cell_of_point(&self, vals: &[f64]) -> Cell {
        assert_eq!(vals.len(), self.n_clocks);
        let intervals = (1..=self.n_clocks)
            .map(|c| {
                self.thresholds[c]
                    .iter()
                    .take_while(|&&t| (t as f64) <= vals[c - 1])
                    .count() as u8
            })
            .collect();
        Cell { intervals }
    }

    /// The cell as a zone.
    pub fn cell_dbm(&self, cell: &Cell) -> Dbm {
        let mut z = Dbm::universe(self.n_clocks);
        for c in 1..=self.n_clocks {
            let (lo, hi) = self.interval_range(c, cell.intervals[c - 1]);
            z = z
                .tighten(0, c, bounds::le(-(lo as i32)))
                .expect("cell box is satisfiable");
            if let Some(h) = hi {
                z = z.tighten(c, 0, bounds::lt(h as i32)).expect("lo < hi");
            }
        }
        z
    }

    /// Topological closure of the cell: strict upper bounds weakened.
    pub fn closure_relax(&self, cell: &Cell) -> Dbm {
        let mut z = Dbm::universe(self.n_clocks);
        for c in 1..=self.n_clocks {
            let (lo, hi) = self.interval_range(c, cell.intervals[c - 1]);
            z = z
                .tighten(0, c, bounds::le(-(lo as i32)))
                .expect("cell box is satisfiable");
            if let Some(h) = hi {
                z = z.tighten(c, 0, bounds::le(h as i32)).expect("lo <= hi");
            }
        }
        z
    }

    /// Truth of a band atom on a whole cell (constant by construction).
    pub fn band_true_in(&self, cell: &Cell, atom: &AtomicConstraint) -> bool {
        match *atom {
            AtomicConstraint::Band { clock, lo, hi } => {
                let (start, end) = self.interval_range(clock, cell.intervals[clock - 1]);
                if start < lo {
                    return false;
                }
                match (hi, end) {
                    (None, _) => true,
                    (Some(_), None) => false,
                    (Some(h), Some(e)) => e <= h,
                }
            }
            _ => panic!("observation atoms are bands"),
        }
    }

    /// All cells in deterministic (lexicographic) order. Exponential in the
    /// number of constrained clocks — test and diagnostic use only.
    pub fn enumerate(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.cell_count());
        let mut cur = vec![0u8; self.n_clocks];
        loop {
            out.push(Cell {
                intervals: cur.clone(),
            });
            let mut c = self.n_clocks;
            loop {
                if c == 0 {
                    return out;
                }
                c -= 1;
                cur[c] += 1;
                if (cur[c] as usize) < self.axis_len(c + 1) {
                    break;
                }
                cur[c] = 0;
            }
        }
    }

    /// The cells a zone meets, with the corresponding zone pieces.
    pub fn split_zone(&self, z: &Dbm) -> Vec<(Cell, Dbm)> {
        let mut ranges = Vec::with_capacity(self.n_clocks);
        for c in 1..=self.n_clocks {
            let (lo_raw, hi_raw) = z.clock_bounds(c);
            let inf = -bounds::constant(lo_raw); // lower value of x_c
            let i_min = self.thresholds[c]
                .iter()
                .take_while(|&&t| (t as i32) <= inf)
                .count() as u8;
            let i_max = if hi_raw == INF {
                self.thresholds[c].len() as u8
            } else {
                let sup = bounds::constant(hi_raw);
                let cnt = if bounds::is_weak(hi_raw) {
                    self.thresholds[c]
                        .iter()
                        .take_while(|&&t| (t as i32) <= sup)
                        .count()
                } else {
                    self.thresholds[c]
                        .iter()
                        .take_while(|&&t| (t as i32) < sup)
                        .count()
                };
                cnt as u8
            };
            ranges.push((i_min, i_max));
        }
        let mut out = Vec::new();
        let mut cur: Vec<u8> = ranges.iter().map(|&(lo, _)| lo).collect();
        'outer: loop {
            let cell = Cell {
                intervals: cur.clone(),
            };
            if let Some(piece) = z.intersect(&self.cell_dbm(&cell)) {
                out.push((cell, piece));
            }
            let mut c = self.n_clocks;
            loop {
                if c == 0 {
                    break 'outer;
                }
                c -= 1;
                cur[c] += 1;
                if cur[c] <= ranges[c].1 {
                    break;
                }
                cur[c] = ranges[c].0;
            }
        }
        out
    }

    /// Per-clock extrapolation ceilings implied by the grid alone.
    pub fn ceilings(&self) -> Vec<i32> {
        let mut out = vec![0i32; self.n_clocks + 1];
        for c in 1..=self.n_clocks {
            out[c] = self.thresholds[c].last().copied().unwrap_or(0) as i32;
        }
        out
    }
}

/// The partition of valuation space induced by a set of `B(X)` atoms,
/// listed in a deterministic order.
pub fn enumerate_cells(
    n_clocks: usize,
    atoms: &[AtomicConstraint],
) -> Result<(CellSpace, Vec<Cell>), CellError> {
    let space = CellSpace::new(n_clocks, atoms)?;
    let cells = space.enumerate();
    Ok((space, cells))
}

/// Raw upper bound of a cell along a clock, for boundary reasoning.
pub fn cell_upper_raw(space: &CellSpace, cell: &Cell, clock: ClockId) -> Raw {
    let dbm = space.cell_dbm(cell);
    dbm.entry(clock, 0)
}
