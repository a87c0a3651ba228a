//! Difference bound matrices over a fixed clock set.
//!
//! Index 0 is the constant-zero reference clock. Entry `(i, j)` bounds
//! `x_i - x_j`. A [`Dbm`] value is always canonical (shortest-path closed)
//! and non-empty; operations that can produce an empty zone return
//! `Option<Dbm>`.

use crate::bounds::{self, Raw, INF, LE_ZERO};

/// Clock index into a [`ClockSet`]; 0 is the reference clock.
pub type ClockId = usize;

/// Ordered clock names for one model. The ordering is fixed for the
/// model's lifetime; index 0 is reserved for the reference clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockSet {
    names: Vec<String>,
}

impl ClockSet {
    pub fn new(names: Vec<String>) -> Self {
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            assert!(seen.insert(n.clone()), "duplicate clock name {n}");
        }
        ClockSet { names }
    }

    /// Number of real clocks, excluding the reference clock.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Matrix dimension: clocks plus the reference clock.
    pub fn dim(&self) -> usize {
        self.names.len() + 1
    }

    /// Index of a named clock (1-based, reference clock occupies 0).
    pub fn index_of(&self, name: &str) -> Option<ClockId> {
        self.names.iter().position(|n| n == name).map(|i| i + 1)
    }

    pub fn name(&self, id: ClockId) -> &str {
        assert!(id >= 1, "reference clock has no name");
        &self.names[id - 1]
    }
}

/// Comparison operator of a `C(X)` atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Gt,
    Ge,
}

/// One conjunct of a clock constraint.
///
/// `Band` is the `B(X)` form `lo <= x < hi`; an absent `hi` leaves the
/// atom unbounded above. `Upper` and `Diff` cover the `C(X)` grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomicConstraint {
    /// `x ~ k`
    Upper { clock: ClockId, rel: Rel, k: u32 },
    /// `x - y ~ k`
    Diff { x: ClockId, y: ClockId, rel: Rel, k: i32 },
    /// `lo <= x < hi`
    Band { clock: ClockId, lo: u32, hi: Option<u32> },
}

impl AtomicConstraint {
    pub fn band(clock: ClockId, lo: u32, hi: Option<u32>) -> Self {
        if let Some(h) = hi {
            assert!(lo < h, "band requires lo < hi");
        }
        AtomicConstraint::Band { clock, lo, hi }
    }

    /// True for atoms admissible in `B(X)`: `true` is represented by an
    /// empty conjunction, so every `Band` qualifies and nothing else does.
    pub fn is_band(&self) -> bool {
        matches!(self, AtomicConstraint::Band { .. })
    }

    /// The `(i, j, bound)` rows this atom contributes to a matrix.
    pub fn rows(&self) -> Vec<(ClockId, ClockId, Raw)> {
        match *self {
            AtomicConstraint::Upper { clock, rel, k } => {
                let k = k as i32;
                match rel {
                    Rel::Lt => vec![(clock, 0, bounds::lt(k))],
                    Rel::Le => vec![(clock, 0, bounds::le(k))],
                    Rel::Gt => vec![(0, clock, bounds::lt(-k))],
                    Rel::Ge => vec![(0, clock, bounds::le(-k))],
                    Rel::Eq => vec![(clock, 0, bounds::le(k)), (0, clock, bounds::le(-k))],
                }
            }
            AtomicConstraint::Diff { x, y, rel, k } => match rel {
                Rel::Lt => vec![(x, y, bounds::lt(k))],
                Rel::Le => vec![(x, y, bounds::le(k))],
                Rel::Gt => vec![(y, x, bounds::lt(-k))],
                Rel::Ge => vec![(y, x, bounds::le(-k))],
                Rel::Eq => vec![(x, y, bounds::le(k)), (y, x, bounds::le(-k))],
            },
            AtomicConstraint::Band { clock, lo, hi } => {
                let mut rows = vec![(0, clock, bounds::le(-(lo as i32)))];
                if let Some(h) = hi {
                    rows.push((clock, 0, bounds::lt(h as i32)));
                }
                rows
            }
        }
    }

    /// Largest constant mentioned, for extrapolation ceilings.
    pub fn max_constant(&self) -> u32 {
        match *self {
            AtomicConstraint::Upper { k, .. } => k,
            AtomicConstraint::Diff { k, .. } => k.unsigned_abs(),
            AtomicConstraint::Band { lo, hi, .. } => hi.unwrap_or(lo).max(lo),
        }
    }

    /// Clocks mentioned by the atom.
    pub fn clocks(&self) -> Vec<ClockId> {
        match *self {
            AtomicConstraint::Upper { clock, .. } | AtomicConstraint::Band { clock, .. } => {
                vec![clock]
            }
            AtomicConstraint::Diff { x, y, .. } => vec![x, y],
        }
    }

    /// True iff the valuation satisfies the atom; `vals` holds one entry
    /// per real clock.
    pub fn satisfied_by(&self, vals: &[f64]) -> bool {
        let get = |i: usize| if i == 0 { 0.0 } else { vals[i - 1] };
        self.rows()
            .iter()
            .all(|&(i, j, r)| bounds::satisfied_by(r, get(i) - get(j)))
    }
}

/// Canonical non-empty clock zone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dbm {
    dim: usize,
    entries: Vec<Raw>,
}

impl Dbm {
    /// All valuations (every clock non-negative, nothing else).
    pub fn universe(n_clocks: usize) -> Dbm {
        let dim = n_clocks + 1;
        let mut entries = vec![INF; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = LE_ZERO;
            entries[i] = LE_ZERO; // row 0: 0 - x_j <= 0
        }
        Dbm { dim, entries }
    }

    /// The single valuation assigning 0 to every clock.
    pub fn zero(n_clocks: usize) -> Dbm {
        let dim = n_clocks + 1;
        Dbm {
            dim,
            entries: vec![LE_ZERO; dim * dim],
        }
    }

    /// Closes an arbitrary bound matrix; `None` when it is unsatisfiable.
    pub fn canonicalize(dim: usize, mut entries: Vec<Raw>) -> Option<Dbm> {
        assert_eq!(entries.len(), dim * dim);
        for k in 0..dim {
            for i in 0..dim {
                let dik = entries[i * dim + k];
                if dik == INF {
                    continue;
                }
                for j in 0..dim {
                    let cand = bounds::add(dik, entries[k * dim + j]);
                    if cand < entries[i * dim + j] {
                        entries[i * dim + j] = cand;
                    }
                }
            }
        }
        for i in 0..dim {
            if entries[i * dim + i] < LE_ZERO {
                return None;
            }
            entries[i * dim + i] = LE_ZERO;
        }
        Some(Dbm { dim, entries })
    }

    /// Conjunction of atoms as a zone; `None` when unsatisfiable.
    pub fn from_conjunction(n_clocks: usize, atoms: &[AtomicConstraint]) -> Option<Dbm> {
        let mut z = Dbm::universe(n_clocks);
        for a in atoms {
            z = z.intersect_atom(a)?;
        }
        Some(z)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, i: ClockId, j: ClockId) -> Raw {
        self.entries[i * self.dim + j]
    }

    #[inline]
    fn set(&mut self, i: ClockId, j: ClockId, r: Raw) {
        self.entries[i * self.dim + j] = r;
    }

    /// Tightens one difference bound and restores canonical form.
    pub fn tighten(&self, i: ClockId, j: ClockId, r: Raw) -> Option<Dbm> {
        debug_assert!(i != j);
        if bounds::add(self.entry(j, i), r) < LE_ZERO {
            return None;
        }
        if r >= self.entry(i, j) {
            return Some(self.clone());
        }
        let mut z = self.clone();
        z.set(i, j, r);
        for p in 0..self.dim {
            let dpi = z.entry(p, i);
            if dpi == INF {
                continue;
            }
            let head = bounds::add(dpi, r);
            for q in 0..self.dim {
                let cand = bounds::add(head, z.entry(j, q));
                if cand < z.entry(p, q) {
                    z.set(p, q, cand);
                }
            }
        }
        debug_assert!((0..z.dim).all(|d| z.entry(d, d) == LE_ZERO));
        Some(z)
    }

    pub fn intersect_atom(&self, atom: &AtomicConstraint) -> Option<Dbm> {
        let mut z = self.clone();
        for (i, j, r) in atom.rows() {
            z = z.tighten(i, j, r)?;
        }
        Some(z)
    }

    pub fn intersect_atoms(&self, atoms: &[AtomicConstraint]) -> Option<Dbm> {
        let mut z = self.clone();
        for a in atoms {
            z = z.intersect_atom(a)?;
        }
        Some(z)
    }

    /// Zone intersection: entrywise minimum, reclosed.
    pub fn intersect(&self, other: &Dbm) -> Option<Dbm> {
        assert_eq!(self.dim, other.dim);
        let entries: Vec<Raw> = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| a.min(b))
            .collect();
        Dbm::canonicalize(self.dim, entries)
    }

    /// Future closure: drops the upper bound of every clock. Canonical form
    /// is preserved.
    pub fn up(&self) -> Dbm {
        let mut z = self.clone();
        for i in 1..self.dim {
            z.set(i, 0, INF);
        }
        z
    }

    /// Past closure: every valuation that can delay into the zone.
    /// Canonical form is preserved.
    pub fn down(&self) -> Dbm {
        let mut z = self.clone();
        for j in 1..self.dim {
            // lower bounds relax to zero except where a difference
            // constraint keeps them up
            let mut lo = LE_ZERO;
            for i in 1..self.dim {
                if i != j && z.entry(i, j) < lo {
                    lo = z.entry(i, j);
                }
            }
            z.set(0, j, lo);
        }
        z
    }

    /// Resets every clock in `ys` to zero. Canonical form is preserved.
    pub fn reset(&self, ys: &[ClockId]) -> Dbm {
        let mut z = self.clone();
        for &y in ys {
            debug_assert!(y >= 1);
            for j in 0..self.dim {
                if j != y {
                    let d0j = z.entry(0, j);
                    let dj0 = z.entry(j, 0);
                    z.set(y, j, d0j);
                    z.set(j, y, dj0);
                }
            }
            z.set(y, 0, LE_ZERO);
            z.set(0, y, LE_ZERO);
        }
        z
    }

    /// True iff `other` is a subset of this zone. Both canonical.
    pub fn includes(&self, other: &Dbm) -> bool {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .all(|(&a, &b)| a >= b)
    }

    /// Max-constant abstraction with a per-clock ceiling (`ceil[0]` is
    /// ignored). Idempotent; the result includes the input.
    pub fn extrapolate(&self, ceil: &[i32]) -> Dbm {
        assert_eq!(ceil.len(), self.dim);
        let mut entries = self.entries.clone();
        let mut changed = false;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i == j {
                    continue;
                }
                let e = entries[i * self.dim + j];
                if e == INF {
                    continue;
                }
                if i != 0 && e > bounds::le(ceil[i]) {
                    entries[i * self.dim + j] = INF;
                    changed = true;
                } else if e < bounds::lt(-ceil[j]) {
                    entries[i * self.dim + j] = bounds::lt(-ceil[j]);
                    changed = true;
                }
            }
        }
        if !changed {
            return self.clone();
        }
        Dbm::canonicalize(self.dim, entries).expect("extrapolation preserves non-emptiness")
    }

    /// Set difference as a disjoint list of zones.
    pub fn subtract(&self, other: &Dbm) -> Vec<Dbm> {
        assert_eq!(self.dim, other.dim);
        let mut pieces = Vec::new();
        let mut rest = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i == j {
                    continue;
                }
                let c = other.entry(i, j);
                if c == INF {
                    continue;
                }
                // carve off the part violating c: x_j - x_i ≺' -m
                if let Some(p) = rest.tighten(j, i, bounds::negate(c)) {
                    pieces.push(p);
                }
                match rest.tighten(i, j, c) {
                    Some(r) => rest = r,
                    None => return pieces,
                }
            }
        }
        pieces
    }

    /// True iff time can elapse forever inside the zone.
    pub fn is_time_unbounded(&self) -> bool {
        (1..self.dim).all(|i| self.entry(i, 0) == INF)
    }

    /// Interval of a clock: `(lower, upper)` as `(bound on -x, bound on x)`.
    pub fn clock_bounds(&self, x: ClockId) -> (Raw, Raw) {
        (self.entry(0, x), self.entry(x, 0))
    }

    /// Membership of a rational point; `vals` has one entry per real clock.
    pub fn contains_point(&self, vals: &[f64]) -> bool {
        assert_eq!(vals.len(), self.dim - 1);
        let mut v = vec![0.0];
        v.extend_from_slice(vals);
        for i in 0..self.dim {
            for j in 0..self.dim {
                if !bounds::satisfied_by(self.entry(i, j), v[i] - v[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Some valuation inside the zone, for observation sampling.
    /// Picks each coordinate greedily within its remaining interval.
    pub fn sample_point(&self) -> Vec<f64> {
        let n = self.dim - 1;
        let mut v = vec![0.0f64; self.dim];
        // assign clocks in index order, tightening against earlier picks
        for i in 1..=n {
            let mut lo = -(bound_as_f64(self.entry(0, i), false));
            let mut lo_strict = self.entry(0, i) != INF && !bounds::is_weak(self.entry(0, i));
            let mut hi = bound_as_f64(self.entry(i, 0), true);
            for j in 1..i {
                // x_i - x_j ≺ m  →  x_i ≺ m + v_j
                let uij = self.entry(i, j);
                if uij != INF {
                    let b = bounds::constant(uij) as f64 + v[j];
                    if b < hi {
                        hi = b;
                    }
                }
                // x_j - x_i ≺ m  →  x_i ≻ v_j - m
                let uji = self.entry(j, i);
                if uji != INF {
                    let b = v[j] - bounds::constant(uji) as f64;
                    if b > lo || (b == lo && !bounds::is_weak(uji)) {
                        lo = b;
                        lo_strict = !bounds::is_weak(uji);
                    }
                }
            }
            v[i] = if !lo_strict {
                lo.max(0.0)
            } else if hi.is_finite() {
                (lo + hi) / 2.0
            } else {
                lo + 0.5
            };
            debug_assert!(v[i] >= 0.0);
        }
        debug_assert!(self.contains_point(&v[1..]), "sample escaped zone");
        v.drain(..1);
        v
    }
}

fn bound_as_f64(r: Raw, pos_inf: bool) -> f64 {
    if r == INF {
        if pos_inf {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        bounds::constant(r) as f64
    }
}

/// Removes zones included in another zone of the same list.
pub fn reduce_federation(mut zones: Vec<Dbm>) -> Vec<Dbm> {
    let mut keep = vec![true; zones.len()];
    for i in 0..zones.len() {
        if !keep[i] {
            continue;
        }
        for j in 0..zones.len() {
            if i != j && keep[j] && keep[i] && zones[j].includes(&zones[i]) {
                // prefer the later duplicate on exact equality
                if zones[i] == zones[j] && i < j {
                    keep[j] = false;
                } else {
                    keep[i] = false;
                }
            }
        }
    }
    let mut it = keep.iter();
    zones.retain(|_| *it.next().unwrap());
    zones
}

/// `from \ minus` over federations.
pub fn subtract_all(from: &[Dbm], minus: &[Dbm]) -> Vec<Dbm> {
    let mut acc: Vec<Dbm> = from.to_vec();
    for m in minus {
        acc = acc.iter().flat_map(|z| z.subtract(m)).collect();
    }
    acc
}

/// The convex hull of two zones: entrywise weakest bounds, reclosed.
pub fn convex_hull(a: &Dbm, b: &Dbm) -> Dbm {
    assert_eq!(a.dim, b.dim);
    let entries: Vec<Raw> = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(&x, &y)| x.max(y))
        .collect();
    Dbm::canonicalize(a.dim, entries).expect("hull of non-empty zones is non-empty")
}

/// Merges zones whose union is exactly convex: `a` and `b` collapse to
/// their hull whenever the hull adds no points outside `a ∪ b`. Applied
/// to a fixpoint; the result covers the same set with fewer pieces.
pub fn merge_exact(mut zones: Vec<Dbm>) -> Vec<Dbm> {
    loop {
        let mut merged = None;
        'search: for i in 0..zones.len() {
            for j in i + 1..zones.len() {
                let hull = convex_hull(&zones[i], &zones[j]);
                let extra = subtract_all(&hull.subtract(&zones[i]), &[zones[j].clone()]);
                if extra.is_empty() {
                    merged = Some((i, j, hull));
                    break 'search;
                }
            }
        }
        match merged {
            Some((i, j, hull)) => {
                zones.swap_remove(j);
                zones[i] = hull;
            }
            None => return zones,
        }
    }
}
