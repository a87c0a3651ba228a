//! Observations and predicate subsets as bitmasks over a model's
//! predicate catalog.

use std::fmt;

/// Identifier of an observable predicate within a catalog.
pub type PredId = usize;

/// A set of predicate ids, packed. Catalogs are capped well below 64
/// predicates, so one word suffices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ObsMask(pub u64);

impl ObsMask {
    pub const EMPTY: ObsMask = ObsMask(0);

    pub fn singleton(id: PredId) -> ObsMask {
        ObsMask(1 << id)
    }

    pub fn from_ids<I: IntoIterator<Item = PredId>>(ids: I) -> ObsMask {
        let mut m = 0;
        for id in ids {
            m |= 1 << id;
        }
        ObsMask(m)
    }

    pub fn contains(&self, id: PredId) -> bool {
        self.0 >> id & 1 == 1
    }

    pub fn insert(&mut self, id: PredId) {
        self.0 |= 1 << id;
    }

    pub fn union(&self, other: ObsMask) -> ObsMask {
        ObsMask(self.0 | other.0)
    }

    pub fn intersect(&self, other: ObsMask) -> ObsMask {
        ObsMask(self.0 & other.0)
    }

    pub fn is_subset_of(&self, other: ObsMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = PredId> + '_ {
        (0..64).filter(|&i| self.contains(i))
    }
}

impl fmt::Display for ObsMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for id in self.ids() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// The subset of observable predicates satisfied by a state: what Player I
/// actually sees. Comparable only within one catalog/observation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Observation(pub u64);

impl Observation {
    pub fn contains(&self, id: PredId) -> bool {
        self.0 >> id & 1 == 1
    }

    /// Restriction to a coarser predicate set.
    pub fn restrict(&self, obs: ObsMask) -> Observation {
        Observation(self.0 & obs.0)
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ObsMask(self.0).fmt(f)
    }
}
