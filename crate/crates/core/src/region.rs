//! Region-granularity implementation of the timed game semantics, used as
//! a ground-truth oracle for the zone-level construction.
//!
//! Regions are the classical finite-index equivalence classes: capped
//! integer parts plus the ordering of clock fractions. They refine
//! observation cells and guard sets (all constants are integers no larger
//! than the caps), so observations and enabledness are constant per
//! region and can be decided on a representative valuation. The oracle is
//! deliberately naive and runs at desk scale only.

use std::collections::HashMap;

use crate::dbm::AtomicConstraint;
use crate::finite_game::ActionId;
use crate::knowledge::{ObservableGame, Step, StepKind};
use crate::observation::{ObsMask, Observation, PredId};
use crate::tga::{
    extrapolation_ceilings, LocationId, ModelError, Owner, PredicateCatalog, TgaModel,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("region oracle does not support clock-difference guards (edge {edge})")]
    DiffGuard { edge: usize },
    #[error("model exceeds oracle scale: {0}")]
    TooLarge(String),
}

/// One region: location, capped integer parts, and the fraction ordering
/// of the clocks that are still at or below their cap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    pub loc: LocationId,
    /// Integer part per clock (1-based clock ids, entry 0 unused).
    pub ints: Vec<u32>,
    /// True once the clock has passed its cap; fraction then irrelevant.
    pub above: Vec<bool>,
    /// Fraction-equality classes of non-above clocks, ordered by fraction.
    pub frac_groups: Vec<Vec<usize>>,
    /// The first class has fraction exactly zero.
    pub first_is_zero: bool,
}

impl Region {
    fn zero(loc: LocationId, n_clocks: usize) -> Region {
        Region {
            loc,
            ints: vec![0; n_clocks + 1],
            above: vec![false; n_clocks + 1],
            frac_groups: vec![(1..=n_clocks).collect()],
            first_is_zero: true,
        }
    }

    /// A valuation inside the region; exact for all constraints whose
    /// constants stay within the caps.
    pub fn representative(&self, caps: &[i32]) -> Vec<f64> {
        let n = self.ints.len() - 1;
        let mut v = vec![0.0f64; n];
        let denom = (self.frac_groups.len() + 1) as f64;
        for (gi, group) in self.frac_groups.iter().enumerate() {
            let frac = if self.first_is_zero {
                gi as f64 / denom
            } else {
                (gi + 1) as f64 / denom
            };
            for &c in group {
                v[c - 1] = self.ints[c] as f64 + frac;
            }
        }
        for c in 1..=n {
            if self.above[c] {
                v[c - 1] = caps[c] as f64 + 0.5;
            }
        }
        v
    }

    /// The immediate time-successor region within the same location;
    /// `None` when the region is its own successor (every clock above its
    /// cap) is never returned — that case yields `self`.
    fn time_successor(&self, caps: &[i32]) -> Region {
        let mut r = self.clone();
        if r.frac_groups.is_empty() {
            return r; // all clocks above cap: delays stay here
        }
        if r.first_is_zero {
            // zero-fraction clocks move into (0, ε); those at cap go above
            let group = r.frac_groups.remove(0);
            let mut stay = Vec::new();
            for c in group {
                if (r.ints[c] as i32) >= caps[c] {
                    r.above[c] = true;
                } else {
                    stay.push(c);
                }
            }
            if !stay.is_empty() {
                r.frac_groups.insert(0, stay);
            }
            r.first_is_zero = false;
        } else {
            // the largest fraction class reaches the next integer
            let group = r.frac_groups.pop().unwrap();
            let mut landed = Vec::new();
            for c in group {
                r.ints[c] += 1;
                landed.push(c);
            }
            landed.sort_unstable();
            r.frac_groups.insert(0, landed);
            r.first_is_zero = true;
        }
        r
    }

    fn reset(&self, resets: &[usize], target: LocationId) -> Region {
        let mut r = self.clone();
        r.loc = target;
        for &c in resets {
            r.above[c] = false;
            r.ints[c] = 0;
            let had_zero_group = r.first_is_zero;
            for g in &mut r.frac_groups {
                g.retain(|&x| x != c);
            }
            if had_zero_group && r.frac_groups[0].is_empty() {
                r.first_is_zero = false;
            }
            r.frac_groups.retain(|g| !g.is_empty());
            if r.first_is_zero {
                r.frac_groups[0].push(c);
                r.frac_groups[0].sort_unstable();
            } else {
                r.frac_groups.insert(0, vec![c]);
                r.first_is_zero = true;
            }
        }
        r
    }
}

/// Region-level arena implementing the same stuttering game semantics as
/// the zone construction.
pub struct RegionGame<'a> {
    model: &'a TgaModel,
    catalog: &'a PredicateCatalog,
    obs: ObsMask,
    caps: Vec<i32>,
}

impl<'a> RegionGame<'a> {
    pub fn new(
        model: &'a TgaModel,
        catalog: &'a PredicateCatalog,
        obs: ObsMask,
    ) -> Result<RegionGame<'a>, OracleError> {
        if !obs.contains(catalog.safety) {
            return Err(OracleError::Model(ModelError::SafetyNotObserved(
                catalog.safety,
            )));
        }
        for (ei, e) in model.edges.iter().enumerate() {
            if e.guard
                .iter()
                .any(|a| matches!(a, AtomicConstraint::Diff { .. }))
            {
                return Err(OracleError::DiffGuard { edge: ei });
            }
        }
        let caps = extrapolation_ceilings(model, catalog);
        Ok(RegionGame {
            model,
            catalog,
            obs,
            caps,
        })
    }

    pub fn caps(&self) -> &[i32] {
        &self.caps
    }

    fn skip_action(&self) -> usize {
        self.model.controllable_actions.len()
    }

    fn satisfies(&self, r: &Region, atoms: &[AtomicConstraint]) -> bool {
        let v = r.representative(&self.caps);
        atoms.iter().all(|a| a.satisfied_by(&v))
    }

    fn invariant_ok(&self, r: &Region) -> bool {
        self.satisfies(r, &self.model.locations[r.loc].invariant)
    }

    fn enabled(&self, r: &Region, a: usize) -> bool {
        self.model.edges.iter().any(|e| {
            e.source == r.loc && e.owner == Owner::Controllable(a) && self.satisfies(r, &e.guard)
        })
    }

    fn fire_steps(&self, r: &Region, a: usize) -> Vec<Region> {
        let mut out = Vec::new();
        for e in &self.model.edges {
            if e.source == r.loc && e.owner == Owner::Controllable(a) && self.satisfies(r, &e.guard)
            {
                let succ = r.reset(&e.resets, e.target);
                debug_assert!(self.invariant_ok(&succ), "validated models cannot escape");
                out.push(succ);
            }
        }
        out
    }

    fn uncontrollable_steps(&self, r: &Region) -> Vec<Region> {
        let mut out = Vec::new();
        for e in &self.model.edges {
            if e.source == r.loc {
                if let Owner::Uncontrollable(_) = e.owner {
                    if self.satisfies(r, &e.guard) {
                        let succ = r.reset(&e.resets, e.target);
                        if self.invariant_ok(&succ) {
                            out.push(succ);
                        }
                    }
                }
            }
        }
        out
    }

    /// Explicitly explores the reachable region arena; for size assertions
    /// and diagnostics.
    pub fn explore(&self) -> (Vec<Region>, Vec<Observation>) {
        let mut seen: HashMap<Region, usize> = HashMap::new();
        let mut states = vec![self.initial()];
        seen.insert(states[0].clone(), 0);
        let mut obs = vec![self.observe(&states[0])];
        let mut i = 0;
        while i < states.len() {
            let r = states[i].clone();
            for a in 0..self.n_actions() {
                for st in self.step(&r, a) {
                    if !seen.contains_key(&st.to) {
                        seen.insert(st.to.clone(), states.len());
                        obs.push(self.observe(&st.to));
                        states.push(st.to);
                    }
                }
            }
            i += 1;
        }
        (states, obs)
    }
}

impl ObservableGame for RegionGame<'_> {
    type State = Region;

    fn initial(&self) -> Region {
        Region::zero(self.model.initial, self.model.clocks.len())
    }

    fn n_actions(&self) -> usize {
        self.model.controllable_actions.len() + 1
    }

    fn obs_mask(&self) -> ObsMask {
        self.obs
    }

    fn observe(&self, r: &Region) -> Observation {
        let v = r.representative(&self.caps);
        let mut o = 0u64;
        for id in self.obs.ids() {
            let p = &self.catalog.predicates[id];
            if p.locations[r.loc] && p.clock_atoms.iter().all(|a| a.satisfied_by(&v)) {
                o |= 1 << id;
            }
        }
        Observation(o)
    }

    fn step(&self, r: &Region, act: ActionId) -> Vec<Step<Region>> {
        let here = self.observe(r);
        let mut out = Vec::new();
        let mut push = |to: Region, kind: StepKind| {
            let visible = match kind {
                StepKind::Fire => true,
                _ => self.observe(&to) != here,
            };
            out.push(Step {
                visible,
                zero_time: kind != StepKind::Delay,
                kind,
                to,
            });
        };
        let skip = self.skip_action();
        let may_delay;
        if act < skip {
            if self.enabled(r, act) {
                // urgent: the proposal fires now, nothing else can happen
                for succ in self.fire_steps(r, act) {
                    push(succ, StepKind::Fire);
                }
                return out;
            }
            for succ in self.uncontrollable_steps(r) {
                push(succ, StepKind::Discrete);
            }
            may_delay = true;
        } else {
            for succ in self.uncontrollable_steps(r) {
                push(succ, StepKind::Discrete);
            }
            may_delay = true;
        }
        if may_delay {
            let succ = r.time_successor(&self.caps);
            if self.invariant_ok(&succ) {
                // a delay into the same region only exists above the caps
                if succ != *r || r.frac_groups.is_empty() {
                    push(succ, StepKind::Delay);
                }
            }
        }
        out
    }
}

/// Solves `(model, obs)` through the region construction: the independent
/// route the zone path is checked against.
pub fn oracle_solve(
    model: &TgaModel,
    catalog: &PredicateCatalog,
    obs: ObsMask,
) -> Result<bool, OracleError> {
    let game = RegionGame::new(model, catalog, obs)?;
    let kg = crate::knowledge::build_knowledge_game(
        &game,
        catalog.safety,
        crate::knowledge::BuildOptions::default(),
    )
    .map_err(|e| OracleError::TooLarge(e.to_string()))?;
    Ok(crate::knowledge::solve(&kg).winning)
}

/// Region count along one clock axis for the textbook sanity check.
pub fn axis_region_count(cap: u32) -> u32 {
    // 0, (0,1), 1, (1,2), ..., cap, > cap
    2 * cap + 2
}

/// Safety predicate id helper, mirroring the zone path's entry point.
pub fn safety_of(catalog: &PredicateCatalog) -> PredId {
    catalog.safety
}
