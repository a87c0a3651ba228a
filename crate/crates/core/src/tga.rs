//! Timed game automata and their zone-level game semantics.
//!
//! The semantics follows the stuttering game reading: the controller
//! proposes a controllable action (or `skip`) and holds it; while the
//! proposal is not enabled the environment may fire uncontrollable edges
//! or let time pass, but time may never run past the proposal's first
//! enabling instant, and any delay stops at the first instant the
//! observation changes. Controllable guards and invariants are in `B(X)`
//! (left-closed, right-open bands), so both kinds of frontier exist and
//! are reachable.
//!
//! Symbolic states are `(location, cell, zone)` triples where the cell
//! fixes the truth of every observation atom and the zone is a canonical
//! DBM inside the cell and the location invariant. One controller round
//! ends at an observation change or at the controller's own action
//! occurrence, so controllable fires are always delivered visible.

use std::collections::HashMap;

use crate::cells::{Cell, CellSpace};
use crate::dbm::{reduce_federation, subtract_all, AtomicConstraint, ClockSet, Dbm};
use crate::finite_game::ActionId;
use crate::knowledge::{InvEdge, ObservableGame, Step, StepKind};
use crate::observation::{ObsMask, Observation, PredId};

pub type LocationId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("guard of controllable edge {edge} is not in B(X): {detail}")]
    GuardNotBand { edge: usize, detail: String },
    #[error("invariant of location {location} is not in B(X)")]
    InvariantNotBand { location: String },
    #[error("clock part of predicate {predicate} is not in B(X)")]
    PredicateNotBand { predicate: String },
    #[error("controllable edge {edge} can fire into a state violating the target invariant")]
    ResetEscapesInvariant { edge: usize },
    #[error("initial location invariant excludes the zero valuation")]
    InitialViolatesInvariant,
    #[error("safety predicate must have cost 0, got {0}")]
    SafetyNotFree(u64),
    #[error("safety predicate {0} missing from the observation set")]
    SafetyNotObserved(PredId),
    #[error("model has no location")]
    NoLocations,
    #[error("edge {edge} guard is unsatisfiable")]
    EmptyGuard { edge: usize },
}

/// Which player owns an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    /// Index into the controllable action alphabet.
    Controllable(usize),
    /// Index into the uncontrollable action alphabet.
    Uncontrollable(usize),
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub source: LocationId,
    pub target: LocationId,
    pub owner: Owner,
    pub guard: Vec<AtomicConstraint>,
    pub resets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Location {
    pub name: String,
    pub invariant: Vec<AtomicConstraint>,
}

/// A timed game automaton over a fixed clock set. Integer state variables
/// of the input format have already been compiled into the location set.
#[derive(Debug, Clone)]
pub struct TgaModel {
    pub clocks: ClockSet,
    pub locations: Vec<Location>,
    pub initial: LocationId,
    pub controllable_actions: Vec<String>,
    pub uncontrollable_actions: Vec<String>,
    pub edges: Vec<Edge>,
}

/// Observable predicate `(K, ψ)`: a location set and a `B(X)` clock
/// constraint, with an attached cost in milli-units.
#[derive(Debug, Clone)]
pub struct ObservationPredicate {
    pub name: String,
    /// Membership per location id.
    pub locations: Vec<bool>,
    pub clock_atoms: Vec<AtomicConstraint>,
    pub cost_millis: u64,
}

/// The model's predicate catalog including the safety predicate.
#[derive(Debug, Clone)]
pub struct PredicateCatalog {
    pub predicates: Vec<ObservationPredicate>,
    pub safety: PredId,
}

impl PredicateCatalog {
    pub fn full_mask(&self) -> ObsMask {
        ObsMask::from_ids(0..self.predicates.len())
    }

    pub fn cost_millis(&self, obs: ObsMask) -> u64 {
        obs.ids().map(|id| self.predicates[id].cost_millis).sum()
    }

    pub fn name_of(&self, id: PredId) -> &str {
        &self.predicates[id].name
    }

    pub fn id_of(&self, name: &str) -> Option<PredId> {
        self.predicates.iter().position(|p| p.name == name)
    }

    /// All clock atoms of every predicate; the cell grid is built from the
    /// whole catalog so extrapolation ceilings do not depend on the
    /// queried subset.
    pub fn all_atoms(&self) -> Vec<AtomicConstraint> {
        self.predicates
            .iter()
            .flat_map(|p| p.clock_atoms.iter().cloned())
            .collect()
    }
}

/// Validates guard forms, invariant forms, the urgency closure condition
/// for controllable edges, and the safety predicate's cost.
pub fn validate(model: &TgaModel, catalog: &PredicateCatalog) -> Result<(), ModelError> {
    if model.locations.is_empty() {
        return Err(ModelError::NoLocations);
    }
    let n = model.clocks.len();
    for (li, loc) in model.locations.iter().enumerate() {
        if loc.invariant.iter().any(|a| !a.is_band()) {
            return Err(ModelError::InvariantNotBand {
                location: model.locations[li].name.clone(),
            });
        }
    }
    for p in &catalog.predicates {
        if p.clock_atoms.iter().any(|a| !a.is_band()) {
            return Err(ModelError::PredicateNotBand {
                predicate: p.name.clone(),
            });
        }
    }
    if catalog.predicates[catalog.safety].cost_millis != 0 {
        return Err(ModelError::SafetyNotFree(
            catalog.predicates[catalog.safety].cost_millis,
        ));
    }
    for (ei, e) in model.edges.iter().enumerate() {
        match e.owner {
            Owner::Controllable(_) => {
                if let Some(bad) = e.guard.iter().find(|a| !a.is_band()) {
                    return Err(ModelError::GuardNotBand {
                        edge: ei,
                        detail: format!("{bad:?}"),
                    });
                }
                // firing from anywhere in guard ∩ I(source) must satisfy
                // the target invariant after the resets
                let src_inv = invariant_dbm(model, e.source);
                let fireable = Dbm::from_conjunction(n, &e.guard)
                    .and_then(|g| g.intersect(&src_inv));
                if let Some(z) = fireable {
                    let after = z.reset(&e.resets);
                    let tgt_inv = invariant_dbm(model, e.target);
                    if !tgt_inv.includes(&after) {
                        return Err(ModelError::ResetEscapesInvariant { edge: ei });
                    }
                }
            }
            Owner::Uncontrollable(_) => {
                if Dbm::from_conjunction(n, &e.guard).is_none() {
                    return Err(ModelError::EmptyGuard { edge: ei });
                }
            }
        }
    }
    let init_inv = invariant_dbm(model, model.initial);
    if !init_inv.contains_point(&vec![0.0; n]) {
        return Err(ModelError::InitialViolatesInvariant);
    }
    Ok(())
}

fn invariant_dbm(model: &TgaModel, l: LocationId) -> Dbm {
    Dbm::from_conjunction(model.clocks.len(), &model.locations[l].invariant)
        .unwrap_or_else(|| panic!("invariant of {} unsatisfiable", model.locations[l].name))
}

/// Per-clock extrapolation ceilings: the largest constant over guards,
/// invariants, and every catalog predicate atom.
pub fn extrapolation_ceilings(model: &TgaModel, catalog: &PredicateCatalog) -> Vec<i32> {
    let mut ceil = vec![0i32; model.clocks.dim()];
    let mut feed = |a: &AtomicConstraint| {
        let k = a.max_constant() as i32;
        for c in a.clocks() {
            ceil[c] = ceil[c].max(k);
        }
    };
    for e in &model.edges {
        e.guard.iter().for_each(&mut feed);
    }
    for l in &model.locations {
        l.invariant.iter().for_each(&mut feed);
    }
    for p in &catalog.predicates {
        p.clock_atoms.iter().for_each(&mut feed);
    }
    ceil
}

/// Union of the guards of `a`-labeled controllable edges from `l`, each
/// intersected with the location invariant.
pub fn enabled_region(model: &TgaModel, l: LocationId, a: usize) -> Vec<Dbm> {
    let inv = invariant_dbm(model, l);
    let mut out = Vec::new();
    for e in &model.edges {
        if e.source == l && e.owner == Owner::Controllable(a) {
            if let Some(g) = Dbm::from_conjunction(model.clocks.len(), &e.guard) {
                if let Some(z) = g.intersect(&inv) {
                    out.push(z);
                }
            }
        }
    }
    reduce_federation(out)
}

/// Zone-level symbolic state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicState {
    pub loc: LocationId,
    pub cell: Cell,
    pub zone: Dbm,
}

struct LocActData {
    /// (guard zone, resets, target) per controllable a-edge from the location
    fires: Vec<(Dbm, Vec<usize>, LocationId)>,
    /// guard zones alone, for carving
    guards: Vec<Dbm>,
    /// observation atoms plus this action's guard atoms
    refined: CellSpace,
    /// enabledness per refined cell is constant; per edge the guard atoms
    guard_atoms: Vec<Vec<AtomicConstraint>>,
}

struct LocData {
    invariant: Dbm,
    /// (guard zone, resets, target) per uncontrollable edge
    uncontrollable: Vec<(Dbm, Vec<usize>, LocationId)>,
    per_action: Vec<LocActData>,
}

/// The game semantics of a model under one observation set, packaged as
/// an observable arena. Action `n_controllable` is `skip`.
///
/// Step results are memoized: saturations of overlapping beliefs hit the
/// same symbolic states over and over.
pub struct ZoneGame<'a> {
    pub model: &'a TgaModel,
    pub catalog: &'a PredicateCatalog,
    pub obs: ObsMask,
    space: CellSpace,
    ceil: Vec<i32>,
    locs: Vec<LocData>,
    initial: SymbolicState,
    step_cache: std::cell::RefCell<HashMap<(SymbolicState, ActionId), Vec<Step<SymbolicState>>>>,
}

impl<'a> ZoneGame<'a> {
    pub fn new(
        model: &'a TgaModel,
        catalog: &'a PredicateCatalog,
        obs: ObsMask,
    ) -> Result<ZoneGame<'a>, ModelError> {
        if !obs.contains(catalog.safety) {
            return Err(ModelError::SafetyNotObserved(catalog.safety));
        }
        let n = model.clocks.len();
        // the grid uses the whole catalog: cells refine every subset's
        // observation and extrapolation ceilings stay subset-independent
        let all_atoms = catalog.all_atoms();
        let space = CellSpace::new(n, &all_atoms)
            .map_err(|e| ModelError::PredicateNotBand {
                predicate: e.to_string(),
            })?;
        let ceil = extrapolation_ceilings(model, catalog);

        let nc = model.controllable_actions.len();
        let mut locs = Vec::with_capacity(model.locations.len());
        for l in 0..model.locations.len() {
            let invariant = invariant_dbm(model, l);
            let mut uncontrollable = Vec::new();
            for e in &model.edges {
                if e.source == l {
                    if let Owner::Uncontrollable(_) = e.owner {
                        if let Some(g) = Dbm::from_conjunction(n, &e.guard) {
                            uncontrollable.push((g, e.resets.clone(), e.target));
                        }
                    }
                }
            }
            let mut per_action = Vec::with_capacity(nc);
            for a in 0..nc {
                let mut fires = Vec::new();
                let mut guards = Vec::new();
                let mut guard_atoms = Vec::new();
                let mut refine_atoms = all_atoms.clone();
                for e in &model.edges {
                    if e.source == l && e.owner == Owner::Controllable(a) {
                        if let Some(g) = Dbm::from_conjunction(n, &e.guard) {
                            fires.push((g.clone(), e.resets.clone(), e.target));
                            guards.push(g);
                            guard_atoms.push(e.guard.clone());
                            refine_atoms.extend(e.guard.iter().cloned());
                        }
                    }
                }
                let refined = CellSpace::new(n, &refine_atoms).expect("bands only");
                per_action.push(LocActData {
                    fires,
                    guards,
                    refined,
                    guard_atoms,
                });
            }
            locs.push(LocData {
                invariant,
                uncontrollable,
                per_action,
            });
        }

        let zero = Dbm::zero(n);
        let init_inv = &locs[model.initial].invariant;
        let zone = zero
            .intersect(init_inv)
            .ok_or(ModelError::InitialViolatesInvariant)?;
        let cell = space.cell_of_point(&vec![0.0; n]);
        let zone = zone
            .intersect(&space.cell_dbm(&cell))
            .expect("zero valuation lies in its own cell");
        let initial = SymbolicState {
            loc: model.initial,
            cell,
            zone,
        };
        Ok(ZoneGame {
            model,
            catalog,
            obs,
            space,
            ceil,
            locs,
            initial,
            step_cache: std::cell::RefCell::new(HashMap::new()),
        })
    }

    pub fn cell_space(&self) -> &CellSpace {
        &self.space
    }

    pub fn skip_action(&self) -> ActionId {
        self.model.controllable_actions.len()
    }

    fn observation_of(&self, loc: LocationId, cell: &Cell) -> Observation {
        let mut o = 0u64;
        for id in self.obs.ids() {
            let p = &self.catalog.predicates[id];
            if p.locations[loc]
                && p
                    .clock_atoms
                    .iter()
                    .all(|a| self.space.band_true_in(cell, a))
            {
                o |= 1 << id;
            }
        }
        Observation(o)
    }

    /// Splits a zone into symbolic states at `loc`, extrapolated.
    fn make_states(&self, loc: LocationId, z: &Dbm) -> Vec<SymbolicState> {
        self.space
            .split_zone(z)
            .into_iter()
            .map(|(cell, piece)| {
                let zone = piece.extrapolate(&self.ceil);
                debug_assert!(
                    self.space.cell_dbm(&cell).includes(&zone),
                    "extrapolation escaped its cell"
                );
                SymbolicState { loc, cell, zone }
            })
            .collect()
    }

    /// Delay evolution from `pieces` (all inside `cell` at `loc`): the
    /// endpoints reachable without the observation changing strictly
    /// before the end, carved at the first enabling instant of the
    /// proposed action when one is given.
    ///
    /// Returns `(within_observation, crossings)`; crossings are the first
    /// instants in a different observation.
    fn march(
        &self,
        loc: LocationId,
        cell: &Cell,
        pieces: &[Dbm],
        act: Option<usize>,
    ) -> (Vec<SymbolicState>, Vec<SymbolicState>) {
        let ld = &self.locs[loc];
        let base_space = &self.space;
        let refined: &CellSpace = match act {
            Some(a) => &ld.per_action[a].refined,
            None => base_space,
        };
        let inv = &ld.invariant;
        let here = self.observation_of(loc, cell);

        let enabled_in = |rc: &Cell| -> bool {
            match act {
                None => false,
                Some(a) => ld.per_action[a]
                    .guard_atoms
                    .iter()
                    .any(|atoms| atoms.iter().all(|at| refined.band_true_in(rc, at))),
            }
        };
        // the observation cell a refined cell lies in
        let base_cell_of = |rc: &Cell| -> Cell {
            let p = refined.cell_dbm(rc).sample_point();
            base_space.cell_of_point(&p)
        };

        let mut invisible: Vec<Dbm> = Vec::new();
        let mut visible: Vec<SymbolicState> = Vec::new();
        let mut seen: std::collections::HashSet<(Cell, Dbm)> = std::collections::HashSet::new();
        let mut work: Vec<(Cell, Dbm)> = Vec::new();
        for p in pieces {
            for (rc, piece) in refined.split_zone(p) {
                debug_assert!(!enabled_in(&rc) || act.is_none());
                if seen.insert((rc.clone(), piece.clone())) {
                    work.push((rc, piece));
                }
            }
        }
        while let Some((rc, piece)) = work.pop() {
            let rc_dbm = refined.cell_dbm(&rc);
            if let Some(d) = piece.up().intersect(inv).and_then(|z| z.intersect(&rc_dbm)) {
                invisible.push(d);
            }
            let frontier = match piece
                .up()
                .intersect(&refined.closure_relax(&rc))
                .and_then(|z| z.intersect(inv))
            {
                Some(f) => f,
                None => continue,
            };
            for (rc2, f) in refined.split_zone(&frontier) {
                if rc2 == rc {
                    continue;
                }
                let base2 = base_cell_of(&rc2);
                let obs2 = self.observation_of(loc, &base2);
                if obs2 != here {
                    // first instant of an observation change
                    visible.push(SymbolicState {
                        loc,
                        cell: base2.clone(),
                        zone: f.extrapolate(&self.ceil),
                    });
                } else if enabled_in(&rc2) {
                    // first enabling instant: a valid endpoint, but time
                    // may not pass beyond it under this proposal
                    invisible.push(f);
                } else if seen.insert((rc2.clone(), f.clone())) {
                    work.push((rc2, f));
                }
            }
        }

        let invisible = reduce_federation(invisible);
        let inv_states = invisible
            .into_iter()
            .flat_map(|z| {
                // pieces are within one refined cell, hence one base cell
                let zone = z.extrapolate(&self.ceil);
                let p = zone.sample_point();
                let bc = base_space.cell_of_point(&p);
                debug_assert!(base_space.cell_dbm(&bc).includes(&zone));
                Some(SymbolicState {
                    loc,
                    cell: bc,
                    zone,
                })
            })
            .collect();
        (inv_states, visible)
    }

    fn discrete_successors(
        &self,
        from: &Dbm,
        moves: &[(Dbm, Vec<usize>, LocationId)],
    ) -> Vec<SymbolicState> {
        let mut out = Vec::new();
        for (g, resets, target) in moves {
            if let Some(z) = from.intersect(g) {
                let after = z.reset(resets);
                if let Some(landed) = after.intersect(&self.locs[*target].invariant) {
                    out.extend(self.make_states(*target, &landed));
                }
            }
        }
        out
    }

    /// The full step relation of the game semantics for one symbolic state.
    pub fn game_step(&self, s: &SymbolicState, act: ActionId) -> Vec<Step<SymbolicState>> {
        let ld = &self.locs[s.loc];
        let here = self.observation_of(s.loc, &s.cell);
        let mut out: Vec<Step<SymbolicState>> = Vec::new();
        let mut push = |to: SymbolicState, kind: StepKind, game: &ZoneGame| {
            let visible = match kind {
                StepKind::Fire => true,
                _ => game.observation_of(to.loc, &to.cell) != here,
            };
            out.push(Step {
                visible,
                zero_time: kind != StepKind::Delay,
                kind,
                to,
            });
        };

        if act < self.skip_action() {
            let lad = &ld.per_action[act];
            // urgent discrete occurrences from the enabled part
            for (g, resets, target) in &lad.fires {
                if let Some(z) = s.zone.intersect(g) {
                    let after = z.reset(resets);
                    if let Some(landed) = after.intersect(&self.locs[*target].invariant) {
                        for st in self.make_states(*target, &landed) {
                            push(st, StepKind::Fire, self);
                        }
                    }
                }
            }
            // everything else happens only where the proposal is disabled
            let disabled = subtract_all(std::slice::from_ref(&s.zone), &lad.guards);
            let disabled = reduce_federation(disabled);
            for piece in &disabled {
                for st in self.discrete_successors(piece, &ld.uncontrollable) {
                    push(st, StepKind::Discrete, self);
                }
            }
            let (inv_states, vis_states) = self.march(s.loc, &s.cell, &disabled, Some(act));
            for st in inv_states {
                if st != *s {
                    push(st, StepKind::Delay, self);
                }
            }
            for st in vis_states {
                push(st, StepKind::Delay, self);
            }
        } else {
            // skip: uncontrollable moves and delays, unrestricted
            for st in self.discrete_successors(&s.zone, &ld.uncontrollable) {
                push(st, StepKind::Discrete, self);
            }
            let pieces = [s.zone.clone()];
            let (inv_states, vis_states) = self.march(s.loc, &s.cell, &pieces, None);
            for st in inv_states {
                if st != *s {
                    push(st, StepKind::Delay, self);
                }
            }
            for st in vis_states {
                push(st, StepKind::Delay, self);
            }
        }
        out
    }

    /// Divergence inside the current observation under `act`: either some
    /// reachable symbolic state admits unbounded delay with the proposal
    /// never forced, or the invisible step graph cycles through a
    /// discrete step.
    pub fn zone_diverges(
        &self,
        closure: &[SymbolicState],
        edges: &[InvEdge],
        act: ActionId,
    ) -> bool {
        if crate::knowledge::invisible_cycle(closure.len(), edges) {
            return true;
        }
        for st in closure {
            let ld = &self.locs[st.loc];
            let boxed = self
                .space
                .cell_dbm(&st.cell)
                .intersect(&ld.invariant)
                .expect("state zone is non-empty inside both");
            if !boxed.is_time_unbounded() {
                continue;
            }
            if act >= self.skip_action() {
                return true;
            }
            // a point whose entire future avoids every guard of the action
            let pasts: Vec<Dbm> = ld.per_action[act]
                .guards
                .iter()
                .map(|g| g.down())
                .collect();
            let free = subtract_all(std::slice::from_ref(&st.zone), &pasts);
            if !free.is_empty() {
                return true;
            }
        }
        false
    }
}

impl ObservableGame for ZoneGame<'_> {
    type State = SymbolicState;

    fn initial(&self) -> SymbolicState {
        self.initial.clone()
    }

    fn n_actions(&self) -> usize {
        self.model.controllable_actions.len() + 1
    }

    fn obs_mask(&self) -> ObsMask {
        self.obs
    }

    fn observe(&self, s: &SymbolicState) -> Observation {
        self.observation_of(s.loc, &s.cell)
    }

    fn step(&self, s: &SymbolicState, a: ActionId) -> Vec<Step<SymbolicState>> {
        if let Some(hit) = self.step_cache.borrow().get(&(s.clone(), a)) {
            return hit.clone();
        }
        let t = std::time::Instant::now();
        let out = self.game_step(s, a);
        if t.elapsed().as_millis() > 5 && std::env::var_os("MINOBS_TRACE_BUILD").is_some() {
            eprintln!(
                "slow game_step {:?} at loc {} cell {:?} act {a} -> {} steps",
                t.elapsed(),
                s.loc,
                s.cell,
                out.len()
            );
        }
        self.step_cache
            .borrow_mut()
            .insert((s.clone(), a), out.clone());
        out
    }

    fn diverges(&self, closure: &[SymbolicState], edges: &[InvEdge], a: ActionId) -> bool {
        self.zone_diverges(closure, edges, a)
    }

    fn canonicalize_belief(&self, mut members: Vec<SymbolicState>) -> Vec<SymbolicState> {
        members.sort();
        members.dedup();
        // per (location, cell): drop subsumed zones, then collapse pieces
        // whose union is exactly convex — the delay marching fragments
        // zones and distinct fragmentations must not yield distinct
        // beliefs
        let mut out: Vec<SymbolicState> = Vec::with_capacity(members.len());
        let mut i = 0;
        while i < members.len() {
            let mut j = i;
            while j < members.len()
                && members[j].loc == members[i].loc
                && members[j].cell == members[i].cell
            {
                j += 1;
            }
            let mut zones: Vec<Dbm> = members[i..j].iter().map(|m| m.zone.clone()).collect();
            zones = reduce_federation(zones);
            zones = crate::dbm::merge_exact(zones);
            zones.sort();
            for zone in zones {
                out.push(SymbolicState {
                    loc: members[i].loc,
                    cell: members[i].cell.clone(),
                    zone,
                });
            }
            i = j;
        }
        out
    }
}

/// Builds the zone arena for `(model, obs, safety)`; the safety predicate
/// must be part of `obs`.
pub fn zone_observable_game<'a>(
    model: &'a TgaModel,
    catalog: &'a PredicateCatalog,
    obs: ObsMask,
) -> Result<ZoneGame<'a>, ModelError> {
    ZoneGame::new(model, catalog, obs)
}

/// Sample rational valuations of every cell met by a zone, at the grid
/// used by the membership oracles.
pub fn grid_points(max: i32, n_clocks: usize, denom: usize) -> Vec<Vec<f64>> {
    let steps = (max as usize) * denom + denom + 1;
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..n_clocks {
        let mut next = Vec::with_capacity(out.len() * steps);
        for v in &out {
            for k in 0..steps {
                let mut w = v.clone();
                w.push(k as f64 / denom as f64);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Lookup table from location names to indices, for model builders.
pub fn location_index(model: &TgaModel) -> HashMap<String, LocationId> {
    model
        .locations
        .iter()
        .enumerate()
        .map(|(i, l)| (l.name.clone(), i))
        .collect()
}
