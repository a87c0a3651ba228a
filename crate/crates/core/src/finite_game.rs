//! Explicit finite arenas, perfect-information safety solving, and
//! observation utilities (γ, stuttering-free projection).
//!
//! Arenas are Player I vs Player II: at each round Player I picks an
//! action, Player II resolves the nondeterminism among the successors
//! labeled with it. Player I wins a safety game by keeping every outcome
//! inside the safe set forever.

use crate::observation::{ObsMask, Observation};

pub type StateId = usize;
pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArenaError {
    #[error("transition relation not total: state {state} has no successor for action {action}")]
    NotTotal { state: StateId, action: ActionId },
    #[error("initial state {0} out of range")]
    BadInitial(StateId),
}

/// Finite labeled transition system with a total transition relation.
#[derive(Debug, Clone)]
pub struct FiniteLts {
    n_states: usize,
    n_actions: usize,
    initial: StateId,
    /// successors\[state\]\[action\] — non-empty, sorted, deduplicated
    successors: Vec<Vec<Vec<StateId>>>,
}

impl FiniteLts {
    /// Validates totality eagerly: a missing `(state, action)` pair is a
    /// model error, not a solver concern.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        initial: StateId,
        mut successors: Vec<Vec<Vec<StateId>>>,
    ) -> Result<FiniteLts, ArenaError> {
        if initial >= n_states {
            return Err(ArenaError::BadInitial(initial));
        }
        assert_eq!(successors.len(), n_states);
        for (s, per_action) in successors.iter_mut().enumerate() {
            assert_eq!(per_action.len(), n_actions);
            for (a, succ) in per_action.iter_mut().enumerate() {
                succ.sort_unstable();
                succ.dedup();
                if succ.is_empty() {
                    return Err(ArenaError::NotTotal {
                        state: s,
                        action: a,
                    });
                }
            }
        }
        Ok(FiniteLts {
            n_states,
            n_actions,
            initial,
            successors,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn successors(&self, s: StateId, a: ActionId) -> &[StateId] {
        &self.successors[s][a]
    }
}

/// Characteristic set over state indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePredicate {
    members: Vec<bool>,
}

impl StatePredicate {
    pub fn new(members: Vec<bool>) -> StatePredicate {
        StatePredicate { members }
    }

    pub fn from_ids(n_states: usize, ids: &[StateId]) -> StatePredicate {
        let mut members = vec![false; n_states];
        for &s in ids {
            members[s] = true;
        }
        StatePredicate { members }
    }

    pub fn holds(&self, s: StateId) -> bool {
        self.members[s]
    }
}

/// Winning states of a safety game with a positional witness strategy.
#[derive(Debug, Clone)]
pub struct SafetySolution {
    pub winning: Vec<bool>,
    /// For each winning state, the least action keeping all successors
    /// inside the winning set.
    pub strategy: Vec<Option<ActionId>>,
}

impl SafetySolution {
    pub fn initial_wins(&self, initial: StateId) -> bool {
        self.winning[initial]
    }
}

/// Greatest fixpoint for safety, generic over the arena representation.
///
/// `successors(s, a)` may be empty; such an action witnesses safety
/// vacuously (nothing can happen under it). Total arenas never exercise
/// this case; knowledge games rely on it where the underlying timed
/// semantics walls off every evolution.
pub fn solve_safety_generic<F>(
    n_states: usize,
    n_actions: usize,
    successors: F,
    safe: impl Fn(StateId) -> bool,
) -> SafetySolution
where
    F: Fn(StateId, ActionId) -> Vec<StateId>,
{
    let mut winning: Vec<bool> = (0..n_states).map(&safe).collect();
    // iterated removal of states with no action keeping all successors in W
    loop {
        let mut changed = false;
        for s in 0..n_states {
            if !winning[s] {
                continue;
            }
            let has_safe_action =
                (0..n_actions).any(|a| successors(s, a).iter().all(|&t| winning[t]));
            if !has_safe_action {
                winning[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // lowest-index witness per winning state, for reproducible strategies
    let strategy = (0..n_states)
        .map(|s| {
            if !winning[s] {
                return None;
            }
            (0..n_actions).find(|&a| successors(s, a).iter().all(|&t| winning[t]))
        })
        .collect();
    SafetySolution { winning, strategy }
}

/// Solves the safety game `(g, safe)`: the winning set is the greatest
/// `W ⊆ safe` such that every state of `W` has an action all of whose
/// successors stay in `W`.
pub fn solve_safety(g: &FiniteLts, safe: &StatePredicate) -> SafetySolution {
    solve_safety_generic(
        g.n_states(),
        g.n_actions(),
        |s, a| g.successors(s, a).to_vec(),
        |s| safe.holds(s),
    )
}

/// `γ_obs(s)`: the subset of `obs` satisfied by `s`. Predicates are given
/// as characteristic sets indexed by predicate id.
pub fn gamma_obs(predicates: &[StatePredicate], s: StateId, obs: ObsMask) -> Observation {
    let mut o = 0u64;
    for id in obs.ids() {
        if predicates[id].holds(s) {
            o |= 1 << id;
        }
    }
    Observation(o)
}

/// A finite run: states plus the actions taken between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
}

impl Run {
    pub fn new(states: Vec<StateId>, actions: Vec<ActionId>) -> Run {
        assert!(!states.is_empty());
        assert_eq!(actions.len() + 1, states.len());
        Run { states, actions }
    }

    /// Checks connectivity against an arena.
    pub fn is_valid_in(&self, g: &FiniteLts) -> bool {
        self.states
            .windows(2)
            .zip(&self.actions)
            .all(|(w, &a)| g.successors(w[0], a).contains(&w[1]))
    }
}

/// Stuttering-free projection of a run: the observation sequence with
/// consecutive repeats collapsed.
pub fn stutter_free_projection(
    predicates: &[StatePredicate],
    run: &Run,
    obs: ObsMask,
) -> Vec<Observation> {
    let mut out = Vec::new();
    for &s in &run.states {
        let o = gamma_obs(predicates, s, obs);
        if out.last() != Some(&o) {
            out.push(o);
        }
    }
    out
}

/// All predicate ids referenced by a mask must exist in the catalog.
pub fn check_predicates(predicates: &[StatePredicate], obs: ObsMask) -> bool {
    obs.ids().all(|id| id < predicates.len())
}
