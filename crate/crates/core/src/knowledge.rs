//! Knowledge-game construction over any observable arena, and solving.
//!
//! The construction turns a game of imperfect information into a
//! perfect-information safety game over beliefs: sets of arena states the
//! controller considers possible. A belief transition under action `a`
//! aggregates every run made of invisible `a`-steps followed by one
//! visible `a`-step, split by the observation of the endpoint; a
//! divergence self-loop is added when the arena can evolve forever inside
//! the current observation.
//!
//! Knowledge games built here can themselves be exposed as observable
//! arenas ([`NestedGame`]), so a game for a coarser predicate set can be
//! built on top of an already-solved finer game instead of re-exploring
//! the underlying model.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet, VecDeque};

use crate::finite_game::{ActionId, FiniteLts, StatePredicate};
use crate::observation::{ObsMask, Observation, PredId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnowledgeError {
    #[error("safety predicate {0} is not among the observed predicates")]
    SafetyNotObservable(PredId),
    #[error("predicate set {coarse} is not a subset of the finer set {fine}")]
    NotCoarser { coarse: ObsMask, fine: ObsMask },
}

/// How a single arena step is delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Time elapses; never instantaneous.
    Delay,
    /// An environment (or untimed) discrete step; instantaneous.
    Discrete,
    /// A controllable action occurrence. Always ends the controller's
    /// round: the controller observes its own moves.
    Fire,
}

/// One arena transition as seen by the knowledge construction.
#[derive(Debug, Clone)]
pub struct Step<S> {
    pub to: S,
    pub visible: bool,
    pub kind: StepKind,
    /// Whether this step can occur with zero elapsed time. Untimed arenas
    /// leave it false so time-progress filtering never applies to them.
    pub zero_time: bool,
}

/// Invisible-step edge inside a saturation closure, by closure index.
pub type InvEdge = (usize, usize, StepKind);

/// An arena a knowledge game can be built over.
pub trait ObservableGame {
    type State: Clone + Eq + Ord + std::hash::Hash;

    fn initial(&self) -> Self::State;
    fn n_actions(&self) -> usize;
    fn obs_mask(&self) -> ObsMask;
    fn observe(&self, s: &Self::State) -> Observation;
    fn step(&self, s: &Self::State, a: ActionId) -> Vec<Step<Self::State>>;

    /// Divergence inside the current observation: can the arena evolve
    /// forever under `a` without the observation changing? `closure` is
    /// the invisible saturation of the queried belief and `edges` its
    /// invisible step graph.
    ///
    /// The default rule is the finite-arena one: some reachable cycle. A
    /// cycle made only of delay steps between distinct states cannot
    /// exist in a sane timed arena, so those are not counted; a delay
    /// self-loop is genuine divergence (time can elapse forever).
    fn diverges(&self, closure: &[Self::State], edges: &[InvEdge], _a: ActionId) -> bool {
        invisible_cycle(closure.len(), edges)
    }

    /// Canonical member list of a belief. Symbolic arenas additionally
    /// drop subsumed members.
    fn canonicalize_belief(&self, mut members: Vec<Self::State>) -> Vec<Self::State> {
        members.sort();
        members.dedup();
        members
    }
}

/// Cycle detection for the default divergence rule: any SCC with an
/// internal non-delay edge, or any self-loop.
pub fn invisible_cycle(n: usize, edges: &[InvEdge]) -> bool {
    if edges.iter().any(|&(u, v, _)| u == v) {
        return true;
    }
    let sccs = tarjan_sccs(n, edges.iter().map(|&(u, v, _)| (u, v)));
    let mut comp = vec![0usize; n];
    for (i, scc) in sccs.iter().enumerate() {
        for &v in scc {
            comp[v] = i;
        }
    }
    let mut big = vec![false; sccs.len()];
    for scc in &sccs {
        if scc.len() > 1 {
            big[comp[scc[0]]] = true;
        }
    }
    edges
        .iter()
        .any(|&(u, v, kind)| comp[u] == comp[v] && big[comp[u]] && kind != StepKind::Delay)
}

fn tarjan_sccs(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[u].push(v);
    }
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0usize;
    let mut out = Vec::new();
    // iterative Tarjan
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei == 0 {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *ei < adj[v].len() {
                let w = adj[v][*ei];
                *ei += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut scc = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        scc.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(scc);
                }
                call.pop();
                if let Some(&mut (u, _)) = call.last_mut() {
                    low[u] = low[u].min(low[v]);
                }
            }
        }
    }
    out
}

/// A belief: canonical set of arena states sharing one observation.
pub type Belief<S> = Vec<S>;

/// Aggregated knowledge-game transition. The four flags record which
/// delivery modes exist among the witnessing runs: with or without
/// elapsed time, ending in a controller fire or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KEdge {
    pub to: usize,
    pub zero_fire: bool,
    pub zero_other: bool,
    pub slow_fire: bool,
    pub slow_other: bool,
}

impl KEdge {
    fn new(to: usize) -> KEdge {
        KEdge {
            to,
            zero_fire: false,
            zero_other: false,
            slow_fire: false,
            slow_other: false,
        }
    }

    pub fn has_fire(&self) -> bool {
        self.zero_fire || self.slow_fire
    }

    pub fn has_other(&self) -> bool {
        self.zero_other || self.slow_other
    }

    pub fn can_be_zero(&self) -> bool {
        self.zero_fire || self.zero_other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildStatus {
    /// Every safe reachable belief is expanded.
    Complete,
    /// Construction stopped early once the initial belief proved losing.
    PartialLosing,
    /// Every reachable belief is expanded, safe or not (full Def-4
    /// fragment; required by structural tests).
    Exhaustive,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildStats {
    pub beliefs: usize,
    /// Distinct arena states occurring across all beliefs.
    pub arena_states: usize,
}

/// Finite perfect-information safety game over beliefs.
#[derive(Debug, Clone)]
pub struct KnowledgeGame<S> {
    pub beliefs: Vec<Belief<S>>,
    pub observations: Vec<Observation>,
    pub safe: Vec<bool>,
    pub n_actions: usize,
    pub obs_mask: ObsMask,
    pub safety: PredId,
    /// edges\[belief\]\[action\]
    pub edges: Vec<Vec<Vec<KEdge>>>,
    pub status: BuildStatus,
    pub stats: BuildStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Stop construction once the initial belief is known losing, and do
    /// not expand unsafe beliefs (their transitions cannot change any
    /// verdict).
    pub early_stop: bool,
    /// Expand unsafe beliefs too, yielding the exact reachable Def-4
    /// fragment. Structural sweeps need this; verdicts do not.
    pub exhaustive: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            early_stop: true,
            exhaustive: false,
        }
    }
}

/// Invisible saturation of a belief under one action: every state
/// reachable by invisible `a`-steps, the visible exits, and the invisible
/// step graph.
struct Saturation<S> {
    closure: Vec<S>,
    inv_edges: Vec<InvEdge>,
    /// (target, via_fire, zero_time over the whole chain)
    exits: Vec<(S, bool, bool)>,
}

fn saturate<G: ObservableGame>(g: &G, members: &[G::State], a: ActionId) -> Saturation<G::State> {
    let mut idx: HashMap<G::State, usize> = HashMap::new();
    let mut closure: Vec<G::State> = Vec::new();
    let mut zero_reach: Vec<bool> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for m in members {
        if let Entry::Vacant(e) = idx.entry(m.clone()) {
            e.insert(closure.len());
            closure.push(m.clone());
            zero_reach.push(true);
            queue.push_back(closure.len() - 1);
        }
    }
    let mut inv_edges: Vec<InvEdge> = Vec::new();
    let mut exits: Vec<(G::State, bool, bool)> = Vec::new();
    let mut seen_exits: HashSet<(G::State, bool, bool)> = HashSet::new();
    let mut pops = 0u64;
    let t0 = std::time::Instant::now();
    while let Some(i) = queue.pop_front() {
        pops += 1;
        if pops % 200 == 0 && std::env::var_os("MINOBS_TRACE_BUILD").is_some() {
            eprintln!(
                "saturate: {} pops, closure {}, queue {}, {:?}",
                pops,
                closure.len(),
                queue.len(),
                t0.elapsed()
            );
        }
        let s = closure[i].clone();
        let s_zero = zero_reach[i];
        for st in g.step(&s, a) {
            if st.visible {
                let exit = (st.to, st.kind == StepKind::Fire, s_zero && st.zero_time);
                if seen_exits.insert(exit.clone()) {
                    exits.push(exit);
                }
                continue;
            }
            debug_assert_eq!(
                g.observe(&st.to),
                g.observe(&s),
                "invisible step changed the observation"
            );
            let chain_zero = s_zero && st.zero_time;
            let j = match idx.entry(st.to.clone()) {
                Entry::Occupied(e) => {
                    let j = *e.get();
                    if chain_zero && !zero_reach[j] {
                        zero_reach[j] = true;
                        queue.push_back(j); // re-propagate the zero flag
                    }
                    j
                }
                Entry::Vacant(e) => {
                    let j = closure.len();
                    e.insert(j);
                    closure.push(st.to.clone());
                    zero_reach.push(chain_zero);
                    queue.push_back(j);
                    j
                }
            };
            if i != j || st.kind != StepKind::Delay {
                inv_edges.push((i, j, st.kind));
            }
        }
    }
    inv_edges.sort_unstable_by_key(|&(u, v, _)| (u, v));
    inv_edges.dedup();
    Saturation {
        closure,
        inv_edges,
        exits,
    }
}

/// `Post_obs(v, a)`: states reachable from `v` by a finite chain of
/// invisible `a`-steps followed by one visible `a`-step.
pub fn post_obs<G: ObservableGame>(
    g: &G,
    v: &[G::State],
    a: ActionId,
) -> Vec<G::State> {
    let sat = saturate(g, v, a);
    let mut out: Vec<G::State> = sat.exits.into_iter().map(|(s, _, _)| s).collect();
    out.sort();
    out.dedup();
    out
}

/// `Sink_obs(v, a)`: the game can evolve forever under `a` without the
/// observation changing.
pub fn sink_obs<G: ObservableGame>(g: &G, v: &[G::State], a: ActionId) -> bool {
    let sat = saturate(g, v, a);
    g.diverges(&sat.closure, &sat.inv_edges, a)
}

/// Builds the reachable fragment of the knowledge game for `(g, safety)`.
pub fn build_knowledge_game<G: ObservableGame>(
    g: &G,
    safety: PredId,
    opts: BuildOptions,
) -> Result<KnowledgeGame<G::State>, KnowledgeError> {
    if !g.obs_mask().contains(safety) {
        return Err(KnowledgeError::SafetyNotObservable(safety));
    }
    let n_actions = g.n_actions();

    let mut beliefs: Vec<Belief<G::State>> = Vec::new();
    let mut observations: Vec<Observation> = Vec::new();
    let mut safe: Vec<bool> = Vec::new();
    let mut edges: Vec<Vec<Vec<KEdge>>> = Vec::new();
    let mut expanded: Vec<bool> = Vec::new();
    let mut losing: Vec<bool> = Vec::new();
    let mut preds: Vec<Vec<(usize, ActionId)>> = Vec::new();
    let mut belief_ids: HashMap<Belief<G::State>, usize> = HashMap::new();

    let mut intern = |members: Belief<G::State>,
                      beliefs: &mut Vec<Belief<G::State>>,
                      observations: &mut Vec<Observation>,
                      safe: &mut Vec<bool>,
                      edges: &mut Vec<Vec<Vec<KEdge>>>,
                      expanded: &mut Vec<bool>,
                      losing: &mut Vec<bool>,
                      preds: &mut Vec<Vec<(usize, ActionId)>>|
     -> usize {
        debug_assert!(!members.is_empty());
        match belief_ids.entry(members) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = beliefs.len();
                let members = e.key().clone();
                let obs = g.observe(&members[0]);
                debug_assert!(
                    members.iter().all(|m| g.observe(m) == obs),
                    "belief is not observation-homogeneous"
                );
                e.insert(id);
                beliefs.push(members);
                observations.push(obs);
                safe.push(obs.contains(safety));
                edges.push(vec![Vec::new(); n_actions]);
                expanded.push(false);
                losing.push(!obs.contains(safety));
                preds.push(Vec::new());
                id
            }
        }
    };

    let init_members = g.canonicalize_belief(vec![g.initial()]);
    let init = intern(
        init_members,
        &mut beliefs,
        &mut observations,
        &mut safe,
        &mut edges,
        &mut expanded,
        &mut losing,
        &mut preds,
    );
    debug_assert_eq!(init, 0);

    let mut worklist: VecDeque<usize> = VecDeque::new();
    worklist.push_back(init);
    let mut losing_queue: VecDeque<usize> = VecDeque::new();
    if losing[init] {
        losing_queue.push_back(init);
    }

    let halted = 'build: loop {
        // propagate losing states before picking more work
        while let Some(w) = losing_queue.pop_front() {
            if opts.early_stop && w == init {
                break 'build true;
            }
            for &(u, _) in &preds[w] {
                if losing[u] || !expanded[u] {
                    continue;
                }
                // the opponent resolves nondeterminism: one losing
                // successor per action dooms the belief
                let doomed = (0..n_actions).all(|a| {
                    let es = &edges[u][a];
                    !es.is_empty() && es.iter().any(|e| losing[e.to])
                });
                if doomed {
                    losing[u] = true;
                    losing_queue.push_back(u);
                }
            }
        }

        let v = match worklist.pop_front() {
            Some(v) => v,
            None => break false,
        };
        if expanded[v] {
            continue;
        }
        if !opts.exhaustive && !safe[v] {
            // transitions out of an unsafe belief cannot change any verdict
            expanded[v] = true;
            continue;
        }
        expanded[v] = true;

        for a in 0..n_actions {
            let sat = saturate(g, &beliefs[v], a);
            // group visible exits by observation
            let mut groups: HashMap<Observation, Vec<(G::State, bool, bool)>> = HashMap::new();
            for exit in sat.exits {
                groups.entry(g.observe(&exit.0)).or_default().push(exit);
            }
            let mut group_list: Vec<(Observation, Vec<(G::State, bool, bool)>)> =
                groups.into_iter().collect();
            group_list.sort_by_key(|(o, _)| *o);
            for (_, exits) in group_list {
                let members =
                    g.canonicalize_belief(exits.iter().map(|(s, _, _)| s.clone()).collect());
                let w = intern(
                    members,
                    &mut beliefs,
                    &mut observations,
                    &mut safe,
                    &mut edges,
                    &mut expanded,
                    &mut losing,
                    &mut preds,
                );
                let mut edge = KEdge::new(w);
                for (_, fire, zero) in &exits {
                    match (zero, fire) {
                        (true, true) => edge.zero_fire = true,
                        (true, false) => edge.zero_other = true,
                        (false, true) => edge.slow_fire = true,
                        (false, false) => edge.slow_other = true,
                    }
                }
                edges[v][a].push(edge);
                preds[w].push((v, a));
                if !expanded[w] {
                    worklist.push_back(w);
                }
                if losing[w] {
                    losing_queue.push_back(w);
                }
            }
            if g.diverges(&sat.closure, &sat.inv_edges, a) {
                let mut edge = KEdge::new(v);
                edge.slow_other = true;
                edges[v][a].push(edge);
                preds[v].push((v, a));
            }
        }

        // the freshly expanded belief may itself be doomed already
        if !losing[v]
            && (0..n_actions).all(|a| {
                let es = &edges[v][a];
                !es.is_empty() && es.iter().any(|e| losing[e.to])
            })
        {
            losing[v] = true;
            losing_queue.push_back(v);
        }
    };

    let mut distinct: HashSet<&G::State> = HashSet::new();
    for b in &beliefs {
        distinct.extend(b.iter());
    }
    let stats = BuildStats {
        beliefs: beliefs.len(),
        arena_states: distinct.len(),
    };
    drop(distinct);

    let status = if halted {
        BuildStatus::PartialLosing
    } else if opts.exhaustive {
        BuildStatus::Exhaustive
    } else {
        BuildStatus::Complete
    };
    Ok(KnowledgeGame {
        beliefs,
        observations,
        safe,
        n_actions,
        obs_mask: g.obs_mask(),
        safety,
        edges,
        status,
        stats,
    })
}

/// Result of solving a knowledge game.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub winning: bool,
    pub winning_set: Vec<bool>,
    pub strategy: Vec<Option<ActionId>>,
}

/// Solves the safety game over beliefs.
///
/// On top of the plain greatest fixpoint this excludes strategies that
/// freeze time: if the chosen actions admit a cycle traversable with zero
/// elapsed time that contains a controller fire, those choices are banned
/// and the fixpoint re-run. Infinite behaviour is only winning when time
/// can actually diverge (or the environment alone loops, which the sink
/// construction already covers).
pub fn solve<S: Clone + Eq + Ord + std::hash::Hash>(kg: &KnowledgeGame<S>) -> SolveResult {
    let n = kg.beliefs.len();
    if kg.status == BuildStatus::PartialLosing {
        return SolveResult {
            winning: false,
            winning_set: vec![false; n],
            strategy: vec![None; n],
        };
    }
    let mut banned: HashSet<(usize, ActionId)> = HashSet::new();
    loop {
        // greatest fixpoint under the current bans
        let mut winning: Vec<bool> = kg.safe.clone();
        loop {
            let mut changed = false;
            for v in 0..n {
                if !winning[v] {
                    continue;
                }
                let ok = (0..kg.n_actions).any(|a| {
                    !banned.contains(&(v, a))
                        && kg.edges[v][a].iter().all(|e| winning[e.to])
                });
                if !ok {
                    winning[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let strategy: Vec<Option<ActionId>> = (0..n)
            .map(|v| {
                if !winning[v] {
                    return None;
                }
                (0..kg.n_actions).find(|&a| {
                    !banned.contains(&(v, a))
                        && kg.edges[v][a].iter().all(|e| winning[e.to])
                })
            })
            .collect();

        // time-progress check on the chosen strategy: find cycles the
        // opponent can keep at zero elapsed time that contain a fire
        let mut zero_edges: Vec<(usize, usize)> = Vec::new();
        let mut fire_edges: HashSet<(usize, usize)> = HashSet::new();
        for v in 0..n {
            if let Some(a) = strategy[v] {
                for e in &kg.edges[v][a] {
                    if e.can_be_zero() {
                        zero_edges.push((v, e.to));
                        if e.zero_fire {
                            fire_edges.insert((v, e.to));
                        }
                    }
                }
            }
        }
        let sccs = tarjan_sccs(n, zero_edges.iter().copied());
        let mut comp = vec![usize::MAX; n];
        for (i, scc) in sccs.iter().enumerate() {
            for &v in scc {
                comp[v] = i;
            }
        }
        let mut scc_size = vec![0usize; sccs.len()];
        for scc in &sccs {
            scc_size[comp[scc[0]]] = scc.len();
        }
        let mut zeno: Vec<usize> = Vec::new();
        for &(u, v) in &fire_edges {
            if comp[u] == comp[v] && (scc_size[comp[u]] > 1 || u == v) {
                zeno.push(comp[u]);
            }
        }
        if zeno.is_empty() {
            return SolveResult {
                winning: winning[0],
                winning_set: winning,
                strategy,
            };
        }
        for v in 0..n {
            if comp[v] != usize::MAX && zeno.contains(&comp[v]) {
                if let Some(a) = strategy[v] {
                    banned.insert((v, a));
                }
            }
        }
    }
}

/// A solved knowledge game exposed as an observable arena for a coarser
/// predicate set: the nesting construction.
pub struct NestedGame<'a, S> {
    kg: &'a KnowledgeGame<S>,
    coarse: ObsMask,
}

/// Views `kg` as an arena observed through `coarse ⊂ kg.obs_mask`.
pub fn nest<S>(kg: &KnowledgeGame<S>, coarse: ObsMask) -> Result<NestedGame<'_, S>, KnowledgeError> {
    if !coarse.is_subset_of(kg.obs_mask) {
        return Err(KnowledgeError::NotCoarser {
            coarse,
            fine: kg.obs_mask,
        });
    }
    if !coarse.contains(kg.safety) {
        return Err(KnowledgeError::SafetyNotObservable(kg.safety));
    }
    Ok(NestedGame { kg, coarse })
}

impl<S: Clone + Eq + Ord + std::hash::Hash> ObservableGame for NestedGame<'_, S> {
    type State = usize;

    fn initial(&self) -> usize {
        0
    }

    fn n_actions(&self) -> usize {
        self.kg.n_actions
    }

    fn obs_mask(&self) -> ObsMask {
        self.coarse
    }

    fn observe(&self, s: &usize) -> Observation {
        self.kg.observations[*s].restrict(self.coarse)
    }

    fn step(&self, s: &usize, a: ActionId) -> Vec<Step<usize>> {
        let mut out = Vec::new();
        let here = self.observe(s);
        for e in &self.kg.edges[*s][a] {
            if e.has_fire() {
                out.push(Step {
                    to: e.to,
                    visible: true,
                    kind: StepKind::Fire,
                    zero_time: e.zero_fire,
                });
            }
            if e.has_other() {
                out.push(Step {
                    to: e.to,
                    visible: self.observe(&e.to) != here,
                    kind: StepKind::Discrete,
                    zero_time: e.zero_other,
                });
            }
        }
        out
    }
}

/// Wrapper exposing an explicit finite arena as an observable game.
pub struct FiniteObservableGame<'a> {
    pub lts: &'a FiniteLts,
    pub predicates: &'a [StatePredicate],
    pub obs: ObsMask,
}

impl ObservableGame for FiniteObservableGame<'_> {
    type State = usize;

    fn initial(&self) -> usize {
        self.lts.initial()
    }

    fn n_actions(&self) -> usize {
        self.lts.n_actions()
    }

    fn obs_mask(&self) -> ObsMask {
        self.obs
    }

    fn observe(&self, s: &usize) -> Observation {
        crate::finite_game::gamma_obs(self.predicates, *s, self.obs)
    }

    fn step(&self, s: &usize, a: ActionId) -> Vec<Step<usize>> {
        let here = self.observe(s);
        self.lts
            .successors(*s, a)
            .iter()
            .map(|&t| Step {
                to: t,
                visible: self.observe(&t) != here,
                kind: StepKind::Discrete,
                zero_time: false,
            })
            .collect()
    }
}
