//! Cost-optimal observation-set search.
//!
//! The lattice algorithm iteratively picks an unexplored predicate subset,
//! solves the game for it, and prunes: a win eliminates every candidate at
//! least as expensive, a loss eliminates every subset of the losing set.
//! The resulting exploration trace is non-redundant. With reuse enabled,
//! a subset is solved by building its knowledge game on top of a cached
//! finer game instead of re-exploring the timed model.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::knowledge::{
    build_knowledge_game, nest, solve, BuildOptions, BuildStatus, KnowledgeError, KnowledgeGame,
};
use crate::observation::{ObsMask, PredId};
use crate::region::{OracleError, Region, RegionGame};
use crate::tga::{ModelError, PredicateCatalog, SymbolicState, TgaModel, ZoneGame};

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("predicate catalog has {n} predicates, above the cap of {cap}")]
    TooManyPredicates { n: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Candidate picking order of the lattice search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    CheapFirst,
    ExpensiveFirst,
    Random,
    Midpoint,
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Heuristic::CheapFirst => "cheap-first",
            Heuristic::ExpensiveFirst => "expensive-first",
            Heuristic::Random => "random",
            Heuristic::Midpoint => "midpoint",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Heuristic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cheap-first" => Ok(Heuristic::CheapFirst),
            "expensive-first" => Ok(Heuristic::ExpensiveFirst),
            "random" => Ok(Heuristic::Random),
            "midpoint" => Ok(Heuristic::Midpoint),
            other => Err(format!("unknown heuristic {other}")),
        }
    }
}

/// Which semantics backs a from-scratch solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OraclePath {
    #[default]
    Zone,
    Region,
}

/// Small deterministic PRNG so seeded runs are reproducible across
/// platforms and toolchains.
#[derive(Debug, Clone)]
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// The unexplored subsets: every subset of the available predicates that
/// contains the safety predicate. Stored explicitly; no polynomial
/// implicit next-candidate procedure is to be expected, and the catalog
/// cap keeps the powerset desk-sized.
#[derive(Debug, Clone)]
pub struct CandidateStore {
    members: Vec<ObsMask>,
}

impl CandidateStore {
    pub fn full_lattice(universe: ObsMask, safety: PredId) -> CandidateStore {
        let others: Vec<PredId> = universe.ids().filter(|&id| id != safety).collect();
        let mut members = Vec::with_capacity(1 << others.len());
        for pick in 0u64..(1 << others.len()) {
            let mut m = ObsMask::singleton(safety);
            for (bit, &id) in others.iter().enumerate() {
                if pick >> bit & 1 == 1 {
                    m.insert(id);
                }
            }
            members.push(m);
        }
        CandidateStore { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[ObsMask] {
        &self.members
    }

    /// Applies the post-verdict pruning: after a win every candidate at
    /// least as expensive goes, after a loss every subset goes. The solved
    /// set itself is always covered by its own rule.
    pub fn prune(&mut self, obs: ObsMask, verdict: bool, catalog: &PredicateCatalog) {
        if verdict {
            let bar = catalog.cost_millis(obs);
            self.members.retain(|&c| catalog.cost_millis(c) < bar);
        } else {
            self.members.retain(|&c| !c.is_subset_of(obs));
        }
    }
}

/// Lexicographic order on the sorted predicate-id vectors, the
/// deterministic tie-break for the non-random heuristics.
fn lex_cmp(a: ObsMask, b: ObsMask) -> std::cmp::Ordering {
    a.ids().cmp(b.ids())
}

/// Picks the next candidate according to the heuristic. The store must be
/// non-empty.
pub fn pick_candidate(
    store: &CandidateStore,
    heuristic: Heuristic,
    catalog: &PredicateCatalog,
    rng: &mut SplitMix64,
) -> ObsMask {
    assert!(!store.is_empty(), "pick from empty candidate store");
    let members = store.members();
    match heuristic {
        Heuristic::CheapFirst => members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                catalog
                    .cost_millis(a)
                    .cmp(&catalog.cost_millis(b))
                    .then(lex_cmp(a, b))
            })
            .unwrap(),
        Heuristic::ExpensiveFirst => members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                catalog
                    .cost_millis(b)
                    .cmp(&catalog.cost_millis(a))
                    .then(lex_cmp(a, b))
            })
            .unwrap(),
        Heuristic::Random => members[rng.below(members.len())],
        Heuristic::Midpoint => {
            // maximize the guaranteed elimination count
            members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    midpoint_score(store, b, catalog)
                        .cmp(&midpoint_score(store, a, catalog))
                        .then(lex_cmp(a, b))
                })
                .unwrap()
        }
    }
}

/// `min(|{c : ω(c) ≥ ω(obs)}|, |{c : c ⊆ obs}|)` over the current store.
pub fn midpoint_score(store: &CandidateStore, obs: ObsMask, catalog: &PredicateCatalog) -> usize {
    let cost = catalog.cost_millis(obs);
    let wins = store
        .members()
        .iter()
        .filter(|&&c| catalog.cost_millis(c) >= cost)
        .count();
    let losses = store
        .members()
        .iter()
        .filter(|&&c| c.is_subset_of(obs))
        .count();
    wins.min(losses)
}

/// One solved subset in an exploration trace.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub obs: ObsMask,
    pub verdict: bool,
    pub reused_from: Option<ObsMask>,
    pub beliefs: usize,
    pub arena_states: usize,
    pub duration: Duration,
}

/// The exploration trace plus the optimum it converged to.
#[derive(Debug, Clone, Default)]
pub struct SolutionRecord {
    pub iterations: Vec<IterationRecord>,
}

impl SolutionRecord {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn scratch_constructions(&self) -> usize {
        self.iterations
            .iter()
            .filter(|it| it.reused_from.is_none())
            .count()
    }

    pub fn reused_constructions(&self) -> usize {
        self.iterations
            .iter()
            .filter(|it| it.reused_from.is_some())
            .count()
    }
}

/// Def-style non-redundancy: no queried set is dominated by an earlier
/// win (cost) or an earlier loss (subset inclusion).
pub fn validate_nonredundant(
    seq: &[(ObsMask, bool)],
    catalog: &PredicateCatalog,
) -> bool {
    for i in 0..seq.len() {
        for j in 0..i {
            let (obs_j, r_j) = seq[j];
            let (obs_i, _) = seq[i];
            if r_j {
                if catalog.cost_millis(obs_j) <= catalog.cost_millis(obs_i) {
                    return false;
                }
            } else if obs_i.is_subset_of(obs_j) {
                return false;
            }
        }
    }
    true
}

/// A solved knowledge game kept for nesting, regardless of which arena it
/// was built over.
pub enum SolvedGame {
    Zone(KnowledgeGame<SymbolicState>),
    Region(KnowledgeGame<Region>),
    Nested(KnowledgeGame<usize>),
}

impl SolvedGame {
    pub fn status(&self) -> BuildStatus {
        match self {
            SolvedGame::Zone(g) => g.status,
            SolvedGame::Region(g) => g.status,
            SolvedGame::Nested(g) => g.status,
        }
    }

    pub fn stats(&self) -> (usize, usize) {
        match self {
            SolvedGame::Zone(g) => (g.stats.beliefs, g.stats.arena_states),
            SolvedGame::Region(g) => (g.stats.beliefs, g.stats.arena_states),
            SolvedGame::Nested(g) => (g.stats.beliefs, g.stats.arena_states),
        }
    }

    /// Builds the knowledge game for a coarser set on top of this game.
    pub fn nest_build(
        &self,
        coarse: ObsMask,
        safety: PredId,
        opts: BuildOptions,
    ) -> Result<KnowledgeGame<usize>, KnowledgeError> {
        match self {
            SolvedGame::Zone(g) => build_knowledge_game(&nest(g, coarse)?, safety, opts),
            SolvedGame::Region(g) => build_knowledge_game(&nest(g, coarse)?, safety, opts),
            SolvedGame::Nested(g) => build_knowledge_game(&nest(g, coarse)?, safety, opts),
        }
    }
}

/// Association from solved observation sets to their knowledge games.
/// Only fully-built games are admitted: nesting needs the whole reachable
/// finer game, so early-stopped losing games stay out.
#[derive(Default)]
pub struct ReuseCache {
    entries: Vec<(ObsMask, SolvedGame)>,
    index: HashMap<u64, usize>,
}

impl ReuseCache {
    pub fn insert(&mut self, obs: ObsMask, game: SolvedGame) {
        if game.status() == BuildStatus::PartialLosing {
            return;
        }
        self.index.insert(obs.0, self.entries.len());
        self.entries.push((obs, game));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A cached game for some strict superset of `obs`: the smallest such
    /// superset, ties broken toward the most recent entry.
    pub fn find_reusable(&self, obs: ObsMask) -> Option<(ObsMask, &SolvedGame)> {
        let mut best: Option<(usize, usize)> = None; // (|mask|, entry idx)
        for (i, (mask, _)) in self.entries.iter().enumerate() {
            if *mask != obs && obs.is_subset_of(*mask) {
                let key = (mask.len(), i);
                if best.map_or(true, |(bl, bi)| key.0 < bl || (key.0 == bl && i > bi)) {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, i)| (self.entries[i].0, &self.entries[i].1))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions {
    pub heuristic: Heuristic,
    pub reuse: bool,
    /// Keep early stopping on and exclude partial games from the cache.
    /// When off, every construction runs to completion so that losing
    /// games stay reusable.
    pub reuse_requires_full: bool,
    pub seed: u64,
    pub max_obs: usize,
    pub oracle: OraclePath,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            heuristic: Heuristic::CheapFirst,
            reuse: true,
            reuse_requires_full: true,
            seed: 0,
            max_obs: 16,
            oracle: OraclePath::Zone,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub best: Option<ObsMask>,
    pub best_cost_millis: Option<u64>,
    pub record: SolutionRecord,
}

/// Solves one observation set from scratch over the chosen semantics.
pub fn solve_subset_fresh(
    model: &TgaModel,
    catalog: &PredicateCatalog,
    obs: ObsMask,
    oracle: OraclePath,
    opts: BuildOptions,
) -> Result<(bool, SolvedGame), OptimizeError> {
    match oracle {
        OraclePath::Zone => {
            let game = ZoneGame::new(model, catalog, obs)?;
            let kg = build_knowledge_game(&game, catalog.safety, opts)?;
            let verdict = solve(&kg).winning;
            Ok((verdict, SolvedGame::Zone(kg)))
        }
        OraclePath::Region => {
            let game = RegionGame::new(model, catalog, obs)?;
            let kg = build_knowledge_game(&game, catalog.safety, opts)?;
            let verdict = solve(&kg).winning;
            Ok((verdict, SolvedGame::Region(kg)))
        }
    }
}

/// The lattice search: returns a minimal-cost controllable subset (or
/// `None`) together with the non-redundant exploration trace.
pub fn optimize(
    model: &TgaModel,
    catalog: &PredicateCatalog,
    options: OptimizeOptions,
) -> Result<OptimizeOutcome, OptimizeError> {
    let n = catalog.predicates.len();
    if n > options.max_obs {
        return Err(OptimizeError::TooManyPredicates {
            n,
            cap: options.max_obs,
        });
    }
    let build_opts = BuildOptions {
        early_stop: options.reuse_requires_full,
        exhaustive: false,
    };
    let mut store = CandidateStore::full_lattice(catalog.full_mask(), catalog.safety);
    let mut rng = SplitMix64(options.seed);
    let mut cache = ReuseCache::default();
    let mut best: Option<ObsMask> = None;
    let mut record = SolutionRecord::default();

    while !store.is_empty() {
        let obs = pick_candidate(&store, options.heuristic, catalog, &mut rng);
        let started = Instant::now();
        let mut reused_from = None;
        let (verdict, game) = if options.reuse {
            match cache.find_reusable(obs) {
                Some((fine_mask, fine_game)) => {
                    let kg = fine_game.nest_build(obs, catalog.safety, build_opts)?;
                    let verdict = solve(&kg).winning;
                    reused_from = Some(fine_mask);
                    (verdict, SolvedGame::Nested(kg))
                }
                None => solve_subset_fresh(model, catalog, obs, options.oracle, build_opts)?,
            }
        } else {
            solve_subset_fresh(model, catalog, obs, options.oracle, build_opts)?
        };
        let (beliefs, arena_states) = game.stats();
        record.iterations.push(IterationRecord {
            obs,
            verdict,
            reused_from,
            beliefs,
            arena_states,
            duration: started.elapsed(),
        });
        if options.reuse {
            cache.insert(obs, game);
        }
        if verdict {
            best = Some(obs);
        }
        store.prune(obs, verdict, catalog);
    }

    let best_cost_millis = best.map(|m| catalog.cost_millis(m));
    Ok(OptimizeOutcome {
        best,
        best_cost_millis,
        record,
    })
}

/// Concurrent candidate solving for the no-reuse mode: a batch of
/// candidates is picked up front and solved in parallel, then pruning is
/// applied in batch order. The final best cost matches the sequential
/// search; the trace may differ from it.
pub fn optimize_parallel(
    model: &TgaModel,
    catalog: &PredicateCatalog,
    options: OptimizeOptions,
    jobs: usize,
) -> Result<OptimizeOutcome, OptimizeError> {
    assert!(!options.reuse, "parallel mode requires reuse disabled");
    let n = catalog.predicates.len();
    if n > options.max_obs {
        return Err(OptimizeError::TooManyPredicates {
            n,
            cap: options.max_obs,
        });
    }
    let build_opts = BuildOptions {
        early_stop: options.reuse_requires_full,
        exhaustive: false,
    };
    let mut store = CandidateStore::full_lattice(catalog.full_mask(), catalog.safety);
    let mut rng = SplitMix64(options.seed);
    let mut best: Option<ObsMask> = None;
    let mut record = SolutionRecord::default();

    while !store.is_empty() {
        let mut batch = Vec::new();
        let mut scratch = store.clone();
        for _ in 0..jobs.max(1) {
            if scratch.is_empty() {
                break;
            }
            let obs = pick_candidate(&scratch, options.heuristic, catalog, &mut rng);
            scratch.members.retain(|&c| c != obs);
            batch.push(obs);
        }
        let results: Vec<Result<(bool, SolvedGame, Duration), OptimizeError>> =
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|&obs| {
                        s.spawn(move || {
                            let started = Instant::now();
                            let (v, g) =
                                solve_subset_fresh(model, catalog, obs, options.oracle, build_opts)?;
                            Ok((v, g, started.elapsed()))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
        for (obs, res) in batch.into_iter().zip(results) {
            // a batch member may already be pruned by an earlier verdict
            if !store.members().contains(&obs) {
                continue;
            }
            let (verdict, game, duration) = res?;
            let (beliefs, arena_states) = game.stats();
            record.iterations.push(IterationRecord {
                obs,
                verdict,
                reused_from: None,
                beliefs,
                arena_states,
                duration,
            });
            if verdict {
                best = Some(obs);
            }
            store.prune(obs, verdict, catalog);
        }
    }
    let best_cost_millis = best.map(|m| catalog.cost_millis(m));
    Ok(OptimizeOutcome {
        best,
        best_cost_millis,
        record,
    })
}
