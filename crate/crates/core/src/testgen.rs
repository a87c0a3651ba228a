//! Seeded random model generation for the zone-vs-region cross-check
//! harness. Models stay at oracle scale: one or two clocks, small integer
//! constants, a handful of locations, and no clock-difference guards.

use crate::dbm::{AtomicConstraint, ClockSet, Rel};
use crate::observation::PredId;
use crate::optimizer::SplitMix64;
use crate::tga::{
    validate, Edge, Location, ObservationPredicate, Owner, PredicateCatalog, TgaModel,
};

pub struct RandomModelConfig {
    pub max_locations: usize,
    pub max_clocks: usize,
    pub max_constant: u32,
    pub max_edges: usize,
    pub n_observables: usize,
}

impl Default for RandomModelConfig {
    fn default() -> Self {
        RandomModelConfig {
            max_locations: 4,
            max_clocks: 2,
            max_constant: 3,
            max_edges: 6,
            n_observables: 2,
        }
    }
}

fn random_band(rng: &mut SplitMix64, clock: usize, max_c: u32) -> AtomicConstraint {
    let lo = rng.below(max_c as usize) as u32;
    if rng.below(3) == 0 {
        AtomicConstraint::band(clock, lo, None)
    } else {
        let hi = lo + 1 + rng.below((max_c - lo) as usize) as u32;
        AtomicConstraint::band(clock, lo, Some(hi))
    }
}

fn random_upper(rng: &mut SplitMix64, clock: usize, max_c: u32) -> AtomicConstraint {
    let k = rng.below(max_c as usize + 1) as u32;
    let rel = match rng.below(4) {
        0 => Rel::Lt,
        1 => Rel::Le,
        2 => Rel::Gt,
        _ => Rel::Ge,
    };
    AtomicConstraint::Upper { clock, rel, k }
}

/// One random model plus its predicate catalog. Regenerates until the
/// validation passes, so the caller always gets a well-formed model.
pub fn random_model(seed: u64, cfg: &RandomModelConfig) -> (TgaModel, PredicateCatalog) {
    let mut rng = SplitMix64(seed);
    loop {
        if let Some(pair) = try_generate(&mut rng, cfg) {
            return pair;
        }
    }
}

fn try_generate(
    rng: &mut SplitMix64,
    cfg: &RandomModelConfig,
) -> Option<(TgaModel, PredicateCatalog)> {
    let n_locs = 2 + rng.below(cfg.max_locations - 1);
    let n_clocks = 1 + rng.below(cfg.max_clocks);
    let clocks = ClockSet::new((0..n_clocks).map(|i| format!("x{i}")).collect());

    let mut locations = Vec::new();
    for i in 0..n_locs {
        let mut invariant = Vec::new();
        // upper-band invariant on one clock half the time: forces activity
        if rng.below(2) == 0 {
            let c = 1 + rng.below(n_clocks);
            let hi = 1 + rng.below(cfg.max_constant as usize) as u32;
            invariant.push(AtomicConstraint::band(c, 0, Some(hi)));
        }
        locations.push(Location {
            name: format!("l{i}"),
            invariant,
        });
    }

    let controllable_actions = vec!["c0".to_string()];
    let uncontrollable_actions = vec!["u0".to_string()];
    let n_edges = 2 + rng.below(cfg.max_edges - 1);
    let mut edges = Vec::new();
    for _ in 0..n_edges {
        let source = rng.below(n_locs);
        let target = rng.below(n_locs);
        let controllable = rng.below(2) == 0;
        let mut guard = Vec::new();
        let n_atoms = rng.below(2);
        for _ in 0..=n_atoms {
            let c = 1 + rng.below(n_clocks);
            if controllable {
                guard.push(random_band(rng, c, cfg.max_constant));
            } else {
                guard.push(random_upper(rng, c, cfg.max_constant));
            }
        }
        let mut resets = Vec::new();
        for c in 1..=n_clocks {
            if rng.below(3) == 0 {
                resets.push(c);
            }
        }
        edges.push(Edge {
            source,
            target,
            owner: if controllable {
                Owner::Controllable(0)
            } else {
                Owner::Uncontrollable(0)
            },
            guard,
            resets,
        });
    }

    let mut predicates = Vec::new();
    // safety: a random location subset that includes the initial location
    let mut safe_locs = vec![false; n_locs];
    safe_locs[0] = true;
    for item in safe_locs.iter_mut().skip(1) {
        *item = rng.below(5) < 3;
    }
    predicates.push(ObservationPredicate {
        name: "safe".to_string(),
        locations: safe_locs,
        clock_atoms: Vec::new(),
        cost_millis: 0,
    });
    for p in 0..cfg.n_observables {
        let by_location = rng.below(2) == 0;
        let locations: Vec<bool> = if by_location {
            (0..n_locs).map(|_| rng.below(2) == 0).collect()
        } else {
            vec![true; n_locs]
        };
        let clock_atoms = if by_location {
            Vec::new()
        } else {
            let c = 1 + rng.below(n_clocks);
            vec![random_band(rng, c, cfg.max_constant)]
        };
        predicates.push(ObservationPredicate {
            name: format!("p{p}"),
            locations,
            clock_atoms,
            cost_millis: 1000,
        });
    }

    let model = TgaModel {
        clocks,
        locations,
        initial: 0,
        controllable_actions,
        uncontrollable_actions,
        edges,
    };
    let catalog = PredicateCatalog {
        predicates,
        safety: 0 as PredId,
    };
    validate(&model, &catalog).ok()?;
    Some((model, catalog))
}
