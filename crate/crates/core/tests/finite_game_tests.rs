//! Safety-game solving and observation utilities on explicit arenas,
//! checked against a hand-rolled backward-induction reference.

use minobs_core::finite_game::{
    gamma_obs, solve_safety, stutter_free_projection, FiniteLts, Run, StatePredicate,
};
use minobs_core::observation::ObsMask;
use minobs_core::optimizer::SplitMix64;

/// Independent reference: repeatedly delete states with no action whose
/// successors all survive, starting from the safe set.
fn reference_winning(
    n: usize,
    n_actions: usize,
    succ: &dyn Fn(usize, usize) -> Vec<usize>,
    safe: &dyn Fn(usize) -> bool,
) -> Vec<bool> {
    let mut alive: Vec<bool> = (0..n).map(safe).collect();
    let mut stable = false;
    while !stable {
        stable = true;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let mut witness = false;
            for a in 0..n_actions {
                if succ(s, a).iter().all(|&t| alive[t]) {
                    witness = true;
                    break;
                }
            }
            if !witness {
                alive[s] = false;
                stable = false;
            }
        }
    }
    alive
}

fn random_total_lts(rng: &mut SplitMix64, n: usize, n_actions: usize) -> FiniteLts {
    let successors = (0..n)
        .map(|_| {
            (0..n_actions)
                .map(|_| {
                    let count = 1 + rng.below(2);
                    (0..count).map(|_| rng.below(n)).collect()
                })
                .collect()
        })
        .collect();
    FiniteLts::new(n, n_actions, 0, successors).unwrap()
}

#[test]
fn one_state_game_all_safe() {
    let g = FiniteLts::new(1, 2, 0, vec![vec![vec![0], vec![0]]]).unwrap();
    let safe = StatePredicate::new(vec![true]);
    let sol = solve_safety(&g, &safe);
    assert!(sol.initial_wins(0));
    assert_eq!(sol.strategy[0], Some(0), "lowest action index wins ties");
}

#[test]
fn two_state_game_forced_into_unsafe_sink() {
    // every action from the initial state reaches the unsafe sink
    let g = FiniteLts::new(
        2,
        2,
        0,
        vec![vec![vec![1], vec![0, 1]], vec![vec![1], vec![1]]],
    )
    .unwrap();
    let safe = StatePredicate::new(vec![true, false]);
    let sol = solve_safety(&g, &safe);
    assert!(!sol.initial_wins(0));
}

#[test]
fn five_state_cycle_game_matches_reference() {
    // safe only by looping 0 -> 1 -> 2 -> 0 under action 0; action 1
    // leads toward the trap states 3, 4
    let succ = vec![
        vec![vec![1], vec![3]],
        vec![vec![2], vec![3]],
        vec![vec![0], vec![4]],
        vec![vec![4], vec![4]],
        vec![vec![4], vec![4]],
    ];
    let g = FiniteLts::new(5, 2, 0, succ).unwrap();
    let safe = StatePredicate::new(vec![true, true, true, true, false]);
    let sol = solve_safety(&g, &safe);
    let expect = reference_winning(
        5,
        2,
        &|s, a| g.successors(s, a).to_vec(),
        &|s| safe.holds(s),
    );
    assert_eq!(sol.winning, expect);
    assert!(sol.initial_wins(0));
    assert!(!sol.winning[3], "state 3 is doomed despite being safe");
}

#[test]
fn totality_validated_eagerly() {
    let err = FiniteLts::new(2, 1, 0, vec![vec![vec![1]], vec![vec![]]]).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("not total"), "{msg}");
}

#[test]
fn random_sweep_matches_reference_fixpoint() {
    let mut rng = SplitMix64(101);
    for _ in 0..600 {
        let n = 2 + rng.below(7); // up to 8 states
        let n_actions = 1 + rng.below(3);
        let g = random_total_lts(&mut rng, n, n_actions);
        let safe_vec: Vec<bool> = (0..n).map(|_| rng.below(4) != 0).collect();
        let safe = StatePredicate::new(safe_vec.clone());
        let sol = solve_safety(&g, &safe);
        let expect = reference_winning(
            n,
            n_actions,
            &|s, a| g.successors(s, a).to_vec(),
            &|s| safe_vec[s],
        );
        assert_eq!(sol.winning, expect);
    }
}

#[test]
fn strategy_closure_under_adversarial_choice() {
    let mut rng = SplitMix64(103);
    for _ in 0..300 {
        let n = 2 + rng.below(7);
        let n_actions = 1 + rng.below(3);
        let g = random_total_lts(&mut rng, n, n_actions);
        let safe_vec: Vec<bool> = (0..n).map(|_| rng.below(3) != 0).collect();
        let safe = StatePredicate::new(safe_vec.clone());
        let sol = solve_safety(&g, &safe);
        // from every winning state, every successor under the strategy
        // action stays winning and safe
        for s in 0..n {
            if !sol.winning[s] {
                continue;
            }
            assert!(safe_vec[s]);
            let a = sol.strategy[s].expect("winning state has a strategy");
            for &t in g.successors(s, a) {
                assert!(sol.winning[t], "strategy escaped the winning set");
            }
        }
    }
}

#[test]
fn gamma_obs_examples() {
    let predicates = vec![
        StatePredicate::new(vec![true, false, true, false]),
        StatePredicate::new(vec![true, true, false, false]),
    ];
    // no observed predicates: the empty observation
    assert_eq!(gamma_obs(&predicates, 0, ObsMask::EMPTY).0, 0);
    // a single observed predicate that holds
    let only_first = ObsMask::singleton(0);
    assert_eq!(gamma_obs(&predicates, 0, only_first).0, 1);
    assert_eq!(gamma_obs(&predicates, 1, only_first).0, 0);
    // full table on a 4-state arena with 2 predicates
    let both = ObsMask::from_ids([0, 1]);
    let table: Vec<u64> = (0..4).map(|s| gamma_obs(&predicates, s, both).0).collect();
    assert_eq!(table, vec![0b11, 0b10, 0b01, 0b00]);
}

#[test]
fn stutter_free_projection_examples() {
    let p = vec![StatePredicate::new(vec![false, false, true, true, false])];
    let obs = ObsMask::singleton(0);

    // a singleton run projects to its single observation
    let r = Run::new(vec![0], vec![]);
    assert_eq!(stutter_free_projection(&p, &r, obs).len(), 1);

    // constant observation collapses to length one
    let r = Run::new(vec![0, 1, 0, 1, 0], vec![0, 0, 0, 0]);
    assert_eq!(stutter_free_projection(&p, &r, obs).len(), 1);

    // alternating observations o1 o1 o2 o2 o1 collapse to o1 o2 o1
    let r = Run::new(vec![0, 1, 2, 3, 4], vec![0, 0, 0, 0]);
    let proj = stutter_free_projection(&p, &r, obs);
    assert_eq!(proj.len(), 3);
    assert_eq!(proj[0].0, 0);
    assert_eq!(proj[1].0, 1);
    assert_eq!(proj[2].0, 0);

    // projecting an already-alternating run changes nothing
    let r = Run::new(vec![0, 2, 0], vec![0, 0]);
    let proj = stutter_free_projection(&p, &r, obs);
    assert_eq!(proj.len(), 3);
}

#[test]
fn run_validity() {
    let g = FiniteLts::new(2, 1, 0, vec![vec![vec![1]], vec![vec![0]]]).unwrap();
    assert!(Run::new(vec![0, 1, 0], vec![0, 0]).is_valid_in(&g));
    assert!(!Run::new(vec![0, 0], vec![0]).is_valid_in(&g));
}
