//! Zone-algebra property suite: every operation is checked pointwise
//! against an independent constraint-system oracle on a rational grid
//! with denominator `|X|+1`.

mod support;

use minobs_core::bounds::{self, Raw, INF};
use minobs_core::cells::{enumerate_cells, CellSpace};
use minobs_core::dbm::{AtomicConstraint, Dbm, Rel};
use minobs_core::optimizer::SplitMix64;
use support::{all_pairs_tightest, grid, point_satisfies, satisfiable, Constraint, OBound};

const MAXC: i64 = 4;

/// A constraint whose constant is either an integer (scaled by the grid
/// denominator) or already a numerator over it.
#[derive(Clone, Copy)]
struct Tagged {
    i: usize,
    j: usize,
    b: OBound,
    numerator: bool,
}

fn scale(cons: &[Tagged], den: i64) -> Vec<Constraint> {
    cons.iter()
        .map(|c| {
            let m = if c.numerator { c.b.m } else { c.b.m * den };
            (c.i, c.j, OBound { m, strict: c.b.strict })
        })
        .collect()
}

/// Constraints of a DBM in oracle form (variable 0 is the reference).
fn dbm_constraints(d: &Dbm) -> Vec<Tagged> {
    let mut out = Vec::new();
    for i in 0..d.dim() {
        for j in 0..d.dim() {
            if i == j {
                continue;
            }
            let e = d.entry(i, j);
            if e != INF {
                out.push(Tagged {
                    i,
                    j,
                    b: OBound {
                        m: bounds::constant(e) as i64,
                        strict: !bounds::is_weak(e),
                    },
                    numerator: false,
                });
            }
        }
    }
    out
}

fn random_raw(rng: &mut SplitMix64) -> Raw {
    let m = rng.below(2 * MAXC as usize + 1) as i32 - MAXC as i32;
    bounds::bound(m, rng.below(2) == 0)
}

/// A random canonical non-empty zone built by tightening the universe.
fn random_zone(rng: &mut SplitMix64, n_clocks: usize) -> Dbm {
    loop {
        let mut z = Dbm::universe(n_clocks);
        let mut ok = true;
        for _ in 0..rng.below(5) + 1 {
            let i = rng.below(n_clocks + 1);
            let j = rng.below(n_clocks + 1);
            if i == j {
                continue;
            }
            match z.tighten(i, j, random_raw(rng)) {
                Some(t) => z = t,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return z;
        }
    }
}

/// Grid numerators over `den` for `n` clocks plus the zero reference in
/// front; values range over `[0, max]`.
fn grid_points(n: usize, max: i64) -> Vec<Vec<i64>> {
    let den = n as i64 + 1;
    grid(n, max, den)
        .into_iter()
        .map(|p| {
            let mut v = vec![0i64];
            v.extend(p.into_iter().map(|r| r.num));
            v
        })
        .collect()
}

fn member(d: &Dbm, scaled_point: &[i64], den: i64) -> bool {
    point_satisfies(scaled_point, &scale(&dbm_constraints(d), den))
}

#[test]
fn canonicalize_trivial_examples() {
    // the point zone {x=0, y=0} is already closed
    let z = Dbm::zero(2);
    let again = Dbm::canonicalize(
        3,
        (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| z.entry(i, j))
            .collect(),
    )
    .unwrap();
    assert_eq!(z, again);

    // x <= 2 together with x >= 3 is empty
    let mut entries = vec![INF; 4];
    entries[0] = bounds::le(0);
    entries[3] = bounds::le(0);
    entries[1] = bounds::le(-3); // 0 - x <= -3
    entries[2] = bounds::le(2); // x - 0 <= 2
    assert!(Dbm::canonicalize(2, entries).is_none());
}

#[test]
fn canonicalize_matches_shortest_path_oracle() {
    let mut rng = SplitMix64(11);
    for _ in 0..400 {
        let n = 3;
        let dim = n + 1;
        let mut entries = vec![INF; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = bounds::le(0);
            entries[i] = bounds::le(0);
        }
        for _ in 0..rng.below(7) {
            let i = rng.below(dim);
            let j = rng.below(dim);
            if i != j {
                entries[i * dim + j] = random_raw(&mut rng);
            }
        }
        let mut cons: Vec<Constraint> = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if i != j && entries[i * dim + j] != INF {
                    let e = entries[i * dim + j];
                    cons.push((
                        i,
                        j,
                        OBound {
                            m: bounds::constant(e) as i64,
                            strict: !bounds::is_weak(e),
                        },
                    ));
                }
            }
        }
        let closed = Dbm::canonicalize(dim, entries);
        let reference = all_pairs_tightest(dim, &cons);
        match (closed, reference) {
            (None, None) => {}
            (Some(z), Some(tightest)) => {
                for i in 0..dim {
                    for j in 0..dim {
                        if i == j {
                            continue;
                        }
                        let got = z.entry(i, j);
                        match tightest[i][j] {
                            None => assert_eq!(got, INF, "({i},{j}) should be unbounded"),
                            Some(b) => {
                                assert_ne!(got, INF);
                                assert_eq!(bounds::constant(got) as i64, b.m, "({i},{j})");
                                assert_eq!(!bounds::is_weak(got), b.strict, "({i},{j})");
                            }
                        }
                    }
                }
            }
            (a, b) => panic!(
                "emptiness disagreement: impl empty={} oracle empty={}",
                a.is_none(),
                b.is_none()
            ),
        }
    }
}

#[test]
fn canonicalize_idempotent() {
    let mut rng = SplitMix64(3);
    for _ in 0..200 {
        let z = random_zone(&mut rng, 3);
        let dim = z.dim();
        let entries = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| z.entry(i, j))
            .collect();
        assert_eq!(Dbm::canonicalize(dim, entries).unwrap(), z);
    }
}

#[test]
fn up_examples_and_oracle() {
    // {x=0,y=0} delayed: the diagonal x = y, x >= 0
    let z = Dbm::zero(2).up();
    assert!(z.contains_point(&[1.5, 1.5]));
    assert!(!z.contains_point(&[1.0, 0.5]));

    // {1<=x<=2, y=0} delayed: x - y in [1,2], x >= 1, y >= 0
    let base = Dbm::from_conjunction(
        2,
        &[
            AtomicConstraint::Upper { clock: 1, rel: Rel::Ge, k: 1 },
            AtomicConstraint::Upper { clock: 1, rel: Rel::Le, k: 2 },
            AtomicConstraint::Upper { clock: 2, rel: Rel::Eq, k: 0 },
        ],
    )
    .unwrap();
    let up = base.up();
    assert!(up.contains_point(&[2.5, 1.0]));
    assert!(!up.contains_point(&[2.5, 0.2]));
    assert!(!up.contains_point(&[0.5, 0.0]));

    // pointwise: v ∈ up(Z) iff some v - t·1 lies in Z
    let mut rng = SplitMix64(17);
    for _ in 0..300 {
        let n = 2;
        let den = n as i64 + 1;
        let z = random_zone(&mut rng, n);
        let u = z.up();
        let zc = dbm_constraints(&z);
        for p in grid_points(n, MAXC + 1) {
            let tv = n + 1; // variable carrying -t
            let mut cons = zc.clone();
            for i in 1..=n {
                // x_i - (-t) = v_i
                cons.push(Tagged { i, j: tv, b: OBound::weak(p[i]), numerator: true });
                cons.push(Tagged { i: tv, j: i, b: OBound::weak(-p[i]), numerator: true });
            }
            // -t <= 0
            cons.push(Tagged { i: tv, j: 0, b: OBound::weak(0), numerator: true });
            let expect = satisfiable(n + 2, &scale(&cons, den));
            let got = member(&u, &p, den);
            assert_eq!(got, expect, "up membership at {p:?} for {z:?}");
        }
    }
}

#[test]
fn reset_examples_and_oracle() {
    // reset({x=3, y=1}, {x}) = {x=0, y=1}
    let z = Dbm::from_conjunction(
        2,
        &[
            AtomicConstraint::Upper { clock: 1, rel: Rel::Eq, k: 3 },
            AtomicConstraint::Upper { clock: 2, rel: Rel::Eq, k: 1 },
        ],
    )
    .unwrap();
    let r = z.reset(&[1]);
    assert!(r.contains_point(&[0.0, 1.0]));
    assert!(!r.contains_point(&[3.0, 1.0]));

    // reset with the empty set is the identity
    let mut rng = SplitMix64(23);
    for _ in 0..50 {
        let z = random_zone(&mut rng, 2);
        assert_eq!(z.reset(&[]), z);
    }

    // pointwise: v ∈ reset(Z, Y) iff v_Y = 0 and some Z-point agrees
    // with v outside Y
    for _ in 0..300 {
        let n = 2;
        let den = n as i64 + 1;
        let z = random_zone(&mut rng, n);
        let ys = match rng.below(3) {
            0 => vec![1],
            1 => vec![2],
            _ => vec![1, 2],
        };
        let r = z.reset(&ys);
        let zc = dbm_constraints(&z);
        for p in grid_points(n, MAXC + 1) {
            let mut expect = ys.iter().all(|&y| p[y] == 0);
            if expect {
                let mut cons = zc.clone();
                for i in 1..=n {
                    if !ys.contains(&i) {
                        cons.push(Tagged { i, j: 0, b: OBound::weak(p[i]), numerator: true });
                        cons.push(Tagged { i: 0, j: i, b: OBound::weak(-p[i]), numerator: true });
                    }
                }
                expect = satisfiable(n + 1, &scale(&cons, den));
            }
            assert_eq!(member(&r, &p, den), expect, "reset membership at {p:?}");
        }
    }
}

#[test]
fn intersect_examples_and_oracle() {
    let mut rng = SplitMix64(31);
    // identity with the universe
    for _ in 0..50 {
        let z = random_zone(&mut rng, 2);
        assert_eq!(z.intersect(&Dbm::universe(2)).unwrap(), z);
    }
    // {x>=0} ∧ band [0,1) = {0<=x<1}
    let z = Dbm::universe(1)
        .intersect_atom(&AtomicConstraint::band(1, 0, Some(1)))
        .unwrap();
    assert!(z.contains_point(&[0.5]));
    assert!(!z.contains_point(&[1.0]));

    // membership of the intersection is the conjunction of memberships
    for _ in 0..400 {
        let n = 2;
        let den = n as i64 + 1;
        let a = random_zone(&mut rng, n);
        let b = random_zone(&mut rng, n);
        let both = a.intersect(&b);
        for p in grid_points(n, MAXC + 1) {
            let expect = member(&a, &p, den) && member(&b, &p, den);
            let got = both.as_ref().map_or(false, |z| member(z, &p, den));
            assert_eq!(got, expect, "intersect membership at {p:?}");
        }
    }
}

#[test]
fn intersect_commutative_associative() {
    let mut rng = SplitMix64(37);
    for _ in 0..200 {
        let a = random_zone(&mut rng, 2);
        let b = random_zone(&mut rng, 2);
        let c = random_zone(&mut rng, 2);
        assert_eq!(a.intersect(&b), b.intersect(&a));
        let left = a.intersect(&b).and_then(|ab| ab.intersect(&c));
        let right = b.intersect(&c).and_then(|bc| a.intersect(&bc));
        assert_eq!(left, right);
    }
}

#[test]
fn includes_examples_and_oracle() {
    let mut rng = SplitMix64(41);
    for _ in 0..300 {
        let n = 2;
        let den = n as i64 + 1;
        let a = random_zone(&mut rng, n);
        let b = random_zone(&mut rng, n);
        assert!(a.includes(&a));
        assert!(a.up().includes(&a), "delay closure is a superset");
        let got = a.includes(&b);
        // derived constants stay within n·MAXC, so the witness grid must
        // reach a little further than the membership grids
        let grid_says = grid_points(n, MAXC * n as i64 + 1)
            .iter()
            .all(|p| !member(&b, p, den) || member(&a, p, den));
        assert_eq!(got, grid_says, "includes vs grid oracle");
    }
}

#[test]
fn includes_is_partial_order() {
    let mut rng = SplitMix64(43);
    for _ in 0..200 {
        let a = random_zone(&mut rng, 2);
        let b = random_zone(&mut rng, 2);
        let c = random_zone(&mut rng, 2);
        if a.includes(&b) && b.includes(&a) {
            assert_eq!(a, b, "antisymmetry on canonical forms");
        }
        if a.includes(&b) && b.includes(&c) {
            assert!(a.includes(&c), "transitivity");
        }
    }
}

#[test]
fn down_matches_pointwise_oracle() {
    let mut rng = SplitMix64(47);
    for _ in 0..300 {
        let n = 2;
        let den = n as i64 + 1;
        let z = random_zone(&mut rng, n);
        let d = z.down();
        let zc = dbm_constraints(&z);
        for p in grid_points(n, MAXC + 1) {
            // v ∈ down(Z) iff some v + t·1 (t >= 0) lies in Z
            let tv = n + 1; // variable carrying +t
            let mut cons = zc.clone();
            for i in 1..=n {
                // x_i - t = v_i
                cons.push(Tagged { i, j: tv, b: OBound::weak(p[i]), numerator: true });
                cons.push(Tagged { i: tv, j: i, b: OBound::weak(-p[i]), numerator: true });
            }
            // t >= 0, i.e. 0 - t <= 0
            cons.push(Tagged { i: 0, j: tv, b: OBound::weak(0), numerator: true });
            let expect = satisfiable(n + 2, &scale(&cons, den));
            assert_eq!(member(&d, &p, den), expect, "down membership at {p:?}");
        }
    }
}

#[test]
fn up_reset_preserve_nonemptiness() {
    let mut rng = SplitMix64(53);
    for _ in 0..500 {
        let z = random_zone(&mut rng, 3);
        assert!(z.up().contains_point(&z.up().sample_point()));
        let r = z.reset(&[1, 3]);
        assert!(r.contains_point(&r.sample_point()));
    }
}

#[test]
fn extrapolate_examples() {
    let mut rng = SplitMix64(59);
    let ceil = vec![0, 3, 3];
    for _ in 0..300 {
        let z = random_zone(&mut rng, 2);
        let e = z.extrapolate(&ceil);
        assert_eq!(e.extrapolate(&ceil), e, "idempotent");
        assert!(e.includes(&z), "abstraction includes the zone");
        let all_below = (0..z.dim()).all(|i| {
            (0..z.dim()).all(|j| {
                let v = z.entry(i, j);
                v == INF || bounds::constant(v).abs() <= 3
            })
        });
        if all_below {
            assert_eq!(e, z, "abstraction below the ceiling is the identity");
        }
    }
    // {x=7} with ceiling 3 becomes {x>3}
    let z = Dbm::from_conjunction(
        1,
        &[AtomicConstraint::Upper { clock: 1, rel: Rel::Eq, k: 7 }],
    )
    .unwrap();
    let e = z.extrapolate(&[0, 3]);
    assert!(e.contains_point(&[4.0]));
    assert!(e.contains_point(&[100.0]));
    assert!(!e.contains_point(&[3.0]));
}

#[test]
fn subtract_is_exact_on_grid() {
    let mut rng = SplitMix64(61);
    for _ in 0..300 {
        let n = 2;
        let den = n as i64 + 1;
        let a = random_zone(&mut rng, n);
        let b = random_zone(&mut rng, n);
        let pieces = a.subtract(&b);
        for p in grid_points(n, MAXC + 1) {
            let expect = member(&a, &p, den) && !member(&b, &p, den);
            let got = pieces.iter().any(|z| member(z, &p, den));
            assert_eq!(got, expect, "subtract membership at {p:?}");
            assert!(
                pieces.iter().filter(|z| member(z, &p, den)).count() <= 1,
                "pieces overlap at {p:?}"
            );
        }
    }
}

#[test]
fn closure_relax_examples() {
    // cell {0<=x<2} relaxes to {0<=x<=2}
    let (space, cells) = enumerate_cells(1, &[AtomicConstraint::band(1, 0, Some(2))]).unwrap();
    assert_eq!(cells.len(), 2);
    let relaxed = space.closure_relax(&cells[0]);
    assert!(relaxed.contains_point(&[2.0]));
    assert!(!relaxed.contains_point(&[2.1]));
    // the unbounded cell {x>=2} has nothing to relax
    let top = space.closure_relax(&cells[1]);
    assert_eq!(top, space.cell_dbm(&cells[1]));
    // product cell: both axes relaxed
    let (space, cells) = enumerate_cells(
        2,
        &[
            AtomicConstraint::band(1, 0, Some(2)),
            AtomicConstraint::band(2, 1, Some(3)),
        ],
    )
    .unwrap();
    let inner = cells
        .iter()
        .find(|c| {
            let d = space.cell_dbm(c);
            d.contains_point(&[1.0, 2.0])
        })
        .unwrap();
    let relaxed = space.closure_relax(inner);
    assert!(relaxed.contains_point(&[2.0, 3.0]));
}

#[test]
fn enumerate_cells_examples() {
    // thresholds y<2, y<3 partition one axis into three cells
    let atoms = [
        AtomicConstraint::band(1, 0, Some(2)),
        AtomicConstraint::band(1, 0, Some(3)),
    ];
    let (_, cells) = enumerate_cells(1, &atoms).unwrap();
    assert_eq!(cells.len(), 3);

    // no atoms: the single cell ⊤
    let (space, cells) = enumerate_cells(2, &[]).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(space.cell_dbm(&cells[0]), Dbm::universe(2));

    // independent axes multiply
    let atoms = [
        AtomicConstraint::band(1, 0, Some(1)),
        AtomicConstraint::band(2, 0, Some(1)),
    ];
    let (_, cells) = enumerate_cells(2, &atoms).unwrap();
    assert_eq!(cells.len(), 4);

    // non-band atoms are rejected
    assert!(enumerate_cells(
        2,
        &[AtomicConstraint::Diff { x: 1, y: 2, rel: Rel::Lt, k: 1 }]
    )
    .is_err());
}

#[test]
fn cells_partition_grid() {
    let mut rng = SplitMix64(67);
    for _ in 0..100 {
        let n = 2;
        let mut atoms = Vec::new();
        for _ in 0..rng.below(3) + 1 {
            let c = 1 + rng.below(n);
            let lo = rng.below(3) as u32;
            if rng.below(2) == 0 {
                atoms.push(AtomicConstraint::band(c, lo, None));
            } else {
                atoms.push(AtomicConstraint::band(c, lo, Some(lo + 1 + rng.below(2) as u32)));
            }
        }
        let (space, cells) = enumerate_cells(n, &atoms).unwrap();
        for p in grid(n, MAXC, n as i64 + 1) {
            let vals: Vec<f64> = p.iter().map(|r| r.as_f64()).collect();
            let holding: Vec<usize> = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| space.cell_dbm(c).contains_point(&vals))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(holding.len(), 1, "point {vals:?} in exactly one cell");
            assert_eq!(
                cells[holding[0]],
                space.cell_of_point(&vals),
                "cell_of_point agrees"
            );
        }
    }
}

#[test]
fn split_zone_covers_and_respects_cells() {
    let mut rng = SplitMix64(71);
    let atoms = [
        AtomicConstraint::band(1, 1, Some(3)),
        AtomicConstraint::band(2, 0, Some(2)),
    ];
    let space = CellSpace::new(2, &atoms).unwrap();
    for _ in 0..200 {
        let z = random_zone(&mut rng, 2);
        let parts = space.split_zone(&z);
        let den = 3;
        for p in grid_points(2, MAXC + 1) {
            let inside = member(&z, &p, den);
            let covered = parts.iter().filter(|(_, piece)| member(piece, &p, den)).count();
            assert_eq!(covered, usize::from(inside), "at {p:?}");
        }
        for (cell, piece) in &parts {
            assert!(space.cell_dbm(cell).includes(piece));
        }
    }
}
