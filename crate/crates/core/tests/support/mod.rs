//! Shared oracle machinery for the property suites: an independent
//! satisfiability check for systems of strict/weak difference constraints
//! (Bellman-Ford over exact integers) and rational grid sampling. Nothing
//! here touches the DBM implementation under test.

#![allow(dead_code)]

/// A bound `value ≺ m` with `≺` strict or weak, on exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OBound {
    pub m: i64,
    pub strict: bool,
}

impl OBound {
    pub fn weak(m: i64) -> OBound {
        OBound { m, strict: false }
    }

    pub fn strict(m: i64) -> OBound {
        OBound { m, strict: true }
    }

    pub fn plus(self, other: OBound) -> OBound {
        OBound {
            m: self.m + other.m,
            strict: self.strict || other.strict,
        }
    }

    /// Tighter-than: smaller constant, or same constant but strict.
    pub fn tighter(self, other: OBound) -> bool {
        self.m < other.m || (self.m == other.m && self.strict && !other.strict)
    }

    pub fn negative(self) -> bool {
        self.m < 0 || (self.m == 0 && self.strict)
    }
}

/// `x_i - x_j ≺ m` over variables `0..n` (the caller fixes the meaning of
/// variable 0 by adding constraints).
pub type Constraint = (usize, usize, OBound);

/// Satisfiability of a difference constraint system: no negative-weight
/// cycle, where a zero-weight cycle with a strict edge counts negative.
///
/// Strictness is handled by scaling every constant by `#constraints + 1`
/// and charging strict edges one unit: a cycle of weight zero with `k`
/// strict edges becomes a cycle of weight `-k`, while genuinely positive
/// cycles stay positive.
pub fn satisfiable(n_vars: usize, cons: &[Constraint]) -> bool {
    let k = cons.len() as i64 + 1;
    let mut dist = vec![0i64; n_vars];
    for round in 0..=n_vars {
        let mut changed = false;
        for &(i, j, b) in cons {
            // edge j -> i with weight b: x_i <= x_j + b
            let w = b.m * k - i64::from(b.strict);
            if dist[j] + w < dist[i] {
                dist[i] = dist[j] + w;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
        if round == n_vars {
            return false; // still relaxing after n rounds: negative cycle
        }
    }
    true
}

/// All-pairs tightest bounds by running Bellman-Ford per source over the
/// constraint graph; `None` when the system is unsatisfiable. Entry
/// `(i, j)` is the tightest derivable bound on `x_i - x_j`, or `None` for
/// unbounded.
pub fn all_pairs_tightest(
    n_vars: usize,
    cons: &[Constraint],
) -> Option<Vec<Vec<Option<OBound>>>> {
    if !satisfiable(n_vars, cons) {
        return None;
    }
    let mut out = vec![vec![None; n_vars]; n_vars];
    for src in 0..n_vars {
        // dist[i] = tightest bound on x_i - x_src
        let mut dist: Vec<Option<OBound>> = vec![None; n_vars];
        dist[src] = Some(OBound::weak(0));
        for _ in 0..n_vars {
            let mut changed = false;
            for &(i, j, b) in cons {
                if let Some(dj) = dist[j] {
                    let cand = dj.plus(b);
                    if dist[i].map_or(true, |di| cand.tighter(di)) {
                        dist[i] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for i in 0..n_vars {
            out[i][src] = dist[i];
        }
    }
    Some(out)
}

/// Exact rational as numerator over a fixed denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rat {
    pub num: i64,
    pub den: i64,
}

impl Rat {
    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// All grid points with `n` coordinates in `{0, 1/den, ..., max}`.
pub fn grid(n: usize, max: i64, den: i64) -> Vec<Vec<Rat>> {
    let steps = max * den;
    let mut out: Vec<Vec<Rat>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * (steps as usize + 1));
        for point in &out {
            for k in 0..=steps {
                let mut p = point.clone();
                p.push(Rat { num: k, den });
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Does the point satisfy `x_i - x_j ≺ m` for every listed constraint?
/// Both the coordinates and the constants are numerators over one common
/// denominator.
pub fn point_satisfies(vals: &[i64], cons: &[Constraint]) -> bool {
    cons.iter().all(|&(i, j, b)| {
        let lhs = vals[i] - vals[j];
        if b.strict {
            lhs < b.m
        } else {
            lhs <= b.m
        }
    })
}
