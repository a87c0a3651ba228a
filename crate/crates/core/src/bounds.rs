//! Packed difference-bound encoding.
//!
//! A bound `(m, ≺)` with `≺ ∈ {<, ≤}` is packed into one `i32` as
//! `(m << 1) | weak` where `weak = 1` for `≤` and `0` for `<`. Packed
//! values compare like the bounds they encode: a smaller raw value is a
//! tighter constraint, and `(m, <) < (m, ≤)`. Infinity is a sentinel that
//! dominates every finite bound.

/// Packed bound value. See module docs for the encoding.
pub type Raw = i32;

/// The unbounded entry `(∞, <)`.
pub const INF: Raw = i32::MAX;

/// The bound `(0, ≤)`.
pub const LE_ZERO: Raw = 1;

/// The bound `(0, <)`.
pub const LT_ZERO: Raw = 0;

#[inline]
pub fn bound(m: i32, weak: bool) -> Raw {
    debug_assert!(m.unsigned_abs() < (1 << 29));
    (m << 1) | (weak as i32)
}

#[inline]
pub fn le(m: i32) -> Raw {
    bound(m, true)
}

#[inline]
pub fn lt(m: i32) -> Raw {
    bound(m, false)
}

#[inline]
pub fn constant(r: Raw) -> i32 {
    debug_assert!(r != INF);
    r >> 1
}

#[inline]
pub fn is_weak(r: Raw) -> bool {
    r & 1 == 1
}

/// Bound addition: `(m1, ≺1) + (m2, ≺2) = (m1 + m2, ≺1 ∧ ≺2)`.
/// Infinity absorbs.
#[inline]
pub fn add(a: Raw, b: Raw) -> Raw {
    if a == INF || b == INF {
        INF
    } else {
        ((constant(a) + constant(b)) << 1) | (a & b & 1)
    }
}

/// The complement of the constraint `x - y ≺ m` is `y - x ≺' -m` with the
/// strictness flipped. Not defined for infinity.
#[inline]
pub fn negate(r: Raw) -> Raw {
    debug_assert!(r != INF);
    bound(-constant(r), !is_weak(r))
}

/// True iff the rational `q` satisfies `q ≺ m`.
#[inline]
pub fn satisfied_by(r: Raw, q: f64) -> bool {
    if r == INF {
        return true;
    }
    let m = constant(r) as f64;
    if is_weak(r) {
        q <= m
    } else {
        q < m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_matches_tightness() {
        assert!(lt(2) < le(2));
        assert!(le(2) < lt(3));
        assert!(le(3) < INF);
        assert!(lt(-1) < le(0));
    }

    #[test]
    fn addition() {
        assert_eq!(add(le(2), le(3)), le(5));
        assert_eq!(add(lt(2), le(3)), lt(5));
        assert_eq!(add(lt(2), lt(3)), lt(5));
        assert_eq!(add(INF, le(1)), INF);
    }

    #[test]
    fn negation_complements() {
        // complement of x - y <= 2 is y - x < -2
        assert_eq!(negate(le(2)), lt(-2));
        // complement of x - y < 2 is y - x <= -2
        assert_eq!(negate(lt(2)), le(-2));
    }
}
