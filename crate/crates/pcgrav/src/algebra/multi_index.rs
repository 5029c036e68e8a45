//! Index-set bitmask utilities with anticommutation signs.
//!
//! An ordered multi-index `i1 < i2 < ... < ik` is stored as a bitmask with
//! those bits set. Merging two disjoint masks concatenates the index lists and
//! re-sorts; the sign is the parity of the number of transpositions, i.e. of
//! inversions between the two lists.

/// Bitmask over base or internal indices (low bit = index 0).
pub type Mask = u32;

/// Number of indices in the mask.
#[inline]
pub fn rank(m: Mask) -> u32 {
    m.count_ones()
}

/// Sign of sorting the concatenation of two disjoint ordered index sets, or
/// `None` when they overlap (repeated index annihilates).
///
/// The sign is `(-1)^inv` with `inv = #{(i, j) : i in a, j in b, i > j}`.
#[inline]
pub fn merge_sign(a: Mask, b: Mask) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    Some(merge_sign_u64(a as u64, b as u64))
}

/// Same inversion-parity sign for 64-bit masks (used by the Grassmann algebra).
#[inline]
pub fn merge_sign_u64(a: u64, b: u64) -> i32 {
    debug_assert_eq!(a & b, 0);
    let mut inv = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        // Indices of `a` strictly above j each hop over this element of `b`.
        inv += (a >> j >> 1).count_ones();
    }
    if inv & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Remove index `i` from the front of the wedge monomial: returns the reduced
/// mask and the sign `(-1)^{#indices below i}`, or `None` if `i` is absent.
#[inline]
pub fn remove_sign(m: Mask, i: u32) -> Option<(Mask, i32)> {
    if m & (1 << i) == 0 {
        return None;
    }
    let below = (m & ((1u32 << i) - 1)).count_ones();
    let sign = if below & 1 == 0 { 1 } else { -1 };
    Some((m & !(1 << i), sign))
}

/// Insert index `i` (wedge from the left): returns the enlarged mask and the
/// sign of moving `e_i` into sorted position, or `None` if already present.
#[inline]
pub fn insert_sign(m: Mask, i: u32) -> Option<(Mask, i32)> {
    if m & (1 << i) != 0 {
        return None;
    }
    let below = (m & ((1u32 << i) - 1)).count_ones();
    let sign = if below & 1 == 0 { 1 } else { -1 };
    Some((m | (1 << i), sign))
}

/// All rank-`k` subsets of `{0, .., dim-1}` in increasing numeric (mask) order.
pub fn subsets(dim: u32, k: u32) -> Vec<Mask> {
    let mut out = Vec::new();
    for m in 0..(1u32 << dim) {
        if m.count_ones() == k {
            out.push(m);
        }
    }
    out
}

/// Iterator over the set indices of a mask, ascending.
pub fn indices(m: Mask) -> impl Iterator<Item = u32> {
    let mut rest = m;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros();
            rest &= rest - 1;
            Some(i)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force sign: concatenate the two index lists and count bubble-sort
    /// swaps. Independent of the popcount shortcut used in `merge_sign`.
    fn merge_sign_naive(a: Mask, b: Mask) -> Option<i32> {
        if a & b != 0 {
            return None;
        }
        let mut list: Vec<u32> = indices(a).chain(indices(b)).collect();
        let mut sign = 1;
        let n = list.len();
        for i in 0..n {
            for j in 0..n.saturating_sub(i + 1) {
                if list[j] > list[j + 1] {
                    list.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        Some(sign)
    }

    #[test]
    fn merge_matches_bubble_sort_oracle() {
        for a in 0u32..64 {
            for b in 0u32..64 {
                assert_eq!(merge_sign(a, b), merge_sign_naive(a, b), "a={a:b} b={b:b}");
            }
        }
    }

    #[test]
    fn subset_counts_are_binomial() {
        assert_eq!(subsets(5, 2).len(), 10);
        assert_eq!(subsets(7, 3).len(), 35);
        let s = subsets(6, 4);
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(s, sorted);
    }

    #[test]
    fn remove_then_insert_roundtrips() {
        let m: Mask = 0b10110;
        for i in [1u32, 2, 4] {
            let (red, s1) = remove_sign(m, i).unwrap();
            let (back, s2) = insert_sign(red, i).unwrap();
            assert_eq!(back, m);
            assert_eq!(s1 * s2, 1);
        }
        assert!(remove_sign(m, 0).is_none());
        assert!(insert_sign(m, 1).is_none());
    }

    /// Three pairwise-disjoint masks carved out of one bit pool.
    fn disjoint3() -> impl Strategy<Value = (Mask, Mask, Mask)> {
        (0u32..4096, 0u32..4096, 0u32..4096).prop_map(|(raw, s1, s2)| {
            (raw & s1 & s2, raw & s1 & !s2, raw & !s1 & s2)
        })
    }

    proptest! {
        #[test]
        fn merge_sign_is_associative((a, b, c) in disjoint3()) {
            let left = merge_sign(a, b).unwrap() * merge_sign(a | b, c).unwrap();
            let right = merge_sign(b, c).unwrap() * merge_sign(a, b | c).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn merge_sign_graded_commutes((a, b, _) in disjoint3()) {
            let koszul = if (rank(a) * rank(b)) & 1 == 0 { 1 } else { -1 };
            prop_assert_eq!(merge_sign(a, b).unwrap(), koszul * merge_sign(b, a).unwrap());
        }
    }
}
