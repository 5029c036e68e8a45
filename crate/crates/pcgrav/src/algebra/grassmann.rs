//! Finite-dimensional Grassmann algebra with `f64` coefficients.
//!
//! Elements live in the exterior algebra over a pool of up to 64 odd
//! generators `th_0, .., th_63` (ghost and antighost polarization directions
//! plus reserved probe directions for exact directional derivatives). A value
//! is a sorted list of `(mask, coefficient)` monomials; masks are strictly
//! increasing and exact-zero coefficients are pruned, so equality of
//! representations is equality of elements.

use super::multi_index::merge_sign_u64;
use std::collections::BTreeMap;
use std::fmt;

/// Element of the Grassmann coefficient algebra.
#[derive(Clone, PartialEq, Default)]
pub struct Grassmann {
    /// Sorted by mask, no zero coefficients.
    terms: Vec<(u64, f64)>,
}

impl Grassmann {
    pub fn zero() -> Self {
        Grassmann { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Grassmann::real(1.0)
    }

    /// Purely even scalar `x`.
    pub fn real(x: f64) -> Self {
        Grassmann::monomial(0, x)
    }

    /// Single odd generator `th_i`.
    pub fn generator(i: u32) -> Self {
        assert!(i < 64, "generator index out of range");
        Grassmann::monomial(1u64 << i, 1.0)
    }

    /// `c * th_{i1} .. th_{ik}` for the sorted index set encoded in `mask`.
    pub fn monomial(mask: u64, c: f64) -> Self {
        if c == 0.0 {
            Grassmann::zero()
        } else {
            Grassmann { terms: vec![(mask, c)] }
        }
    }

    pub fn from_terms(raw: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (m, c) in raw {
            *acc.entry(m).or_insert(0.0) += c;
        }
        Grassmann::collect(acc)
    }

    fn collect(acc: BTreeMap<u64, f64>) -> Self {
        Grassmann {
            terms: acc.into_iter().filter(|&(_, c)| c != 0.0).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the empty monomial (the "body").
    pub fn body(&self) -> f64 {
        self.coeff(0)
    }

    pub fn coeff(&self, mask: u64) -> f64 {
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.terms.iter().copied()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest absolute coefficient (0 for the zero element).
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, &(_, c)| m.max(c.abs()))
    }

    pub fn scale(&self, x: f64) -> Self {
        if x == 0.0 {
            return Grassmann::zero();
        }
        Grassmann {
            terms: self.terms.iter().map(|&(m, c)| (m, c * x)).collect(),
        }
    }

    pub fn add(&self, rhs: &Grassmann) -> Self {
        // Merge two sorted term lists.
        let mut out = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < rhs.terms.len() {
            let (ma, ca) = self.terms[i];
            let (mb, cb) = rhs.terms[j];
            match ma.cmp(&mb) {
                std::cmp::Ordering::Less => {
                    out.push((ma, ca));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((mb, cb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = ca + cb;
                    if c != 0.0 {
                        out.push((ma, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&rhs.terms[j..]);
        Grassmann { terms: out }
    }

    pub fn sub(&self, rhs: &Grassmann) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        Grassmann {
            terms: self.terms.iter().map(|&(m, c)| (m, -c)).collect(),
        }
    }

    /// Grassmann product `self * rhs`.
    pub fn mul(&self, rhs: &Grassmann) -> Self {
        self.mul_deg_twisted(rhs, 0)
    }

    /// Product with the Koszul twist for a right factor whose coefficient has
    /// to pass a symbol block of the given total form degree: each monomial
    /// `v` of `rhs` is weighted by `(-1)^{parity(v) * symbol_degree}`.
    pub fn mul_deg_twisted(&self, rhs: &Grassmann, symbol_degree: u32) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Grassmann::zero();
        }
        let twist_odd = symbol_degree & 1 == 1;
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for &(mu, cu) in &self.terms {
            for &(mv, cv) in &rhs.terms {
                if mu & mv != 0 {
                    continue;
                }
                let mut c = cu * cv * merge_sign_u64(mu, mv) as f64;
                if twist_odd && mv.count_ones() & 1 == 1 {
                    c = -c;
                }
                *acc.entry(mu | mv).or_insert(0.0) += c;
            }
        }
        Grassmann::collect(acc)
    }

    /// Each monomial scaled by `(-1)^parity`; the sign an odd operator picks
    /// up when acting past the coefficient.
    pub fn parity_twisted(&self) -> Self {
        Grassmann {
            terms: self
                .terms
                .iter()
                .map(|&(m, c)| (m, if m.count_ones() & 1 == 1 { -c } else { c }))
                .collect(),
        }
    }

    /// `Some(0)` if every monomial is even, `Some(1)` if every monomial is
    /// odd, `None` if mixed or zero-ambiguous (zero reports `Some(0)`).
    pub fn parity(&self) -> Option<u32> {
        if self.terms.is_empty() {
            return Some(0);
        }
        let p = self.terms[0].0.count_ones() & 1;
        for &(m, _) in &self.terms {
            if m.count_ones() & 1 != p {
                return None;
            }
        }
        Some(p)
    }

    pub fn has_bit(&self, bit: u32) -> bool {
        self.terms.iter().any(|&(m, _)| m & (1u64 << bit) != 0)
    }

    /// Extract the coefficient of `th_{p1} th_{p2}` where `p1 < p2` are the
    /// two highest generator indices in use (probe pair): returns `g` from the
    /// decomposition `self = rest + th_{p1} th_{p2} g` and panics if any
    /// monomial contains exactly one of the two bits (probe leakage).
    pub fn extract_bit_pair(&self, p1: u32, p2: u32) -> Grassmann {
        let b1 = 1u64 << p1;
        let b2 = 1u64 << p2;
        let mut out = Vec::new();
        for &(m, c) in &self.terms {
            let n1 = m & b1 != 0;
            let n2 = m & b2 != 0;
            match (n1, n2) {
                (true, true) => {
                    let stripped = m & !(b1 | b2);
                    // Probe bits sit above every other generator, so the block
                    // th_{p1} th_{p2} commutes to either end with sign +1.
                    debug_assert!(stripped >> p1.min(p2) == 0);
                    out.push((stripped, c));
                }
                (false, false) => {}
                _ => panic!("probe bit appears unpaired (th_{p1}/th_{p2})"),
            }
        }
        Grassmann { terms: out }
    }
}

impl fmt::Debug for Grassmann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, &(m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            let mut rest = m;
            while rest != 0 {
                let i = rest.trailing_zeros();
                rest &= rest - 1;
                write!(f, "*th{i}")?;
            }
        }
        Ok(())
    }
}

impl std::ops::Add for &Grassmann {
    type Output = Grassmann;
    fn add(self, rhs: &Grassmann) -> Grassmann {
        Grassmann::add(self, rhs)
    }
}

impl std::ops::Sub for &Grassmann {
    type Output = Grassmann;
    fn sub(self, rhs: &Grassmann) -> Grassmann {
        Grassmann::sub(self, rhs)
    }
}

impl std::ops::Neg for &Grassmann {
    type Output = Grassmann;
    fn neg(self) -> Grassmann {
        Grassmann::neg(self)
    }
}

impl std::ops::Mul for &Grassmann {
    type Output = Grassmann;
    fn mul(self, rhs: &Grassmann) -> Grassmann {
        Grassmann::mul(self, rhs)
    }
}

impl std::ops::Mul<f64> for &Grassmann {
    type Output = Grassmann;
    fn mul(self, x: f64) -> Grassmann {
        self.scale(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Random element with small integer coefficients over the low 6
    /// generators, so ring identities hold exactly in f64.
    fn small() -> impl Strategy<Value = Grassmann> {
        proptest::collection::vec((0u64..64, -4i32..5), 0..5)
            .prop_map(|raw| Grassmann::from_terms(raw.into_iter().map(|(m, c)| (m, c as f64))))
    }

    #[test]
    fn generators_anticommute_and_square_to_zero() {
        for i in 0..6u32 {
            for j in 0..6u32 {
                let ti = Grassmann::generator(i);
                let tj = Grassmann::generator(j);
                let ij = ti.mul(&tj);
                let ji = tj.mul(&ti);
                if i == j {
                    assert!(ij.is_zero());
                } else {
                    assert_eq!(ij, ji.neg());
                }
            }
        }
    }

    #[test]
    fn product_matches_insertion_sort_oracle() {
        // Multiply monomials by explicitly sorting the concatenated generator
        // list and counting swaps.
        let naive_mono = |a: u64, b: u64| -> Option<(u64, i32)> {
            if a & b != 0 {
                return None;
            }
            let mut list: Vec<u32> = (0..64).filter(|i| a & (1 << i) != 0).collect();
            list.extend((0..64u32).filter(|i| b & (1 << i) != 0));
            let mut sign = 1;
            for i in 1..list.len() {
                let mut j = i;
                while j > 0 && list[j - 1] > list[j] {
                    list.swap(j - 1, j);
                    sign = -sign;
                    j -= 1;
                }
            }
            Some((a | b, sign))
        };
        for a in 0u64..32 {
            for b in 0u64..32 {
                let got = Grassmann::monomial(a, 2.0).mul(&Grassmann::monomial(b, 3.0));
                let want = match naive_mono(a, b) {
                    Some((m, s)) => Grassmann::monomial(m, 6.0 * s as f64),
                    None => Grassmann::zero(),
                };
                assert_eq!(got, want, "a={a:b} b={b:b}");
            }
        }
    }

    #[test]
    fn probe_pair_extraction_inverts_multiplication() {
        let g = Grassmann::from_terms([(0b1, 2.0), (0b110, -3.0), (0, 1.5)]);
        let t = Grassmann::generator(15).mul(&Grassmann::generator(16));
        let shifted = t.mul(&g);
        assert_eq!(shifted.extract_bit_pair(15, 16), g);
        // t is even: it commutes with everything.
        assert_eq!(g.mul(&t), shifted);
        // t^2 = 0.
        assert!(t.mul(&t).is_zero());
    }

    proptest! {
        #[test]
        fn associative(a in small(), b in small(), c in small()) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn distributive(a in small(), b in small(), c in small()) {
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }

        #[test]
        fn graded_commutative(a in small(), b in small()) {
            // Compare on parity-homogeneous parts.
            if let (Some(pa), Some(pb)) = (a.parity(), b.parity()) {
                let ab = a.mul(&b);
                let ba = b.mul(&a);
                let flipped = if pa * pb & 1 == 1 { ba.neg() } else { ba };
                prop_assert_eq!(ab, flipped);
            }
        }

        #[test]
        fn parity_twist_is_involutive(a in small()) {
            prop_assert_eq!(a.parity_twisted().parity_twisted(), a);
        }
    }
}
