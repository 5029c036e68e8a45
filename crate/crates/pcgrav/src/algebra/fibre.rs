//! Bigraded fibre elements: Grassmann-valued forms over a single point.
//!
//! An element of bidegree `(i, j)` is a sum of terms `g * dx^P (x) u_B` with
//! `|P| = i` base indices, `|B| = j` internal indices and a Grassmann
//! coefficient `g`. Coefficients are stored to the left of the symbol block;
//! every operation that moves a symbol or an odd operator past a coefficient
//! applies the Koszul sign for that coefficient's parity, so the wedge is
//! graded-commutative with respect to total degree (base + internal +
//! coefficient parity) and real-coefficient elements obey the plain
//! `(-1)^{(i+j)(k+l)}` rule.

use super::grassmann::Grassmann;
use super::metric::InternalMetric;
use super::multi_index::{insert_sign, merge_sign, rank, remove_sign, Mask};
use std::collections::BTreeMap;

/// Grassmann-valued bigraded form at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct FibreElement {
    base_deg: u8,
    int_deg: u8,
    terms: BTreeMap<(Mask, Mask), Grassmann>,
}

impl FibreElement {
    pub fn new(base_deg: u8, int_deg: u8) -> Self {
        FibreElement {
            base_deg,
            int_deg,
            terms: BTreeMap::new(),
        }
    }

    /// Real scalar as a (0,0)-element.
    pub fn real(x: f64) -> Self {
        let mut f = FibreElement::new(0, 0);
        f.add_term(0, 0, Grassmann::real(x));
        f
    }

    /// Grassmann scalar as a (0,0)-element.
    pub fn scalar(g: Grassmann) -> Self {
        let mut f = FibreElement::new(0, 0);
        f.add_term(0, 0, g);
        f
    }

    /// Basis internal vector `u_a` as a (0,1)-element.
    pub fn internal_basis(a: u32) -> Self {
        let mut f = FibreElement::new(0, 1);
        f.add_term(0, 1 << a, Grassmann::one());
        f
    }

    pub fn base_deg(&self) -> u8 {
        self.base_deg
    }

    pub fn int_deg(&self) -> u8 {
        self.int_deg
    }

    /// Total symbol degree `i + j`.
    pub fn total_deg(&self) -> u8 {
        self.base_deg + self.int_deg
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, g| m.max(g.max_abs()))
    }

    /// Accumulate `g * dx^P (x) u_B`. Panics on a rank mismatch with the
    /// declared bidegree.
    pub fn add_term(&mut self, base_mask: Mask, int_mask: Mask, g: Grassmann) {
        assert_eq!(rank(base_mask), self.base_deg as u32, "base rank mismatch");
        assert_eq!(rank(int_mask), self.int_deg as u32, "internal rank mismatch");
        self.add_term_unchecked(base_mask, int_mask, g);
    }

    fn add_term_unchecked(&mut self, base_mask: Mask, int_mask: Mask, g: Grassmann) {
        if g.is_zero() {
            return;
        }
        let slot = self.terms.entry((base_mask, int_mask)).or_default();
        *slot = slot.add(&g);
        if slot.is_zero() {
            self.terms.remove(&(base_mask, int_mask));
        }
    }

    pub fn coeff(&self, base_mask: Mask, int_mask: Mask) -> Grassmann {
        self.terms
            .get(&(base_mask, int_mask))
            .cloned()
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Mask, Mask, &Grassmann)> {
        self.terms.iter().map(|(&(p, b), g)| (p, b, g))
    }

    pub fn scale(&self, x: f64) -> Self {
        self.map_coeffs(|g| g.scale(x))
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|g| g.neg())
    }

    fn map_coeffs(&self, f: impl Fn(&Grassmann) -> Grassmann) -> Self {
        let mut out = FibreElement::new(self.base_deg, self.int_deg);
        for (&k, g) in &self.terms {
            let h = f(g);
            if !h.is_zero() {
                out.terms.insert(k, h);
            }
        }
        out
    }

    pub fn add(&self, rhs: &FibreElement) -> Self {
        self.checked_combine(rhs, false)
    }

    pub fn sub(&self, rhs: &FibreElement) -> Self {
        self.checked_combine(rhs, true)
    }

    fn checked_combine(&self, rhs: &FibreElement, negate: bool) -> Self {
        assert_eq!(
            (self.base_deg, self.int_deg),
            (rhs.base_deg, rhs.int_deg),
            "bidegree mismatch in sum"
        );
        let mut out = self.clone();
        for (&(p, b), g) in &rhs.terms {
            out.add_term_unchecked(p, b, if negate { g.neg() } else { g.clone() });
        }
        out
    }

    /// Left multiplication by a Grassmann scalar (coefficients stay left of
    /// the symbols, so no extra sign).
    pub fn mul_grassmann_left(&self, g: &Grassmann) -> Self {
        self.map_coeffs(|h| g.mul(h))
    }

    /// Wedge product in the super tensor product convention:
    /// `(g dx^P u_B) ^ (h dx^Q u_D) = (-1)^{p(h)(|P|+|B|) + |B||Q|}
    ///  g h merge(P,Q) merge(B,D) dx^{PQ} u_{BD}`.
    pub fn wedge(&self, rhs: &FibreElement) -> Self {
        let mut out = FibreElement::new(
            self.base_deg + rhs.base_deg,
            self.int_deg + rhs.int_deg,
        );
        let ldeg = (self.base_deg + self.int_deg) as u32;
        let cross_flip = (self.int_deg as u32 * rhs.base_deg as u32) & 1 == 1;
        for (&(p, b), g) in &self.terms {
            for (&(q, d), h) in &rhs.terms {
                let Some(sb) = merge_sign(p, q) else { continue };
                let Some(si) = merge_sign(b, d) else { continue };
                let mut sign = sb * si;
                if cross_flip {
                    sign = -sign;
                }
                let coeff = g.mul_deg_twisted(h, ldeg).scale(sign as f64);
                out.add_term_unchecked(p | q, b | d, coeff);
            }
        }
        out
    }

    /// Action bracket `[self, rhs]` of an internal-bidegree-2 element on any
    /// element, extending the so(eta) action `(u_a ^ u_b) . w =
    /// u_a eta(u_b, w) - u_b eta(u_a, w)` as an internal-degree derivation.
    pub fn bracket(&self, rhs: &FibreElement, eta: &InternalMetric) -> Self {
        assert_eq!(self.int_deg, 2, "bracket wants an internal 2-form on the left");
        let mut out = FibreElement::new(self.base_deg + rhs.base_deg, rhs.int_deg);
        let ldeg = (self.base_deg + self.int_deg) as u32;
        for (&(p, x), g) in &self.terms {
            let a = x.trailing_zeros();
            let b = 31 - x.leading_zeros();
            for (&(q, d), h) in &rhs.terms {
                let Some(sb) = merge_sign(p, q) else { continue };
                let coeff = g.mul_deg_twisted(h, ldeg);
                // + eta_bb * insert_a(remove_b(u_D))
                if let Some((d1, s1)) = remove_sign(d, b) {
                    if let Some((d2, s2)) = insert_sign(d1, a) {
                        let c = coeff.scale((sb * s1 * s2) as f64 * eta.eta(b as usize));
                        out.add_term_unchecked(p | q, d2, c);
                    }
                }
                // - eta_aa * insert_b(remove_a(u_D))
                if let Some((d1, s1)) = remove_sign(d, a) {
                    if let Some((d2, s2)) = insert_sign(d1, b) {
                        let c = coeff.scale(-(sb * s1 * s2) as f64 * eta.eta(a as usize));
                        out.add_term_unchecked(p | q, d2, c);
                    }
                }
            }
        }
        out
    }

    /// Interior product with the base coordinate vector `d/dx^axis`; odd
    /// operator, so it picks up the coefficient parity sign on the way in.
    pub fn interior_base(&self, axis: u32) -> Self {
        let mut out = FibreElement::new(self.base_deg.saturating_sub(1), self.int_deg);
        if self.base_deg == 0 {
            return out;
        }
        for (&(p, b), g) in &self.terms {
            if let Some((p1, s)) = remove_sign(p, axis) {
                out.add_term_unchecked(p1, b, g.parity_twisted().scale(s as f64));
            }
        }
        out
    }

    /// For an internal vector (`j = 1`): the components along the internal
    /// basis, `self = sum_m parts[m] (x) u_m` with coefficients left.
    pub fn split_internal_vector(&self, dim: usize) -> Vec<FibreElement> {
        assert_eq!(self.int_deg, 1);
        let mut parts = vec![FibreElement::new(self.base_deg, 0); dim];
        for (&(p, b), g) in &self.terms {
            let m = b.trailing_zeros() as usize;
            parts[m].add_term_unchecked(p, 0, g.clone());
        }
        parts
    }

    /// Inverse of [`split_internal_vector`].
    pub fn from_internal_vector(parts: &[FibreElement]) -> Self {
        assert!(!parts.is_empty());
        let mut out = FibreElement::new(parts[0].base_deg, 1);
        for (m, part) in parts.iter().enumerate() {
            assert_eq!(part.int_deg, 0);
            assert_eq!(part.base_deg, parts[0].base_deg);
            for (&(p, _), g) in &part.terms {
                out.add_term_unchecked(p, 1 << m, g.clone());
            }
        }
        out
    }

    /// Split every coefficient into its Grassmann-even and Grassmann-odd
    /// monomials: `self = even + odd`.
    pub fn parity_split(&self) -> (FibreElement, FibreElement) {
        let pick = |want: u32| {
            self.map_coeffs(|g| {
                Grassmann::from_terms(g.terms().filter(|(m, _)| m.count_ones() & 1 == want))
            })
        };
        (pick(0), pick(1))
    }

    /// True when every coefficient monomial carries the given total ghost
    /// number under the per-generator weights.
    pub fn ghost_number_is(&self, weights: &[i32], expected: i32) -> bool {
        self.terms.values().all(|g| {
            g.terms().all(|(m, _)| {
                let mut total = 0;
                let mut rest = m;
                while rest != 0 {
                    let i = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    total += weights.get(i).copied().unwrap_or(0);
                }
                total == expected
            })
        })
    }
}
