use std::sync::Arc;

use rand::Rng;

use crate::algebra::Grassmann;
use crate::canonical::Multipliers;
use crate::fields::sample::{random_ghost_field, TrigProfile};
use crate::fields::{Field, Geometry, Grid};
use crate::slice::sigma_of;
use crate::{Error, Result};

/// Which Grassmann generators carry ghost number +1 and which carry -1.
///
/// Ghost number of a monomial is the count of set bits in the ghost range
/// minus the count in the antighost range; generators outside both ranges
/// (finite-difference probes) are neutral. The layout is explicit so that
/// relabeling invariance can be tested by instantiating the same state on a
/// different window of the generator set.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorLayout {
    ghost_lo: u32,
    ghost_hi: u32,
    anti_lo: u32,
    anti_hi: u32,
}

impl GeneratorLayout {
    /// Ghosts on generators `0..9` (three per species), antighosts on `9..15`
    /// (two per species).
    pub fn standard() -> Self {
        Self::windows(0, 9)
    }

    /// Ghosts on `ghost_base..ghost_base+9`, antighosts on
    /// `anti_base..anti_base+6`. The two windows must not overlap.
    pub fn windows(ghost_base: u32, anti_base: u32) -> Self {
        let layout = Self {
            ghost_lo: ghost_base,
            ghost_hi: ghost_base + 9,
            anti_lo: anti_base,
            anti_hi: anti_base + 6,
        };
        assert!(
            layout.ghost_hi <= layout.anti_lo || layout.anti_hi <= layout.ghost_lo,
            "generator windows overlap"
        );
        assert!(layout.ghost_hi <= 64 && layout.anti_hi <= 64);
        layout
    }

    pub fn ghost_base(&self) -> u32 {
        self.ghost_lo
    }

    pub fn anti_base(&self) -> u32 {
        self.anti_lo
    }

    fn range_mask(lo: u32, hi: u32) -> u64 {
        let width = hi - lo;
        if width == 64 {
            u64::MAX
        } else {
            ((1u64 << width) - 1) << lo
        }
    }

    /// Ghost number of one Grassmann monomial.
    pub fn ghost_number(&self, mask: u64) -> i64 {
        let g = (mask & Self::range_mask(self.ghost_lo, self.ghost_hi)).count_ones() as i64;
        let a = (mask & Self::range_mask(self.anti_lo, self.anti_hi)).count_ones() as i64;
        g - a
    }

    /// True when every monomial of `g` sits at ghost number `k`.
    pub fn is_homogeneous(&self, g: &Grassmann, k: i64) -> bool {
        g.terms().all(|(mask, _)| self.ghost_number(mask) == k)
    }
}

/// The three antighost fields, conjugate to the ghosts through the boundary
/// symplectic structure: `c_dag` pairs with the internal ghost, `lam_dag`
/// with the transversal ghost, and the `n-1` components of `xi_dag` with the
/// tangent ghost vector. All carry ghost number -1.
#[derive(Debug, Clone)]
pub struct Antighosts {
    /// `(n-1, n-2)`-form, internal antighost.
    pub c_dag: Field,
    /// `(n-1, n)`-form (top-top), transversal antighost.
    pub lam_dag: Field,
    /// One `(n-1, n)`-form per tangent direction.
    pub xi_dag: Vec<Field>,
}

impl Antighosts {
    pub fn zero(grid: &Arc<Grid>, n: usize) -> Self {
        let d = n as u8;
        Self {
            c_dag: Field::zeros(grid, d - 1, d - 2, -1),
            lam_dag: Field::zeros(grid, d - 1, d, -1),
            xi_dag: (0..n - 1)
                .map(|_| Field::zeros(grid, d - 1, d, -1))
                .collect(),
        }
    }

    /// Random antighosts polarized over two Grassmann generators per species
    /// starting at `base`: `c_dag` on `base, base+1`, `lam_dag` on the next
    /// two, and every component of `xi_dag` on the final pair.
    pub fn random(
        grid: &Arc<Grid>,
        n: usize,
        base: u32,
        rng: &mut impl Rng,
        prof: &TrigProfile,
    ) -> Self {
        let d = n as u8;
        Self {
            c_dag: random_ghost_field(grid, d - 1, d - 2, &[base, base + 1], -1, rng, prof),
            lam_dag: random_ghost_field(grid, d - 1, d, &[base + 2, base + 3], -1, rng, prof),
            xi_dag: (0..n - 1)
                .map(|_| random_ghost_field(grid, d - 1, d, &[base + 4, base + 5], -1, rng, prof))
                .collect(),
        }
    }

    /// Every stored coefficient must sit in an odd Grassmann monomial.
    pub fn parity_audit(&self) -> bool {
        let odd = |f: &Field| {
            f.values().iter().all(|fe| {
                fe.iter()
                    .all(|(_, _, g)| g.terms().all(|(m, _)| m.count_ones() % 2 == 1))
            })
        };
        odd(&self.c_dag) && odd(&self.lam_dag) && self.xi_dag.iter().all(odd)
    }

    pub fn max_abs(&self) -> f64 {
        self.xi_dag
            .iter()
            .map(|f| f.max_abs())
            .fold(self.c_dag.max_abs().max(self.lam_dag.max_abs()), f64::max)
    }
}

/// A full BFV state: background geometry, on-slice connection, ghosts, and
/// antighosts, plus the generator layout used for ghost-number audits.
#[derive(Debug, Clone)]
pub struct BfvState {
    pub geo: Geometry,
    pub omega: Field,
    pub ghosts: Multipliers,
    pub anti: Antighosts,
    pub layout: GeneratorLayout,
}

impl BfvState {
    /// Checks the structural condition on `omega`, the ghost/antighost
    /// parities, and the generator windows before accepting the state.
    pub fn new(
        geo: Geometry,
        omega: Field,
        ghosts: Multipliers,
        anti: Antighosts,
        layout: GeneratorLayout,
        tol: f64,
    ) -> Result<Self> {
        sigma_of(&omega, &geo, tol)?;
        if !ghosts.parity_audit() {
            return Err(Error::Shape("even coefficient in a ghost field".into()));
        }
        if !anti.parity_audit() {
            return Err(Error::Shape("even coefficient in an antighost field".into()));
        }
        let n = geo.n;
        let shapes_ok = anti.c_dag.base_deg() as usize == n - 1
            && anti.c_dag.int_deg() as usize == n - 2
            && anti.lam_dag.base_deg() as usize == n - 1
            && anti.lam_dag.int_deg() as usize == n
            && anti.xi_dag.len() == n - 1
            && anti
                .xi_dag
                .iter()
                .all(|f| f.base_deg() as usize == n - 1 && f.int_deg() as usize == n);
        if !shapes_ok {
            return Err(Error::Shape("antighost form degrees".into()));
        }
        let state = Self { geo, omega, ghosts, anti, layout };
        if !state.ghost_window_audit() {
            return Err(Error::Shape(
                "ghost/antighost coefficients stray outside their generator windows".into(),
            ));
        }
        Ok(state)
    }

    /// Ghost coefficients may only use ghost-window generators and antighost
    /// coefficients only antighost-window generators.
    fn ghost_window_audit(&self) -> bool {
        let within = |f: &Field, k: i64| {
            f.values().iter().all(|fe| {
                fe.iter()
                    .all(|(_, _, g)| self.layout.is_homogeneous(g, k))
            })
        };
        within(&self.ghosts.c, 1)
            && self.ghosts.xi.iter().all(|f| within(f, 1))
            && within(&self.ghosts.lam, 1)
            && within(&self.anti.c_dag, -1)
            && within(&self.anti.lam_dag, -1)
            && self.anti.xi_dag.iter().all(|f| within(f, -1))
    }

    pub fn n(&self) -> usize {
        self.geo.n
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.geo.grid
    }

    /// The odd scalar-times-transversal-coframe combination `lam e_n` that
    /// every antighost coupling is built from.
    pub fn lam_en(&self) -> Field {
        self.geo.e_n.scalar_mul(&self.ghosts.lam)
    }
}
