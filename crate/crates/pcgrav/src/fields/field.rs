//! Grassmann-valued bigraded forms on a periodic grid, with the discrete
//! graded calculus: exterior/covariant derivative, curvature, interior
//! product, covariant Lie derivative along odd or even vector fields, and
//! fibre integration of top-degree densities.

use crate::algebra::{insert_sign, FibreElement, Grassmann, InternalMetric};
use crate::fields::grid::Grid;
use std::sync::Arc;

/// Field of `(i, j)`-forms: one fibre element per grid node.
///
/// `ghost` is bookkeeping metadata (`None` after mixing inhomogeneous ghost
/// numbers); the algebraic content lives in the fibre values.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    base_deg: u8,
    int_deg: u8,
    ghost: Option<i32>,
    vals: Vec<FibreElement>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, base_deg: u8, int_deg: u8, ghost: i32) -> Self {
        Field {
            grid: grid.clone(),
            base_deg,
            int_deg,
            ghost: Some(ghost),
            vals: vec![FibreElement::new(base_deg, int_deg); grid.len()],
        }
    }

    pub fn from_fn(
        grid: &Arc<Grid>,
        base_deg: u8,
        int_deg: u8,
        ghost: i32,
        mut f: impl FnMut(usize) -> FibreElement,
    ) -> Self {
        let vals: Vec<FibreElement> = (0..grid.len()).map(&mut f).collect();
        for v in &vals {
            assert_eq!((v.base_deg(), v.int_deg()), (base_deg, int_deg));
        }
        Field {
            grid: grid.clone(),
            base_deg,
            int_deg,
            ghost: Some(ghost),
            vals,
        }
    }

    /// Spatially constant field.
    pub fn constant(grid: &Arc<Grid>, value: FibreElement, ghost: i32) -> Self {
        let (b, i) = (value.base_deg(), value.int_deg());
        Field {
            grid: grid.clone(),
            base_deg: b,
            int_deg: i,
            ghost: Some(ghost),
            vals: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn base_deg(&self) -> u8 {
        self.base_deg
    }

    pub fn int_deg(&self) -> u8 {
        self.int_deg
    }

    pub fn ghost(&self) -> Option<i32> {
        self.ghost
    }

    pub fn with_ghost(mut self, g: i32) -> Self {
        self.ghost = Some(g);
        self
    }

    pub fn value(&self, node: usize) -> &FibreElement {
        &self.vals[node]
    }

    pub fn value_mut(&mut self, node: usize) -> &mut FibreElement {
        &mut self.vals[node]
    }

    pub fn values(&self) -> &[FibreElement] {
        &self.vals
    }

    pub fn is_zero(&self) -> bool {
        self.vals.iter().all(|v| v.is_zero())
    }

    /// Largest absolute Grassmann coefficient over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }

    fn zip(&self, rhs: &Field, ghost: Option<i32>, f: impl Fn(&FibreElement, &FibreElement) -> FibreElement) -> Field {
        assert!(
            Arc::ptr_eq(&self.grid, &rhs.grid)
                || (self.grid.dims() == rhs.grid.dims() && self.grid.backend() == rhs.grid.backend()),
            "fields live on different grids"
        );
        let vals: Vec<FibreElement> = self.vals.iter().zip(&rhs.vals).map(|(a, b)| f(a, b)).collect();
        let (b, i) = if let Some(v) = vals.first() {
            (v.base_deg(), v.int_deg())
        } else {
            (0, 0)
        };
        Field {
            grid: self.grid.clone(),
            base_deg: b,
            int_deg: i,
            ghost,
            vals,
        }
    }

    fn map(&self, ghost: Option<i32>, f: impl Fn(&FibreElement) -> FibreElement) -> Field {
        let vals: Vec<FibreElement> = self.vals.iter().map(f).collect();
        let (b, i) = vals
            .first()
            .map(|v| (v.base_deg(), v.int_deg()))
            .unwrap_or((0, 0));
        Field {
            grid: self.grid.clone(),
            base_deg: b,
            int_deg: i,
            ghost,
            vals,
        }
    }

    fn same_ghost(a: Option<i32>, b: Option<i32>) -> Option<i32> {
        match (a, b) {
            (Some(x), Some(y)) if x == y => Some(x),
            _ => None,
        }
    }

    fn sum_ghost(a: Option<i32>, b: Option<i32>) -> Option<i32> {
        match (a, b) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        }
    }

    pub fn add(&self, rhs: &Field) -> Field {
        self.zip(rhs, Self::same_ghost(self.ghost, rhs.ghost), |a, b| a.add(b))
    }

    pub fn sub(&self, rhs: &Field) -> Field {
        self.zip(rhs, Self::same_ghost(self.ghost, rhs.ghost), |a, b| a.sub(b))
    }

    pub fn neg(&self) -> Field {
        self.map(self.ghost, |a| a.neg())
    }

    pub fn scale(&self, x: f64) -> Field {
        self.map(self.ghost, |a| a.scale(x))
    }

    /// Left multiplication by a constant Grassmann scalar.
    pub fn mul_grassmann_left(&self, g: &Grassmann, ghost_shift: Option<i32>) -> Field {
        self.map(Self::sum_ghost(self.ghost, ghost_shift), |a| a.mul_grassmann_left(g))
    }

    /// Pointwise wedge.
    pub fn wedge(&self, rhs: &Field) -> Field {
        self.zip(rhs, Self::sum_ghost(self.ghost, rhs.ghost), |a, b| a.wedge(b))
    }

    /// Pointwise action bracket (left factor internally of degree 2).
    pub fn bracket(&self, rhs: &Field, eta: &InternalMetric) -> Field {
        self.zip(rhs, Self::sum_ghost(self.ghost, rhs.ghost), |a, b| a.bracket(b, eta))
    }

    /// Left multiplication by a scalar `(0,0)` field.
    pub fn scalar_mul(&self, scalar: &Field) -> Field {
        assert_eq!((scalar.base_deg, scalar.int_deg), (0, 0));
        scalar.zip(self, Self::sum_ghost(scalar.ghost, self.ghost), |s, a| {
            a.mul_grassmann_left(&s.coeff(0, 0))
        })
    }

    /// `self + th_{p1} th_{p2} * dir`: shift along a direction by the even
    /// nilpotent probe parameter; the coefficient of the probe pair in any
    /// functional of the result is the exact directional derivative.
    pub fn probe_shift(&self, dir: &Field, probe: (u32, u32)) -> Field {
        let t = Grassmann::generator(probe.0).mul(&Grassmann::generator(probe.1));
        self.add_scaled_grassmann(dir, &t)
    }

    /// `self + g * dir` for a constant even Grassmann scalar `g`.
    pub fn add_scaled_grassmann(&self, dir: &Field, g: &Grassmann) -> Field {
        self.zip(dir, Self::same_ghost(self.ghost, dir.ghost), |a, b| {
            a.add(&b.mul_grassmann_left(g))
        })
    }

    /// Exterior derivative: coefficient derivative along each axis, then
    /// `dx^axis` wedged in from the left; as an odd operator it passes the
    /// coefficient with its parity sign.
    pub fn d(&self) -> Field {
        let grid = &self.grid;
        let mut out = Field::zeros(grid, self.base_deg + 1, self.int_deg, self.ghost.unwrap_or(0));
        out.ghost = self.ghost;
        for axis in 0..grid.base_dim() {
            for node in 0..grid.len() {
                let mut dval = FibreElement::new(self.base_deg, self.int_deg);
                for (src, w) in grid.derivative_stencil(node, axis) {
                    dval = dval.add(&self.vals[src].scale(w));
                }
                for (p, b, g) in dval.iter() {
                    if let Some((pnew, sign)) = insert_sign(p, axis as u32) {
                        out.vals[node].add_term(pnew, b, g.parity_twisted().scale(sign as f64));
                    }
                }
            }
        }
        out
    }

    /// Covariant derivative `d self + [omega, self]`.
    pub fn d_omega(&self, omega: &Field, eta: &InternalMetric) -> Field {
        self.d().add(&omega.bracket(self, eta))
    }

    /// Interior product with the base vector `d/dx^axis`.
    pub fn interior_base(&self, axis: usize) -> Field {
        self.map(self.ghost, |a| a.interior_base(axis as u32))
    }

    /// Interior product `iota_xi = sum_a xi^a iota_a` with scalar component
    /// fields of any parity.
    pub fn interior_product(&self, xi: &[Field]) -> Field {
        assert_eq!(xi.len(), self.grid.base_dim());
        let mut out = Field::zeros(&self.grid, self.base_deg.saturating_sub(1), self.int_deg, 0);
        out.ghost = None;
        for (a, comp) in xi.iter().enumerate() {
            out = out.add_raw(&self.interior_base(a).scalar_mul(comp));
        }
        out.ghost = Self::sum_ghost(self.ghost, xi[0].ghost);
        out
    }

    /// Sum ignoring ghost metadata mismatches (internal accumulator).
    fn add_raw(&self, rhs: &Field) -> Field {
        self.zip(rhs, self.ghost.or(rhs.ghost), |a, b| a.add(b))
    }

    /// Integral of a top-degree density: the coefficient of
    /// `dx^{0..d-1} (x) u_{0..N-1}` summed with the cell volume. The internal
    /// dimension is the base dimension plus one.
    pub fn integrate(&self) -> Grassmann {
        let d = self.grid.base_dim();
        assert_eq!(self.base_deg as usize, d, "integrand must be base-top");
        assert_eq!(self.int_deg as usize, d + 1, "integrand must be internal-top");
        let base_mask = (1u32 << d) - 1;
        let int_mask = (1u32 << (d + 1)) - 1;
        let mut total = Grassmann::zero();
        for v in &self.vals {
            total = total.add(&v.coeff(base_mask, int_mask));
        }
        total.scale(self.grid.cell_volume())
    }

    /// Split into Grassmann-even and Grassmann-odd coefficient parts.
    pub fn parity_split(&self) -> (Field, Field) {
        let even = self.map(self.ghost, |a| a.parity_split().0);
        let odd = self.map(self.ghost, |a| a.parity_split().1);
        (even, odd)
    }
}

/// Curvature `F = d omega + (1/2)[omega, omega]`.
pub fn curvature(omega: &Field, eta: &InternalMetric) -> Field {
    omega.d().add(&omega.bracket(omega, eta).scale(0.5))
}

/// Covariant Lie derivative along a vector field with scalar components
/// `xi^a` of arbitrary (even mixed) Grassmann parity:
/// `L_xi = [iota_xi, d_omega]` as a super-commutator. For an odd multiplier
/// `iota_xi` is even and the commutator is a difference; for an even
/// multiplier it is the usual Cartan anticommutator.
pub fn covariant_lie(xi: &[Field], omega: &Field, a: &Field, eta: &InternalMetric) -> Field {
    let d_a = a.d_omega(omega, eta);
    let mut out = Field::zeros(a.grid(), a.base_deg(), a.int_deg(), 0);
    let mut first = true;
    for parity in [0u32, 1] {
        let parts: Vec<Field> = xi
            .iter()
            .map(|c| {
                let (e, o) = c.parity_split();
                if parity == 0 {
                    e
                } else {
                    o
                }
            })
            .collect();
        if parts.iter().all(|p| p.is_zero()) {
            continue;
        }
        let term1 = d_a.interior_product(&parts);
        // For base degree 0 the inner interior product annihilates and the
        // second Cartan term is zero of the right shape.
        let term2 = if a.base_deg() == 0 {
            Field::zeros(a.grid(), a.base_deg(), a.int_deg(), 0)
        } else {
            a.interior_product(&parts).d_omega(omega, eta)
        };
        // xi even => iota_xi odd => anticommutator; xi odd => commutator.
        let combo = if parity == 0 {
            term1.add_raw(&term2)
        } else {
            term1.sub_raw(&term2)
        };
        out = if first { combo } else { out.add_raw(&combo) };
        first = false;
    }
    out
}

impl Field {
    fn sub_raw(&self, rhs: &Field) -> Field {
        self.zip(rhs, self.ghost.or(rhs.ghost), |a, b| a.sub(b))
    }
}
