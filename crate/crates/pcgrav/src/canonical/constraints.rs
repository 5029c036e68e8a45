use std::sync::Arc;

use crate::algebra::{Grassmann, InternalMetric};
use crate::fields::sample::{random_ghost_field, TrigProfile};
use crate::fields::{coframe_power, curvature, Field, Geometry, Grid};
use crate::slice::sigma_of;
use crate::Result;

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// The odd Lagrange multipliers of the three boundary constraints: an
/// internal-rotation parameter `c`, a tangent vector field `xi` given by its
/// scalar coordinate components, and a transversal scalar `lam`. All carry
/// ghost number +1.
#[derive(Debug, Clone)]
pub struct Multipliers {
    pub c: Field,
    pub xi: Vec<Field>,
    pub lam: Field,
}

/// Spatial profiles for sampling one multiplier set.
#[derive(Debug, Clone)]
pub struct MultiplierProfile {
    pub c: TrigProfile,
    pub xi: TrigProfile,
    pub lam: TrigProfile,
}

impl MultiplierProfile {
    pub fn constant(amplitude: f64) -> Self {
        Self {
            c: TrigProfile::constant(amplitude),
            xi: TrigProfile::constant(amplitude),
            lam: TrigProfile::constant(amplitude),
        }
    }
}

impl Multipliers {
    pub fn zero(grid: &Arc<Grid>) -> Self {
        Self {
            c: Field::zeros(grid, 0, 2, 1),
            xi: (0..grid.base_dim()).map(|_| Field::zeros(grid, 0, 0, 1)).collect(),
            lam: Field::zeros(grid, 0, 0, 1),
        }
    }

    /// Random odd multipliers polarized over three Grassmann generators per
    /// species, starting at generator `base`: `c` on `base..base+3`, `xi` on
    /// `base+3..base+6`, `lam` on `base+6..base+9`.
    pub fn random(
        grid: &Arc<Grid>,
        base: u32,
        rng: &mut impl rand::Rng,
        prof: &MultiplierProfile,
    ) -> Self {
        let gens = |k: u32| [base + 3 * k, base + 3 * k + 1, base + 3 * k + 2];
        Self {
            c: random_ghost_field(grid, 0, 2, &gens(0), 1, rng, &prof.c),
            xi: (0..grid.base_dim())
                .map(|_| random_ghost_field(grid, 0, 0, &gens(1), 1, rng, &prof.xi))
                .collect(),
            lam: random_ghost_field(grid, 0, 0, &gens(2), 1, rng, &prof.lam),
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
        odd(&self.c) && self.xi.iter().all(odd) && odd(&self.lam)
    }
}

/// Evaluation context: the background data entering the constraint
/// functionals. The dynamical pair `(e, omega)` is passed per call so the
/// same context serves probe-shifted evaluations; `e_n` stays fixed (it is
/// part of the multiplier structure, not a dynamical field).
pub(crate) struct EvalCtx<'a> {
    pub n: usize,
    pub eta: &'a InternalMetric,
    pub e_n: &'a Field,
    pub omega0: &'a Field,
    pub lambda: f64,
}

impl<'a> EvalCtx<'a> {
    pub fn of(geo: &'a Geometry) -> Self {
        Self {
            n: geo.n,
            eta: &geo.eta,
            e_n: &geo.e_n,
            omega0: &geo.omega0,
            lambda: geo.lambda,
        }
    }

    /// `L_c = int c e^{n-3} d_omega e`.
    pub fn l_value(&self, e: &Field, omega: &Field, c: &Field) -> Grassmann {
        c.wedge(&coframe_power(e, self.n - 3))
            .wedge(&e.d_omega(omega, self.eta))
            .integrate()
    }

    /// `P_xi = int iota_xi e e^{n-3} F_omega + iota_xi(omega - omega0)
    /// e^{n-3} d_omega e`.
    pub fn p_value(&self, e: &Field, omega: &Field, xi: &[Field]) -> Grassmann {
        let epow = coframe_power(e, self.n - 3);
        let f = curvature(omega, self.eta);
        let t1 = e.interior_product(xi).wedge(&epow).wedge(&f);
        let t2 = omega
            .sub(self.omega0)
            .interior_product(xi)
            .wedge(&epow)
            .wedge(&e.d_omega(omega, self.eta));
        t1.integrate().add(&t2.integrate())
    }

    /// `H_lam = int lam e_n (e^{n-3} F_omega + Lambda/(n-1)! e^{n-1})`.
    pub fn h_value(&self, e: &Field, omega: &Field, lam: &Field) -> Grassmann {
        let f = curvature(omega, self.eta);
        let inner = coframe_power(e, self.n - 3)
            .wedge(&f)
            .add(&coframe_power(e, self.n - 1).scale(self.lambda / factorial(self.n - 1)));
        self.e_n.scalar_mul(lam).wedge(&inner).integrate()
    }
}

/// The three constraint values at an on-slice connection. The structural
/// condition is checked first and an off-slice `omega` is an error.
pub fn eval_constraints(
    geo: &Geometry,
    omega: &Field,
    m: &Multipliers,
    tol: f64,
) -> Result<(Grassmann, Grassmann, Grassmann)> {
    sigma_of(omega, geo, tol)?;
    let ctx = EvalCtx::of(geo);
    Ok((
        ctx.l_value(&geo.e, omega, &m.c),
        ctx.p_value(&geo.e, omega, &m.xi),
        ctx.h_value(&geo.e, omega, &m.lam),
    ))
}

/// Coefficient derivative of a scalar `(0,0)` field along one axis (no
/// form bookkeeping, no parity twist).
pub fn partial_scalar(f: &Field, axis: usize) -> Field {
    assert_eq!((f.base_deg(), f.int_deg()), (0, 0));
    let grid = f.grid().clone();
    let mut out = Field::zeros(&grid, 0, 0, f.ghost().unwrap_or(0));
    for node in 0..grid.len() {
        let mut acc = crate::algebra::FibreElement::new(0, 0);
        for (src, w) in grid.derivative_stencil(node, axis) {
            acc = acc.add(&f.value(src).scale(w));
        }
        *out.value_mut(node) = acc;
    }
    out
}

/// Lie bracket of two odd tangent vector fields given by scalar components:
/// `[xi, zeta]^mu = xi^nu d_nu zeta^mu + zeta^nu d_nu xi^mu` (the graded
/// commutator terms add for odd arguments).
pub fn odd_vector_lie_bracket(xi: &[Field], zeta: &[Field]) -> Vec<Field> {
    assert_eq!(xi.len(), zeta.len());
    let dim = xi.len();
    (0..dim)
        .map(|mu| {
            let mut acc = Field::zeros(xi[0].grid(), 0, 0, 2);
            for nu in 0..dim {
                acc = acc
                    .add(&partial_scalar(&zeta[mu], nu).scalar_mul(&xi[nu]))
                    .add(&partial_scalar(&xi[mu], nu).scalar_mul(&zeta[nu]));
            }
            acc
        })
        .collect()
}
