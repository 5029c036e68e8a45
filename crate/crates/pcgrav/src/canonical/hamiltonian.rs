use crate::algebra::Grassmann;
use crate::fields::{coframe_power, curvature, covariant_lie, Field, Geometry};
use crate::slice::{frame_is_constant, sigma_of};
use crate::wedgemaps::{PointFrame, WMapSpec, WedgeSolver};
use crate::{Error, Result};

use super::constraints::{factorial, Multipliers};

/// One tangent direction on the boundary phase space. The connection leg is
/// kept both as a representative `(1,2)` field and pre-wedged into the
/// symplectic density `e^{n-3} ^ omega`, since every pairing consumes only
/// the latter and the representative is ambiguous up to the wedge kernel.
#[derive(Debug, Clone)]
pub struct TangentPair {
    pub e: Field,
    pub omega: Field,
    pub e_omega: Field,
    pub odd: bool,
}

impl TangentPair {
    pub fn from_legs(e_leg: Field, omega_leg: Field, geo: &Geometry, odd: bool) -> Self {
        let e_omega = coframe_power(&geo.e, geo.n - 3).wedge(&omega_leg);
        Self { e: e_leg, omega: omega_leg, e_omega, odd }
    }

    /// Build a pair whose connection leg is only known through its wedge
    /// density `e^{n-3} ^ omega`. The representative is the minimum-norm
    /// preimage per node; the wedge map is onto, so a nonzero residual means
    /// the density was malformed.
    pub fn from_density(e_leg: Field, density: Field, geo: &Geometry, odd: bool) -> Result<Self> {
        let spec = WMapSpec::boundary(geo.n, 1, 2, geo.n - 3);
        let shared =
            frame_is_constant(geo).then(|| WedgeSolver::new(spec, &PointFrame::at_node(geo, 0)));
        let mut omega_leg = Field::zeros(&geo.grid, 1, 2, density.ghost().unwrap_or(0));
        let scale = density.max_abs().max(1.0);
        for node in 0..geo.grid.len() {
            let (x, residual) = match &shared {
                Some(s) => s.solve_min_norm(density.value(node)),
                None => WedgeSolver::new(spec, &PointFrame::at_node(geo, node))
                    .solve_min_norm(density.value(node)),
            };
            if residual > 1e-8 * scale {
                return Err(Error::Solve(format!(
                    "density outside the wedge image: residual {residual:.3e} at node {node}"
                )));
            }
            *omega_leg.value_mut(node) = x;
        }
        Ok(Self { e: e_leg, omega: omega_leg, e_omega: density, odd })
    }

    pub fn zero(geo: &Geometry, odd: bool) -> Self {
        Self {
            e: Field::zeros(&geo.grid, 1, 1, 0),
            omega: Field::zeros(&geo.grid, 1, 2, 0),
            e_omega: Field::zeros(&geo.grid, (geo.n - 2) as u8, (geo.n - 1) as u8, 0),
            odd,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.e.max_abs().max(self.e_omega.max_abs())
    }
}

/// Hamiltonian vector fields of the three constraints at an on-slice
/// connection, together with the structural field `sigma` used by the
/// transversal field.
pub struct HamiltonianFields {
    pub l: TangentPair,
    pub p: TangentPair,
    pub h: TangentPair,
    pub sigma: Field,
}

/// The constraint one-forms inverted through the boundary symplectic form:
///
/// * internal rotations: `(de, domega) = ([c, e], d_omega c)`;
/// * tangent diffeomorphisms: `(-L_xi e, -L_xi (omega - omega0) -
///   iota_xi F_{omega0})` along the reference connection;
/// * transversal direction: `de = d_omega(lam e_n) + (n-3) lam sigma` with
///   the connection leg materialized from its density
///   `(n-3) lam e_n e^{n-4} F_omega + Lambda/(n-2)! lam e_n e^{n-2}`.
///
/// `e_n` is part of the multiplier structure and held fixed throughout.
pub fn hamiltonian_fields(
    geo: &Geometry,
    omega: &Field,
    m: &Multipliers,
    tol: f64,
) -> Result<HamiltonianFields> {
    let n = geo.n;
    let eta = &geo.eta;
    let sigma = sigma_of(omega, geo, tol)?;

    let l = TangentPair::from_legs(m.c.bracket(&geo.e, eta), m.c.d_omega(omega, eta), geo, true);

    let rel = omega.sub(&geo.omega0);
    let f0 = curvature(&geo.omega0, eta);
    let p = TangentPair::from_legs(
        covariant_lie(&m.xi, &geo.omega0, &geo.e, eta).neg(),
        covariant_lie(&m.xi, &geo.omega0, &rel, eta)
            .neg()
            .sub(&f0.interior_product(&m.xi)),
        geo,
        true,
    );

    let lam_en = geo.e_n.scalar_mul(&m.lam);
    let h_e = lam_en
        .d_omega(omega, eta)
        .add(&sigma.scalar_mul(&m.lam).scale((n - 3) as f64));
    let f = curvature(omega, eta);
    let h_density = lam_en
        .wedge(&coframe_power(&geo.e, n - 4))
        .wedge(&f)
        .scale((n - 3) as f64)
        .add(&lam_en.wedge(&coframe_power(&geo.e, n - 2)).scale(geo.lambda / factorial(n - 2)));
    let h = TangentPair::from_density(h_e, h_density, geo, true)?;

    Ok(HamiltonianFields { l, p, h, sigma })
}

/// Directional derivative of a functional of `(e, omega)` along a tangent
/// pair, taken exactly by shifting both legs with a nilpotent probe and
/// extracting the coefficient of the probe bivector.
pub fn probe_derivative(
    geo: &Geometry,
    omega: &Field,
    dir: &TangentPair,
    probe: (u32, u32),
    f: impl Fn(&Field, &Field) -> Grassmann,
) -> Grassmann {
    let te = geo.e.probe_shift(&dir.e, probe);
    let tw = omega.probe_shift(&dir.omega, probe);
    f(&te, &tw).extract_bit_pair(probe.0, probe.1)
}
