//! Reduction of an arbitrary boundary connection to the structural slice.
//!
//! A connection field decomposes uniquely as `omega_tilde = omega + v` where
//! `v(x)` lies in the kernel of the (1,2) wedge map at each node and `omega`
//! satisfies the structural condition `e_n ^ e^{n-4} ^ d_omega e =
//! e^{n-3} ^ sigma` for a (1,1)-form `sigma`. The split is the pointwise
//! weighted-density solve from `wedgemaps`, applied to
//! `beta = e_n ^ e^{n-4} ^ d_{omega_tilde} e`.

use nalgebra::DMatrix;

use crate::algebra::Grassmann;
use crate::fields::{Field, Geometry};
use crate::wedgemaps::{
    boundary_kernel_dim, omega_dim, BetaSolver, FibreBasis, PointFrame, WMapSpec, WedgeSolver,
};
use crate::{Error, Result};

/// Result of reducing a connection to the structural slice.
#[derive(Debug, Clone)]
pub struct SliceDecomposition {
    /// The slice representative: `omega_tilde - v`.
    pub omega: Field,
    /// Nodewise kernel component of the input connection.
    pub v: Field,
    /// The (1,1)-form with `e_n ^ e^{n-4} ^ d_omega e = e^{n-3} ^ sigma`.
    pub sigma: Field,
    /// Worst nodewise reconstruction error of the weighted-density solve.
    pub split_residual: f64,
    /// `max |e_n ^ e^{n-4} ^ d_omega e - e^{n-3} ^ sigma|` after reduction.
    pub residual: f64,
}

pub(crate) fn frame_is_constant(geo: &Geometry) -> bool {
    let e0 = geo.e.value(0);
    let en0 = geo.e_n.value(0);
    (1..geo.grid.len()).all(|k| {
        geo.e.value(k).sub(e0).max_abs() == 0.0 && geo.e_n.value(k).sub(en0).max_abs() == 0.0
    })
}

/// Per-node solvers for a geometry, sharing one factorization when the
/// coframe is spatially constant.
struct NodeSolvers {
    shared: Option<BetaSolver>,
}

impl NodeSolvers {
    fn new(geo: &Geometry) -> Result<Self> {
        Ok(Self {
            shared: frame_is_constant(geo)
                .then(|| BetaSolver::new(&PointFrame::at_node(geo, 0)))
                .transpose()?,
        })
    }

    fn with_node<T>(
        &self,
        geo: &Geometry,
        node: usize,
        f: impl FnOnce(&BetaSolver) -> T,
    ) -> Result<T> {
        match &self.shared {
            Some(s) => Ok(f(s)),
            None => Ok(f(&BetaSolver::new(&PointFrame::at_node(geo, node))?)),
        }
    }
}

/// Splits `omega_tilde` into a slice representative, its nodewise kernel
/// component, and the structural (1,1)-form.
pub fn decompose_connection(omega_tilde: &Field, geo: &Geometry) -> Result<SliceDecomposition> {
    let n = geo.n;
    assert_eq!(
        (omega_tilde.base_deg(), omega_tilde.int_deg()),
        (1, 2),
        "expected a connection field"
    );
    let dcov = geo.e.d_omega(omega_tilde, &geo.eta);
    let prefix = geo.e_n.wedge(&geo.e_pow(n - 4));
    let beta = prefix.wedge(&dcov);

    let solvers = NodeSolvers::new(geo)?;
    let mut sigma = Field::zeros(&geo.grid, 1, 1, 0);
    let mut v = Field::zeros(&geo.grid, 1, 2, 0);
    let mut split_residual = 0.0f64;
    for node in 0..geo.grid.len() {
        let split = solvers.with_node(geo, node, |s| s.solve(beta.value(node)))?;
        split_residual = split_residual.max(split.residual);
        *sigma.value_mut(node) = split.gamma;
        *v.value_mut(node) = split.v;
    }
    let omega = omega_tilde.sub(&v);

    let check = prefix
        .wedge(&geo.e.d_omega(&omega, &geo.eta))
        .sub(&geo.e_pow(n - 3).wedge(&sigma));
    let residual = check.max_abs();
    Ok(SliceDecomposition {
        omega,
        v,
        sigma,
        split_residual,
        residual,
    })
}

/// Orthogonal projector of nodal (1,2)-data onto `Ker W_{n-3}^{(1,2)}` at
/// one node. Idempotent, of trace `n (n-1) (n-3) / 2`, and annihilated by
/// the wedge map.
pub fn kernel_projector(geo: &Geometry, node: usize) -> Result<DMatrix<f64>> {
    Ok(BetaSolver::new(&PointFrame::at_node(geo, node))?.kernel_projector())
}

/// Projects a (1,2) field nodewise onto the kernel of the wedge map.
pub fn project_kernel(x: &Field, geo: &Geometry) -> Result<Field> {
    assert_eq!((x.base_deg(), x.int_deg()), (1, 2), "expected (1,2) data");
    let basis = FibreBasis::new(geo.n - 1, geo.n, 1, 2);
    let solvers = NodeSolvers::new(geo)?;
    let mut out = Field::zeros(&geo.grid, 1, 2, x.ghost().unwrap_or(0));
    for node in 0..geo.grid.len() {
        let projected = solvers.with_node(geo, node, |s| {
            let p = s.kernel_projector();
            let xv = x.value(node);
            let mut fe = crate::algebra::FibreElement::new(1, 2);
            for gmask in FibreBasis::monomials_of(xv) {
                let coords = &p * basis.vectorize_monomial(xv, gmask);
                for (idx, &c) in coords.iter().enumerate() {
                    if c != 0.0 {
                        let (bm, im) = basis.masks(idx);
                        fe.add_term(bm, im, Grassmann::monomial(gmask, c));
                    }
                }
            }
            fe
        })?;
        *out.value_mut(node) = projected;
    }
    Ok(out)
}

/// Projects a (1,2) field nodewise onto the variations preserving the
/// structural condition at fixed coframe, along the kernel: the image
/// satisfies `e_n ^ e^{n-4} ^ [x, e] in Ima W^{(1,1)}` and the discarded
/// part lies in `Ker W^{(1,2)}`.
pub fn project_slice_tangent(x: &Field, geo: &Geometry) -> Result<Field> {
    assert_eq!((x.base_deg(), x.int_deg()), (1, 2), "expected (1,2) data");
    let prefix = geo.e_n.wedge(&geo.e_pow(geo.n - 4));
    let beta = prefix.wedge(&x.bracket(&geo.e, &geo.eta));
    let solvers = NodeSolvers::new(geo)?;
    let mut out = x.clone();
    for node in 0..geo.grid.len() {
        let split = solvers.with_node(geo, node, |s| s.solve(beta.value(node)))?;
        *out.value_mut(node) = x.value(node).sub(&split.v);
    }
    Ok(out)
}

/// Recovers the structural (1,1)-form of a connection already on the slice
/// by least-squares inversion of the injective (1,1) wedge map. Fails with
/// an off-slice error when the defect exceeds `tol` relative to the data.
pub fn sigma_of(omega: &Field, geo: &Geometry, tol: f64) -> Result<Field> {
    let n = geo.n;
    assert_eq!((omega.base_deg(), omega.int_deg()), (1, 2), "expected a connection field");
    let dcov = geo.e.d_omega(omega, &geo.eta);
    let prefix = geo.e_n.wedge(&geo.e_pow(n - 4));
    let beta = prefix.wedge(&dcov);
    let scale = beta.max_abs().max(1.0);

    let spec = WMapSpec::boundary(n, 1, 1, n - 3);
    let shared = frame_is_constant(geo)
        .then(|| WedgeSolver::new(spec, &PointFrame::at_node(geo, 0)));
    let mut sigma = Field::zeros(&geo.grid, 1, 1, 0);
    for node in 0..geo.grid.len() {
        let local;
        let solver = match &shared {
            Some(s) => s,
            None => {
                local = WedgeSolver::new(spec, &PointFrame::at_node(geo, node));
                &local
            }
        };
        // e^{n-3} is even, so sigma ^ e^{n-3} = e^{n-3} ^ sigma and the
        // wedge-map solver applies directly.
        let (x, residual) = solver.solve_min_norm(beta.value(node));
        if residual > tol * scale {
            return Err(Error::Solve(format!(
                "off-slice input: structural defect {residual:.3e} at node {node}"
            )));
        }
        *sigma.value_mut(node) = x;
    }
    Ok(sigma)
}

/// Closed-form dimension audit of the nodal split of connection space:
/// `(dim Omega^{1,2}, dim Ker W^{(1,2)}, dim of the slice complement)`.
pub fn dimension_audit(n: usize) -> (usize, usize, usize) {
    let domain = omega_dim(n - 1, n, 1, 2);
    let kernel = boundary_kernel_dim(n);
    (domain, kernel, domain - kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::sample::{perturbed_geometry, random_real_field, TrigProfile};
    use crate::fields::{Backend, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid4() -> Arc<Grid> {
        Arc::new(Grid::new(&[4, 4, 4], Backend::FiniteDifference))
    }

    #[test]
    fn decomposition_satisfies_the_structural_condition() {
        let grid = grid4();
        let geo = Geometry::identity(4, &grid, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let prof = TrigProfile::all_axes(3, 1, 0.8);
        let omega_tilde = random_real_field(&grid, 1, 2, &mut rng, &prof);

        let dec = decompose_connection(&omega_tilde, &geo).unwrap();
        assert!(dec.split_residual < 1e-12);
        assert!(dec.residual < 1e-12);
        // v + omega reassembles the input exactly
        assert!(dec.omega.add(&dec.v).sub(&omega_tilde).max_abs() < 1e-14);
        // v is nodewise in the kernel of the (1,2) wedge map
        let kernel_defect = dec.v.wedge(&geo.e_pow(1)).max_abs();
        assert!(kernel_defect < 1e-12);
    }

    #[test]
    fn decomposition_is_gauge_independent() {
        let grid = grid4();
        let geo = Geometry::identity(4, &grid, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let prof = TrigProfile::all_axes(3, 1, 0.8);
        let omega_tilde = random_real_field(&grid, 1, 2, &mut rng, &prof);
        let shift = project_kernel(&random_real_field(&grid, 1, 2, &mut rng, &prof), &geo).unwrap();
        assert!(shift.max_abs() > 1e-3);

        let a = decompose_connection(&omega_tilde, &geo).unwrap();
        let b = decompose_connection(&omega_tilde.add(&shift), &geo).unwrap();
        let scale = a.omega.max_abs();
        assert!(b.omega.sub(&a.omega).max_abs() < 1e-9 * scale);
        assert!(b.sigma.sub(&a.sigma).max_abs() < 1e-9 * scale);
        assert!(b.v.sub(&a.v.add(&shift)).max_abs() < 1e-9 * scale);
    }

    #[test]
    fn projector_is_idempotent_with_the_right_image() {
        let grid = grid4();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let geo = perturbed_geometry(
            4,
            &grid,
            &mut rng,
            &TrigProfile::all_axes(3, 1, 0.15),
            0.0,
        )
        .unwrap();
        let node = 7;
        let p = kernel_projector(&geo, node).unwrap();
        assert_eq!(p.nrows(), 18);
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((p.trace() - 6.0).abs() < 1e-10);
        let w12 = crate::wedgemaps::assemble_map(
            &WMapSpec::boundary(4, 1, 2, 1),
            &PointFrame::at_node(&geo, node),
        );
        assert!((w12 * &p).amax() < 1e-12);
    }

    #[test]
    fn tangent_projector_splits_connection_variations() {
        let grid = grid4();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let geo = perturbed_geometry(
            4,
            &grid,
            &mut rng,
            &TrigProfile::all_axes(3, 1, 0.15),
            0.0,
        )
        .unwrap();
        let x = random_real_field(&grid, 1, 2, &mut rng, &TrigProfile::all_axes(3, 1, 0.8));
        let t = project_slice_tangent(&x, &geo).unwrap();
        let scale = x.max_abs();

        // idempotent, and the discarded part is nodewise kernel data
        assert!(project_slice_tangent(&t, &geo).unwrap().sub(&t).max_abs() < 1e-9 * scale);
        let v = x.sub(&t);
        assert!(v.max_abs() > 1e-3 * scale);
        assert!(v.wedge(&geo.e_pow(1)).max_abs() < 1e-9 * scale);
        let kept = project_kernel(&v, &geo).unwrap();
        assert!(kept.sub(&v).max_abs() < 1e-9 * scale);

        // kernel data projects to zero
        let k = project_kernel(&x, &geo).unwrap();
        assert!(project_slice_tangent(&k, &geo).unwrap().max_abs() < 1e-9 * scale);

        // the image satisfies the linearized structural condition
        let beta = geo
            .e_n
            .wedge(&geo.e_pow(0))
            .wedge(&t.bracket(&geo.e, &geo.eta));
        let mut defect = 0.0f64;
        for node in 0..grid.len() {
            let split =
                crate::wedgemaps::beta_decompose(beta.value(node), &PointFrame::at_node(&geo, node))
                    .unwrap();
            defect = defect.max(split.v.max_abs());
        }
        assert!(defect < 1e-9 * beta.max_abs().max(1.0));
    }

    #[test]
    fn sigma_recovery_matches_and_rejects_off_slice_input() {
        let grid = grid4();
        let geo = Geometry::identity(4, &grid, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let prof = TrigProfile::all_axes(3, 1, 0.8);
        let omega_tilde = random_real_field(&grid, 1, 2, &mut rng, &prof);
        let dec = decompose_connection(&omega_tilde, &geo).unwrap();

        let sigma = sigma_of(&dec.omega, &geo, 1e-10).unwrap();
        assert!(sigma.sub(&dec.sigma).max_abs() < 1e-10);

        assert!(dec.v.max_abs() > 1e-3, "input happens to lie on the slice");
        let err = sigma_of(&omega_tilde, &geo, 1e-10).unwrap_err();
        assert!(err.to_string().contains("off-slice"));
    }

    #[test]
    fn varying_coframe_decomposition_stays_within_tolerance() {
        let grid = grid4();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let geo = perturbed_geometry(
            4,
            &grid,
            &mut rng,
            &TrigProfile::all_axes(3, 1, 0.15),
            0.0,
        )
        .unwrap();
        let omega_tilde = random_real_field(&grid, 1, 2, &mut rng, &TrigProfile::all_axes(3, 1, 0.8));
        let dec = decompose_connection(&omega_tilde, &geo).unwrap();
        assert!(dec.split_residual < 1e-10);
        assert!(dec.residual < 1e-10);
        assert!(dec.omega.add(&dec.v).sub(&omega_tilde).max_abs() < 1e-12);
    }

    #[test]
    fn dimension_audit_at_n4() {
        assert_eq!(dimension_audit(4), (18, 6, 12));
        assert_eq!(dimension_audit(5), (40, 20, 20));
    }
}
