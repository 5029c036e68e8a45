use nalgebra::{DMatrix, DVector};

use crate::algebra::{Grassmann, Mask};
use crate::canonical::{hamiltonian_fields, odd_vector_lie_bracket, TangentPair};
use crate::fields::{covariant_lie, curvature, frame_components, Field, Geometry};
use crate::slice::frame_is_constant;
use crate::wedgemaps::{BetaSolver, FibreBasis, PointFrame};
use crate::{Error, Result};

use super::state::BfvState;

/// The cohomological vector field of the extended action, componentwise.
///
/// `q0` is the antighost-independent part on `(e, omega)` (the sum of the
/// three constraint Hamiltonian fields with ghosts as multipliers); `qc`,
/// `qlam`, `qxi` are the ghost components; `q1e` and `q1_e_omega` carry the
/// antighost-linear part of the `(e, omega)` flow in the two slots of the
/// boundary symplectic pairing.
///
/// The coframe leg `q1e` is read off against slice-tangent variations of
/// the connection only: kernel variations are fixed by the structural
/// representative, so they carry no coefficient equation, and the displayed
/// density does not annihilate them. `q1_e_omega` is the `e^{n-3}`-density
/// of the connection leg, the slot coefficient of the coframe variation;
/// the weighted wedge onto that density space is onto, so a connection leg
/// always exists and none is selected.
pub struct CohomologicalField {
    pub q0: TangentPair,
    pub qc: Field,
    pub qlam: Field,
    pub qxi: Vec<Field>,
    pub q1e: Field,
    pub q1_e_omega: Field,
    /// Largest relative defect of the wedge solve recovering `q1e` from its
    /// `e^{n-3}`-density.
    pub q1e_residual: f64,
}

/// Per-node top coefficients of the rhs integrand against each constant
/// test-basis indicator field: `rhs[node][j]`. The displayed coefficient
/// functionals are pointwise in the test direction, so a constant indicator
/// recovers the nodal values in one grid-wide pass per basis element.
fn nodal_rhs(
    st: &BfvState,
    test_basis: &FibreBasis,
    rhs_of: &dyn Fn(&Field) -> Field,
) -> Vec<Vec<Grassmann>> {
    let grid = st.grid();
    let n = st.n();
    let base_top: Mask = (1 << (n - 1)) - 1;
    let int_top: Mask = (1 << n) - 1;
    let dim = test_basis.dim();
    let mut rhs: Vec<Vec<Grassmann>> = vec![vec![Grassmann::zero(); dim]; grid.len()];
    for j in 0..dim {
        let mut indicator = Field::zeros(
            grid,
            test_basis.element(j).base_deg(),
            test_basis.element(j).int_deg(),
            0,
        );
        for node in 0..grid.len() {
            *indicator.value_mut(node) = test_basis.element(j);
        }
        let integrand = rhs_of(&indicator);
        for node in 0..grid.len() {
            rhs[node][j] = integrand.value(node).coeff(base_top, int_top);
        }
    }
    rhs
}

/// Solves the pointwise pairing `unknown ^ test = rhs` (or `test ^ unknown`
/// when `unknown_left` is false) for a field of `unknown_basis`-valued
/// coefficients, given the top-form rhs integrand produced by each constant
/// test-basis indicator field. The pairing of complementary-degree bases is
/// a square invertible matrix, the same at every node.
fn pairing_solve(
    st: &BfvState,
    unknown_basis: &FibreBasis,
    test_basis: &FibreBasis,
    unknown_left: bool,
    ghost: i32,
    rhs_of: &dyn Fn(&Field) -> Field,
) -> Result<Field> {
    let grid = st.grid();
    let n = st.n();
    let base_top: Mask = (1 << (n - 1)) - 1;
    let int_top: Mask = (1 << n) - 1;
    let dim = unknown_basis.dim();
    assert_eq!(dim, test_basis.dim());

    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let b = test_basis.element(j);
        for i in 0..dim {
            let u = unknown_basis.element(i);
            let prod = if unknown_left { u.wedge(&b) } else { b.wedge(&u) };
            m[(j, i)] = prod.coeff(base_top, int_top).body();
        }
    }
    let lu = m.lu();

    let rhs = nodal_rhs(st, test_basis, rhs_of);

    let (ub, ui) = (
        unknown_basis.element(0).base_deg(),
        unknown_basis.element(0).int_deg(),
    );
    let mut out = Field::zeros(grid, ub, ui, ghost);
    for node in 0..grid.len() {
        let mut masks: Vec<u64> = Vec::new();
        for g in &rhs[node] {
            for (mask, _) in g.terms() {
                if !masks.contains(&mask) {
                    masks.push(mask);
                }
            }
        }
        for mask in masks {
            let v = DVector::from_iterator(dim, rhs[node].iter().map(|g| g.coeff(mask)));
            let x = lu
                .solve(&v)
                .ok_or_else(|| Error::Solve("degenerate fibre pairing".into()))?;
            for i in 0..dim {
                if x[i] != 0.0 {
                    let (bm, im) = unknown_basis.masks(i);
                    out.value_mut(node)
                        .add_term(bm, im, Grassmann::monomial(mask, x[i]));
                }
            }
        }
    }
    Ok(out)
}

/// Pairing of the coframe wedge `e^{n-3} ^ (1,1)-unknown` against the
/// slice-tangent variations of the connection at one node: the restricted
/// square system `m`, its factorization, and the tangent basis `t` used to
/// project full-basis rhs vectors.
struct TangentSystem {
    t: DMatrix<f64>,
    m: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

fn tangent_system(
    geo: &Geometry,
    node: usize,
    dw_basis: &FibreBasis,
    unknown_basis: &FibreBasis,
) -> Result<TangentSystem> {
    let n = geo.n;
    let base_top: Mask = (1 << (n - 1)) - 1;
    let int_top: Mask = (1 << n) - 1;
    let frame = PointFrame::at_node(geo, node);
    let t = BetaSolver::new(&frame)?.tangent_basis();
    let epow = frame.e_pow(n - 3);
    let mut g = DMatrix::<f64>::zeros(dw_basis.dim(), unknown_basis.dim());
    for k in 0..dw_basis.dim() {
        let b = dw_basis.element(k);
        for i in 0..unknown_basis.dim() {
            g[(k, i)] = epow
                .wedge(&unknown_basis.element(i))
                .wedge(&b)
                .coeff(base_top, int_top)
                .body();
        }
    }
    let m = t.tr_mul(&g);
    let lu = m.clone().lu();
    if !lu.is_invertible() {
        return Err(Error::Solve(
            "degenerate pairing of the coframe wedge against slice-tangent variations".into(),
        ));
    }
    Ok(TangentSystem { t, m, lu })
}

/// Extracts the antighost-linear `(e, omega)` flow from the displayed
/// variation of the antighost couplings: the `delta omega` coefficient,
/// restricted to slice-tangent variations, determines `q1e`, and the
/// `delta e` coefficient determines the `e^{n-3}`-density of the
/// connection leg.
fn extract_q1(st: &BfvState) -> Result<(Field, Field, f64)> {
    let geo = &st.geo;
    let eta = &geo.eta;
    let n = st.n();
    let base_dim = n - 1;
    let lam_en = st.lam_en();
    let chi = st.ghosts.c.bracket(&lam_en, eta);
    let chi_parts = frame_components(&geo.e, &geo.e_n, &chi);
    let lie = covariant_lie(&st.ghosts.xi, &geo.omega0, &lam_en, eta);
    let lie_parts = frame_components(&geo.e, &geo.e_n, &lie);
    let s: Vec<Field> = (0..n)
        .map(|m| lie_parts[m].sub(&chi_parts[m]))
        .collect();
    let rel = st.omega.sub(&geo.omega0);
    let pair: Vec<Field> = (0..n - 1)
        .map(|a| st.anti.xi_dag[a].sub(&rel.interior_base(a).wedge(&st.anti.c_dag)))
        .collect();

    // delta-omega coefficient: (e^{n-3} ^ q1e ^ dw)_top = -(sum_a s_a dw_a
    // c_dag) for slice-tangent dw. Tested against the full coordinate basis
    // and projected, the system is square: the tangent dimension equals
    // dim Omega^{1,1} in every dimension.
    let dw_basis = FibreBasis::new(base_dim, n, 1, 2);
    let q1e_basis = FibreBasis::new(base_dim, n, 1, 1);
    let psi = |dw: &Field| -> Field {
        let mut acc = Field::zeros(st.grid(), (n - 1) as u8, n as u8, 0);
        for a in 0..n - 1 {
            acc = acc.add(
                &dw.interior_base(a)
                    .wedge(&st.anti.c_dag)
                    .scalar_mul(&s[a])
                    .neg(),
            );
        }
        acc
    };
    let rhs = nodal_rhs(st, &dw_basis, &psi);
    let scale = rhs
        .iter()
        .flatten()
        .flat_map(|g| g.terms().map(|(_, c)| c.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);

    let shared = frame_is_constant(geo)
        .then(|| tangent_system(geo, 0, &dw_basis, &q1e_basis))
        .transpose()?;
    let mut q1e = Field::zeros(st.grid(), 1, 1, 1);
    let mut worst = 0.0f64;
    for node in 0..st.grid().len() {
        let local;
        let sys = match &shared {
            Some(s) => s,
            None => {
                local = tangent_system(geo, node, &dw_basis, &q1e_basis)?;
                &local
            }
        };
        let mut masks: Vec<u64> = Vec::new();
        for g in &rhs[node] {
            for (mask, _) in g.terms() {
                if !masks.contains(&mask) {
                    masks.push(mask);
                }
            }
        }
        for mask in masks {
            let full =
                DVector::from_iterator(dw_basis.dim(), rhs[node].iter().map(|g| g.coeff(mask)));
            let proj = sys.t.tr_mul(&full);
            let x = sys.lu.solve(&proj).expect("factored system is invertible");
            worst = worst.max((&sys.m * &x - &proj).amax() / scale);
            for i in 0..q1e_basis.dim() {
                if x[i] != 0.0 {
                    let (bm, im) = q1e_basis.masks(i);
                    q1e.value_mut(node)
                        .add_term(bm, im, Grassmann::monomial(mask, x[i]));
                }
            }
        }
    }
    if worst > 1e-8 {
        return Err(Error::Solve(format!(
            "antighost-linear coframe solve defect {worst:.3e}"
        )));
    }

    // delta-e coefficient: (de ^ E)_top = sum_b s_b (de_b^(a) pair_a + de_b^(n) lam_dag).
    let e_basis = FibreBasis::new(base_dim, n, n - 2, n - 1);
    let de_basis = FibreBasis::new(base_dim, n, 1, 1);
    let phi = |de: &Field| -> Field {
        let mut acc = Field::zeros(st.grid(), (n - 1) as u8, n as u8, 0);
        for b in 0..n - 1 {
            let comps = frame_components(&geo.e, &geo.e_n, &de.interior_base(b));
            for a in 0..n - 1 {
                acc = acc.add(&pair[a].scalar_mul(&comps[a]).scalar_mul(&s[b]));
            }
            acc = acc.add(&st.anti.lam_dag.scalar_mul(&comps[n - 1]).scalar_mul(&s[b]));
        }
        acc
    };
    let e_density = pairing_solve(st, &e_basis, &de_basis, false, 1, &phi)?;

    Ok((q1e, e_density, worst))
}

/// Assembles the full cohomological vector field at a BFV state.
pub fn cohomological_vf(st: &BfvState, tol: f64) -> Result<CohomologicalField> {
    let geo = &st.geo;
    let eta = &geo.eta;
    let n = st.n();
    let hf = hamiltonian_fields(geo, &st.omega, &st.ghosts, tol)?;
    let q0 = TangentPair {
        e: hf.l.e.add(&hf.p.e).add(&hf.h.e),
        omega: hf.l.omega.add(&hf.p.omega).add(&hf.h.omega),
        e_omega: hf.l.e_omega.add(&hf.p.e_omega).add(&hf.h.e_omega),
        odd: true,
    };

    let lam_en = st.lam_en();
    let chi = st.ghosts.c.bracket(&lam_en, eta);
    let chi_parts = frame_components(&geo.e, &geo.e_n, &chi);
    let lie = covariant_lie(&st.ghosts.xi, &geo.omega0, &lam_en, eta);
    let lie_parts = frame_components(&geo.e, &geo.e_n, &lie);
    let rel = st.omega.sub(&geo.omega0);
    let f0 = curvature(&geo.omega0, eta);
    let zz = odd_vector_lie_bracket(&st.ghosts.xi, &st.ghosts.xi);

    let mut qc = st
        .ghosts
        .c
        .bracket(&st.ghosts.c, eta)
        .scale(0.5)
        .sub(&covariant_lie(&st.ghosts.xi, &geo.omega0, &st.ghosts.c, eta))
        .add(
            &f0.interior_product(&st.ghosts.xi)
                .interior_product(&st.ghosts.xi)
                .scale(0.5),
        );
    for a in 0..n - 1 {
        let part = chi_parts[a].sub(&lie_parts[a]);
        qc = qc.sub(&rel.interior_base(a).scalar_mul(&part));
    }
    let qlam = chi_parts[n - 1].sub(&lie_parts[n - 1]);
    let qxi: Vec<Field> = (0..n - 1)
        .map(|a| chi_parts[a].sub(&lie_parts[a]).sub(&zz[a].scale(0.5)))
        .collect();

    let (q1e, q1_e_omega, q1e_residual) = extract_q1(st)?;

    Ok(CohomologicalField { q0, qc, qlam, qxi, q1e, q1_e_omega, q1e_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::action::action_value_at;
    use crate::bfv::state::BfvState;
    use crate::bfv::testkit::{fd_state, spectral_state};
    use crate::canonical::{factorial, poisson_bracket, probe_derivative, Multipliers};
    use crate::fields::coframe_power;
    use crate::fields::sample::{random_real_field, TrigProfile};
    use crate::slice::{project_slice_tangent, sigma_of};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The antighost-independent flow against its displayed form, assembled
    /// directly: the coframe leg from bracket/transport/covariant-derivative
    /// terms and the pairing density from the curvature and volume terms.
    #[test]
    fn transversal_sum_matches_displayed_components() {
        let st = spectral_state(1.0, 31);
        let q = cohomological_vf(&st, 1e-9).unwrap();
        let geo = &st.geo;
        let eta = &geo.eta;
        let n = st.n();
        let lam_en = st.lam_en();
        let sigma = sigma_of(&st.omega, geo, 1e-9).unwrap();

        let disp_e = st
            .ghosts
            .c
            .bracket(&geo.e, eta)
            .sub(&covariant_lie(&st.ghosts.xi, &geo.omega0, &geo.e, eta))
            .add(&lam_en.d_omega(&st.omega, eta))
            .add(&sigma.scalar_mul(&st.ghosts.lam).scale((n - 3) as f64));
        let scale_e = q.q0.e.max_abs().max(1.0);
        assert!(q.q0.e.sub(&disp_e).max_abs() <= 1e-12 * scale_e);

        let rel = st.omega.sub(&geo.omega0);
        let f0 = curvature(&geo.omega0, eta);
        let f = curvature(&st.omega, eta);
        let epow = coframe_power(&geo.e, n - 3);
        let mut disp_density = epow.wedge(
            &st.ghosts
                .c
                .d_omega(&st.omega, eta)
                .sub(&covariant_lie(&st.ghosts.xi, &geo.omega0, &rel, eta))
                .sub(&f0.interior_product(&st.ghosts.xi)),
        );
        disp_density = disp_density
            .add(
                &lam_en
                    .wedge(&coframe_power(&geo.e, n - 4))
                    .wedge(&f)
                    .scale((n - 3) as f64),
            )
            .add(
                &lam_en
                    .wedge(&coframe_power(&geo.e, n - 2))
                    .scale(geo.lambda / factorial(n - 2)),
            );
        let scale_w = q.q0.e_omega.max_abs().max(1.0);
        assert!(q.q0.e_omega.sub(&disp_density).max_abs() <= 1e-12 * scale_w);
    }

    /// With only the internal ghost switched on, the ghost flow collapses to
    /// the quadratic bracket term and the coframe flow to the internal
    /// rotation; the antighost-linear flow needs the transversal ghost and
    /// must vanish identically.
    #[test]
    fn flat_configuration_reduces_to_internal_sector() {
        let st = fd_state(1.0, 32, 4);
        let mut ghosts = Multipliers::zero(st.grid());
        ghosts.c = st.ghosts.c.clone();
        let only_c = BfvState::new(
            st.geo.clone(),
            st.omega.clone(),
            ghosts,
            st.anti.clone(),
            st.layout,
            1e-9,
        )
        .unwrap();
        let q = cohomological_vf(&only_c, 1e-9).unwrap();

        let half_cc = only_c.ghosts.c.bracket(&only_c.ghosts.c, &st.geo.eta).scale(0.5);
        assert!(q.qc.sub(&half_cc).max_abs() <= 1e-13 * half_cc.max_abs().max(1.0));
        let rot = only_c.ghosts.c.bracket(&st.geo.e, &st.geo.eta);
        assert!(q.q0.e.sub(&rot).max_abs() <= 1e-13 * rot.max_abs().max(1.0));
        assert!(q.qlam.max_abs() == 0.0);
        assert!(q.qxi.iter().all(|f| f.max_abs() == 0.0));
        assert!(q.q1e.max_abs() == 0.0);
        assert!(q.q1_e_omega.max_abs() == 0.0);
    }

    /// Without the internal ghost the transversal ghost flow is pure
    /// transport, assembled here through the other Cartan composition.
    #[test]
    fn transversal_ghost_flow_is_transport_without_internal_ghost() {
        let st = fd_state(1.0, 33, 4);
        let mut ghosts = st.ghosts.clone();
        ghosts.c = Field::zeros(st.grid(), 0, 2, 1);
        let no_c = BfvState::new(
            st.geo.clone(),
            st.omega.clone(),
            ghosts,
            st.anti.clone(),
            st.layout,
            1e-9,
        )
        .unwrap();
        let q = cohomological_vf(&no_c, 1e-9).unwrap();

        // lam e_n is a base 0-form, so its transport is a single interior
        // contraction of the covariant derivative.
        let lam_en = no_c.lam_en();
        let transported = lam_en
            .d_omega(&st.geo.omega0, &st.geo.eta)
            .interior_product(&no_c.ghosts.xi);
        let parts = frame_components(&st.geo.e, &st.geo.e_n, &transported);
        let expected = parts[st.n() - 1].neg();
        let scale = expected.max_abs().max(1.0);
        assert!(q.qlam.sub(&expected).max_abs() <= 1e-12 * scale);
    }

    /// Monomial ghost numbers: +1 on every component of the flow.
    #[test]
    fn flow_raises_ghost_number_by_one() {
        let st = spectral_state(1.0, 34);
        let q = cohomological_vf(&st, 1e-9).unwrap();
        let homogeneous = |f: &Field, k: i64| {
            f.values()
                .iter()
                .all(|fe| fe.iter().all(|(_, _, g)| st.layout.is_homogeneous(g, k)))
        };
        assert!(homogeneous(&q.q0.e, 1));
        assert!(homogeneous(&q.q0.e_omega, 1));
        assert!(homogeneous(&q.q1e, 1));
        assert!(homogeneous(&q.q1_e_omega, 1));
        assert!(homogeneous(&q.qc, 2));
        assert!(homogeneous(&q.qlam, 2));
        assert!(q.qxi.iter().all(|f| homogeneous(f, 2)));
        assert!(q.q1e.max_abs() > 0.0);
        assert!(q.q1_e_omega.max_abs() > 0.0);
    }

    /// The defining property of the flow on the `(e, omega)` block: its
    /// contraction into the boundary pairing reproduces the exact directional
    /// derivative of the extended action, for random even directions whose
    /// connection leg is tangent to the structural slice (kernel variations
    /// of the connection are fixed by the representative and are not free
    /// directions of the reduced space).
    #[test]
    fn contraction_reproduces_action_variation() {
        let st = spectral_state(1.0, 35);
        let q = cohomological_vf(&st, 1e-9).unwrap();
        let flow = TangentPair {
            e: q.q0.e.add(&q.q1e),
            omega: q.q0.omega.clone(),
            e_omega: q.q0.e_omega.add(&q.q1_e_omega),
            odd: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let prof = TrigProfile::axis(2, 1, 0.7);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let de = random_real_field(st.grid(), 1, 1, &mut rng, &prof);
            let dw = project_slice_tangent(
                &random_real_field(st.grid(), 1, 2, &mut rng, &prof),
                &st.geo,
            )
            .unwrap();
            let dir = TangentPair::from_legs(de, dw, &st.geo, false);
            let lhs = poisson_bracket(&dir, &flow, &st.geo);
            let rhs = probe_derivative(&st.geo, &st.omega, &dir, (20, 21), |e, w| {
                action_value_at(&st, e, w)
            });
            let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
            worst = worst.max(lhs.sub(&rhs).max_abs() / scale);
        }
        assert!(worst <= 1e-6, "worst contraction defect {worst:.3e}");
    }
}
