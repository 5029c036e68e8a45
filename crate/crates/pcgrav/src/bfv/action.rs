use crate::algebra::Grassmann;
use crate::canonical::{odd_vector_lie_bracket, EvalCtx};
use crate::fields::{covariant_lie, curvature, frame_components, Field};
use crate::Result;

use super::state::BfvState;

/// The extended action split by antighost count: `s0` is the three constraint
/// functionals with ghosts as multipliers, `s1` the antighost couplings.
#[derive(Debug, Clone)]
pub struct BfvActionValue {
    pub s0: Grassmann,
    pub s1: Grassmann,
}

impl BfvActionValue {
    pub fn total(&self) -> Grassmann {
        self.s0.add(&self.s1)
    }
}

/// The eight antighost-linear terms of the extended action, in display
/// order, at an arbitrary dynamical pair (the transversal `e_n` and the
/// background connection are not dynamical).
pub(crate) fn s1_terms_at(
    st: &BfvState,
    e: &Field,
    omega: &Field,
) -> Vec<(&'static str, Grassmann)> {
    let geo = &st.geo;
    let eta = &geo.eta;
    let n = st.n();
    let lam_en = st.lam_en();
    let chi = st.ghosts.c.bracket(&lam_en, eta);
    let chi_parts = frame_components(e, &geo.e_n, &chi);
    let lie = covariant_lie(&st.ghosts.xi, &geo.omega0, &lam_en, eta);
    let lie_parts = frame_components(e, &geo.e_n, &lie);
    let rel = omega.sub(&geo.omega0);
    let f0 = curvature(&geo.omega0, eta);
    let iif = f0
        .interior_product(&st.ghosts.xi)
        .interior_product(&st.ghosts.xi);
    let zz = odd_vector_lie_bracket(&st.ghosts.xi, &st.ghosts.xi);

    // xi_dag_a - (omega - omega0)_a c_dag
    let pair: Vec<Field> = (0..n - 1)
        .map(|a| st.anti.xi_dag[a].sub(&rel.interior_base(a).wedge(&st.anti.c_dag)))
        .collect();

    let sum_a = |of: &dyn Fn(usize) -> Grassmann| -> Grassmann {
        (0..n - 1).fold(Grassmann::zero(), |acc, a| acc.add(&of(a)))
    };

    vec![
        (
            "half [c,c] c_dag",
            st.ghosts
                .c
                .bracket(&st.ghosts.c, eta)
                .wedge(&st.anti.c_dag)
                .integrate()
                .scale(0.5),
        ),
        (
            "- lie_xi c c_dag",
            covariant_lie(&st.ghosts.xi, &geo.omega0, &st.ghosts.c, eta)
                .wedge(&st.anti.c_dag)
                .integrate()
                .neg(),
        ),
        (
            "half iota_xi iota_xi F0 c_dag",
            iif.wedge(&st.anti.c_dag).integrate().scale(0.5),
        ),
        (
            "[c, lam e_n]^(a) (xi_dag - rel c_dag)",
            sum_a(&|a| pair[a].scalar_mul(&chi_parts[a]).integrate()),
        ),
        (
            "[c, lam e_n]^(n) lam_dag",
            st.anti.lam_dag.scalar_mul(&chi_parts[n - 1]).integrate(),
        ),
        (
            "- lie_xi(lam e_n)^(a) (xi_dag - rel c_dag)",
            sum_a(&|a| pair[a].scalar_mul(&lie_parts[a]).integrate()).neg(),
        ),
        (
            "- lie_xi(lam e_n)^(n) lam_dag",
            st.anti.lam_dag.scalar_mul(&lie_parts[n - 1]).integrate().neg(),
        ),
        (
            "- half iota_{[xi,xi]} xi_dag",
            sum_a(&|a| st.anti.xi_dag[a].scalar_mul(&zz[a]).integrate()).scale(-0.5),
        ),
    ]
}

pub(crate) fn s1_term_values(st: &BfvState) -> Vec<(&'static str, Grassmann)> {
    s1_terms_at(st, &st.geo.e, &st.omega)
}

/// Full action value at an arbitrary dynamical pair, used by directional
/// derivative checks (the shifted pair need not satisfy the structural
/// condition).
pub(crate) fn action_value_at(st: &BfvState, e: &Field, omega: &Field) -> Grassmann {
    let ctx = EvalCtx::of(&st.geo);
    let s0 = ctx
        .l_value(e, omega, &st.ghosts.c)
        .add(&ctx.p_value(e, omega, &st.ghosts.xi))
        .add(&ctx.h_value(e, omega, &st.ghosts.lam));
    s1_terms_at(st, e, omega)
        .into_iter()
        .fold(s0, |acc, (_, v)| acc.add(&v))
}

/// Evaluates the extended action on a BFV state.
pub fn eval_bfv_action(st: &BfvState) -> Result<BfvActionValue> {
    let ctx = EvalCtx::of(&st.geo);
    let s0 = ctx
        .l_value(&st.geo.e, &st.omega, &st.ghosts.c)
        .add(&ctx.p_value(&st.geo.e, &st.omega, &st.ghosts.xi))
        .add(&ctx.h_value(&st.geo.e, &st.omega, &st.ghosts.lam));
    let s1 = s1_term_values(st)
        .into_iter()
        .fold(Grassmann::zero(), |acc, (_, v)| acc.add(&v));
    Ok(BfvActionValue { s0, s1 })
}

/// Every Grassmann monomial of both action pieces must carry ghost number +1.
pub fn ghost_number_audit(st: &BfvState, v: &BfvActionValue) -> bool {
    st.layout.is_homogeneous(&v.s0, 1) && st.layout.is_homogeneous(&v.s1, 1)
}
